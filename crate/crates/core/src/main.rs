use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = cosci::cli::Cli::parse();
    match cosci::cli::run(&cli) {
        Ok(manifest) => {
            println!("{}: {} artifacts in {}", manifest.command, manifest.artifacts.len(), cli.global.out.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cosci::cli::exit_code(&e));
        }
    }
}
