use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::MtsDataset;
use crate::error::{Error, Result};

/// First token of the optional header line.
pub const HEADER_TAG: &str = "cosci-mts v1";

struct Header {
    channels: usize,
    length: usize,
    labeled: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut channels = None;
    let mut length = None;
    let mut labeled = None;
    for part in line.split(';').skip(1) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse {
                row: 0,
                message: format!("bad header field {part:?}"),
            })?;
        let value = value.trim();
        let bad = |_| Error::Parse {
            row: 0,
            message: format!("bad header value {value:?}"),
        };
        match key.trim() {
            "channels" => channels = Some(value.parse().map_err(bad)?),
            "length" => length = Some(value.parse().map_err(bad)?),
            "labeled" => labeled = Some(value.parse::<u8>().map_err(bad)? == 1),
            other => {
                return Err(Error::Parse {
                    row: 0,
                    message: format!("unknown header key {other:?}"),
                })
            }
        }
    }
    match (channels, length, labeled) {
        (Some(channels), Some(length), Some(labeled)) => Ok(Header {
            channels,
            length,
            labeled,
        }),
        _ => Err(Error::Parse {
            row: 0,
            message: "header needs channels, length and labeled".into(),
        }),
    }
}

/// Reads an `N x (C*L)` CSV (plus a trailing label column when the header says so).
///
/// Row indices in errors count data rows from zero, header excluded.
pub fn load_csv(path: impl AsRef<Path>, n_channels: usize, length: usize) -> Result<MtsDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();

    let mut labeled = false;
    if let Some(first) = lines.peek() {
        if first.trim_start().starts_with(HEADER_TAG) {
            let header = parse_header(first)?;
            if header.channels != n_channels || header.length != length {
                return Err(Error::Shape(format!(
                    "header declares {}x{}, caller expects {n_channels}x{length}",
                    header.channels, header.length
                )));
            }
            labeled = header.labeled;
            lines.next();
        }
    }

    let width = n_channels * length;
    let expected_fields = width + usize::from(labeled);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected_fields {
            return Err(Error::Shape(format!(
                "row {row} has {} fields, expected {expected_fields}",
                fields.len()
            )));
        }
        for (col, f) in fields[..width].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {col}: {f:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {row}, column {col} is {f}")));
            }
            values.push(v);
        }
        if labeled {
            let raw = fields[width];
            let label = match raw {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::Parse {
                        row,
                        message: format!("label {raw:?} is not 0 or 1"),
                    })
                }
            };
            labels.push(label);
        }
        n += 1;
    }
    MtsDataset::new(n, n_channels, length, values, labeled.then_some(labels))
}

/// Writes the dataset with a header line; floats use shortest round-trip formatting.
pub fn save_csv(dataset: &MtsDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{HEADER_TAG}; channels={}; length={}; labeled={}",
        dataset.n_channels(),
        dataset.length(),
        u8::from(dataset.is_labeled())
    );
    for i in 0..dataset.n_instances() {
        for (k, v) in dataset.instance(i).iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:?}");
        }
        if let Some(l) = dataset.label(i) {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Shape declared by the file's header line, if it has one.
pub fn csv_shape(path: impl AsRef<Path>) -> Result<Option<(usize, usize)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match text.lines().find(|l| !l.trim().is_empty()) {
        Some(first) if first.trim_start().starts_with(HEADER_TAG) => {
            let h = parse_header(first)?;
            Ok(Some((h.channels, h.length)))
        }
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "0,1,2,3\n").unwrap();
        let d = load_csv(&p, 2, 2).unwrap();
        assert_eq!(d.series(0, 0), &[0.0, 1.0]);
        assert_eq!(d.series(0, 1), &[2.0, 3.0]);
        assert!(!d.is_labeled());
    }

    #[test]
    fn empty_file_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "").unwrap();
        assert!(matches!(load_csv(&p, 1, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "0,1\n0,x\n").unwrap();
        match load_csv(&p, 1, 2) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "0,1\n0,1,2\n").unwrap();
        assert!(matches!(load_csv(&p, 1, 2), Err(Error::Shape(_))));
        fs::write(&p, "0,NaN\n").unwrap();
        assert!(matches!(load_csv(&p, 1, 2), Err(Error::Data(_))));
    }

    #[test]
    fn body_formatting() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let d = MtsDataset::new(1, 1, 2, vec![5.0, -1.5], None).unwrap();
        save_csv(&d, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let body: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(body, ["5.0,-1.5"]);
        assert!(text.starts_with("cosci-mts v1; channels=1; length=2; labeled=0"));
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        let d = MtsDataset::new(3, 1, 2, vec![0.5; 6], Some(vec![1, 0, 1])).unwrap();
        save_csv(&d, &p).unwrap();
        let back = load_csv(&p, 1, 2).unwrap();
        assert_eq!(back.labels(), Some(&[1u8, 0, 1][..]));
    }

    #[test]
    fn header_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let d = MtsDataset::new(1, 1, 2, vec![1.0, 2.0], None).unwrap();
        save_csv(&d, &p).unwrap();
        assert!(matches!(load_csv(&p, 2, 1), Err(Error::Shape(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn save_load_identity(
            (n, c, l, values) in (1usize..9, 1usize..6, 2usize..101).prop_flat_map(|(n, c, l)| {
                (Just(n), Just(c), Just(l), proptest::collection::vec(-1e6f64..1e6, n * c * l))
            })
        ) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.csv");
            let d = MtsDataset::new(n, c, l, values, None).unwrap();
            save_csv(&d, &p).unwrap();
            let back = load_csv(&p, c, l).unwrap();
            prop_assert_eq!(back.n_instances(), n);
            for (a, b) in d.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
