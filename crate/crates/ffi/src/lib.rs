//! C ABI over the cosci toolkit.
//!
//! Datasets and models are opaque handles created and released through this
//! API. Every function returns a [`CosciStatus`]; on failure a message is
//! available from [`cosci_last_error`] on the same thread until the next call.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cosci::cosci::{CosciConfig, CosciModel as Model};
use cosci::dataset::{csv_shape, load_csv, save_csv, MtsDataset};
use cosci::metrics::{aed, awd};
use cosci::toygen::{generate_toy, ToySpec, ToyVariant};
use cosci::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CosciStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Data = 6,
    Config = 7,
    Numeric = 8,
    State = 9,
    Version = 10,
    Corrupt = 11,
    Panic = 12,
}

/// Opaque multivariate time-series dataset.
pub struct CosciDataset(MtsDataset);

/// Opaque trained per-channel model.
pub struct CosciModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CosciStatus {
    match err {
        Error::Io { .. } => CosciStatus::Io,
        Error::Parse { .. } => CosciStatus::Parse,
        Error::Shape(_) => CosciStatus::Shape,
        Error::Data(_) => CosciStatus::Data,
        Error::Config(_) => CosciStatus::Config,
        Error::Numeric(_) => CosciStatus::Numeric,
        Error::State(_) => CosciStatus::State,
        Error::Version { .. } => CosciStatus::Version,
        Error::Corrupt(_) => CosciStatus::Corrupt,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CosciStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CosciStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is a null pointer"));
            CosciStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            CosciStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CosciStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cosci_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Two-channel toy data. `variant`: 0 simple sine, 1 frequency change, 2 anomaly.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_toy(
    variant: u32,
    n_per_type: usize,
    length: usize,
    seed: u64,
    out: *mut *mut CosciDataset,
) -> CosciStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        let variant = *ToyVariant::ALL
            .get(variant as usize)
            .ok_or_else(|| Fail::Arg(format!("unknown toy variant {variant}")))?;
        let (data, _) = generate_toy(&ToySpec {
            variant,
            n_per_type,
            length,
            seed,
            ..ToySpec::default()
        })?;
        *slot = Box::into_raw(Box::new(CosciDataset(data)));
        Ok(())
    })
}

/// Reads a dataset CSV. Pass 0 for `channels` and `length` to take them from the header line.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_load_csv(
    path: *const c_char,
    channels: usize,
    length: usize,
    out: *mut *mut CosciDataset,
) -> CosciStatus {
    guard(|| {
        let path = string(path, "path")?;
        let slot = out_ptr(out, "out")?;
        let (c, l) = match (channels, length) {
            (0, 0) => csv_shape(&path)?
                .ok_or_else(|| Fail::Arg(format!("{path} has no header; pass channels and length")))?,
            shape => shape,
        };
        *slot = Box::into_raw(Box::new(CosciDataset(load_csv(&path, c, l)?)));
        Ok(())
    })
}

/// # Safety
/// `data` must be a live dataset handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_save_csv(data: *const CosciDataset, path: *const c_char) -> CosciStatus {
    guard(|| {
        let d = deref(data, "data")?;
        save_csv(&d.0, string(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `data` must be a live dataset handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_shape(
    data: *const CosciDataset,
    n_instances: *mut usize,
    n_channels: *mut usize,
    length: *mut usize,
) -> CosciStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        *out_ptr(n_instances, "n_instances")? = d.n_instances();
        *out_ptr(n_channels, "n_channels")? = d.n_channels();
        *out_ptr(length, "length")? = d.length();
        Ok(())
    })
}

/// Copies all values (instance-major, then channel, then time) into `buf`,
/// which must hold exactly `N * C * L` doubles.
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_copy_values(data: *const CosciDataset, buf: *mut f64, len: usize) -> CosciStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let values = d.values();
        if len != values.len() {
            return Err(Fail::Arg(format!("buffer holds {len} values, dataset has {}", values.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(values);
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cosci_dataset_free(data: *mut CosciDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Trains a model on `data`. `config_json` may be NULL for the single-core
/// preset; otherwise a JSON configuration whose missing keys take the
/// full-size defaults.
///
/// # Safety
/// `data` must be a live handle, `config_json` NULL or NUL-terminated, `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn cosci_model_train(
    data: *const CosciDataset,
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut CosciModel,
) -> CosciStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        let slot = out_ptr(out, "out")?;
        let mut cfg = if config_json.is_null() {
            CosciConfig::desk()
        } else {
            CosciConfig::from_json_str(&string(config_json, "config_json")?)?
        };
        cfg.seed = seed;
        let mut m = Model::for_data(&cfg, d)?;
        m.train(d)?;
        *slot = Box::into_raw(Box::new(CosciModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn cosci_model_sample(
    model: *const CosciModel,
    n: usize,
    seed: u64,
    out: *mut *mut CosciDataset,
) -> CosciStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let slot = out_ptr(out, "out")?;
        *slot = Box::into_raw(Box::new(CosciDataset(m.sample(n, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cosci_model_save(model: *const CosciModel, path: *const c_char) -> CosciStatus {
    guard(|| {
        deref(model, "model")?.0.save(string(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn cosci_model_load(path: *const c_char, out: *mut *mut CosciModel) -> CosciStatus {
    guard(|| {
        let path = string(path, "path")?;
        let slot = out_ptr(out, "out")?;
        *slot = Box::into_raw(Box::new(CosciModel(Model::load(path)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cosci_model_free(model: *mut CosciModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Average per-channel Wasserstein distance between amplitude distributions.
///
/// # Safety
/// Both handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cosci_awd(real: *const CosciDataset, synthetic: *const CosciDataset, out: *mut f64) -> CosciStatus {
    guard(|| {
        let v = awd(&deref(real, "real")?.0, &deref(synthetic, "synthetic")?.0)?;
        *out_ptr(out, "out")? = v;
        Ok(())
    })
}

/// Mean distance of amplitude pairs to the diagonal (two-channel data only).
///
/// # Safety
/// `data` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cosci_aed(data: *const CosciDataset, out: *mut f64) -> CosciStatus {
    guard(|| {
        let v = aed(&deref(data, "data")?.0)?;
        *out_ptr(out, "out")? = v;
        Ok(())
    })
}
