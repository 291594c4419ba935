use std::ffi::{CStr, CString};
use std::ptr;

use cosci_ffi::*;

fn last_error() -> String {
    let p = cosci_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy(n_per_type: usize, length: usize) -> *mut CosciDataset {
    let mut d = ptr::null_mut();
    let st = unsafe { cosci_dataset_toy(0, n_per_type, length, 7, &mut d) };
    assert_eq!(st, CosciStatus::Ok);
    d
}

fn shape(d: *const CosciDataset) -> (usize, usize, usize) {
    let (mut n, mut c, mut l) = (0, 0, 0);
    assert_eq!(unsafe { cosci_dataset_shape(d, &mut n, &mut c, &mut l) }, CosciStatus::Ok);
    (n, c, l)
}

fn values(d: *const CosciDataset) -> Vec<f64> {
    let (n, c, l) = shape(d);
    let mut buf = vec![0.0; n * c * l];
    assert_eq!(
        unsafe { cosci_dataset_copy_values(d, buf.as_mut_ptr(), buf.len()) },
        CosciStatus::Ok
    );
    buf
}

#[test]
fn toy_dataset_shape_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("toy.csv").to_str().unwrap()).unwrap();
    let d = toy(4, 50);
    assert_eq!(shape(d), (8, 2, 50));
    assert_eq!(unsafe { cosci_dataset_save_csv(d, path.as_ptr()) }, CosciStatus::Ok);

    let mut back = ptr::null_mut();
    assert_eq!(unsafe { cosci_dataset_load_csv(path.as_ptr(), 0, 0, &mut back) }, CosciStatus::Ok);
    assert_eq!(values(d), values(back));
    assert!(cosci_last_error().is_null());
    unsafe {
        cosci_dataset_free(d);
        cosci_dataset_free(back);
    }
}

#[test]
fn train_sample_save_load_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("model.json").to_str().unwrap()).unwrap();
    let cfg = CString::new(r#"{"nepochs": 1, "LSTMG": false, "batch_size": 4, "g_hidden": 4, "d_hidden": 4, "cd_hidden": 4}"#).unwrap();
    let d = toy(4, 16);

    let mut m = ptr::null_mut();
    let st = unsafe { cosci_model_train(d, cfg.as_ptr(), 3, &mut m) };
    assert_eq!(st, CosciStatus::Ok, "{}", if st == CosciStatus::Ok { String::new() } else { last_error() });
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cosci_model_sample(m, 5, 11, &mut s) }, CosciStatus::Ok);
    assert_eq!(shape(s), (5, 2, 16));

    assert_eq!(unsafe { cosci_model_save(m, path.as_ptr()) }, CosciStatus::Ok);
    let mut m2 = ptr::null_mut();
    assert_eq!(unsafe { cosci_model_load(path.as_ptr(), &mut m2) }, CosciStatus::Ok);
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { cosci_model_sample(m2, 5, 11, &mut s2) }, CosciStatus::Ok);
    assert_eq!(values(s), values(s2));

    let (mut w, mut e) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { cosci_awd(d, s, &mut w) }, CosciStatus::Ok);
    assert_eq!(unsafe { cosci_aed(s, &mut e) }, CosciStatus::Ok);
    assert!(w.is_finite() && w >= 0.0);
    assert!(e.is_finite() && e >= 0.0);

    let mut self_w = f64::NAN;
    assert_eq!(unsafe { cosci_awd(d, d, &mut self_w) }, CosciStatus::Ok);
    assert_eq!(self_w, 0.0);

    unsafe {
        cosci_dataset_free(d);
        cosci_dataset_free(s);
        cosci_dataset_free(s2);
        cosci_model_free(m);
        cosci_model_free(m2);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { cosci_dataset_toy(9, 4, 16, 0, &mut d) }, CosciStatus::InvalidArgument);
    assert!(last_error().contains("variant"));
    assert!(d.is_null());

    assert_eq!(unsafe { cosci_dataset_toy(0, 4, 16, 0, ptr::null_mut()) }, CosciStatus::NullPointer);
    assert!(last_error().contains("out"));

    let missing = CString::new("/nonexistent/dir/x.csv").unwrap();
    assert_eq!(unsafe { cosci_dataset_load_csv(missing.as_ptr(), 2, 10, &mut d) }, CosciStatus::Io);
    assert!(!last_error().is_empty());

    let d = toy(2, 8);
    let mut small = [0.0; 3];
    assert_eq!(
        unsafe { cosci_dataset_copy_values(d, small.as_mut_ptr(), small.len()) },
        CosciStatus::InvalidArgument
    );
    let bad = CString::new(r#"{"no_such_key": 1}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cosci_model_train(d, bad.as_ptr(), 0, &mut m) }, CosciStatus::Config);
    assert!(last_error().contains("no_such_key"));

    let mut ok = 0.0;
    assert_eq!(unsafe { cosci_aed(d, &mut ok) }, CosciStatus::Ok);
    assert!(cosci_last_error().is_null());

    unsafe {
        cosci_dataset_free(d);
        cosci_dataset_free(ptr::null_mut());
        cosci_model_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cosci.h")).unwrap();
    for sym in [
        "COSCI_H",
        "typedef struct CosciDataset CosciDataset",
        "typedef struct CosciModel CosciModel",
        "COSCI_STATUS_OK = 0",
        "COSCI_STATUS_PANIC",
        "cosci_last_error",
        "cosci_dataset_toy",
        "cosci_dataset_load_csv",
        "cosci_dataset_save_csv",
        "cosci_dataset_shape",
        "cosci_dataset_copy_values",
        "cosci_dataset_free",
        "cosci_model_train",
        "cosci_model_sample",
        "cosci_model_save",
        "cosci_model_load",
        "cosci_model_free",
        "cosci_awd",
        "cosci_aed",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
