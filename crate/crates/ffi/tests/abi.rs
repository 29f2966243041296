use std::ffi::{CStr, CString};
use std::ptr;

use loadseg_ffi::*;

fn last_error() -> String {
    let p = ls_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Three well-separated shapes, `per` copies each with small perturbations.
fn rows(per: usize) -> (Vec<f64>, usize, usize) {
    let t = 12;
    let mut v = Vec::new();
    for shape in 0..3 {
        for r in 0..per {
            for s in 0..t {
                let base = if s / 4 == shape { 5.0 + shape as f64 } else { 0.5 };
                v.push(base + 0.01 * ((r * 7 + s) % 5) as f64);
            }
        }
    }
    (v, 3 * per, t)
}

fn profile_set(per: usize) -> *mut LsProfileSet {
    let (v, n, t) = rows(per);
    let mut set = ptr::null_mut();
    assert_eq!(unsafe { ls_profile_set_from_rows(v.as_ptr(), n, t, &mut set) }, LsStatus::Ok);
    set
}

#[test]
fn dtw_matches_core() {
    let p = [1.0, 2.0, 3.0];
    let q = [1.0, 2.0, 2.0, 3.0];
    let mut out = -1.0;
    assert_eq!(unsafe { ls_dtw(p.as_ptr(), 3, q.as_ptr(), 4, -1, &mut out) }, LsStatus::Ok);
    assert_eq!(out, loadseg::distance::dtw(&p, &q, None).unwrap());
    assert_eq!(unsafe { ls_cidtw(p.as_ptr(), 3, q.as_ptr(), 4, 2, &mut out) }, LsStatus::Ok);
    assert_eq!(out, loadseg::distance::cidtw(&p, &q, Some(2)).unwrap());
}

#[test]
fn errors_carry_status_and_message() {
    let p = [1.0, 2.0, 3.0, 4.0];
    let q = [1.0];
    let mut out = 0.0;
    assert_eq!(unsafe { ls_dtw(p.as_ptr(), 4, q.as_ptr(), 1, 1, &mut out) }, LsStatus::Data);
    assert!(last_error().contains("band"));
    assert_eq!(unsafe { ls_dtw(ptr::null(), 0, q.as_ptr(), 1, -1, &mut out) }, LsStatus::NullPointer);
    let mut set = ptr::null_mut();
    let path = CString::new("/definitely/missing.csv").unwrap();
    assert_eq!(unsafe { ls_profile_set_from_csv(path.as_ptr(), 15, false, &mut set) }, LsStatus::Io);
    assert!(set.is_null());
}

#[test]
fn profile_set_roundtrip_from_csv() {
    let dir = tempfile_dir();
    let path = dir.join("meter.csv");
    let mut text = String::from("timestamp,household_id,power_kw\n");
    for h in 0..24 {
        text.push_str(&format!("2016-01-01T{h:02}:00:00,A,{}\n", h as f64 / 10.0));
    }
    std::fs::write(&path, text).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut set = ptr::null_mut();
    assert_eq!(unsafe { ls_profile_set_from_csv(c.as_ptr(), 60, false, &mut set) }, LsStatus::Ok);
    assert_eq!(unsafe { ls_profile_set_len(set) }, 1);
    assert_eq!(unsafe { ls_profile_set_samples_per_day(set) }, 24);
    unsafe { ls_profile_set_free(set) };
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("loadseg-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn two_stage_and_benchmark_through_handles() {
    let set = profile_set(10);
    let config = CString::new(r#"{"k_prime": 6, "k_final": 3, "tau": 0.5, "seed": 1}"#).unwrap();
    let mut two = ptr::null_mut();
    assert_eq!(unsafe { ls_two_stage(set, config.as_ptr(), &mut two) }, LsStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { ls_library_k(two) }, 3);

    let mut labels = vec![usize::MAX; 30];
    assert_eq!(unsafe { ls_library_assignments(two, labels.as_mut_ptr(), 30) }, LsStatus::Ok);
    let (mut id, mut size) = (0, 0);
    let mut total = 0;
    for i in 0..3 {
        assert_eq!(unsafe { ls_library_cluster(two, i, &mut id, &mut size) }, LsStatus::Ok);
        assert_eq!(labels.iter().filter(|&&l| l == id).count(), size);
        total += size;
        let mut centroid = vec![0.0; 12];
        assert_eq!(unsafe { ls_library_centroid(two, i, centroid.as_mut_ptr(), 12) }, LsStatus::Ok);
        assert!(centroid.iter().all(|v| v.is_finite()));
    }
    assert_eq!(total, 30);
    assert_eq!(unsafe { ls_library_cluster(two, 3, &mut id, &mut size) }, LsStatus::InvalidArgument);

    let mut bench = ptr::null_mut();
    assert_eq!(unsafe { ls_benchmark(set, config.as_ptr(), &mut bench) }, LsStatus::Ok);
    let mut wac = 0.0;
    assert_eq!(unsafe { ls_library_wac(set, bench, &mut wac) }, LsStatus::Ok);
    assert!(wac > 0.9 && wac <= 1.0, "{wac}");

    unsafe {
        ls_library_free(two);
        ls_library_free(bench);
        ls_profile_set_free(set);
    }
}

#[test]
fn bad_config_is_an_invalid_argument() {
    let set = profile_set(2);
    let mut lib = ptr::null_mut();
    let config = CString::new(r#"{"k_prime": 3, "k_final": 3}"#).unwrap();
    assert_eq!(unsafe { ls_two_stage(set, config.as_ptr(), &mut lib) }, LsStatus::InvalidArgument);
    let config = CString::new("{not json").unwrap();
    assert_eq!(unsafe { ls_two_stage(set, config.as_ptr(), &mut lib) }, LsStatus::InvalidArgument);
    assert!(lib.is_null());
    unsafe { ls_profile_set_free(set) };
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        ls_profile_set_free(ptr::null_mut());
        ls_library_free(ptr::null_mut());
        assert_eq!(ls_library_k(ptr::null()), 0);
        assert_eq!(ls_profile_set_len(ptr::null()), 0);
    }
    let v = unsafe { CStr::from_ptr(ls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_exported_symbols() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/loadseg.h")).unwrap();
    for sym in [
        "ls_last_error",
        "ls_profile_set_from_csv",
        "ls_profile_set_from_rows",
        "ls_two_stage",
        "ls_benchmark",
        "ls_library_assignments",
        "ls_library_wac",
        "ls_dtw",
        "ls_cidtw",
        "typedef struct LsLibrary LsLibrary",
        "LS_STATUS_NUMERICAL",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/loadseg.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler on PATH; header syntax not checked"),
    }
}
