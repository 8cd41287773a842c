use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use nphkit::aft::{aft_fit, AftFamily};
use nphkit::cox::cox_fit;
use nphkit::logrank::{maxcombo, weighted_logrank, FhWeight};
use nphkit::rmst::rmst_difference_test;
use nphkit::sim::{builtin_scenario, simulate_trial};
use nphkit_ffi::*;

fn last_error() -> String {
    let p = nph_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulated(name: &str, seed: u64) -> *mut NphDataset {
    let name = CString::new(name).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { nph_simulate_trial(name.as_ptr(), seed, &mut ds) }, NphStatus::Ok);
    assert!(!ds.is_null());
    ds
}

#[test]
fn results_match_the_library() {
    let data = simulate_trial(&builtin_scenario("inovate").unwrap(), 4);
    let ds = simulated("inovate", 4);
    unsafe {
        let mut n = 0;
        assert_eq!(nph_dataset_len(ds, &mut n), NphStatus::Ok);
        assert_eq!(n, data.len());

        let mut r = NphTestResult::default();
        assert_eq!(nph_weighted_logrank(ds, 0.0, 0.0, &mut r), NphStatus::Ok);
        let lr = weighted_logrank(&data, FhWeight::LOGRANK).unwrap();
        assert_eq!((r.statistic, r.p_value), (lr.z, lr.p_two_sided));

        assert_eq!(nph_maxcombo(ds, 0, &mut r), NphStatus::Ok);
        assert_eq!(r.p_value, maxcombo(&data).unwrap().p_two_sided);

        let mut rm = NphRmstResult::default();
        assert_eq!(nph_rmst_difference(ds, &mut rm), NphStatus::Ok);
        assert_eq!(rm.delta, rmst_difference_test(&data).unwrap().delta);

        let mut cx = NphCoxResult::default();
        assert_eq!(nph_cox_fit(ds, &mut cx), NphStatus::Ok);
        let c = cox_fit(&data).unwrap();
        assert_eq!((cx.beta, cx.hazard_ratio, cx.converged), (c.beta, c.beta.exp(), 1));

        let mut fit = ptr::null_mut();
        assert_eq!(nph_aft_fit(ds, NphAftFamily::GeneralizedGamma, &mut fit), NphStatus::Ok);
        let mut s = NphAftSummary::default();
        assert_eq!(nph_aft_fit_summary(fit, &mut s), NphStatus::Ok);
        let g = aft_fit(&data, AftFamily::Gg).unwrap();
        assert_eq!((s.beta1, s.sigma), (g.beta1, g.sigma));
        assert!(s.shape2.is_nan());
        assert_eq!(s.acceleration_factor, (-g.beta1).exp());
        let mut surv = 0.0;
        assert_eq!(nph_aft_fit_survival(fit, 1, 10.0, &mut surv), NphStatus::Ok);
        assert!(surv > 0.0 && surv < 1.0);
        assert_eq!(nph_aft_fit_survival(fit, 2, 10.0, &mut surv), NphStatus::InvalidInput);
        nph_aft_fit_free(fit);
        nph_dataset_free(ds);
    }
}

#[test]
fn dataset_from_arrays() {
    let times = [1.0, 2.0, 3.0, 4.0];
    let events = [1u8, 0, 1, 1];
    let arms = [0u8, 0, 1, 1];
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(nph_dataset_new(times.as_ptr(), events.as_ptr(), arms.as_ptr(), 4, &mut ds), NphStatus::Ok);
        let mut r = NphTestResult::default();
        assert_eq!(nph_weighted_logrank(ds, 1.0, 0.0, &mut r), NphStatus::Ok);
        assert!((0.0..=1.0).contains(&r.p_value));
        nph_dataset_free(ds);

        let bad = [0u8, 0, 1, 3];
        assert_eq!(nph_dataset_new(times.as_ptr(), events.as_ptr(), bad.as_ptr(), 4, &mut ds), NphStatus::InvalidInput);
        assert!(ds.is_null());
        assert!(last_error().contains("arm"));

        let neg = [-1.0, 2.0, 3.0, 4.0];
        assert_eq!(nph_dataset_new(neg.as_ptr(), events.as_ptr(), arms.as_ptr(), 4, &mut ds), NphStatus::InvalidInput);
        assert_eq!(nph_dataset_new(ptr::null(), ptr::null(), ptr::null(), 0, &mut ds), NphStatus::Ok);
        assert_eq!(nph_weighted_logrank(ds, 0.0, 0.0, &mut r), NphStatus::EmptyDataset);
        nph_dataset_free(ds);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut r = NphTestResult::default();
        assert_eq!(nph_weighted_logrank(ptr::null(), 0.0, 0.0, &mut r), NphStatus::NullPointer);
        let ds = simulated("null", 1);
        assert_eq!(nph_weighted_logrank(ds, 0.0, 0.0, ptr::null_mut()), NphStatus::NullPointer);
        assert_eq!(nph_weighted_logrank(ds, -1.0, 0.0, &mut r), NphStatus::InvalidInput);
        assert!(!last_error().is_empty());
        // A success clears the message.
        assert_eq!(nph_weighted_logrank(ds, 0.0, 0.0, &mut r), NphStatus::Ok);
        assert!(nph_last_error_message().is_null());
        nph_dataset_free(ds);
        nph_dataset_free(ptr::null_mut());
        nph_aft_fit_free(ptr::null_mut());

        let name = CString::new("nope").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(nph_simulate_trial(name.as_ptr(), 1, &mut out), NphStatus::UnknownScenario);
        assert!(last_error().contains("nope"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time,event,arm\n1,1,0\n2,2,1\n").unwrap();
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(nph_dataset_read_csv(cpath.as_ptr(), &mut out), NphStatus::MalformedCsv);
        assert!(last_error().contains("line 3"));
        let missing = CString::new(dir.path().join("missing.csv").to_str().unwrap()).unwrap();
        assert_eq!(nph_dataset_read_csv(missing.as_ptr(), &mut out), NphStatus::Io);
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let data = simulate_trial(&builtin_scenario("first").unwrap(), 2);
    data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(nph_dataset_read_csv(cpath.as_ptr(), &mut ds), NphStatus::Ok);
        let mut n = 0;
        nph_dataset_len(ds, &mut n);
        assert_eq!(n, data.len());
        nph_dataset_free(ds);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nph_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/nphkit.h")).unwrap();
    for name in [
        "nph_dataset_new",
        "nph_dataset_read_csv",
        "nph_dataset_free",
        "nph_simulate_trial",
        "nph_weighted_logrank",
        "nph_maxcombo",
        "nph_rmst_difference",
        "nph_cox_fit",
        "nph_aft_fit",
        "nph_aft_fit_summary",
        "nph_aft_fit_survival",
        "nph_aft_fit_free",
        "nph_last_error_message",
        "typedef struct NphDataset NphDataset",
        "NPH_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Static library next to the test binary's `deps` directory.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libnphkit_ffi.a");
    lib.exists().then_some(lib)
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    let (Some(lib), true) = (static_lib(), have_cc()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = crate_dir().join("tests/c/smoke.c");
    let include = crate_dir().join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(Path::new(&exe)).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let data = simulate_trial(&builtin_scenario("inovate").unwrap(), 11);
    let lr = weighted_logrank(&data, FhWeight::LOGRANK).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0].parse::<usize>().unwrap(), data.len());
    assert_eq!(fields[1].parse::<f64>().unwrap(), lr.p_two_sided);
}
