use std::ffi::{CStr, CString};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use leggett_lab_ffi::*;

const MAX: f64 = 6.472135954999579;

fn last_error() -> String {
    unsafe { CStr::from_ptr(leggett_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn correlators_agree_through_the_abi() {
    let polar = [FRAC_PI_2, 0.4, 2.0, 1.0];
    let azimuth = [0.1, 2.5, -1.0, 4.0];
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(leggett_ghz_correlation(4, polar.as_ptr(), azimuth.as_ptr(), &mut a), LeggettStatus::Ok);
        assert_eq!(leggett_ghz_correlation_bruteforce(4, polar.as_ptr(), azimuth.as_ptr(), &mut b), LeggettStatus::Ok);
    }
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = 0.0;
    let azimuth = [0.0; 3];
    let bad_polar = [4.0, 0.0, 0.0];
    unsafe {
        assert_eq!(leggett_ghz_correlation(3, ptr::null(), azimuth.as_ptr(), &mut out), LeggettStatus::NullPointer);
        assert!(last_error().contains("polar"));
        assert_eq!(
            leggett_ghz_correlation(3, bad_polar.as_ptr(), azimuth.as_ptr(), &mut out),
            LeggettStatus::OutOfRange
        );
        let mut e = ptr::null_mut();
        assert_eq!(leggett_ensemble_standard(3, 4, 1.0, 0.0, 0.0, &mut e), LeggettStatus::OutOfRange);
        assert!(e.is_null());
        let bad = CString::new("{not json").unwrap();
        assert_eq!(leggett_ensemble_from_json(bad.as_ptr(), &mut e), LeggettStatus::InvalidArgument);
        let mut s = ptr::null_mut();
        assert_eq!(leggett_scan_new(1, 4, 4, &mut s), LeggettStatus::OutOfRange);
    }
}

#[test]
fn closed_form_and_locus() {
    let (mut lp, mut lm, mut psi) = (0.0, 0.0, 0.0);
    let theta = PI - 2.0 * 2f64.atan();
    unsafe {
        assert_eq!(leggett_optimal_locus(LeggettBranch::Plus, 0.4, &mut psi), LeggettStatus::Ok);
        assert_eq!(leggett_tripartite_closed(theta, 0.4, psi, &mut lp, &mut lm), LeggettStatus::Ok);
    }
    assert!((lp - MAX).abs() < 1e-12);
    assert!((leggett_max_violation() - MAX).abs() < 1e-15);
}

#[test]
fn ensemble_handle_lifecycle() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(leggett_ensemble_standard(4, 2, 1.3, 0.5, 1.5, &mut e), LeggettStatus::Ok);
        let mut n = 0;
        assert_eq!(leggett_ensemble_parties(e, &mut n), LeggettStatus::Ok);
        assert_eq!(n, 4);
        let (mut passed, mut residual) = (0, 1.0);
        assert_eq!(leggett_ensemble_validate(e, &mut passed, &mut residual), LeggettStatus::Ok);
        assert_eq!(passed, 1);
        let mut ev = LeggettEvaluation::default();
        assert_eq!(leggett_ensemble_evaluate_ghz(e, &mut ev), LeggettStatus::Ok);
        assert!(ev.max_abs_alpha < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(leggett_ensemble_to_json(e, &mut json), LeggettStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(leggett_ensemble_from_json(json, &mut back), LeggettStatus::Ok);
        let mut ev2 = LeggettEvaluation::default();
        assert_eq!(leggett_ensemble_evaluate_ghz(back, &mut ev2), LeggettStatus::Ok);
        assert_eq!(ev.l_plus.to_bits(), ev2.l_plus.to_bits());
        leggett_string_free(json);
        leggett_ensemble_free(back);
        leggett_ensemble_free(e);
        leggett_ensemble_free(ptr::null_mut());
    }
}

#[test]
fn scan_handle_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(leggett_scan_new(19, 12, 12, &mut s), LeggettStatus::Ok);
        let mut len = 0;
        assert_eq!(leggett_scan_len(s, &mut len), LeggettStatus::Ok);
        assert_eq!(len, 19 * 12 * 12);
        let mut idx = 0;
        assert_eq!(leggett_scan_argmax(s, LeggettBranch::Minus, &mut idx), LeggettStatus::Ok);
        let mut p = LeggettScanPoint::default();
        assert_eq!(leggett_scan_point(s, idx, &mut p), LeggettStatus::Ok);
        assert!(p.l_minus > 6.0 && p.l_minus <= MAX + 1e-12);
        assert_eq!(leggett_scan_point(s, len, &mut p), LeggettStatus::InvalidArgument);
        assert_eq!(leggett_scan_write_csv(s, cpath.as_ptr()), LeggettStatus::Ok);
        let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
        assert_eq!(leggett_scan_write_csv(s, missing.as_ptr()), LeggettStatus::Io);
        leggett_scan_free(s);
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2 + 19 * 12 * 12);
}

#[test]
fn maximize_reaches_the_bound() {
    let mut o = LeggettOptimum::default();
    unsafe {
        assert_eq!(leggett_maximize(LeggettBranch::Minus, 1e-9, &mut o), LeggettStatus::Ok);
    }
    assert!((o.value - MAX).abs() < 1e-9);
    assert!((o.theta - 2.0 * 2f64.atan()).abs() < 1e-6);
}

#[test]
fn oracle_with_single_atoms_passes() {
    let mut summary = LeggettOracleSummary::default();
    unsafe {
        assert_eq!(leggett_oracle_run(7, 50, 2, 4, 1, &mut summary), LeggettStatus::Ok);
    }
    assert_eq!((summary.trials, summary.failures), (50, 0));
    assert!(summary.max_margin <= 0.0);
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_static_library() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // `cargo test` links the rlib only; the static archive needs its own build.
    let profile = target_dir().file_name().unwrap().to_string_lossy().into_owned();
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "--lib", "-p", "leggett-lab-ffi", "--manifest-path"]).arg(root.join("Cargo.toml"));
    if profile == "release" {
        build.arg("--release");
    }
    assert!(build.status().expect("cargo").success());
    let lib = target_dir().join("libleggett_lab_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
