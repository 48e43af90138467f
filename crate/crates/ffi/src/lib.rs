//! C ABI for `leggett-lab`.
//!
//! Every function returns a [`LeggettStatus`]; on failure the message is
//! available from [`leggett_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Party indices
//! are 1-based, as on the command line.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use leggett_lab::geometry::{self, fig1_settings, validate_ensemble, xy_plane_settings, AzimuthTable, SettingsEnsemble};
use leggett_lab::ghzform::ghz_correlation_closed;
use leggett_lab::ineq::{evaluate_general, tripartite_ghz_closed, InequalityAngles, QuantumCorrelator};
use leggett_lab::optim::{grid_scan, maximize_violation, optimal_locus, Branch, OptimizeOptions, ScanGrid};
use leggett_lab::oracle::{margin_histogram, soundness_run, SamplerPolicy, SoundnessConfig};
use leggett_lab::qcore::{correlation_bruteforce, ghz_density, SphericalAngles};
use leggett_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeggettStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Precondition = 4,
    Numeric = 5,
    Soundness = 6,
    Io = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeggettBranch {
    Plus = 0,
    Minus = 1,
}

impl From<LeggettBranch> for Branch {
    fn from(b: LeggettBranch) -> Self {
        match b {
            LeggettBranch::Plus => Branch::Plus,
            LeggettBranch::Minus => Branch::Minus,
        }
    }
}

/// Opaque settings ensemble.
pub struct LeggettEnsemble(SettingsEnsemble);

/// Opaque `(θ, φ, ψ)` scan.
pub struct LeggettScan(ScanGrid);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LeggettEvaluation {
    pub l_plus: f64,
    pub l_minus: f64,
    pub lhs_general_plus: f64,
    pub lhs_general_minus: f64,
    pub bound_general_plus: f64,
    pub bound_general_minus: f64,
    pub margin_plus: f64,
    pub margin_minus: f64,
    pub max_abs_alpha: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LeggettOptimum {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub value: f64,
    pub locus_residual: f64,
    /// 0 when the iteration limit was reached first.
    pub converged: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LeggettScanPoint {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub l_plus: f64,
    pub l_minus: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LeggettOracleSummary {
    pub trials: usize,
    pub failures: usize,
    pub positive_margins: usize,
    pub max_margin: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(e: &Error) -> LeggettStatus {
    match e {
        Error::AngleRange { .. } | Error::Capacity { .. } | Error::PartyOutOfRange { .. } => LeggettStatus::OutOfRange,
        Error::Precondition(_) | Error::CorrelatorContract { .. } => LeggettStatus::Precondition,
        Error::ImaginaryResidue { .. } => LeggettStatus::Numeric,
        Error::Soundness(_) => LeggettStatus::Soundness,
        Error::Io { .. } => LeggettStatus::Io,
        _ => LeggettStatus::InvalidArgument,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LeggettStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LeggettStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            LeggettStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(msg);
            LeggettStatus::InvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LeggettStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn leggett_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn leggett_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `2(√5 + 1)`.
#[no_mangle]
pub extern "C" fn leggett_max_violation() -> f64 {
    leggett_lab::ineq::MAX_VIOLATION
}

fn angles_from(polar: &[f64], azimuth: &[f64]) -> Result<Vec<SphericalAngles>, Failure> {
    Ok(polar
        .iter()
        .zip(azimuth)
        .map(|(&p, &a)| SphericalAngles::new(p, a))
        .collect::<leggett_lab::Result<_>>()?)
}

/// Closed-form GHZ correlator for `n` parties with polar and azimuthal angles.
#[no_mangle]
pub unsafe extern "C" fn leggett_ghz_correlation(
    n: usize,
    polar: *const f64,
    azimuth: *const f64,
    out: *mut f64,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let angles = angles_from(in_slice(polar, n, "polar")?, in_slice(azimuth, n, "azimuth")?)?;
        *out = ghz_correlation_closed(&angles)?;
        Ok(())
    })
}

/// Same correlator by explicit trace against the GHZ density matrix.
#[no_mangle]
pub unsafe extern "C" fn leggett_ghz_correlation_bruteforce(
    n: usize,
    polar: *const f64,
    azimuth: *const f64,
    out: *mut f64,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let angles = angles_from(in_slice(polar, n, "polar")?, in_slice(azimuth, n, "azimuth")?)?;
        let dirs: Vec<_> = angles.into_iter().map(geometry::from_spherical).collect();
        *out = correlation_bruteforce(&ghz_density(n)?, &dirs)?;
        Ok(())
    })
}

/// Closed-form tripartite `L+` and `L−`.
#[no_mangle]
pub unsafe extern "C" fn leggett_tripartite_closed(
    theta: f64,
    phi: f64,
    psi: f64,
    l_plus: *mut f64,
    l_minus: *mut f64,
) -> LeggettStatus {
    guard(|| {
        let lp = out_ref(l_plus, "l_plus")?;
        let lm = out_ref(l_minus, "l_minus")?;
        (*lp, *lm) = tripartite_ghz_closed(&InequalityAngles::new(theta, phi, psi)?);
        Ok(())
    })
}

/// `ψ` on the maximizing locus for `φ`.
#[no_mangle]
pub unsafe extern "C" fn leggett_optimal_locus(branch: LeggettBranch, phi: f64, psi: *mut f64) -> LeggettStatus {
    guard(|| {
        *out_ref(psi, "psi")? = optimal_locus(branch.into(), phi)?;
        Ok(())
    })
}

/// Multi-start maximization of `L±` with default grid seeding.
#[no_mangle]
pub unsafe extern "C" fn leggett_maximize(
    branch: LeggettBranch,
    tolerance: f64,
    out: *mut LeggettOptimum,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let options = OptimizeOptions {
            tolerance,
            ..OptimizeOptions::default()
        };
        let r = maximize_violation(branch.into(), &options)?;
        *out = LeggettOptimum {
            theta: r.theta,
            phi: r.phi,
            psi: r.psi,
            value: r.value,
            locus_residual: r.locus_residual,
            converged: r.converged as i32,
        };
        Ok(())
    })
}

/// Standard tripartite arrangement, party 1 designated.
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_fig1(
    theta: f64,
    phi: f64,
    psi: f64,
    out: *mut *mut LeggettEnsemble,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(LeggettEnsemble(fig1_settings(theta, phi, psi)?)));
        Ok(())
    })
}

/// Standard arrangement for `n` parties with a 1-based designated party.
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_standard(
    n: usize,
    designated: usize,
    theta: f64,
    phi: f64,
    psi: f64,
    out: *mut *mut LeggettEnsemble,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if designated == 0 || designated > n {
            return Err(Error::PartyOutOfRange { party: designated, n }.into());
        }
        let table = AzimuthTable::standard_n(n, phi, psi)?;
        let s = xy_plane_settings(n, designated - 1, theta, &table)?;
        *out = Box::into_raw(Box::new(LeggettEnsemble(s)));
        Ok(())
    })
}

/// Parses the JSON form produced by [`leggett_ensemble_to_json`].
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_from_json(
    json: *const c_char,
    out: *mut *mut LeggettEnsemble,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::Arg(format!("json is not UTF-8: {e}")))?;
        *out = Box::into_raw(Box::new(LeggettEnsemble(SettingsEnsemble::from_json(text)?)));
        Ok(())
    })
}

/// JSON text of an ensemble; release with [`leggett_string_free`].
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_to_json(
    ensemble: *const LeggettEnsemble,
    out: *mut *mut c_char,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let e = in_ref(ensemble, "ensemble")?;
        let text = CString::new(e.0.to_json()).map_err(|e| Failure::Arg(e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_parties(ensemble: *const LeggettEnsemble, out: *mut usize) -> LeggettStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(ensemble, "ensemble")?.0.parties();
        Ok(())
    })
}

/// Frame and pair-angle checks; `passed` is 1 or 0.
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_validate(
    ensemble: *const LeggettEnsemble,
    passed: *mut i32,
    max_residual: *mut f64,
) -> LeggettStatus {
    guard(|| {
        let passed = out_ref(passed, "passed")?;
        let max_residual = out_ref(max_residual, "max_residual")?;
        let report = validate_ensemble(&in_ref(ensemble, "ensemble")?.0);
        *passed = report.passed() as i32;
        *max_residual = report.max_residual();
        Ok(())
    })
}

/// Evaluates the inequalities with quantum GHZ correlators (explicit trace).
#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_evaluate_ghz(
    ensemble: *const LeggettEnsemble,
    out: *mut LeggettEvaluation,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = &in_ref(ensemble, "ensemble")?.0;
        let corr = QuantumCorrelator::new(ghz_density(s.parties())?)?;
        let e = evaluate_general(&corr, s)?;
        *out = LeggettEvaluation {
            l_plus: e.lhs_tight_plus,
            l_minus: e.lhs_tight_minus,
            lhs_general_plus: e.lhs_general_plus,
            lhs_general_minus: e.lhs_general_minus,
            bound_general_plus: e.bound_general_plus,
            bound_general_minus: e.bound_general_minus,
            margin_plus: e.margin_tight_plus,
            margin_minus: e.margin_tight_minus,
            max_abs_alpha: e.terms.max_abs_alpha(),
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn leggett_ensemble_free(ensemble: *mut LeggettEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

#[no_mangle]
pub unsafe extern "C" fn leggett_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Grid scan over θ ∈ [0, π], φ, ψ ∈ [0, 2π].
#[no_mangle]
pub unsafe extern "C" fn leggett_scan_new(
    theta_steps: usize,
    phi_steps: usize,
    psi_steps: usize,
    out: *mut *mut LeggettScan,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(LeggettScan(grid_scan(theta_steps, phi_steps, psi_steps)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn leggett_scan_len(scan: *const LeggettScan, out: *mut usize) -> LeggettStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(scan, "scan")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn leggett_scan_point(
    scan: *const LeggettScan,
    index: usize,
    out: *mut LeggettScanPoint,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = &in_ref(scan, "scan")?.0;
        if index >= g.len() {
            return Err(Failure::Arg(format!("index {index} out of range for {} points", g.len())));
        }
        let [theta, phi, psi] = g.point(index);
        *out = LeggettScanPoint {
            theta,
            phi,
            psi,
            l_plus: g.l_plus[index],
            l_minus: g.l_minus[index],
        };
        Ok(())
    })
}

/// Index of the largest value on `branch`.
#[no_mangle]
pub unsafe extern "C" fn leggett_scan_argmax(
    scan: *const LeggettScan,
    branch: LeggettBranch,
    index: *mut usize,
) -> LeggettStatus {
    guard(|| {
        *out_ref(index, "index")? = in_ref(scan, "scan")?.0.argmax(branch.into()).0;
        Ok(())
    })
}

/// Writes the versioned CSV to `path`.
#[no_mangle]
pub unsafe extern "C" fn leggett_scan_write_csv(scan: *const LeggettScan, path: *const c_char) -> LeggettStatus {
    guard(|| {
        let g = &in_ref(scan, "scan")?.0;
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure::Arg(format!("path is not UTF-8: {e}")))?;
        let io = |e: std::io::Error| Error::Io {
            path: path.to_string(),
            message: e.to_string(),
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        g.write_csv(&mut w).and_then(|_| std::io::Write::flush(&mut w)).map_err(io)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn leggett_scan_free(scan: *mut LeggettScan) {
    if !scan.is_null() {
        drop(Box::from_raw(scan));
    }
}

/// Monte Carlo soundness run of the nonlocal-realistic model with the
/// default sampler. Returns `Soundness` if any trial failed; `out` is
/// filled either way.
#[no_mangle]
pub unsafe extern "C" fn leggett_oracle_run(
    seed: u64,
    trials: usize,
    n_min: usize,
    n_max: usize,
    max_atoms: usize,
    out: *mut LeggettOracleSummary,
) -> LeggettStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = SoundnessConfig {
            seed,
            trials,
            parties: [n_min, n_max],
            max_atoms,
            policy: SamplerPolicy::default(),
        };
        let h = margin_histogram(&soundness_run(&config)?);
        *out = LeggettOracleSummary {
            trials: h.trials,
            failures: h.failures,
            positive_margins: h.positive_margins,
            max_margin: h.max_margin,
        };
        if h.failures > 0 {
            return Err(Error::Soundness(format!("{} of {} trials failed", h.failures, h.trials)).into());
        }
        Ok(())
    })
}
