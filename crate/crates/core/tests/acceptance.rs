//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use leggett_lab::geometry::{fig1_settings, frame_bound_sum, from_spherical};
use leggett_lab::ghzform::{ghz_correlation_closed, ghz_reduced_correlation};
use leggett_lab::ineq::{evaluate_tight, tripartite_ghz_closed, InequalityAngles, QuantumCorrelator};
use leggett_lab::optim::{linspace, maximize_violation, optimal_locus, scan_values, Branch, OptimizeOptions};
use leggett_lab::oracle::{
    identity_check, random_settings, sample_admissible, soundness_run, verify_constraint_chain, CorrelatorSet,
    LeggettHiddenVariable, SamplerPolicy, SoundnessConfig,
};
use leggett_lab::qcore::{correlation_bruteforce, ghz_density, reduce_to, SphericalAngles, UnitVector3};
use leggett_lab::rng::{LabRng, DEFAULT_SEED};

const CLOSED_FORM_TOL: f64 = 1e-12;
const CLOSED_FORM_LIMIT: Duration = Duration::from_secs(60);
const MAX_VALUE_TOL: f64 = 1e-9;
const ARGMAX_TOL: f64 = 1e-6;
const OPTIMIZE_LIMIT: Duration = Duration::from_secs(30);
const BOUNDARY_TOL: f64 = 1e-12;
const UBIQUITY_LIMIT: Duration = Duration::from_secs(60);
const MODEL_MARGIN_TOL: f64 = 1e-10;
const SOUNDNESS_TRIALS: usize = 10_000;
const SOUNDNESS_LIMIT: Duration = Duration::from_secs(120);
const CHAIN_TOL: f64 = 1e-12;
const FRAME_TOL: f64 = 1e-12;
const TIGHT_TOL: f64 = 1e-12;
const LOCUS_TOL: f64 = 1e-12;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Reference values computed directly, independent of the library constants.
fn two_root5_plus_2() -> f64 {
    2.0 * (5f64.sqrt() + 1.0)
}

fn atan2_of_2() -> f64 {
    2f64.atan()
}

fn closed_form_fidelity() -> Verdict {
    let start = Instant::now();
    let mut rng = LabRng::new(DEFAULT_SEED);
    let (mut worst_full, mut worst_reduced) = (0.0f64, 0.0f64);
    for n in 2..=6 {
        let rho = ghz_density(n).unwrap();
        for _ in 0..1000 {
            let angles: Vec<SphericalAngles> = (0..n)
                .map(|_| SphericalAngles::new(rng.uniform_in(0.0, PI), rng.uniform_in(0.0, TAU)).unwrap())
                .collect();
            let dirs: Vec<UnitVector3> = angles.iter().map(|&a| from_spherical(a)).collect();
            let brute = correlation_bruteforce(&rho, &dirs).unwrap();
            worst_full = worst_full.max((ghz_correlation_closed(&angles).unwrap() - brute).abs());
            let traced = rng.int_in(0, n - 1);
            let keep: Vec<usize> = (0..n).filter(|&p| p != traced).collect();
            let kept: Vec<UnitVector3> = keep.iter().map(|&p| dirs[p]).collect();
            let reduced_brute = correlation_bruteforce(&reduce_to(&rho, &keep).unwrap(), &kept).unwrap();
            let reduced = ghz_reduced_correlation(n, traced, &kept).unwrap();
            worst_reduced = worst_reduced.max((reduced - reduced_brute).abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst_full <= CLOSED_FORM_TOL && worst_reduced <= CLOSED_FORM_TOL && elapsed <= CLOSED_FORM_LIMIT,
        format!(
            "max |closed − brute| full {worst_full:.2e}, reduced {worst_reduced:.2e} (tol {CLOSED_FORM_TOL:.0e}); {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn maximal_violation() -> Verdict {
    let start = Instant::now();
    let expected = two_root5_plus_2();
    let mut ok = true;
    let mut parts = Vec::new();
    for (branch, theta_star) in [(Branch::Plus, PI - 2.0 * atan2_of_2()), (Branch::Minus, 2.0 * atan2_of_2())] {
        let r = maximize_violation(branch, &OptimizeOptions::default()).unwrap();
        let dv = (r.value - expected).abs();
        let dt = (r.theta - theta_star).abs();
        ok &= dv <= MAX_VALUE_TOL && dt <= ARGMAX_TOL;
        parts.push(format!("{branch:?}: value {:.13} (Δ {dv:.1e}), θ* {:.9} (Δ {dt:.1e})", r.value, r.theta));
    }
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed <= OPTIMIZE_LIMIT,
        format!("{}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()),
    )
}

fn boundary_non_violation() -> Verdict {
    let grid = linspace(0.0, TAU, 720);
    let scan = scan_values(vec![0.0, PI], grid.clone(), grid);
    let max_plus = scan.l_plus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_minus = scan.l_minus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        max_plus <= 6.0 + BOUNDARY_TOL && max_minus <= 6.0 + BOUNDARY_TOL,
        format!("θ ∈ {{0, π}}, 720×720 (φ, ψ): max L+ = {max_plus}, max L− = {max_minus}"),
    )
}

fn interior_ubiquity() -> Verdict {
    let start = Instant::now();
    let thetas: Vec<f64> = (1..=50).map(|j| PI * j as f64 / 51.0).collect();
    let phis = linspace(0.0, TAU, 50);
    let psis = linspace(0.0, TAU, 720);
    let mut missing = Vec::new();
    let mut smallest_best = f64::INFINITY;
    for &t in &thetas {
        for &p in &phis {
            let best = psis
                .iter()
                .map(|&q| {
                    let (lp, lm) = tripartite_ghz_closed(&InequalityAngles::new(t, p, q).unwrap());
                    lp.max(lm)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            smallest_best = smallest_best.min(best);
            if best <= 6.0 {
                missing.push((t, p));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        missing.is_empty() && elapsed <= UBIQUITY_LIMIT,
        format!(
            "50 θ × 50 φ cells, {} without a violating ψ; smallest best max(L+, L−) = {smallest_best:.6}; {:.1}s",
            missing.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn model_soundness() -> Verdict {
    let start = Instant::now();
    let config = SoundnessConfig {
        seed: DEFAULT_SEED,
        trials: SOUNDNESS_TRIALS,
        parties: [2, 5],
        max_atoms: 8,
        policy: SamplerPolicy::default(),
    };
    let transcripts = soundness_run(&config).unwrap();
    let elapsed = start.elapsed();
    let count = |f: &dyn Fn(&leggett_lab::oracle::TrialMargins) -> f64| {
        transcripts.iter().filter(|t| f(&t.margins) > MODEL_MARGIN_TOL).count()
    };
    let worst = |f: &dyn Fn(&leggett_lab::oracle::TrialMargins) -> f64| {
        transcripts.iter().map(|t| f(&t.margins)).fold(f64::NEG_INFINITY, f64::max)
    };
    let intermediate = |m: &leggett_lab::oracle::TrialMargins| m.intermediate_plus.max(m.intermediate_minus);
    let final_ = |m: &leggett_lab::oracle::TrialMargins| m.final_plus.max(m.final_minus);
    let failures = transcripts.iter().filter(|t| t.failure.is_some()).count();
    verdict(
        failures == 0 && elapsed <= SOUNDNESS_LIMIT,
        format!(
            "{} trials, N ∈ 2..=5: {failures} failing; intermediate > tol in {} (max {:.3e}), final > tol in {} (max {:.3e}), \
             per-atom sharp max {:.3e}, integrated per-atom max {:.3e}; {:.1}s",
            transcripts.len(),
            count(&intermediate),
            worst(&intermediate),
            count(&final_),
            worst(&final_),
            worst(&|m| m.sharp),
            worst(&|m| m.integrated_sharp),
            elapsed.as_secs_f64()
        ),
    )
}

fn derivation_chain() -> Verdict {
    let id = identity_check();

    let mut rng = LabRng::new(DEFAULT_SEED ^ 6);
    let mut chain_worst = f64::NEG_INFINITY;
    let mut sets = 0;
    for n in 3..=5 {
        for _ in 0..3000 {
            let lambda = LeggettHiddenVariable::random(n, &mut rng).unwrap();
            let dirs: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
            let dirs_primed: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
            let c = sample_admissible(&lambda, &dirs, &mut rng, SamplerPolicy::default()).unwrap();
            let cp = sample_admissible(&lambda, &dirs_primed, &mut rng, SamplerPolicy::default()).unwrap();
            for i in 0..n {
                chain_worst = chain_worst.max(verify_constraint_chain(&c, &cp, i).unwrap().max_violation);
            }
            sets += 2;
        }
    }

    // C^1 = 1, C^{23} = −1, C^{123} = +1 (other entries 1)
    let mut bad = CorrelatorSet::from_values(3, vec![1.0; 8]).unwrap();
    bad.set(0b110, -1.0);
    let ones = CorrelatorSet::from_values(3, vec![1.0; 8]).unwrap();
    let flagged = !verify_constraint_chain(&bad, &ones, 0).unwrap().passed();

    let mut frame_min = f64::INFINITY;
    for _ in 0..20 {
        let s = random_settings(3, &mut rng).unwrap();
        for _ in 0..5000 {
            let u = rng.unit_vector();
            frame_min = frame_min
                .min(frame_bound_sum(&u, s.frame()))
                .min(frame_bound_sum(&u, s.frame_primed()));
        }
    }
    let fig1 = fig1_settings(1.0, 0.0, 0.0).unwrap();
    let aligned = frame_bound_sum(&fig1.frame()[0], fig1.frame());

    verdict(
        id.passed() && chain_worst <= CHAIN_TOL && flagged && frame_min >= 1.0 - FRAME_TOL,
        format!(
            "identity: {} cases, residual {}; chain over {sets} sampled sets: max excess {chain_worst:.3e}; \
             counterexample flagged: {flagged}; frame bound min Σ|u·e_k| over 10^5 u = {frame_min:.6} (aligned: {aligned})",
            id.cases, id.max_residual
        ),
    )
}

fn tight_cross_check() -> Verdict {
    let corr = QuantumCorrelator::new(ghz_density(3).unwrap()).unwrap();
    let thetas = linspace(0.0, PI, 50);
    let angles = linspace(0.0, TAU, 50);
    let mut worst = 0.0f64;
    for &t in &thetas {
        for &p in &angles {
            for &q in &angles {
                let (lp, lm) = evaluate_tight(&corr, &fig1_settings(t, p, q).unwrap()).unwrap();
                let (cp, cm) = tripartite_ghz_closed(&InequalityAngles::new(t, p, q).unwrap());
                worst = worst.max((lp - cp).abs()).max((lm - cm).abs());
            }
        }
    }
    verdict(
        worst <= TIGHT_TOL,
        format!("50³ grid, max |L(trace) − L(closed form)| = {worst:.2e} (tol {TIGHT_TOL:.0e})"),
    )
}

fn locus_check() -> Verdict {
    let expected = two_root5_plus_2();
    let mut rng = LabRng::new(DEFAULT_SEED ^ 8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let phi = rng.uniform_in(0.0, TAU);
        for (branch, theta) in [(Branch::Plus, PI - 2.0 * atan2_of_2()), (Branch::Minus, 2.0 * atan2_of_2())] {
            let psi = optimal_locus(branch, phi).unwrap();
            let (lp, lm) = tripartite_ghz_closed(&InequalityAngles::new(theta, phi, psi).unwrap());
            let l = if branch == Branch::Plus { lp } else { lm };
            worst = worst.max((l - expected).abs());
        }
    }
    verdict(
        worst <= LOCUS_TOL,
        format!("100 random φ × 2 branches, max |L − 2(√5+1)| = {worst:.2e}"),
    )
}

fn run_cli(dir: &Path, tag: &str, args: &[&str]) -> (Option<i32>, Vec<u8>, Vec<u8>) {
    let out_path = dir.join(format!("{tag}.out"));
    let output = Command::new(env!("CARGO_BIN_EXE_leggett-lab"))
        .args(args)
        .arg("--output")
        .arg(&out_path)
        .env_remove("LEGGETT_LAB_SEED")
        .output()
        .expect("binary runs");
    let file = std::fs::read(&out_path).unwrap_or_default();
    (output.status.code(), output.stdout, file)
}

fn reproducibility() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let commands: [(&str, &[&str]); 6] = [
        ("correlate", &["correlate", "--n", "5", "--random", "--seed", "99"]),
        ("evaluate", &["evaluate", "--n", "4", "--theta", "0.9", "--phi", "1.1", "--psi", "2.0"]),
        ("verify", &["verify", "--n", "4", "--trials", "200"]),
        ("scan", &["scan", "--theta-steps", "19", "--phi-steps", "12", "--psi-steps", "12"]),
        ("optimize", &["optimize", "--branch", "both"]),
        ("oracle", &["oracle", "--trials", "300", "--seed", "42"]),
    ];
    let mut mismatched = Vec::new();
    for (name, args) in commands {
        let a = run_cli(dir.path(), &format!("{name}-a"), args);
        let b = run_cli(dir.path(), &format!("{name}-b"), args);
        if a != b || a.2.is_empty() {
            mismatched.push(name);
        }
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "correlate, evaluate, verify, scan, optimize, oracle: byte-identical files, stdout and exit codes".into()
        } else {
            format!("differing or empty outputs: {}", mismatched.join(", "))
        },
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("closed-form fidelity", closed_form_fidelity),
        ("maximal violation", maximal_violation),
        ("boundary non-violation", boundary_non_violation),
        ("interior ubiquity", interior_ubiquity),
        ("model soundness", model_soundness),
        ("derivation-chain checks", derivation_chain),
        ("closed-form L± cross-check", tight_cross_check),
        ("optimal-locus check", locus_check),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = match std::panic::catch_unwind(check) {
            Ok(v) => v,
            Err(_) => verdict(false, "panicked".into()),
        };
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {}: {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
