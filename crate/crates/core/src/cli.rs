//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage or I/O error.

use std::ffi::OsString;
use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{validate_ensemble, xy_plane_settings, AzimuthTable};
use crate::ghzform::{ghz_correlation_closed, ghz_reduced_correlation, FormulaBranch, Parity};
use crate::ineq::{
    bipartite_lhs, evaluate_general, tripartite_ghz_unchecked, BipartiteEvaluation, QuantumCorrelator,
    MAX_VIOLATION,
};
use crate::optim::{grid_scan, maximize_violation, Branch, OptimizeOptions, OptimumReport, DEFAULT_STEPS};
use crate::oracle::{
    identity_check, margin_histogram, product_correlators, random_settings, sample_admissible,
    soundness_run, verify_constraint_chain, CorrelatorSet, HiddenVariableEnsemble, LeggettHiddenVariable,
    SamplerPolicy, SoundnessConfig, ensemble_inequality_report,
};
use crate::qcore::{correlation_bruteforce, ghz_density, reduce_to, SphericalAngles, UnitVector3};
use crate::rng::LabRng;
use crate::geometry::from_spherical;
use crate::tolerance;

/// Largest allowed `|brute force − closed form|` in `correlate`.
pub const CORRELATE_TOLERANCE: f64 = 1e-10;

/// Largest allowed deviation from `2(√5 + 1)` in `optimize --check`.
pub const OPTIMIZE_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "leggett-lab", version, about = "Leggett-type inequalities for GHZ states")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Random seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, env = "LEGGETT_LAB_SEED", value_parser = parse_seed, default_value = "0xC0FFEE")]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Read angle arguments in degrees.
    #[arg(long, global = true)]
    pub degrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare brute-force and closed-form GHZ correlators.
    Correlate(CorrelateArgs),
    /// Evaluate the inequalities on GHZ(N) in the standard arrangement.
    Evaluate(EvaluateArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
    /// Tabulate L± over a (θ, φ, ψ) grid.
    Scan(ScanArgs),
    /// Maximize L± over (θ, φ, ψ).
    Optimize(OptimizeArgs),
    /// Monte Carlo soundness run of the nonlocal-realistic model.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Polar angles, one per party or one for all.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub polar: Vec<f64>,
    /// Azimuthal angles, one per party or one for all.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub azimuth: Vec<f64>,
    /// Draw uniformly random directions from the seed.
    #[arg(long)]
    pub random: bool,
    /// Trace out this party (1-based) and compare the reduced correlator.
    #[arg(long)]
    pub trace: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub psi: f64,
    /// Designated party (1-based); all parties when omitted.
    #[arg(long)]
    pub designated: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest party count exercised.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Inject a fault so the suite must fail.
    #[arg(long)]
    pub selftest_break: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = DEFAULT_STEPS[0])]
    pub theta_steps: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS[1])]
    pub phi_steps: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS[2])]
    pub psi_steps: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub branch: BranchArg,
    /// Hold θ fixed.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Hold φ fixed.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Hold ψ fixed.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Number of best grid cells used as starts.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// Fail unless every maximum is within 1e-6 of 2(√5 + 1).
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
    #[arg(long, default_value_t = 8)]
    pub max_atoms: usize,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub attempts: usize,
    /// Write the histogram summary here (default: stdout after the transcripts).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

fn parse_seed(text: &str) -> std::result::Result<u64, String> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {text:?}: {e}"))
}

/// Destination of the main output.
pub type Sink = dyn Write + Send;

/// Outcome of a subcommand before it is mapped to an exit code.
enum Outcome {
    Pass,
    CheckFailed(String),
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut Sink, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{shown}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{shown}");
                    2
                }
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs.max(1)).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli, stdout)) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::CheckFailed(msg)) => {
            let _ = writeln!(stderr, "FAIL: {msg}");
            1
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut Sink) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Correlate(a) => cmd_correlate(g, a, stdout),
        Command::Evaluate(a) => cmd_evaluate(g, a, stdout),
        Command::Verify(a) => cmd_verify(g, a, stdout),
        Command::Scan(a) => cmd_scan(g, a, stdout),
        Command::Optimize(a) => cmd_optimize(g, a, stdout),
        Command::Oracle(a) => cmd_oracle(g, a, stdout),
    }
}

fn angle(g: &GlobalArgs, value: f64) -> f64 {
    if g.degrees {
        value.to_radians()
    } else {
        value
    }
}

/// Writes `bytes` to `--output` or stdout.
fn emit(path: Option<&Path>, bytes: &[u8], stdout: &mut Sink) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => stdout.write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(header: &str, rows: &[Vec<String>]) -> Vec<u8> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text.into_bytes()
}

fn broadcast(name: &str, values: &[f64], n: usize, default: f64) -> Result<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![default; n]),
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(Error::Invalid(format!("{name} needs 1 or {n} values, got {len}"))),
    }
}

#[derive(Debug, Serialize)]
struct CorrelateReport {
    n: usize,
    traced_party: Option<usize>,
    /// `[polar, azimuth]` per party, radians.
    angles: Vec<[f64; 2]>,
    brute_force: f64,
    closed_form: f64,
    difference: f64,
    parity: Parity,
    formula_branch: FormulaBranch,
}

fn cmd_correlate(g: &GlobalArgs, a: &CorrelateArgs, stdout: &mut Sink) -> Result<Outcome> {
    let n = a.n;
    let rho = ghz_density(n)?;
    let angles: Vec<SphericalAngles> = if a.random {
        let mut rng = LabRng::new(g.seed);
        (0..n)
            .map(|_| {
                let polar = (2.0 * rng.uniform() - 1.0).clamp(-1.0, 1.0).acos();
                SphericalAngles::new(polar, rng.uniform_in(0.0, TAU))
            })
            .collect::<Result<_>>()?
    } else {
        let polar = broadcast("--polar", &a.polar, n, PI / 2.0)?;
        let azimuth = broadcast("--azimuth", &a.azimuth, n, 0.0)?;
        polar
            .iter()
            .zip(&azimuth)
            .map(|(&p, &q)| SphericalAngles::new(angle(g, p), angle(g, q)))
            .collect::<Result<_>>()?
    };
    let dirs: Vec<UnitVector3> = angles.iter().map(|&s| from_spherical(s)).collect();
    let (brute_force, closed_form, branch, traced) = match a.trace {
        None => (
            correlation_bruteforce(&rho, &dirs)?,
            ghz_correlation_closed(&angles)?,
            FormulaBranch::Full,
            None,
        ),
        Some(party) => {
            if party == 0 || party > n {
                return Err(Error::PartyOutOfRange { party, n });
            }
            let keep: Vec<usize> = (0..n).filter(|&p| p != party - 1).collect();
            let kept: Vec<UnitVector3> = keep.iter().map(|&p| dirs[p]).collect();
            (
                correlation_bruteforce(&reduce_to(&rho, &keep)?, &kept)?,
                ghz_reduced_correlation(n, party - 1, &kept)?,
                FormulaBranch::Reduced,
                Some(party),
            )
        }
    };
    let report = CorrelateReport {
        n,
        traced_party: traced,
        angles: angles.iter().map(|s| [s.polar(), s.azimuth()]).collect(),
        brute_force,
        closed_form,
        difference: brute_force - closed_form,
        parity: Parity::of(n),
        formula_branch: branch,
    };
    let bytes = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => csv_bytes(
            "n,brute_force,closed_form,difference",
            &[vec![
                n.to_string(),
                brute_force.to_string(),
                closed_form.to_string(),
                report.difference.to_string(),
            ]],
        ),
    };
    emit(g.output.as_deref(), &bytes, stdout)?;
    if report.difference.abs() > CORRELATE_TOLERANCE {
        return Ok(Outcome::CheckFailed(format!(
            "brute force and closed form differ by {:.3e}",
            report.difference
        )));
    }
    Ok(Outcome::Pass)
}

#[derive(Debug, Serialize)]
struct EvaluateReport {
    n: usize,
    /// 1-based.
    designated_party: usize,
    theta: f64,
    phi: f64,
    psi: f64,
    settings_valid: bool,
    l_plus: f64,
    l_minus: f64,
    closed_l_plus: f64,
    closed_l_minus: f64,
    lhs_general_plus: f64,
    lhs_general_minus: f64,
    bound_general_plus: f64,
    bound_general_minus: f64,
    margin_plus: f64,
    margin_minus: f64,
    max_abs_alpha: f64,
    bipartite: Option<BipartiteEvaluation>,
}

/// Above this the dense quantum correlator gets slow; the GHZ closed form
/// covers larger N through `correlate`.
const EVALUATE_MAX_N: usize = 10;

fn cmd_evaluate(g: &GlobalArgs, a: &EvaluateArgs, stdout: &mut Sink) -> Result<Outcome> {
    let n = a.n;
    if !(2..=EVALUATE_MAX_N).contains(&n) {
        return Err(Error::Capacity {
            what: "parties",
            value: n,
            min: 2,
            max: EVALUATE_MAX_N,
        });
    }
    let (theta, phi, psi) = (angle(g, a.theta), angle(g, a.phi), angle(g, a.psi));
    for (name, v, max) in [("phi", phi, TAU), ("psi", psi, TAU)] {
        if !(0.0..=max).contains(&v) {
            return Err(Error::AngleRange { name, value: v, min: 0.0, max });
        }
    }
    let parties: Vec<usize> = match a.designated {
        Some(i) if i == 0 || i > n => return Err(Error::PartyOutOfRange { party: i, n }),
        Some(i) => vec![i - 1],
        None => (0..n).collect(),
    };
    let corr = QuantumCorrelator::new(ghz_density(n)?)?;
    let table = AzimuthTable::standard_n(n, phi, psi)?;
    let (closed_l_plus, closed_l_minus) = tripartite_ghz_unchecked(theta, phi, psi);
    let mut reports = Vec::new();
    let mut failure = None;
    for i in parties {
        let s = xy_plane_settings(n, i, theta, &table)?;
        let e = evaluate_general(&corr, &s)?;
        let settings_valid = validate_ensemble(&s).passed();
        let r = EvaluateReport {
            n,
            designated_party: i + 1,
            theta,
            phi,
            psi,
            settings_valid,
            l_plus: e.lhs_tight_plus,
            l_minus: e.lhs_tight_minus,
            closed_l_plus,
            closed_l_minus,
            lhs_general_plus: e.lhs_general_plus,
            lhs_general_minus: e.lhs_general_minus,
            bound_general_plus: e.bound_general_plus,
            bound_general_minus: e.bound_general_minus,
            margin_plus: e.margin_tight_plus,
            margin_minus: e.margin_tight_minus,
            max_abs_alpha: e.terms.max_abs_alpha(),
            bipartite: if n == 2 { Some(bipartite_lhs(&corr, &s)?) } else { None },
        };
        let gap = (r.l_plus - closed_l_plus).abs().max((r.l_minus - closed_l_minus).abs());
        if failure.is_none() && (!settings_valid || gap > CORRELATE_TOLERANCE) {
            failure = Some(format!(
                "designated party {}: settings valid = {settings_valid}, closed-form gap {gap:.3e}",
                i + 1
            ));
        }
        reports.push(r);
    }
    let bytes = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&reports)?,
        Format::Csv => csv_bytes(
            "designated_party,theta,phi,psi,L_plus,L_minus,margin_plus,margin_minus",
            &reports
                .iter()
                .map(|r| {
                    vec![
                        r.designated_party.to_string(),
                        r.theta.to_string(),
                        r.phi.to_string(),
                        r.psi.to_string(),
                        r.l_plus.to_string(),
                        r.l_minus.to_string(),
                        r.margin_plus.to_string(),
                        r.margin_minus.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    emit(g.output.as_deref(), &bytes, stdout)?;
    Ok(match failure {
        Some(msg) => Outcome::CheckFailed(msg),
        None => Outcome::Pass,
    })
}

/// One row of the invariant suite.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Largest residual or violation seen (meaning depends on the check).
    pub worst: f64,
}

fn row(name: &'static str, cases: usize, worst: f64, limit: f64) -> InvariantRow {
    InvariantRow {
        name,
        passed: worst <= limit,
        cases,
        worst,
    }
}

/// The invariant suite behind `verify`. `max_n` bounds the party counts;
/// `broken` injects a fault into the closed-form comparison.
pub fn invariant_suite(max_n: usize, trials: usize, seed: u64, broken: bool) -> Result<Vec<InvariantRow>> {
    if !(2..=8).contains(&max_n) {
        return Err(Error::Capacity {
            what: "verify parties",
            value: max_n,
            min: 2,
            max: 8,
        });
    }
    let mut rng = LabRng::new(seed);
    let mut rows = Vec::new();

    let fault = if broken { 1e-6 } else { 0.0 };
    let (mut worst_full, mut worst_reduced, mut cases) = (0.0f64, 0.0f64, 0);
    for n in 2..=max_n {
        let rho = ghz_density(n)?;
        for _ in 0..trials {
            let angles: Vec<SphericalAngles> = (0..n)
                .map(|_| SphericalAngles::new(rng.uniform_in(0.0, PI), rng.uniform_in(0.0, TAU)))
                .collect::<Result<_>>()?;
            let dirs: Vec<UnitVector3> = angles.iter().map(|&s| from_spherical(s)).collect();
            let closed = ghz_correlation_closed(&angles)? + fault;
            worst_full = worst_full.max((closed - correlation_bruteforce(&rho, &dirs)?).abs());
            let traced = rng.int_in(0, n - 1);
            let keep: Vec<usize> = (0..n).filter(|&p| p != traced).collect();
            let kept: Vec<UnitVector3> = keep.iter().map(|&p| dirs[p]).collect();
            let reduced = ghz_reduced_correlation(n, traced, &kept)?;
            worst_reduced = worst_reduced.max((reduced - correlation_bruteforce(&reduce_to(&rho, &keep)?, &kept)?).abs());
            cases += 1;
        }
    }
    rows.push(row("ghz closed form", cases, worst_full, 1e-12));
    rows.push(row("ghz reduced correlators", cases, worst_reduced, 1e-12));

    let id = identity_check();
    rows.push(row("outcome identity", id.cases, id.max_residual, 0.0));

    let (mut round_trip, mut invariants, mut chain, mut ns) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut set_cases = 0;
    for n in 2..=max_n {
        for _ in 0..trials {
            let lambda = LeggettHiddenVariable::random(n, &mut rng)?;
            let dirs: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
            let dirs_primed: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
            let c = sample_admissible(&lambda, &dirs, &mut rng, SamplerPolicy::default())?;
            let cp = sample_admissible(&lambda, &dirs_primed, &mut rng, SamplerPolicy::default())?;
            let back = CorrelatorSet::from_probabilities(n, &c.probabilities())?;
            round_trip = c
                .values()
                .iter()
                .zip(back.values())
                .map(|(x, y)| (x - y).abs())
                .fold(round_trip, f64::max);
            for (set, d) in [(&c, &dirs), (&cp, &dirs_primed)] {
                let inv = set.invariants(&lambda, d)?;
                invariants = invariants
                    .max(inv.malus_residual)
                    .max(-inv.min_probability)
                    .max(inv.normalization_residual);
            }
            for i in 0..n {
                chain = chain.max(verify_constraint_chain(&c, &cp, i)?.max_violation);
            }
            // no-signaling: moving party j leaves every subset without j untouched
            let j = rng.int_in(0, n - 1);
            let mut moved = dirs.clone();
            moved[j] = rng.unit_vector();
            let (p0, p1) = (product_correlators(&lambda, &dirs)?, product_correlators(&lambda, &moved)?);
            for mask in (1usize..1 << n).filter(|m| m >> j & 1 == 0) {
                ns = ns.max((p0.get(mask) - p1.get(mask)).abs());
            }
            set_cases += 1;
        }
    }
    rows.push(row("correlator round trip", set_cases, round_trip, 1e-12));
    rows.push(row("correlator set invariants", set_cases, invariants, tolerance::STATE));
    rows.push(row("constraint chain", set_cases, chain, tolerance::MODEL_SLACK));
    rows.push(row("no-signaling", set_cases, ns, 0.0));

    let mut bad = CorrelatorSet::from_values(3, vec![1.0; 8])?;
    bad.set(0b110, -1.0);
    let ones = CorrelatorSet::from_values(3, vec![1.0; 8])?;
    let flagged = !verify_constraint_chain(&bad, &ones, 0)?.passed();
    rows.push(InvariantRow {
        name: "chain counterexample flagged",
        passed: flagged,
        cases: 1,
        worst: if flagged { 0.0 } else { 1.0 },
    });

    let (mut frame_worst, mut settings_worst, mut sharp_worst) = (f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for t in 0..trials {
        let n = 2 + t % (max_n - 1);
        let s = random_settings(n, &mut rng)?;
        let report = validate_ensemble(&s);
        if !report.passed() {
            settings_worst = settings_worst.max(report.max_residual().max(1.0));
        }
        let u = rng.unit_vector();
        for frame in [s.frame(), s.frame_primed()] {
            frame_worst = frame_worst.max(1.0 - crate::geometry::frame_bound_sum(&u, frame));
        }
        let ens = HiddenVariableEnsemble::random(n, rng.int_in(1, 4), &mut rng)?;
        let check = ensemble_inequality_report(&ens, &s, SamplerPolicy::default(), &mut rng)?;
        sharp_worst = sharp_worst.max(check.sharp_margin);
    }
    rows.push(row("settings validation", trials, settings_worst, 0.0));
    rows.push(row("frame bound", trials, frame_worst, tolerance::MODEL_SLACK));
    rows.push(row("per-atom sharp inequality", trials, sharp_worst, tolerance::MODEL_MARGIN));
    Ok(rows)
}

fn cmd_verify(g: &GlobalArgs, a: &VerifyArgs, stdout: &mut Sink) -> Result<Outcome> {
    let rows = invariant_suite(a.n, a.trials, g.seed, a.selftest_break)?;
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows)?,
        Format::Csv => csv_bytes(
            "invariant,passed,cases,worst",
            &rows
                .iter()
                .map(|r| vec![r.name.to_string(), r.passed.to_string(), r.cases.to_string(), format!("{:e}", r.worst)])
                .collect::<Vec<_>>(),
        ),
    };
    emit(g.output.as_deref(), &bytes, stdout)?;
    Ok(match rows.iter().find(|r| !r.passed) {
        Some(r) => Outcome::CheckFailed(format!("invariant '{}' failed (worst {:e})", r.name, r.worst)),
        None => Outcome::Pass,
    })
}

#[derive(Debug, Serialize)]
struct ScanJson<'a> {
    thetas: &'a [f64],
    phis: &'a [f64],
    psis: &'a [f64],
    l_plus: &'a [f64],
    l_minus: &'a [f64],
}

fn cmd_scan(g: &GlobalArgs, a: &ScanArgs, stdout: &mut Sink) -> Result<Outcome> {
    let grid = grid_scan(a.theta_steps, a.phi_steps, a.psi_steps)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        match g.format.unwrap_or(Format::Csv) {
            Format::Csv => grid.write_csv(w),
            Format::Json => {
                let doc = ScanJson {
                    thetas: &grid.thetas,
                    phis: &grid.phis,
                    psis: &grid.psis,
                    l_plus: &grid.l_plus,
                    l_minus: &grid.l_minus,
                };
                serde_json::to_writer(&mut *w, &doc)?;
                writeln!(w)
            }
        }
    };
    match &g.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
            let (ip, vp) = grid.argmax(Branch::Plus);
            let (im, vm) = grid.argmax(Branch::Minus);
            let summary = serde_json::json!({
                "points": grid.len(),
                "max_L_plus": vp,
                "argmax_plus": grid.point(ip),
                "max_L_minus": vm,
                "argmax_minus": grid.point(im),
            });
            emit(None, &to_json(&summary)?, stdout)?;
        }
        None => write(stdout).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(Outcome::Pass)
}

fn cmd_optimize(g: &GlobalArgs, a: &OptimizeArgs, stdout: &mut Sink) -> Result<Outcome> {
    let branches: &[Branch] = match a.branch {
        BranchArg::Plus => &[Branch::Plus],
        BranchArg::Minus => &[Branch::Minus],
        BranchArg::Both => &[Branch::Plus, Branch::Minus],
    };
    let options = OptimizeOptions {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        fixed: [a.theta, a.phi, a.psi].map(|v| v.map(|x| angle(g, x))),
        grid_starts: a.starts,
        ..OptimizeOptions::default()
    };
    let reports = branches
        .iter()
        .map(|&b| maximize_violation(b, &options))
        .collect::<Result<Vec<OptimumReport>>>()?;
    let bytes = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&reports)?,
        Format::Csv => csv_bytes(
            "branch,theta,phi,psi,value,locus_residual,converged",
            &reports
                .iter()
                .map(|r| {
                    vec![
                        format!("{:?}", r.branch).to_lowercase(),
                        r.theta.to_string(),
                        r.phi.to_string(),
                        r.psi.to_string(),
                        r.value.to_string(),
                        r.locus_residual.to_string(),
                        r.converged.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    emit(g.output.as_deref(), &bytes, stdout)?;
    if a.check {
        if let Some(r) = reports.iter().find(|r| r.deviation_from_max() > OPTIMIZE_CHECK_TOLERANCE) {
            return Ok(Outcome::CheckFailed(format!(
                "{:?} maximum {} deviates from {MAX_VIOLATION} by {:.3e}",
                r.branch,
                r.value,
                r.deviation_from_max()
            )));
        }
    }
    Ok(Outcome::Pass)
}

fn cmd_oracle(g: &GlobalArgs, a: &OracleArgs, stdout: &mut Sink) -> Result<Outcome> {
    if g.format == Some(Format::Csv) {
        return Err(Error::Invalid("oracle transcripts are JSON lines only".into()));
    }
    let config = SoundnessConfig {
        seed: g.seed,
        trials: a.trials,
        parties: [a.n_min, a.n_max],
        max_atoms: a.max_atoms,
        policy: SamplerPolicy {
            delta: a.delta,
            attempts: a.attempts,
        },
    };
    let transcripts = soundness_run(&config)?;
    let mut lines = Vec::new();
    for t in &transcripts {
        serde_json::to_writer(&mut lines, t).map_err(|e| Error::Format(e.to_string()))?;
        lines.push(b'\n');
    }
    let histogram = margin_histogram(&transcripts);
    let summary = to_json(&serde_json::json!({
        "seed": config.seed,
        "config": config,
        "histogram": histogram,
    }))?;
    emit(g.output.as_deref(), &lines, stdout)?;
    match &a.summary {
        Some(path) => emit(Some(path), &summary, stdout)?,
        None => emit(None, &summary, stdout)?,
    }
    Ok(match transcripts.iter().find(|t| t.failure.is_some()) {
        Some(t) => Outcome::CheckFailed(format!(
            "{} of {} trials failed; first: trial {} (N = {}): {}",
            histogram.failures,
            histogram.trials,
            t.trial,
            t.n,
            t.failure.as_deref().unwrap_or_default()
        )),
        None => Outcome::Pass,
    })
}

/// Entry point used by the binary.
pub fn main_exit_code() -> i32 {
    let mut out = BufWriter::new(std::io::stdout());
    let mut err = std::io::stderr();
    let code = run(std::env::args_os(), &mut out, &mut err);
    if out.flush().is_err() {
        return 2;
    }
    code
}
