//! Leggett-type inequality evaluation.
//!
//! Every evaluator takes the correlator as an injected [`Correlator`], so the
//! same code serves the brute-force quantum trace, the GHZ closed forms and
//! the hidden-variable model.
//!
//! With `β_k = C(X_k) + C(X_k')` and `(α±)_k` the `(N−1)`-party correlators of
//! the non-designated parties combined with `±`, the general pair reads
//!
//! ```text
//! Σ_k min(|(α+)_k − β_k|, |(α+)_k + β_k|) ≤ 6 − 2|cos(θ/2)|
//! Σ_k min(|(α−)_k − β_k|, |(α−)_k + β_k|) ≤ 6 − 2|sin(θ/2)|
//! ```
//!
//! and when `(α±)_k = 0` it tightens to `L± = Σ_k|β_k| + 2|cos|, 2|sin| ≤ 6`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SettingsEnsemble;
use crate::ghzform::{ghz_correlation_vectors, ghz_subset_correlation};
use crate::qcore::{correlation_bruteforce, reduce_to, DensityMatrix, UnitVector3};
use crate::tolerance;

/// `θ₀ = arctan 2`.
pub const THETA_0: f64 = 1.107_148_717_794_090_4;

/// `2(√5 + 1)`, the largest tripartite GHZ value of `L±`.
pub const MAX_VIOLATION: f64 = 6.472_135_954_999_58;

/// Bound on `L±` shared by every nonlocal-realistic model.
pub const TIGHT_BOUND: f64 = 6.0;

/// Expectation of the product of outcomes of a subset of parties.
pub trait Correlator: Sync {
    /// `parties` is an ascending list of 0-based indices and `dirs[j]` is the
    /// setting of `parties[j]`.
    fn correlate(&self, parties: &[usize], dirs: &[UnitVector3]) -> Result<f64>;
}

impl<F> Correlator for F
where
    F: Fn(&[usize], &[UnitVector3]) -> f64 + Sync,
{
    fn correlate(&self, parties: &[usize], dirs: &[UnitVector3]) -> Result<f64> {
        Ok(self(parties, dirs))
    }
}

/// Quantum prediction by explicit trace against a density matrix.
#[derive(Debug, Clone)]
pub struct QuantumCorrelator {
    rho: DensityMatrix,
    reduced: HashMap<Vec<usize>, DensityMatrix>,
}

impl QuantumCorrelator {
    /// Precomputes every single-party-traced reduced state.
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        let n = rho.qubits();
        let mut reduced = HashMap::new();
        if n >= 2 {
            for traced in 0..n {
                let keep: Vec<usize> = (0..n).filter(|&p| p != traced).collect();
                let r = reduce_to(&rho, &keep)?;
                reduced.insert(keep, r);
            }
        }
        Ok(QuantumCorrelator { rho, reduced })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }
}

impl Correlator for QuantumCorrelator {
    fn correlate(&self, parties: &[usize], dirs: &[UnitVector3]) -> Result<f64> {
        if parties.len() == self.rho.qubits() {
            return correlation_bruteforce(&self.rho, dirs);
        }
        match self.reduced.get(parties) {
            Some(r) => correlation_bruteforce(r, dirs),
            None => correlation_bruteforce(&reduce_to(&self.rho, parties)?, dirs),
        }
    }
}

/// GHZ prediction from the closed forms.
#[derive(Debug, Clone, Copy)]
pub struct GhzClosedCorrelator {
    pub parties: usize,
}

impl Correlator for GhzClosedCorrelator {
    fn correlate(&self, parties: &[usize], dirs: &[UnitVector3]) -> Result<f64> {
        if parties.len() == self.parties {
            ghz_correlation_vectors(dirs)
        } else {
            ghz_subset_correlation(self.parties, dirs)
        }
    }
}

/// All correlators zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroCorrelator;

impl Correlator for ZeroCorrelator {
    fn correlate(&self, _: &[usize], _: &[UnitVector3]) -> Result<f64> {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityTerms {
    pub beta: [f64; 3],
    pub alpha_plus: [f64; 3],
    pub alpha_minus: [f64; 3],
}

impl InequalityTerms {
    pub fn sum_abs_beta(&self) -> f64 {
        self.beta.iter().map(|b| b.abs()).sum()
    }

    pub fn max_abs_alpha(&self) -> f64 {
        self.alpha_plus
            .iter()
            .chain(&self.alpha_minus)
            .map(|a| a.abs())
            .fold(0.0, f64::max)
    }
}

/// `min(|α − β|, |α + β|)`, which equals `||α| − |β||`.
pub fn min_form(alpha: f64, beta: f64) -> f64 {
    (alpha - beta).abs().min((alpha + beta).abs())
}

/// Everything computed for one ensemble under one correlator. Margins are
/// `LHS − bound`; positive means violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityEvaluation {
    pub terms: InequalityTerms,
    pub theta: f64,
    pub lhs_general_plus: f64,
    pub lhs_general_minus: f64,
    pub bound_general_plus: f64,
    pub bound_general_minus: f64,
    pub lhs_tight_plus: f64,
    pub lhs_tight_minus: f64,
    pub margin_general_plus: f64,
    pub margin_general_minus: f64,
    pub margin_tight_plus: f64,
    pub margin_tight_minus: f64,
}

impl InequalityEvaluation {
    pub fn from_terms(terms: InequalityTerms, theta: f64) -> Self {
        let (half_sin, half_cos) = (theta / 2.0).sin_cos();
        let lhs_general_plus = (0..3).map(|k| min_form(terms.alpha_plus[k], terms.beta[k])).sum();
        let lhs_general_minus = (0..3).map(|k| min_form(terms.alpha_minus[k], terms.beta[k])).sum();
        let bound_general_plus = 6.0 - 2.0 * half_cos.abs();
        let bound_general_minus = 6.0 - 2.0 * half_sin.abs();
        let sum_beta = terms.sum_abs_beta();
        let lhs_tight_plus = sum_beta + 2.0 * half_cos.abs();
        let lhs_tight_minus = sum_beta + 2.0 * half_sin.abs();
        InequalityEvaluation {
            terms,
            theta,
            lhs_general_plus,
            lhs_general_minus,
            bound_general_plus,
            bound_general_minus,
            lhs_tight_plus,
            lhs_tight_minus,
            margin_general_plus: lhs_general_plus - bound_general_plus,
            margin_general_minus: lhs_general_minus - bound_general_minus,
            margin_tight_plus: lhs_tight_plus - TIGHT_BOUND,
            margin_tight_minus: lhs_tight_minus - TIGHT_BOUND,
        }
    }

    pub fn violates_general_plus(&self) -> bool {
        self.margin_general_plus > tolerance::VIOLATION
    }

    pub fn violates_general_minus(&self) -> bool {
        self.margin_general_minus > tolerance::VIOLATION
    }

    pub fn violates_tight_plus(&self) -> bool {
        self.margin_tight_plus > tolerance::VIOLATION
    }

    pub fn violates_tight_minus(&self) -> bool {
        self.margin_tight_minus > tolerance::VIOLATION
    }
}

fn checked(value: f64) -> Result<f64> {
    if !value.is_finite() || value.abs() > 1.0 + tolerance::CORRELATOR_CONTRACT {
        return Err(Error::CorrelatorContract { value });
    }
    Ok(value)
}

fn pick(tuple: &[UnitVector3], parties: &[usize]) -> Vec<UnitVector3> {
    parties.iter().map(|&p| tuple[p]).collect()
}

/// Computes `β_k`, `(α±)_k` for every k.
pub fn inequality_terms(corr: &dyn Correlator, s: &SettingsEnsemble) -> Result<InequalityTerms> {
    let all: Vec<usize> = (0..s.parties()).collect();
    let others = s.others();
    let mut terms = InequalityTerms {
        beta: [0.0; 3],
        alpha_plus: [0.0; 3],
        alpha_minus: [0.0; 3],
    };
    for k in 0..3 {
        let full = checked(corr.correlate(&all, s.tuple(k))?)?;
        let full_primed = checked(corr.correlate(&all, s.tuple_primed(k))?)?;
        let rest = checked(corr.correlate(&others, &pick(s.tuple(k), &others))?)?;
        let rest_primed = checked(corr.correlate(&others, &pick(s.tuple_primed(k), &others))?)?;
        terms.beta[k] = full + full_primed;
        terms.alpha_plus[k] = rest + rest_primed;
        terms.alpha_minus[k] = rest - rest_primed;
    }
    Ok(terms)
}

/// Both general min-form inequalities plus the tight values and all margins.
pub fn evaluate_general(corr: &dyn Correlator, s: &SettingsEnsemble) -> Result<InequalityEvaluation> {
    Ok(InequalityEvaluation::from_terms(inequality_terms(corr, s)?, s.theta()))
}

/// `(L+, L−)`; requires `(α±)_k = 0` under `corr`.
pub fn evaluate_tight(corr: &dyn Correlator, s: &SettingsEnsemble) -> Result<(f64, f64)> {
    let terms = inequality_terms(corr, s)?;
    let worst = terms.max_abs_alpha();
    if worst > tolerance::ALPHA_ZERO {
        return Err(Error::Precondition(format!(
            "tight inequalities need (α±)_k = 0, max |α| = {worst:.3e}"
        )));
    }
    let e = InequalityEvaluation::from_terms(terms, s.theta());
    Ok((e.lhs_tight_plus, e.lhs_tight_minus))
}

/// Angles of the tripartite closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityAngles {
    theta: f64,
    phi: f64,
    psi: f64,
}

impl InequalityAngles {
    pub fn new(theta: f64, phi: f64, psi: f64) -> Result<Self> {
        let range = |name, value: f64, max| {
            if (0.0..=max).contains(&value) {
                Ok(())
            } else {
                Err(Error::AngleRange { name, value, min: 0.0, max })
            }
        };
        range("theta", theta, PI)?;
        range("phi", phi, TAU)?;
        range("psi", psi, TAU)?;
        Ok(InequalityAngles { theta, phi, psi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn theta_0(&self) -> f64 {
        THETA_0
    }
}

/// Closed-form tripartite GHZ values
/// `L+ = 2√5 sin(θ₀ + θ/2) + 2|cos((θ+φ+ψ)/2)|`,
/// `L− = 2√5 cos(θ₀ − θ/2) + 2|cos((θ+φ+ψ)/2)|`.
pub fn tripartite_ghz_closed(a: &InequalityAngles) -> (f64, f64) {
    tripartite_ghz_unchecked(a.theta, a.phi, a.psi)
}

/// [`tripartite_ghz_closed`] without range validation, for optimizers.
pub fn tripartite_ghz_unchecked(theta: f64, phi: f64, psi: f64) -> (f64, f64) {
    let amp = 2.0 * 5f64.sqrt();
    let shared = 2.0 * ((theta + phi + psi) / 2.0).cos().abs();
    (
        amp * (THETA_0 + theta / 2.0).sin() + shared,
        amp * (THETA_0 - theta / 2.0).cos() + shared,
    )
}

/// Bell-state pair for N = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BipartiteEvaluation {
    /// `(1/3) Σ_k |C(n_k, m_k) + C(n_k', m_k')|`
    pub lhs: f64,
    /// `2 − (2/3)|sin(θ/2)|`
    pub bound_sin: f64,
    /// `2 − (2/3)|cos(θ/2)|`
    pub bound_cos: f64,
}

pub fn bipartite_lhs(corr: &dyn Correlator, s: &SettingsEnsemble) -> Result<BipartiteEvaluation> {
    if s.parties() != 2 {
        return Err(Error::Invalid(format!("bipartite form needs N = 2, got {}", s.parties())));
    }
    let all = [0usize, 1];
    let mut total = 0.0;
    for k in 0..3 {
        let c = checked(corr.correlate(&all, s.tuple(k))?)?;
        let cp = checked(corr.correlate(&all, s.tuple_primed(k))?)?;
        total += (c + cp).abs();
    }
    let (half_sin, half_cos) = (s.theta() / 2.0).sin_cos();
    Ok(BipartiteEvaluation {
        lhs: total / 3.0,
        bound_sin: 2.0 - 2.0 / 3.0 * half_sin.abs(),
        bound_cos: 2.0 - 2.0 / 3.0 * half_cos.abs(),
    })
}

/// LHS of `Σ_k |C(X_k) + C(X_k^{(i)'}, rest_k)| + 2|sin(θ/2)| ≤ 6`, the
/// `(α−)_k = 0` case obtained when the other parties share settings.
pub fn priorwork_reduction(corr: &dyn Correlator, s: &SettingsEnsemble) -> Result<f64> {
    if !s.others_share_settings() {
        return Err(Error::Precondition(
            "non-designated parties must use identical primed and unprimed settings".into(),
        ));
    }
    let all: Vec<usize> = (0..s.parties()).collect();
    let mut total = 0.0;
    for k in 0..3 {
        let c = checked(corr.correlate(&all, s.tuple(k))?)?;
        let cp = checked(corr.correlate(&all, s.tuple_primed(k))?)?;
        total += (c + cp).abs();
    }
    Ok(total + 2.0 * (s.theta() / 2.0).sin().abs())
}

/// Even-N GHZ specialization: the `(N−1)`-party correlators vanish, so both
/// general inequalities read `Σ_k|β_k| ≤ 6 − 2|cos|, 6 − 2|sin|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvenGhzForm {
    pub sum_abs_beta: f64,
    pub bound_plus: f64,
    pub bound_minus: f64,
}

pub fn even_ghz_form(s: &SettingsEnsemble) -> Result<EvenGhzForm> {
    if !s.parties().is_multiple_of(2) {
        return Err(Error::Invalid(format!("even-N form needs even N, got {}", s.parties())));
    }
    let e = evaluate_general(&GhzClosedCorrelator { parties: s.parties() }, s)?;
    Ok(EvenGhzForm {
        sum_abs_beta: e.terms.sum_abs_beta(),
        bound_plus: e.bound_general_plus,
        bound_minus: e.bound_general_minus,
    })
}
