//! Nonlocal-realistic (Leggett) model: hidden variables, admissible outcome
//! distributions and the checks behind the model-side inequalities.
//!
//! A hidden variable fixes one polarization `u_i` per party. Single-party
//! statistics obey Malus' law `⟨x_i⟩ = u_i·n_i`; the higher correlators are
//! free as long as the reconstructed distribution stays nonnegative.
//!
//! Subsets of parties are bitmasks with party `i` (0-based) at bit `i`.
//! Outcomes use the same layout, a set bit meaning `x_i = −1`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{frame_bound_sum, xy_plane_settings, AzimuthTable, SettingsEnsemble};
use crate::ineq::{min_form, Correlator, InequalityEvaluation, InequalityTerms};
use crate::qcore::UnitVector3;
use crate::rng::LabRng;
use crate::tolerance;

/// Largest party count handled by the oracle (2^N-entry tables).
pub const MAX_PARTIES: usize = 16;

fn check_parties(n: usize) -> Result<()> {
    if !(1..=MAX_PARTIES).contains(&n) {
        return Err(Error::Capacity {
            what: "parties",
            value: n,
            min: 1,
            max: MAX_PARTIES,
        });
    }
    Ok(())
}

/// One polarization per party.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeggettHiddenVariable {
    polarizations: Vec<UnitVector3>,
}

impl LeggettHiddenVariable {
    pub fn new(polarizations: Vec<UnitVector3>) -> Result<Self> {
        check_parties(polarizations.len())?;
        Ok(LeggettHiddenVariable { polarizations })
    }

    /// Independent uniform polarizations on the sphere.
    pub fn random(n: usize, rng: &mut LabRng) -> Result<Self> {
        check_parties(n)?;
        Ok(LeggettHiddenVariable {
            polarizations: (0..n).map(|_| rng.unit_vector()).collect(),
        })
    }

    pub fn parties(&self) -> usize {
        self.polarizations.len()
    }

    pub fn polarizations(&self) -> &[UnitVector3] {
        &self.polarizations
    }

    /// Malus-law singles `u_i·n_i`.
    pub fn malus(&self, dirs: &[UnitVector3]) -> Result<Vec<f64>> {
        if dirs.len() != self.parties() {
            return Err(Error::DimensionMismatch {
                expected: self.parties(),
                got: dirs.len(),
            });
        }
        Ok(self.polarizations.iter().zip(dirs).map(|(u, n)| u.dot(n)).collect())
    }
}

/// Discrete polarization distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HiddenVariableEnsemble {
    atoms: Vec<(LeggettHiddenVariable, f64)>,
}

impl HiddenVariableEnsemble {
    pub fn new(atoms: Vec<(LeggettHiddenVariable, f64)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::Invalid("ensemble needs at least one atom".into()));
        };
        let n = first.0.parties();
        let mut total = 0.0;
        for (atom, w) in &atoms {
            if atom.parties() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: atom.parties(),
                });
            }
            if w.is_nan() || *w < 0.0 {
                return Err(Error::Invalid(format!("weight {w} is not a nonnegative number")));
            }
            total += w;
        }
        if (total - 1.0).abs() > tolerance::STATE {
            return Err(Error::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(HiddenVariableEnsemble { atoms })
    }

    pub fn single(atom: LeggettHiddenVariable) -> Self {
        HiddenVariableEnsemble {
            atoms: vec![(atom, 1.0)],
        }
    }

    /// `count` uniform atoms with flat-Dirichlet weights.
    pub fn random(n: usize, count: usize, rng: &mut LabRng) -> Result<Self> {
        let atoms = (0..count)
            .map(|_| LeggettHiddenVariable::random(n, rng))
            .collect::<Result<Vec<_>>>()?;
        let weights = rng.simplex_weights(count);
        HiddenVariableEnsemble::new(atoms.into_iter().zip(weights).collect())
    }

    /// `count` uniform atoms with equal weights.
    pub fn uniform(n: usize, count: usize, rng: &mut LabRng) -> Result<Self> {
        let atoms = (0..count)
            .map(|_| LeggettHiddenVariable::random(n, rng))
            .collect::<Result<Vec<_>>>()?;
        let w = 1.0 / count as f64;
        let atoms: Vec<_> = atoms.into_iter().map(|a| (a, w)).collect();
        // renormalize so rounding in count * w cannot trip the sum check
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        HiddenVariableEnsemble::new(atoms.into_iter().map(|(a, w)| (a, w / total)).collect())
    }

    pub fn parties(&self) -> usize {
        self.atoms[0].0.parties()
    }

    pub fn atoms(&self) -> &[(LeggettHiddenVariable, f64)] {
        &self.atoms
    }
}

/// All `2^N − 1` subset correlators under one settings tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatorSet {
    parties: usize,
    /// `values[mask]`; `values[0] = 1` stands for the empty product.
    values: Vec<f64>,
}

impl CorrelatorSet {
    /// `values` has `2^N` entries indexed by subset mask; entry 0 must be 1.
    pub fn from_values(parties: usize, values: Vec<f64>) -> Result<Self> {
        check_parties(parties)?;
        if values.len() != 1 << parties {
            return Err(Error::DimensionMismatch {
                expected: 1 << parties,
                got: values.len(),
            });
        }
        if values[0] != 1.0 {
            return Err(Error::Invalid("empty-subset entry must be 1".into()));
        }
        Ok(CorrelatorSet { parties, values })
    }

    /// Inverse of [`CorrelatorSet::probabilities`]: `C^S = Σ_x P(x) ∏_{i∈S} x_i`.
    pub fn from_probabilities(parties: usize, probabilities: &[f64]) -> Result<Self> {
        check_parties(parties)?;
        if probabilities.len() != 1 << parties {
            return Err(Error::DimensionMismatch {
                expected: 1 << parties,
                got: probabilities.len(),
            });
        }
        let mut values = probabilities.to_vec();
        walsh_hadamard(&mut values);
        values[0] = 1.0;
        Ok(CorrelatorSet { parties, values })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    pub fn set(&mut self, mask: usize, value: f64) {
        assert!(mask != 0 && mask < self.values.len(), "subset mask out of range");
        self.values[mask] = value;
    }

    pub fn full_mask(&self) -> usize {
        (1 << self.parties) - 1
    }

    /// `P(x) = 2^{−N}[1 + Σ_S (∏_{i∈S} x_i) C^S]` for every outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = self.values.clone();
        walsh_hadamard(&mut p);
        let scale = 1.0 / (1u64 << self.parties) as f64;
        p.iter_mut().for_each(|v| *v *= scale);
        p
    }

    pub fn min_probability(&self) -> f64 {
        self.probabilities().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Checks Malus' law against `λ`, nonnegativity and normalization.
    pub fn invariants(&self, lambda: &LeggettHiddenVariable, dirs: &[UnitVector3]) -> Result<SetInvariants> {
        if lambda.parties() != self.parties {
            return Err(Error::DimensionMismatch {
                expected: self.parties,
                got: lambda.parties(),
            });
        }
        let malus = lambda.malus(dirs)?;
        let malus_residual = malus
            .iter()
            .enumerate()
            .map(|(i, m)| (self.values[1 << i] - m).abs())
            .fold(0.0, f64::max);
        let p = self.probabilities();
        Ok(SetInvariants {
            malus_residual,
            min_probability: p.iter().copied().fold(f64::INFINITY, f64::min),
            normalization_residual: (p.iter().sum::<f64>() - 1.0).abs(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetInvariants {
    pub malus_residual: f64,
    pub min_probability: f64,
    pub normalization_residual: f64,
}

impl SetInvariants {
    pub fn passed(&self) -> bool {
        self.malus_residual <= tolerance::STATE
            && self.min_probability >= -tolerance::STATE
            && self.normalization_residual <= tolerance::STATE
    }
}

/// Unnormalized in-place Walsh–Hadamard transform: entry `y` becomes
/// `Σ_x (−1)^{popcount(x & y)} v[x]`. It maps correlators to `2^N P` and
/// probabilities to correlators.
fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in (0..v.len()).step_by(2 * h) {
            for j in block..block + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Exhaustive check of `|x ± y| ∓ xy = 1` on `{±1}²` and of its lifted form
/// with `y = x_2⋯x_N` over every assignment for N up to `max_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub cases: usize,
    pub max_residual: f64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.max_residual == 0.0
    }
}

pub fn identity_check() -> IdentityReport {
    identity_check_up_to(8)
}

pub fn identity_check_up_to(max_n: usize) -> IdentityReport {
    let mut cases = 0;
    let mut max_residual: f64 = 0.0;
    let mut check = |x: f64, y: f64| {
        for sign in [1.0, -1.0] {
            let lhs = (x + sign * y).abs() - sign * x * y;
            max_residual = max_residual.max((lhs - 1.0).abs());
            cases += 1;
        }
    };
    for x in [1.0, -1.0] {
        for y in [1.0, -1.0] {
            check(x, y);
        }
    }
    for n in 2..=max_n {
        for outcome in 0usize..1 << n {
            let x = |i: usize| if outcome >> i & 1 == 1 { -1.0 } else { 1.0 };
            let rest: f64 = (1..n).map(x).product();
            check(x(0), rest);
        }
    }
    IdentityReport { cases, max_residual }
}

/// Baseline model `P_λ(x) = ∏_i (1 + x_i u_i·n_i)/2`, i.e. `C^S = ∏_{i∈S} u_i·n_i`.
pub fn product_correlators(lambda: &LeggettHiddenVariable, dirs: &[UnitVector3]) -> Result<CorrelatorSet> {
    let malus = lambda.malus(dirs)?;
    let n = malus.len();
    let mut values = vec![1.0; 1 << n];
    for mask in 1usize..1 << n {
        let low = mask.trailing_zeros() as usize;
        values[mask] = values[mask & (mask - 1)] * malus[low];
    }
    Ok(CorrelatorSet { parties: n, values })
}

/// Rejection-sampling parameters for admissible correlators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerPolicy {
    /// Perturbations of the `|S| ≥ 2` correlators are uniform in `[−δ, δ]`.
    pub delta: f64,
    pub attempts: usize,
}

impl Default for SamplerPolicy {
    fn default() -> Self {
        SamplerPolicy {
            delta: 0.2,
            attempts: 100,
        }
    }
}

impl SamplerPolicy {
    /// Product model only.
    pub fn product() -> Self {
        SamplerPolicy {
            delta: 0.0,
            attempts: 1,
        }
    }
}

/// One admissible correlator set near the product model for a single tuple.
pub fn sample_admissible(
    lambda: &LeggettHiddenVariable,
    dirs: &[UnitVector3],
    rng: &mut LabRng,
    policy: SamplerPolicy,
) -> Result<CorrelatorSet> {
    let mut sets = sample_admissible_contexts(lambda, &[dirs.to_vec()], rng, policy)?;
    Ok(sets.pop().expect("one context in, one set out"))
}

type PerturbationKey = (usize, Vec<[u64; 3]>);

/// Admissible correlator sets for several measurement contexts of the same
/// hidden variable. A perturbation is keyed by the subset and the settings
/// of its parties, so contexts that agree on a subset's settings see the same
/// `C^S` (no-signaling). An attempt is accepted only if every context is
/// admissible; after `policy.attempts` failures the product sets are used.
pub fn sample_admissible_contexts(
    lambda: &LeggettHiddenVariable,
    contexts: &[Vec<UnitVector3>],
    rng: &mut LabRng,
    policy: SamplerPolicy,
) -> Result<Vec<CorrelatorSet>> {
    if policy.attempts == 0 {
        return Err(Error::Invalid("sampler needs at least one attempt".into()));
    }
    let base = contexts
        .iter()
        .map(|dirs| product_correlators(lambda, dirs))
        .collect::<Result<Vec<_>>>()?;
    if policy.delta == 0.0 {
        return Ok(base);
    }
    let n = lambda.parties();
    let mut drawn: HashMap<PerturbationKey, f64> = HashMap::new();
    'attempt: for _ in 0..policy.attempts {
        drawn.clear();
        let mut sets = Vec::with_capacity(contexts.len());
        for (dirs, product) in contexts.iter().zip(&base) {
            let mut set = product.clone();
            for mask in 1usize..1 << n {
                if mask.count_ones() < 2 {
                    continue;
                }
                let key = (
                    mask,
                    (0..n)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| dirs[i].to_array().map(f64::to_bits))
                        .collect(),
                );
                let shift = *drawn
                    .entry(key)
                    .or_insert_with(|| rng.uniform_in(-policy.delta, policy.delta));
                set.values[mask] += shift;
            }
            if set.min_probability() < 0.0 {
                continue 'attempt;
            }
            sets.push(set);
        }
        return Ok(sets);
    }
    Ok(base)
}

/// Slack of `|C^i + C^rest| ≤ 1 + C^full` and `|C^i − C^rest| ≤ 1 − C^full`
/// for both tuples, where `rest` is every party but `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub checks: usize,
    /// Largest `LHS − RHS`; positive means a violated constraint.
    pub max_violation: f64,
    pub worst: String,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= tolerance::MODEL_SLACK
    }
}

pub fn verify_constraint_chain(c: &CorrelatorSet, c_primed: &CorrelatorSet, i: usize) -> Result<ChainReport> {
    if c.parties != c_primed.parties {
        return Err(Error::DimensionMismatch {
            expected: c.parties,
            got: c_primed.parties,
        });
    }
    if i >= c.parties {
        return Err(Error::PartyOutOfRange { party: i, n: c.parties });
    }
    let mut report = ChainReport {
        checks: 0,
        max_violation: f64::NEG_INFINITY,
        worst: String::new(),
    };
    for (label, set) in [("unprimed", c), ("primed", c_primed)] {
        let full = set.full_mask();
        let single = set.get(1 << i);
        let rest = set.get(full & !(1 << i));
        let all = set.get(full);
        for (branch, sign) in [("plus", 1.0), ("minus", -1.0)] {
            let excess = (single + sign * rest).abs() - (1.0 + sign * all);
            report.checks += 1;
            if excess > report.max_violation {
                report.max_violation = excess;
                report.worst = format!("{branch} branch, {label} tuple");
            }
        }
    }
    Ok(report)
}

/// `γ±_k = Σ_m w_m |u_{i,m}·(n_k ± n_k')|` for the designated party `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaReport {
    pub plus: [f64; 3],
    pub minus: [f64; 3],
    pub sum_plus: f64,
    pub sum_minus: f64,
}

pub fn model_gamma(ensemble: &HiddenVariableEnsemble, s: &SettingsEnsemble) -> Result<GammaReport> {
    check_shape(ensemble, s)?;
    let i = s.designated();
    let mut plus = [0.0; 3];
    let mut minus = [0.0; 3];
    for (atom, w) in ensemble.atoms() {
        let u = atom.polarizations()[i];
        for k in 0..3 {
            let (a, b) = (u.dot(&s.tuple(k)[i]), u.dot(&s.tuple_primed(k)[i]));
            plus[k] += w * (a + b).abs();
            minus[k] += w * (a - b).abs();
        }
    }
    Ok(GammaReport {
        plus,
        minus,
        sum_plus: plus.iter().sum(),
        sum_minus: minus.iter().sum(),
    })
}

fn check_shape(ensemble: &HiddenVariableEnsemble, s: &SettingsEnsemble) -> Result<()> {
    if ensemble.parties() != s.parties() {
        return Err(Error::DimensionMismatch {
            expected: s.parties(),
            got: ensemble.parties(),
        });
    }
    Ok(())
}

/// Margins of every model-side inequality; positive means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelCheck {
    pub evaluation: InequalityEvaluation,
    pub gamma: GammaReport,
    /// Per-atom `min(|α±−β|, |α±+β|) − (2 − |γ±|)`, maximized over atoms, k and branch.
    pub sharp_margin: f64,
    /// Integrated `min(|α+−β|, |α++β|) − (2 − γ+_k)`, maximized over k.
    pub intermediate_margin_plus: f64,
    pub intermediate_margin_minus: f64,
    /// Weighted sum of the per-atom min-forms against `2 − γ±_k`, maximized
    /// over k. Unlike the intermediate margins this integrates the left side
    /// atom by atom.
    pub integrated_sharp_margin_plus: f64,
    pub integrated_sharp_margin_minus: f64,
    /// `Σ_k γ±_k` against the frame bound `2|cos|`, `2|sin|`; positive means the bound fails.
    pub frame_margin_plus: f64,
    pub frame_margin_minus: f64,
    /// Worst constraint-chain excess over all atoms and k.
    pub max_chain_slack: f64,
    /// Worst Malus / nonnegativity / normalization residual over all sets.
    pub max_invariant_residual: f64,
}

impl ModelCheck {
    pub fn final_margin_plus(&self) -> f64 {
        self.evaluation.margin_general_plus
    }

    pub fn final_margin_minus(&self) -> f64 {
        self.evaluation.margin_general_minus
    }

    /// Largest of the intermediate and final margins.
    pub fn max_margin(&self) -> f64 {
        [
            self.intermediate_margin_plus,
            self.intermediate_margin_minus,
            self.final_margin_plus(),
            self.final_margin_minus(),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First failing check, if any.
    pub fn failure(&self) -> Option<String> {
        let checks = [
            ("per-atom sharp inequality", self.sharp_margin, tolerance::MODEL_MARGIN),
            ("integrated sharp inequality (plus)", self.integrated_sharp_margin_plus, tolerance::MODEL_MARGIN),
            ("integrated sharp inequality (minus)", self.integrated_sharp_margin_minus, tolerance::MODEL_MARGIN),
            ("constraint chain", self.max_chain_slack, tolerance::MODEL_SLACK),
            ("correlator-set invariants", self.max_invariant_residual, tolerance::STATE),
            ("frame bound (plus)", self.frame_margin_plus, tolerance::MODEL_SLACK),
            ("frame bound (minus)", self.frame_margin_minus, tolerance::MODEL_SLACK),
            ("intermediate inequality (plus)", self.intermediate_margin_plus, tolerance::MODEL_MARGIN),
            ("intermediate inequality (minus)", self.intermediate_margin_minus, tolerance::MODEL_MARGIN),
            ("final inequality (plus)", self.final_margin_plus(), tolerance::MODEL_MARGIN),
            ("final inequality (minus)", self.final_margin_minus(), tolerance::MODEL_MARGIN),
        ];
        checks
            .into_iter()
            .find(|(_, margin, tol)| *margin > *tol)
            .map(|(name, margin, _)| format!("{name} violated by {margin:.3e}"))
    }
}

/// Builds per-atom admissible correlators for the six tuples, checks every
/// per-atom and integrated step and the final inequalities, and reports
/// all margins without failing.
pub fn ensemble_inequality_report(
    ensemble: &HiddenVariableEnsemble,
    s: &SettingsEnsemble,
    policy: SamplerPolicy,
    rng: &mut LabRng,
) -> Result<ModelCheck> {
    check_shape(ensemble, s)?;
    let i = s.designated();
    let n = s.parties();
    let full = (1usize << n) - 1;
    let rest = full & !(1 << i);
    let contexts: Vec<Vec<UnitVector3>> = (0..3)
        .flat_map(|k| [s.tuple(k).to_vec(), s.tuple_primed(k).to_vec()])
        .collect();

    let mut terms = InequalityTerms {
        beta: [0.0; 3],
        alpha_plus: [0.0; 3],
        alpha_minus: [0.0; 3],
    };
    let mut sharp_margin = f64::NEG_INFINITY;
    let mut sharp_sum_plus = [0.0; 3];
    let mut sharp_sum_minus = [0.0; 3];
    let mut max_chain_slack = f64::NEG_INFINITY;
    let mut max_invariant_residual: f64 = 0.0;
    for (atom, w) in ensemble.atoms() {
        let sets = sample_admissible_contexts(atom, &contexts, rng, policy)?;
        for (set, dirs) in sets.iter().zip(&contexts) {
            let inv = set.invariants(atom, dirs)?;
            max_invariant_residual = max_invariant_residual
                .max(inv.malus_residual)
                .max(-inv.min_probability)
                .max(inv.normalization_residual);
        }
        let u = atom.polarizations()[i];
        for k in 0..3 {
            let (c, cp) = (&sets[2 * k], &sets[2 * k + 1]);
            max_chain_slack = max_chain_slack.max(verify_constraint_chain(c, cp, i)?.max_violation);
            let beta = c.get(full) + cp.get(full);
            let alpha_plus = c.get(rest) + cp.get(rest);
            let alpha_minus = c.get(rest) - cp.get(rest);
            let (a, b) = (u.dot(&s.tuple(k)[i]), u.dot(&s.tuple_primed(k)[i]));
            sharp_margin = sharp_margin
                .max(min_form(alpha_plus, beta) - (2.0 - (a + b).abs()))
                .max(min_form(alpha_minus, beta) - (2.0 - (a - b).abs()));
            sharp_sum_plus[k] += w * min_form(alpha_plus, beta);
            sharp_sum_minus[k] += w * min_form(alpha_minus, beta);
            terms.beta[k] += w * beta;
            terms.alpha_plus[k] += w * alpha_plus;
            terms.alpha_minus[k] += w * alpha_minus;
        }
    }

    let gamma = model_gamma(ensemble, s)?;
    let intermediate = |alpha: &[f64; 3], g: &[f64; 3]| {
        (0..3)
            .map(|k| min_form(alpha[k], terms.beta[k]) - (2.0 - g[k]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let integrated = |sums: &[f64; 3], g: &[f64; 3]| {
        (0..3)
            .map(|k| sums[k] - (2.0 - g[k]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (half_sin, half_cos) = (s.theta() / 2.0).sin_cos();
    Ok(ModelCheck {
        evaluation: InequalityEvaluation::from_terms(terms, s.theta()),
        gamma,
        sharp_margin,
        intermediate_margin_plus: intermediate(&terms.alpha_plus, &gamma.plus),
        intermediate_margin_minus: intermediate(&terms.alpha_minus, &gamma.minus),
        integrated_sharp_margin_plus: integrated(&sharp_sum_plus, &gamma.plus),
        integrated_sharp_margin_minus: integrated(&sharp_sum_minus, &gamma.minus),
        frame_margin_plus: 2.0 * half_cos.abs() - gamma.sum_plus,
        frame_margin_minus: 2.0 * half_sin.abs() - gamma.sum_minus,
        max_chain_slack,
        max_invariant_residual,
    })
}

/// [`ensemble_inequality_report`], failing with [`Error::Soundness`] if any
/// step is violated.
pub fn ensemble_inequality_check(
    ensemble: &HiddenVariableEnsemble,
    s: &SettingsEnsemble,
    policy: SamplerPolicy,
    rng: &mut LabRng,
) -> Result<InequalityEvaluation> {
    let check = ensemble_inequality_report(ensemble, s, policy, rng)?;
    match check.failure() {
        Some(msg) => Err(Error::Soundness(msg)),
        None => Ok(check.evaluation),
    }
}

/// Product-model correlators averaged over an ensemble.
#[derive(Debug, Clone, Copy)]
pub struct ProductModelCorrelator<'a> {
    pub ensemble: &'a HiddenVariableEnsemble,
}

impl Correlator for ProductModelCorrelator<'_> {
    fn correlate(&self, parties: &[usize], dirs: &[UnitVector3]) -> Result<f64> {
        if parties.len() != dirs.len() {
            return Err(Error::DimensionMismatch {
                expected: parties.len(),
                got: dirs.len(),
            });
        }
        let n = self.ensemble.parties();
        if let Some(&p) = parties.iter().find(|&&p| p >= n) {
            return Err(Error::PartyOutOfRange { party: p, n });
        }
        Ok(self
            .ensemble
            .atoms()
            .iter()
            .map(|(atom, w)| {
                w * parties
                    .iter()
                    .zip(dirs)
                    .map(|(&p, d)| atom.polarizations()[p].dot(d))
                    .product::<f64>()
            })
            .sum())
    }
}

/// Random settings of the general kind: random designated party and pair
/// angle, independent azimuths for every other party and tuple, then a
/// uniform global rotation.
pub fn random_settings(n: usize, rng: &mut LabRng) -> Result<SettingsEnsemble> {
    if n < 2 {
        return Err(Error::Capacity {
            what: "parties",
            value: n,
            min: 2,
            max: MAX_PARTIES,
        });
    }
    let designated = rng.int_in(0, n - 1);
    let theta = rng.uniform_in(0.0, std::f64::consts::PI);
    let mut draw = || std::array::from_fn(|_| (0..n - 1).map(|_| rng.uniform_in(0.0, std::f64::consts::TAU)).collect());
    let unprimed = draw();
    let primed = draw();
    let table = AzimuthTable { unprimed, primed };
    Ok(xy_plane_settings(n, designated, theta, &table)?.rotated(&rng.rotation()))
}

/// Configuration of a Monte Carlo soundness run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SoundnessConfig {
    pub seed: u64,
    pub trials: usize,
    pub parties: [usize; 2],
    pub max_atoms: usize,
    pub policy: SamplerPolicy,
}

impl Default for SoundnessConfig {
    fn default() -> Self {
        SoundnessConfig {
            seed: crate::rng::DEFAULT_SEED,
            trials: 1000,
            parties: [2, 5],
            max_atoms: 8,
            policy: SamplerPolicy::default(),
        }
    }
}

/// One line of a soundness transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTranscript {
    pub seed: u64,
    pub trial: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub theta: f64,
    pub atoms: usize,
    pub margins: TrialMargins,
    pub max_slack: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMargins {
    pub sharp: f64,
    pub integrated_sharp: f64,
    pub intermediate_plus: f64,
    pub intermediate_minus: f64,
    pub final_plus: f64,
    pub final_minus: f64,
}

/// Runs trial `trial` of `config` on its own random stream.
pub fn soundness_trial(config: &SoundnessConfig, trial: u64) -> Result<TrialTranscript> {
    let mut rng = LabRng::stream(config.seed, trial);
    let n = rng.int_in(config.parties[0], config.parties[1]);
    let s = random_settings(n, &mut rng)?;
    let atoms = rng.int_in(1, config.max_atoms.max(1));
    let ensemble = HiddenVariableEnsemble::random(n, atoms, &mut rng)?;
    let check = ensemble_inequality_report(&ensemble, &s, config.policy, &mut rng)?;
    Ok(TrialTranscript {
        seed: config.seed,
        trial,
        n,
        theta: s.theta(),
        atoms,
        margins: TrialMargins {
            sharp: check.sharp_margin,
            integrated_sharp: check
                .integrated_sharp_margin_plus
                .max(check.integrated_sharp_margin_minus),
            intermediate_plus: check.intermediate_margin_plus,
            intermediate_minus: check.intermediate_margin_minus,
            final_plus: check.final_margin_plus(),
            final_minus: check.final_margin_minus(),
        },
        max_slack: check.max_chain_slack,
        failure: check.failure(),
    })
}

/// All trials, in trial order; parallel over trials.
pub fn soundness_run(config: &SoundnessConfig) -> Result<Vec<TrialTranscript>> {
    if !(2..=MAX_PARTIES).contains(&config.parties[0]) || config.parties[0] > config.parties[1] {
        return Err(Error::Invalid(format!("bad party range {:?}", config.parties)));
    }
    (0..config.trials as u64)
        .into_par_iter()
        .map(|t| soundness_trial(config, t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    /// `None` for the open-ended bin of positive margins.
    pub hi: Option<f64>,
    pub count: usize,
}

/// Distribution of the largest intermediate/final margin per trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginHistogram {
    pub trials: usize,
    pub failures: usize,
    pub positive_margins: usize,
    pub max_margin: f64,
    pub bins: Vec<HistogramBin>,
}

/// Bins of width 0.5 over `[−6, 0]` plus one bin for positive margins.
pub fn margin_histogram(transcripts: &[TrialTranscript]) -> MarginHistogram {
    let mut bins: Vec<HistogramBin> = (0..12)
        .map(|b| HistogramBin {
            lo: -6.0 + 0.5 * b as f64,
            hi: Some(-5.5 + 0.5 * b as f64),
            count: 0,
        })
        .collect();
    bins.push(HistogramBin {
        lo: 0.0,
        hi: None,
        count: 0,
    });
    let mut max_margin = f64::NEG_INFINITY;
    let mut positive = 0;
    for t in transcripts {
        let m = t.margins;
        let worst = m
            .intermediate_plus
            .max(m.intermediate_minus)
            .max(m.final_plus)
            .max(m.final_minus);
        max_margin = max_margin.max(worst);
        if worst > 0.0 {
            positive += 1;
            bins[12].count += 1;
        } else {
            let b = (((worst + 6.0) / 0.5).floor().max(0.0) as usize).min(11);
            bins[b].count += 1;
        }
    }
    MarginHistogram {
        trials: transcripts.len(),
        failures: transcripts.iter().filter(|t| t.failure.is_some()).count(),
        positive_margins: positive,
        max_margin,
        bins,
    }
}

/// `Σ_k |u·e_k|` for the unprimed frame of `s`.
pub fn frame_bound(u: &UnitVector3, s: &SettingsEnsemble) -> f64 {
    frame_bound_sum(u, s.frame())
}
