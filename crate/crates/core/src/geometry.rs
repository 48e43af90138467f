//! Measurement-setting ensembles.
//!
//! An ensemble holds three pairs of N-party setting tuples `(X_k, X_k')`.
//! At the designated party every pair encloses the same angle θ and the pair
//! sums and differences span two orthonormal frames:
//! `n_k + n_k' = 2cos(θ/2) e_k`, `n_k − n_k' = 2sin(θ/2) e'_k`.
//!
//! All azimuths handled here are full angles. The tripartite arrangement is
//! often written with half-angle parameters; [`AzimuthTable::standard`] does
//! that conversion once.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{SphericalAngles, UnitVector3};
use crate::tolerance;

/// `(sinϑ cosφ, sinϑ sinφ, cosϑ)`.
pub fn from_spherical(a: SphericalAngles) -> UnitVector3 {
    let (st, ct) = a.polar().sin_cos();
    let (sp, cp) = a.azimuth().sin_cos();
    UnitVector3::normalized([st * cp, st * sp, ct]).expect("spherical point is nonzero")
}

fn sph(polar: f64, azimuth: f64) -> UnitVector3 {
    from_spherical(SphericalAngles::new(polar, azimuth).expect("constructed angles are in range"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleJson", into = "EnsembleJson")]
pub struct SettingsEnsemble {
    parties: usize,
    designated: usize,
    theta: f64,
    settings: [Vec<UnitVector3>; 3],
    settings_primed: [Vec<UnitVector3>; 3],
    frame: [UnitVector3; 3],
    frame_primed: [UnitVector3; 3],
}

impl SettingsEnsemble {
    /// Assembles an ensemble after checking only shapes; use
    /// [`validate_ensemble`] for the geometric invariants.
    pub fn from_parts(
        designated: usize,
        theta: f64,
        settings: [Vec<UnitVector3>; 3],
        settings_primed: [Vec<UnitVector3>; 3],
        frame: [UnitVector3; 3],
        frame_primed: [UnitVector3; 3],
    ) -> Result<Self> {
        let parties = settings[0].len();
        if parties < 2 {
            return Err(Error::Invalid(format!("ensemble needs at least 2 parties, got {parties}")));
        }
        for tuple in settings.iter().chain(settings_primed.iter()) {
            if tuple.len() != parties {
                return Err(Error::DimensionMismatch {
                    expected: parties,
                    got: tuple.len(),
                });
            }
        }
        if designated >= parties {
            return Err(Error::PartyOutOfRange { party: designated, n: parties });
        }
        check_theta(theta)?;
        Ok(SettingsEnsemble {
            parties,
            designated,
            theta,
            settings,
            settings_primed,
            frame,
            frame_primed,
        })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// 0-based index of the designated party.
    pub fn designated(&self) -> usize {
        self.designated
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unprimed tuple `X_k`, `k` in `0..3`.
    pub fn tuple(&self, k: usize) -> &[UnitVector3] {
        &self.settings[k]
    }

    /// Primed tuple `X_k'`.
    pub fn tuple_primed(&self, k: usize) -> &[UnitVector3] {
        &self.settings_primed[k]
    }

    pub fn frame(&self) -> &[UnitVector3; 3] {
        &self.frame
    }

    pub fn frame_primed(&self) -> &[UnitVector3; 3] {
        &self.frame_primed
    }

    /// Indices of every party except the designated one, ascending.
    pub fn others(&self) -> Vec<usize> {
        (0..self.parties).filter(|&p| p != self.designated).collect()
    }

    /// Overwrites one setting; used to build deliberately broken ensembles.
    pub fn set_setting(&mut self, k: usize, party: usize, primed: bool, v: UnitVector3) {
        if primed {
            self.settings_primed[k][party] = v;
        } else {
            self.settings[k][party] = v;
        }
    }

    /// Applies one rotation to every setting and frame vector.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> SettingsEnsemble {
        let rot_all = |tuples: &[Vec<UnitVector3>; 3]| tuples.clone().map(|t| t.iter().map(|v| v.rotated(r)).collect());
        SettingsEnsemble {
            parties: self.parties,
            designated: self.designated,
            theta: self.theta,
            settings: rot_all(&self.settings),
            settings_primed: rot_all(&self.settings_primed),
            frame: self.frame.map(|v| v.rotated(r)),
            frame_primed: self.frame_primed.map(|v| v.rotated(r)),
        }
    }

    /// True when `X_k'` equals `X_k` on every party except the designated one.
    pub fn others_share_settings(&self) -> bool {
        (0..3).all(|k| {
            self.others()
                .iter()
                .all(|&p| self.settings[k][p] == self.settings_primed[k][p])
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::AngleRange {
            name: "theta",
            value: theta,
            min: 0.0,
            max: PI,
        });
    }
    Ok(())
}

fn check_free_angle(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=TAU).contains(&value) {
        return Err(Error::AngleRange {
            name,
            value,
            min: 0.0,
            max: TAU,
        });
    }
    Ok(())
}

/// JSON form: parties are 1-based and vectors are `[x, y, z]` triples.
#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    n: usize,
    designated_party: usize,
    theta: f64,
    settings: [Vec<UnitVector3>; 3],
    settings_primed: [Vec<UnitVector3>; 3],
    frame: [UnitVector3; 3],
    frame_primed: [UnitVector3; 3],
}

impl From<SettingsEnsemble> for EnsembleJson {
    fn from(s: SettingsEnsemble) -> Self {
        EnsembleJson {
            n: s.parties,
            designated_party: s.designated + 1,
            theta: s.theta,
            settings: s.settings,
            settings_primed: s.settings_primed,
            frame: s.frame,
            frame_primed: s.frame_primed,
        }
    }
}

impl TryFrom<EnsembleJson> for SettingsEnsemble {
    type Error = Error;

    fn try_from(j: EnsembleJson) -> Result<Self> {
        if j.designated_party == 0 {
            return Err(Error::Format("designated_party is 1-based".into()));
        }
        let s = SettingsEnsemble::from_parts(
            j.designated_party - 1,
            j.theta,
            j.settings,
            j.settings_primed,
            j.frame,
            j.frame_primed,
        )?;
        if s.parties != j.n {
            return Err(Error::DimensionMismatch { expected: j.n, got: s.parties });
        }
        Ok(s)
    }
}

/// The designated-party triple `a_k`, `a_k'` and its analytic frames.
fn designated_triple(theta: f64) -> ([UnitVector3; 3], [UnitVector3; 3]) {
    let a = [
        sph(FRAC_PI_2, theta / 2.0),
        sph((PI - theta) / 2.0, FRAC_PI_2),
        sph(theta / 2.0, 0.0),
    ];
    let a_primed = [
        sph(FRAC_PI_2, -theta / 2.0),
        sph((PI + theta) / 2.0, FRAC_PI_2),
        sph(theta / 2.0, PI),
    ];
    (a, a_primed)
}

const FRAME: [UnitVector3; 3] = [UnitVector3::X, UnitVector3::Y, UnitVector3::Z];
const FRAME_PRIMED: [UnitVector3; 3] = [UnitVector3::Y, UnitVector3::Z, UnitVector3::X];

/// Full azimuths for every non-designated party (ascending party order),
/// per k, for the unprimed and primed tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthTable {
    pub unprimed: [Vec<f64>; 3],
    pub primed: [Vec<f64>; 3],
}

impl AzimuthTable {
    /// Second and third party azimuths of the standard tripartite arrangement
    /// with free angles `φ` and `ψ`.
    pub fn standard(phi: f64, psi: f64) -> Self {
        AzimuthTable {
            unprimed: [vec![phi / 2.0, psi / 2.0], vec![0.0, FRAC_PI_2], vec![0.0, 0.0]],
            primed: [vec![-phi / 2.0, -psi / 2.0], vec![0.0, FRAC_PI_2], vec![0.0, PI]],
        }
    }

    /// The standard arrangement spread over `parties − 1` non-designated
    /// parties: the second and third parties carry the tripartite azimuths,
    /// any further parties sit at azimuth 0. For two parties the single
    /// partner carries the per-k sums. Every per-k azimuth sum equals the
    /// tripartite one.
    pub fn standard_n(parties: usize, phi: f64, psi: f64) -> Result<Self> {
        if parties < 2 {
            return Err(Error::Invalid(format!("ensemble needs at least 2 parties, got {parties}")));
        }
        let base = AzimuthTable::standard(phi, psi);
        let fit = |row: &Vec<f64>| -> Vec<f64> {
            if parties == 2 {
                vec![row.iter().sum()]
            } else {
                let mut out = row.clone();
                out.resize(parties - 1, 0.0);
                out
            }
        };
        Ok(AzimuthTable {
            unprimed: [0, 1, 2].map(|k| fit(&base.unprimed[k])),
            primed: [0, 1, 2].map(|k| fit(&base.primed[k])),
        })
    }

    /// Twice the per-k azimuth sums, i.e. the phase parameters consumed by
    /// [`crate::ghzform::tripartite_correlators`].
    pub fn phase_sums(&self) -> crate::ghzform::TripartitePhases {
        crate::ghzform::TripartitePhases {
            phi: [0, 1, 2].map(|k| 2.0 * self.unprimed[k].iter().sum::<f64>()),
            phi_primed: [0, 1, 2].map(|k| 2.0 * self.primed[k].iter().sum::<f64>()),
        }
    }
}

/// The standard tripartite arrangement (party 1 designated).
pub fn fig1_settings(theta: f64, phi: f64, psi: f64) -> Result<SettingsEnsemble> {
    check_theta(theta)?;
    check_free_angle("phi", phi)?;
    check_free_angle("psi", psi)?;
    xy_plane_settings(3, 0, theta, &AzimuthTable::standard(phi, psi))
}

/// Designated party `designated` (0-based) carries the θ-triple; every other
/// party lies in the x-y plane at the tabulated azimuths.
pub fn xy_plane_settings(
    parties: usize,
    designated: usize,
    theta: f64,
    table: &AzimuthTable,
) -> Result<SettingsEnsemble> {
    if parties < 2 {
        return Err(Error::Invalid(format!("ensemble needs at least 2 parties, got {parties}")));
    }
    if designated >= parties {
        return Err(Error::PartyOutOfRange { party: designated, n: parties });
    }
    check_theta(theta)?;
    for row in table.unprimed.iter().chain(table.primed.iter()) {
        if row.len() != parties - 1 {
            return Err(Error::Invalid(format!(
                "azimuth table rows need {} entries, got {}",
                parties - 1,
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|a| !a.is_finite()) {
            return Err(Error::Invalid(format!("non-finite azimuth {bad}")));
        }
    }
    let (a, a_primed) = designated_triple(theta);
    let build = |rows: &[Vec<f64>; 3], triple: &[UnitVector3; 3]| -> [Vec<UnitVector3>; 3] {
        [0, 1, 2].map(|k| {
            let mut azimuths = rows[k].iter();
            (0..parties)
                .map(|p| {
                    if p == designated {
                        triple[k]
                    } else {
                        sph(FRAC_PI_2, *azimuths.next().expect("row length checked"))
                    }
                })
                .collect()
        })
    };
    SettingsEnsemble::from_parts(
        designated,
        theta,
        build(&table.unprimed, &a),
        build(&table.primed, &a_primed),
        FRAME,
        FRAME_PRIMED,
    )
}

/// One invariant check of [`validate_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub k: Option<usize>,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    /// `cos(θ/2) = 0`: the sum decomposition does not determine `e_k`.
    pub degenerate_frame: bool,
    /// `sin(θ/2) = 0`: the difference decomposition does not determine `e'_k`.
    pub degenerate_primed_frame: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

fn max_component_residual(lhs: [f64; 3], rhs: [f64; 3]) -> f64 {
    (0..3).map(|i| (lhs[i] - rhs[i]).abs()).fold(0.0, f64::max)
}

fn angle_between(a: &UnitVector3, b: &UnitVector3) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}

/// Checks every ensemble invariant; never fails, reports residuals instead.
pub fn validate_ensemble(s: &SettingsEnsemble) -> ValidationReport {
    let tol = tolerance::FRAME;
    let (half_sin, half_cos) = (s.theta / 2.0).sin_cos();
    let degenerate_frame = half_cos.abs() < tolerance::STATE;
    let degenerate_primed_frame = half_sin.abs() < tolerance::STATE;
    let mut checks = Vec::new();
    let mut push = |name, k, residual: f64| {
        checks.push(ValidationCheck {
            name,
            k,
            residual,
            passed: residual.is_finite() && residual <= tol,
        })
    };

    let i = s.designated;
    for k in 0..3 {
        let n = s.settings[k][i].to_array();
        let np = s.settings_primed[k][i].to_array();
        if !degenerate_frame {
            let sum = [n[0] + np[0], n[1] + np[1], n[2] + np[2]];
            let e = s.frame[k].to_array().map(|x| 2.0 * half_cos * x);
            push("sum_decomposition", Some(k), max_component_residual(sum, e));
        }
        if !degenerate_primed_frame {
            let diff = [n[0] - np[0], n[1] - np[1], n[2] - np[2]];
            let e = s.frame_primed[k].to_array().map(|x| 2.0 * half_sin * x);
            push("difference_decomposition", Some(k), max_component_residual(diff, e));
        }
        let angle = angle_between(&s.settings[k][i], &s.settings_primed[k][i]);
        push("pair_angle", Some(k), (angle - s.theta).abs());
    }
    for (name, frame) in [("frame_orthonormal", &s.frame), ("primed_frame_orthonormal", &s.frame_primed)] {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((frame[a].dot(&frame[b]) - expect).abs());
            }
        }
        push(name, None, worst);
    }
    ValidationReport {
        checks,
        degenerate_frame,
        degenerate_primed_frame,
    }
}

/// `Σ_k |u·e_k|`, at least one for any orthonormal frame.
pub fn frame_bound_sum(u: &UnitVector3, frame: &[UnitVector3; 3]) -> f64 {
    frame.iter().map(|e| u.dot(e).abs()).sum()
}
