//! Closed-form GHZ correlation functions.
//!
//! For `(|0…0⟩ + |1…1⟩)/√2` the full correlator is
//! `½(∏n₃ + (−1)^N ∏n₃) + Re ∏(n₁ + i n₂)`, which splits by parity of N.
//! Every proper subset of parties sees `½(|0…0⟩⟨0…0| + |1…1⟩⟨1…1|)`, so
//! subset correlators reduce to the `∏n₃` term alone.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{SphericalAngles, UnitVector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: usize) -> Parity {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaBranch {
    Full,
    XyPlane,
    Reduced,
}

/// A closed-form correlator value together with the branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub value: f64,
    pub parity: Parity,
    pub formula_branch: FormulaBranch,
}

impl CorrelationReport {
    pub fn full(angles: &[SphericalAngles]) -> Result<Self> {
        Ok(CorrelationReport {
            value: ghz_correlation_closed(angles)?,
            parity: Parity::of(angles.len()),
            formula_branch: FormulaBranch::Full,
        })
    }

    pub fn xy_plane(azimuths: &[f64]) -> Result<Self> {
        Ok(CorrelationReport {
            value: ghz_correlation_xy(azimuths)?,
            parity: Parity::of(azimuths.len()),
            formula_branch: FormulaBranch::XyPlane,
        })
    }

    pub fn reduced(n: usize, traced_party: usize, dirs: &[UnitVector3]) -> Result<Self> {
        Ok(CorrelationReport {
            value: ghz_reduced_correlation(n, traced_party, dirs)?,
            parity: Parity::of(n),
            formula_branch: FormulaBranch::Reduced,
        })
    }
}

fn check_parties(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Invalid(format!("GHZ correlators need N >= 2, got {n}")));
    }
    Ok(())
}

/// Spherical form: odd N gives `cos(Σφ)∏sinϑ`, even N adds `∏cosϑ`.
pub fn ghz_correlation_closed(angles: &[SphericalAngles]) -> Result<f64> {
    check_parties(angles.len())?;
    let azimuth_sum: f64 = angles.iter().map(|a| a.azimuth()).sum();
    let sin_prod: f64 = angles.iter().map(|a| a.polar().sin()).product();
    let xy_term = azimuth_sum.cos() * sin_prod;
    Ok(match Parity::of(angles.len()) {
        Parity::Odd => xy_term,
        Parity::Even => angles.iter().map(|a| a.polar().cos()).product::<f64>() + xy_term,
    })
}

/// Cartesian form of the full GHZ correlator.
pub fn ghz_correlation_vectors(dirs: &[UnitVector3]) -> Result<f64> {
    check_parties(dirs.len())?;
    let transverse = dirs
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, d| acc * Complex64::new(d.x(), d.y()));
    Ok(z_term(dirs) + transverse.re)
}

/// `½(∏n₃ + (−1)^m ∏n₃)` over the `m` supplied directions.
fn z_term(dirs: &[UnitVector3]) -> f64 {
    if dirs.len().is_multiple_of(2) {
        dirs.iter().map(|d| d.z()).product()
    } else {
        0.0
    }
}

/// All directions in the x-y plane: `cos(Σφ_j)`.
pub fn ghz_correlation_xy(azimuths: &[f64]) -> Result<f64> {
    check_parties(azimuths.len())?;
    Ok(azimuths.iter().sum::<f64>().cos())
}

/// Correlator of the `N−1` parties left after tracing out `traced_party`
/// (0-based): `∏n₃` for odd N, exactly zero for even N.
pub fn ghz_reduced_correlation(n: usize, traced_party: usize, dirs: &[UnitVector3]) -> Result<f64> {
    check_parties(n)?;
    if traced_party >= n {
        return Err(Error::PartyOutOfRange { party: traced_party, n });
    }
    if dirs.len() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: dirs.len(),
        });
    }
    Ok(z_term(dirs))
}

/// Correlator of any proper, nonempty subset of an N-party GHZ state.
pub fn ghz_subset_correlation(n: usize, dirs: &[UnitVector3]) -> Result<f64> {
    check_parties(n)?;
    if dirs.is_empty() || dirs.len() >= n {
        return Err(Error::Invalid(format!(
            "subset of {} parties is not a proper nonempty subset of {n}",
            dirs.len()
        )));
    }
    Ok(z_term(dirs))
}

/// Sums `φ_k = Σ_{j≥2} φ_kj` and `φ'_k` of the azimuth parameters of parties
/// 2..N for k = 1, 2, 3. A party whose azimuth parameter is `φ_kj` points
/// along azimuth `φ_kj / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripartitePhases {
    pub phi: [f64; 3],
    pub phi_primed: [f64; 3],
}

impl TripartitePhases {
    /// Phase sums of the standard tripartite arrangement with free angles
    /// `φ` (second party) and `ψ` (third party).
    pub fn standard(phi: f64, psi: f64) -> Self {
        TripartitePhases {
            phi: [phi + psi, PI, 0.0],
            phi_primed: [-(phi + psi), PI, 2.0 * PI],
        }
    }
}

/// The six correlators `C(X_k)`, `C(X_k')` for the designated-party triple
/// paired with x-y-plane settings on every other party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripartiteCorrelators {
    pub unprimed: [f64; 3],
    pub primed: [f64; 3],
}

impl TripartiteCorrelators {
    pub fn beta(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.unprimed[k] + self.primed[k])
    }
}

pub fn tripartite_correlators(theta: f64, phases: &TripartitePhases) -> Result<TripartiteCorrelators> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::AngleRange {
            name: "theta",
            value: theta,
            min: 0.0,
            max: PI,
        });
    }
    let (half_sin, half_cos) = (theta / 2.0).sin_cos();
    let [p1, p2, p3] = phases.phi;
    let [q1, q2, q3] = phases.phi_primed;
    Ok(TripartiteCorrelators {
        unprimed: [
            ((theta + p1) / 2.0).cos(),
            -half_cos * (p2 / 2.0).sin(),
            half_sin * (p3 / 2.0).cos(),
        ],
        primed: [
            ((theta - q1) / 2.0).cos(),
            -half_cos * (q2 / 2.0).sin(),
            -half_sin * (q3 / 2.0).cos(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{correlation_bruteforce, ghz_density};

    fn sph(p: f64, a: f64) -> SphericalAngles {
        SphericalAngles::new(p, a).unwrap()
    }

    #[test]
    fn spherical_examples() {
        let odd = [sph(PI / 2.0, PI / 3.0); 3];
        assert!((ghz_correlation_closed(&odd).unwrap() + 1.0).abs() < 1e-12);
        let even = [sph(0.0, 0.0); 4];
        assert!((ghz_correlation_closed(&even).unwrap() - 1.0).abs() < 1e-15);
        assert!(ghz_correlation_closed(&[sph(0.0, 0.0)]).is_err());
    }

    #[test]
    fn xy_examples() {
        assert_eq!(ghz_correlation_xy(&[0.0; 5]).unwrap(), 1.0);
        assert!((ghz_correlation_xy(&[PI / 3.0; 3]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduced_examples() {
        let d = UnitVector3::normalized([0.2, 0.5, 0.7]).unwrap();
        assert_eq!(ghz_reduced_correlation(4, 0, &[d; 3]).unwrap(), 0.0);
        assert_eq!(ghz_reduced_correlation(3, 2, &[UnitVector3::Z; 2]).unwrap(), 1.0);
        assert_eq!(ghz_reduced_correlation(3, 0, &[UnitVector3::X, d]).unwrap(), 0.0);
        assert!(matches!(
            ghz_reduced_correlation(3, 0, &[d]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ghz_reduced_correlation(3, 3, &[d; 2]).is_err());
    }

    #[test]
    fn tripartite_examples() {
        let c = tripartite_correlators(0.0, &TripartitePhases { phi: [0.0; 3], phi_primed: [0.0; 3] }).unwrap();
        assert_eq!(c.unprimed[0], 1.0);
        let c = tripartite_correlators(PI, &TripartitePhases { phi: [0.0, 1.3, 0.0], phi_primed: [0.0; 3] }).unwrap();
        assert!(c.unprimed[1].abs() < 1e-16);
        assert!(tripartite_correlators(3.5, &TripartitePhases::standard(0.0, 0.0)).is_err());
    }

    #[test]
    fn vector_form_matches_bruteforce_for_small_cases() {
        let dirs = [
            UnitVector3::normalized([0.3, -0.2, 0.9]).unwrap(),
            UnitVector3::normalized([-0.5, 0.4, 0.1]).unwrap(),
        ];
        let rho = ghz_density(2).unwrap();
        let brute = correlation_bruteforce(&rho, &dirs).unwrap();
        assert!((ghz_correlation_vectors(&dirs).unwrap() - brute).abs() < 1e-14);
    }
}
