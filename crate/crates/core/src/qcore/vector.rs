use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

/// A measurement direction or polarization on the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    /// Validates that `(x, y, z)` has unit norm to within `1e-12`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > tolerance::STATE {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVector3 { x, y, z })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVector3 {
            x: v[0] / norm,
            y: v[1] / norm,
            z: v[2] / norm,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Applies a rotation given as a row-major 3×3 orthogonal matrix and
    /// renormalizes away rounding.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> UnitVector3 {
        let v = self.to_array();
        let out = [
            r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
            r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
            r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
        ];
        UnitVector3::normalized(out).expect("rotation of a unit vector is nonzero")
    }
}

impl TryFrom<[f64; 3]> for UnitVector3 {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        UnitVector3::new(v[0], v[1], v[2])
    }
}

impl From<UnitVector3> for [f64; 3] {
    fn from(v: UnitVector3) -> Self {
        v.to_array()
    }
}

/// Polar angle in `[0, π]` and azimuth in `[0, 2π)`, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalAngles {
    polar: f64,
    azimuth: f64,
}

impl SphericalAngles {
    /// The azimuth is reduced mod 2π; the polar angle must already lie in
    /// `[0, π]` (a rounding excess of `1e-12` is clamped).
    pub fn new(polar: f64, azimuth: f64) -> Result<Self> {
        if !polar.is_finite() || !(-tolerance::STATE..=PI + tolerance::STATE).contains(&polar) {
            return Err(Error::AngleRange {
                name: "polar",
                value: polar,
                min: 0.0,
                max: PI,
            });
        }
        if !azimuth.is_finite() {
            return Err(Error::AngleRange {
                name: "azimuth",
                value: azimuth,
                min: 0.0,
                max: TAU,
            });
        }
        Ok(SphericalAngles {
            polar: polar.clamp(0.0, PI),
            azimuth: wrap_tau(azimuth),
        })
    }

    pub fn polar(&self) -> f64 {
        self.polar
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_tau(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl std::ops::Neg for UnitVector3 {
    type Output = UnitVector3;

    fn neg(self) -> UnitVector3 {
        UnitVector3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}
