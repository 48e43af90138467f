use std::fmt;

use num_complex::Complex64;

use super::vector::UnitVector3;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            entries: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("matrix dimensions must be positive".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Ok(ComplexMatrix { rows, cols, entries })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: Complex64) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.entries[c * self.rows + r] = self.get(r, c).conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    out.entries[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    /// Largest element-wise modulus of `self - other`; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Element-wise comparison with an absolute tolerance.
    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// `max |M - M†|`; infinite for non-square input.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self.get(r, c);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a.get(ar, ac);
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out.set(ar * b.rows + br, ac * b.cols + bc, x * b.get(br, bc));
                }
            }
        }
    }
    out
}

/// `σ·n = n_x σ_x + n_y σ_y + n_z σ_z`.
pub fn pauli_dot(n: &UnitVector3) -> ComplexMatrix {
    pauli_dot_linear(n.to_array())
}

/// `σ·v` for an arbitrary real vector, the linear extension of [`pauli_dot`].
pub fn pauli_dot_linear(v: [f64; 3]) -> ComplexMatrix {
    let [x, y, z] = v;
    ComplexMatrix {
        rows: 2,
        cols: 2,
        entries: vec![
            Complex64::new(z, 0.0),
            Complex64::new(x, 0.0) - I * y,
            Complex64::new(x, 0.0) + I * y,
            Complex64::new(-z, 0.0),
        ],
    }
}

/// `[[a, b], [c, d]]` entries of `σ·v`, for building Kronecker entries lazily.
#[inline]
pub(crate) fn pauli_entries(v: [f64; 3]) -> [[Complex64; 2]; 2] {
    let [x, y, z] = v;
    [
        [Complex64::new(z, 0.0), Complex64::new(x, -y)],
        [Complex64::new(x, y), Complex64::new(-z, 0.0)],
    ]
}
