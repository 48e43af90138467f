use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::{kron, pauli_dot_linear, pauli_entries, ComplexMatrix};
use super::vector::UnitVector3;
use crate::error::{Error, Result};
use crate::tolerance;

/// Largest party count accepted by the dense routines (4096-dimensional states).
pub const MAX_QUBITS: usize = 12;

/// Above this dimension the brute-force trace builds Kronecker entries lazily
/// instead of materializing the full observable.
const MATERIALIZE_MAX_QUBITS: usize = 8;

/// A validated `2^N × 2^N` Hermitian, unit-trace, positive semidefinite matrix.
///
/// Party 1 is the most significant qubit of the computational index.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotDensity(format!(
                "matrix is {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dim = matrix.rows();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::NotDensity(format!("dimension {dim} is not 2^N with N >= 1")));
        }
        let qubits = dim.trailing_zeros() as usize;
        if qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "qubits",
                value: qubits,
                min: 1,
                max: MAX_QUBITS,
            });
        }
        let herm = matrix.hermiticity_residual();
        if herm > tolerance::STATE {
            return Err(Error::NotDensity(format!("|M - M†|max = {herm:.3e}")));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tolerance::STATE {
            return Err(Error::NotDensity(format!("trace = {tr}")));
        }
        if let Some(min_eig) = min_eigenvalue_estimate(&matrix) {
            if min_eig < tolerance::PSD {
                return Err(Error::NotDensity(format!("eigenvalue {min_eig:.3e} < 0")));
            }
        }
        Ok(DensityMatrix { qubits, matrix })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Lower bound on the spectrum: Gershgorin first, explicit diagonalization
/// when that is inconclusive. Diagonalization above dimension 64 only runs in
/// debug builds; `None` means the check was skipped.
fn min_eigenvalue_estimate(m: &ComplexMatrix) -> Option<f64> {
    let n = m.rows();
    let gershgorin = (0..n)
        .map(|r| {
            let radius: f64 = (0..n).filter(|&c| c != r).map(|c| m.get(r, c).norm()).sum();
            m.get(r, r).re - radius
        })
        .fold(f64::INFINITY, f64::min);
    if gershgorin >= tolerance::PSD {
        return Some(gershgorin);
    }
    let diagonalize = n <= 64 || (n <= 256 && cfg!(debug_assertions));
    if !diagonalize {
        return None;
    }
    let dm = DMatrix::from_fn(n, n, |r, c| m.get(r, c));
    let eigs = dm.symmetric_eigenvalues();
    Some(eigs.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Density matrix of `(|0…0⟩ + |1…1⟩)/√2`: four corner entries equal to 1/2.
pub fn ghz_density(n: usize) -> Result<DensityMatrix> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(Error::Capacity {
            what: "N",
            value: n,
            min: 2,
            max: MAX_QUBITS,
        });
    }
    let dim = 1usize << n;
    let half = Complex64::new(0.5, 0.0);
    let mut m = ComplexMatrix::zeros(dim, dim);
    m.set(0, 0, half);
    m.set(0, dim - 1, half);
    m.set(dim - 1, 0, half);
    m.set(dim - 1, dim - 1, half);
    DensityMatrix::new(m)
}

/// Traces out one party (0-based index).
pub fn partial_trace(rho: &DensityMatrix, party: usize) -> Result<DensityMatrix> {
    let n = rho.qubits;
    if n < 2 {
        return Err(Error::Invalid("cannot trace out the only qubit".into()));
    }
    if party >= n {
        return Err(Error::PartyOutOfRange { party, n });
    }
    let shift = n - 1 - party;
    let low_mask = (1usize << shift) - 1;
    let insert = |idx: usize, bit: usize| ((idx & !low_mask) << 1) | (bit << shift) | (idx & low_mask);
    let out_dim = 1usize << (n - 1);
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for r in 0..out_dim {
        for c in 0..out_dim {
            let v = rho.matrix.get(insert(r, 0), insert(c, 0)) + rho.matrix.get(insert(r, 1), insert(c, 1));
            out.set(r, c, v);
        }
    }
    DensityMatrix::new(out)
}

/// Traces out every party not listed in `keep` (0-based, any order; the
/// result keeps the remaining parties in ascending order).
pub fn reduce_to(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.qubits;
    for &p in keep {
        if p >= n {
            return Err(Error::PartyOutOfRange { party: p, n });
        }
    }
    let mut current = rho.clone();
    // trace from the highest index down so lower indices stay valid
    for party in (0..n).rev() {
        if !keep.contains(&party) {
            current = partial_trace(&current, party)?;
        }
    }
    Ok(current)
}

/// `Tr[ρ (⊗_j σ·n^{(j)})]` by explicit summation over every matrix entry.
pub fn correlation_bruteforce(rho: &DensityMatrix, dirs: &[UnitVector3]) -> Result<f64> {
    let raw: Vec<[f64; 3]> = dirs.iter().map(|d| d.to_array()).collect();
    correlation_bruteforce_linear(rho, &raw)
}

/// [`correlation_bruteforce`] extended by linearity to arbitrary real vectors.
pub fn correlation_bruteforce_linear(rho: &DensityMatrix, dirs: &[[f64; 3]]) -> Result<f64> {
    if dirs.len() != rho.qubits {
        return Err(Error::DimensionMismatch {
            expected: rho.qubits,
            got: dirs.len(),
        });
    }
    let tr = if rho.qubits <= MATERIALIZE_MAX_QUBITS {
        trace_materialized(rho, dirs)
    } else {
        trace_lazy(rho, dirs)
    };
    real_part_checked(tr)
}

fn real_part_checked(tr: Complex64) -> Result<f64> {
    if tr.im.abs() > tolerance::IMAGINARY_RESIDUE {
        return Err(Error::ImaginaryResidue { residue: tr.im.abs() });
    }
    Ok(tr.re)
}

pub(crate) fn trace_materialized(rho: &DensityMatrix, dirs: &[[f64; 3]]) -> Complex64 {
    let op = dirs
        .iter()
        .map(|&d| pauli_dot_linear(d))
        .reduce(|acc, m| kron(&acc, &m))
        .expect("at least one direction");
    let dim = rho.dim();
    let mut tr = Complex64::new(0.0, 0.0);
    for r in 0..dim {
        for c in 0..dim {
            tr += rho.matrix.get(r, c) * op.get(c, r);
        }
    }
    tr
}

pub(crate) fn trace_lazy(rho: &DensityMatrix, dirs: &[[f64; 3]]) -> Complex64 {
    let n = dirs.len();
    let paulis: Vec<[[Complex64; 2]; 2]> = dirs.iter().map(|&d| pauli_entries(d)).collect();
    let dim = rho.dim();
    let mut tr = Complex64::new(0.0, 0.0);
    for r in 0..dim {
        for c in 0..dim {
            let rho_rc = rho.matrix.get(r, c);
            if rho_rc == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut op_cr = Complex64::new(1.0, 0.0);
            for (j, p) in paulis.iter().enumerate() {
                let shift = n - 1 - j;
                op_cr *= p[(c >> shift) & 1][(r >> shift) & 1];
            }
            tr += rho_rc * op_cr;
        }
    }
    tr
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> Complex64 {
        Complex64::new(0.5, 0.0)
    }

    #[test]
    fn ghz_corners() {
        let rho = ghz_density(2).unwrap();
        assert_eq!(rho.dim(), 4);
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_eq!(rho.matrix().get(r, c), half());
        }
        let nonzero = rho.matrix().entries().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);

        let rho3 = ghz_density(3).unwrap();
        for (r, c) in [(0, 0), (0, 7), (7, 0), (7, 7)] {
            assert_eq!(rho3.matrix().get(r, c), half());
        }
        assert!((ghz_density(5).unwrap().matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ghz_capacity_guard() {
        assert!(matches!(ghz_density(1), Err(Error::Capacity { .. })));
        assert!(matches!(ghz_density(13), Err(Error::Capacity { .. })));
    }

    #[test]
    fn reduced_ghz_states() {
        let r = partial_trace(&ghz_density(3).unwrap(), 0).unwrap();
        assert!(r
            .matrix()
            .approx_eq(&ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]), 1e-15));
        let r2 = partial_trace(&ghz_density(2).unwrap(), 1).unwrap();
        assert!(r2.matrix().approx_eq(&ComplexMatrix::from_real_diagonal(&[0.5, 0.5]), 1e-15));
        assert!(matches!(
            partial_trace(&ghz_density(3).unwrap(), 3),
            Err(Error::PartyOutOfRange { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product_state_keeps_other_factor() {
        // |0><0| ⊗ diag(0.25, 0.75): tracing party 1 leaves diag(0.25, 0.75)
        let rho = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.25, 0.75, 0.0, 0.0])).unwrap();
        let r = partial_trace(&rho, 0).unwrap();
        assert!(r.matrix().approx_eq(&ComplexMatrix::from_real_diagonal(&[0.25, 0.75]), 1e-15));
        let r = partial_trace(&rho, 1).unwrap();
        assert!(r.matrix().approx_eq(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0]), 1e-15));
    }

    #[test]
    fn density_validation() {
        let bad_trace = ComplexMatrix::from_real_diagonal(&[0.5, 0.6]);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(DensityMatrix::new(negative).is_err());
        let mut non_herm = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        non_herm.set(0, 1, Complex64::new(0.1, 0.0));
        assert!(DensityMatrix::new(non_herm).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.2, 0.3, 0.5])).is_err());
        // pure state: Gershgorin lower bound is exactly zero
        let plus = ComplexMatrix::from_row_major(2, 2, vec![half(); 4]).unwrap();
        assert!(DensityMatrix::new(plus).is_ok());
    }

    #[test]
    fn bruteforce_examples() {
        let ghz3 = ghz_density(3).unwrap();
        let xs = [UnitVector3::X; 3];
        assert!((correlation_bruteforce(&ghz3, &xs).unwrap() - 1.0).abs() < 1e-15);
        let zs = [UnitVector3::Z; 3];
        assert!(correlation_bruteforce(&ghz3, &zs).unwrap().abs() < 1e-15);
        let ghz2 = ghz_density(2).unwrap();
        assert!((correlation_bruteforce(&ghz2, &[UnitVector3::Z; 2]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            correlation_bruteforce(&ghz2, &xs),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn lazy_and_materialized_traces_agree() {
        let rho = ghz_density(4).unwrap();
        let dirs = [[0.3, 0.1, -0.2], [1.0, 0.0, 0.5], [-0.7, 0.2, 0.1], [0.0, 0.9, -0.4]];
        let a = trace_materialized(&rho, &dirs);
        let b = trace_lazy(&rho, &dirs);
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn reduce_to_matches_repeated_partial_trace() {
        let rho = ghz_density(4).unwrap();
        let a = reduce_to(&rho, &[0, 2]).unwrap();
        let b = partial_trace(&partial_trace(&rho, 3).unwrap(), 1).unwrap();
        assert!(a.matrix().approx_eq(b.matrix(), 0.0));
    }
}
