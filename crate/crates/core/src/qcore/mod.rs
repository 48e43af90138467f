//! Dense complex linear algebra, Pauli observables, GHZ states and the
//! brute-force correlation trace used as ground truth for closed forms.

mod matrix;
mod state;
mod vector;

pub use matrix::{kron, pauli_dot, pauli_dot_linear, ComplexMatrix};
pub use state::{
    correlation_bruteforce, correlation_bruteforce_linear, ghz_density, partial_trace, reduce_to,
    DensityMatrix, MAX_QUBITS,
};
pub use vector::{wrap_tau, SphericalAngles, UnitVector3};
