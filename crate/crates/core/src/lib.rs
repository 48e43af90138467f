//! Numerical laboratory for N-partite Leggett-type inequalities.
//!
//! The crate pairs every closed-form quantum prediction with a brute-force
//! oracle, implements the Leggett nonlocal-realistic model as a sampler and
//! verifier, and scans/optimizes the tripartite GHZ violation.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod ghzform;
pub mod ineq;
pub mod optim;
pub mod oracle;
pub mod qcore;
pub mod rng;
pub mod tolerance;

pub use error::{Error, Result};
