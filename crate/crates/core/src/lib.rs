//! Numerical laboratory for exactly solvable quantum spin chains.
//!
//! The transverse-field Ising and XY chains are mapped to quadratic fermion
//! forms ([`chain_model`]), solved by a Bogoliubov transformation
//! ([`free_fermion`]) and analysed through their ground-state entanglement
//! ([`entanglement`]) and finite-size scaling ([`scaling`]). Everything is
//! checked against brute-force exact diagonalization in the spin basis
//! ([`ed_oracle`]). Two smaller modules handle Bell/CHSH correlations
//! ([`quantum_probability`]) and the GNS construction on finite-dimensional
//! *-algebras ([`algebraic_states`]).

pub mod algebraic_states;
pub mod chain_model;
pub mod cli;
pub mod ed_oracle;
pub mod entanglement;
mod error;
pub mod free_fermion;
pub mod linalg;
pub mod optimize;
pub mod quantum_probability;
pub mod scaling;

pub use chain_model::{Boundary, ChainSpec, Model, MomentumGrid, Parity, QuadraticForm};
pub use entanglement::EntanglementReport;
pub use error::{Error, Result};
pub use free_fermion::{BogoliubovSolution, CorrelationPair};

/// Binary Shannon entropy `-p ln p - (1-p) ln(1-p)` with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    xlogx(p) + xlogx(1.0 - p)
}

/// `-x ln x`, zero at the endpoints and for anything non-positive.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}
