//! Exact quantum mechanics on small systems: states, Hamiltonians,
//! diagonalization, time evolution, and observables.
//!
//! # Conventions
//!
//! A basis state of `n` qubits is an integer index `s` in `0..2^n`. Site `i`
//! (row-major on the lattice) occupies bit `n - 1 - i`, i.e. **site 0 is the
//! most significant bit**. Written as an `n`-character string left to right,
//! a measurement outcome therefore reads as the binary expansion of `s`, and
//! lexicographic order on strings equals integer order on indices.
//!
//! Tensor products follow the same order: `kron(A_0, A_1, ..., A_{n-1})`
//! places site 0's factor leftmost.
//!
//! Energies are dimensionless for Heisenberg models and in rad/µs for Rydberg
//! models (times in µs, distances in µm).

mod eig;
mod evolve;
mod heisenberg;
mod observables;
mod operator;
mod rydberg;
mod state;

pub use eig::{ground_state, ground_state_dense, ground_state_lanczos, GroundState};
pub use evolve::{evolve, evolve_with_snapshots, suggested_dt, Schedule};
pub use heisenberg::{build_heisenberg, HeisenbergOperator};
pub use observables::{
    diagonal_expectation, expect_pauli, pauli_correlation, rdm_purity, renyi2_entropy_exact,
};
pub use operator::{Hamiltonian, Pauli};
pub use rydberg::{blockade_radius, build_rydberg, RydbergOperator, RydbergParams, V0};
pub use state::StateVector;

/// Hard cap on exact-methods system size (state vectors of `2^16` amplitudes).
pub const MAX_QUBITS: usize = 16;

/// Largest size the dense eigensolver accepts.
pub const DENSE_MAX_QUBITS: usize = 12;

/// Bit position of `site` within an `n`-qubit basis index.
#[inline]
pub fn site_bit(n: usize, site: usize) -> usize {
    debug_assert!(site < n);
    n - 1 - site
}

/// Value (0 or 1) of `site`'s bit in basis index `s`.
#[inline]
pub fn bit_value(s: usize, n: usize, site: usize) -> usize {
    (s >> site_bit(n, site)) & 1
}
