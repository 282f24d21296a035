//! The Hamiltonian abstraction: matrix-free application plus dense assembly.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Single-qubit Pauli operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// A Hermitian operator on `n` qubits with a real matrix representation in
/// the computational basis (both model Hamiltonians here are real symmetric).
///
/// Implementations provide matrix-free application; dense assembly is derived
/// and intended for small systems (eigensolvers, tests).
pub trait Hamiltonian {
    fn n_qubits(&self) -> usize;

    /// `y = H x` for a real vector. Overwrites `y`.
    fn apply_real(&self, x: &[f64], y: &mut [f64]);

    fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// `y = H x` for a complex vector. Overwrites `y`.
    ///
    /// Default: two real applications (real symmetric matrix).
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        debug_assert_eq!(y.len(), dim);
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        let xr: Vec<f64> = x.iter().map(|a| a.re).collect();
        let xi: Vec<f64> = x.iter().map(|a| a.im).collect();
        self.apply_real(&xr, &mut re);
        self.apply_real(&xi, &mut im);
        for s in 0..dim {
            y[s] = Complex64::new(re[s], im[s]);
        }
    }

    /// Dense real matrix, assembled column by column through `apply_real`.
    fn dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            self.apply_real(&e, &mut col);
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}
