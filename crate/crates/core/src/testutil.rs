//! Test-only oracles built by a deliberately different route than the library
//! code: explicit Kronecker products of 2x2 matrices and dense linear algebra.
//! Unit tests compare the fast implementations against these.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::graph::CouplingGraph;
use crate::quantum::StateVector;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn id2() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)])
}

pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Occupation-number operator |1⟩⟨1| on one qubit.
pub fn number_op() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)])
}

/// Kronecker product, left factor slowest (site 0 leftmost).
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `op` placed on the listed sites (same op on each), identity elsewhere.
pub fn embed(n: usize, sites_ops: &[(usize, DMatrix<Complex64>)]) -> DMatrix<Complex64> {
    let mut acc = DMatrix::from_element(1, 1, c(1., 0.));
    for site in 0..n {
        let factor = sites_ops
            .iter()
            .find(|(s, _)| *s == site)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(id2);
        acc = kron(&acc, &factor);
    }
    acc
}

/// Heisenberg Hamiltonian assembled term by term via Kronecker products.
pub fn dense_heisenberg_oracle(graph: &CouplingGraph) -> DMatrix<f64> {
    let n = graph.n_sites();
    let dim = 1usize << n;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for e in graph.edges() {
        for op in [pauli_x(), pauli_y(), pauli_z()] {
            h += embed(n, &[(e.a, op.clone()), (e.b, op.clone())]).scale(e.w);
        }
    }
    realize(&h)
}

/// Rydberg Hamiltonian on a grid, assembled via Kronecker products.
/// Positions: site (r, c) at (c*a, r*a) in µm.
pub fn dense_rydberg_oracle(
    rows: usize,
    cols: usize,
    spacing: f64,
    omega: f64,
    delta: f64,
) -> DMatrix<f64> {
    let n = rows * cols;
    let dim = 1usize << n;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..n {
        h += embed(n, &[(i, pauli_x())]).scale(omega / 2.0);
        h += embed(n, &[(i, number_op())]).scale(-delta);
    }
    let pos = |i: usize| {
        let (r, c) = (i / cols, i % cols);
        (c as f64 * spacing, r as f64 * spacing)
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let (xi, yi) = pos(i);
            let (xj, yj) = pos(j);
            let d2 = (xi - xj).powi(2) + (yi - yj).powi(2);
            let v = crate::quantum::V0 / d2.powi(3);
            h += embed(n, &[(i, number_op()), (j, number_op())]).scale(v);
        }
    }
    realize(&h)
}

/// Assert the imaginary part vanishes and return the real part.
pub fn realize(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            assert!(
                m[(i, j)].im.abs() < 1e-12,
                "unexpected imaginary entry at ({i},{j})"
            );
            out[(i, j)] = m[(i, j)].re;
        }
    }
    out
}

/// Exact evolution `exp(-i H t) ψ` of a time-independent real-symmetric H
/// via its eigendecomposition.
pub fn matexp_evolve(h: &DMatrix<f64>, psi: &StateVector, t: f64) -> StateVector {
    let dim = h.nrows();
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    // coeffs in the eigenbasis
    let mut coeff = vec![c(0., 0.); dim];
    for k in 0..dim {
        for s in 0..dim {
            coeff[k] += c(eig.eigenvectors[(s, k)], 0.0) * psi.amplitudes()[s];
        }
    }
    let mut out = vec![c(0., 0.); dim];
    for k in 0..dim {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for s in 0..dim {
            out[s] += c(eig.eigenvectors[(s, k)], 0.0) * phase * coeff[k];
        }
    }
    StateVector::new(psi.n_qubits(), out).unwrap()
}

/// The two-qubit singlet `(|01⟩ - |10⟩)/√2`.
pub fn singlet() -> StateVector {
    let r = 0.5f64.sqrt();
    StateVector::new(2, vec![c(0., 0.), c(r, 0.), c(-r, 0.), c(0., 0.)]).unwrap()
}

/// ⟨ψ|M|ψ⟩ for a dense complex observable.
pub fn dense_expectation(m: &DMatrix<Complex64>, psi: &StateVector) -> Complex64 {
    let dim = m.nrows();
    let a = psi.amplitudes();
    let mut acc = c(0., 0.);
    for i in 0..dim {
        for j in 0..dim {
            acc += a[i].conj() * m[(i, j)] * a[j];
        }
    }
    acc
}
