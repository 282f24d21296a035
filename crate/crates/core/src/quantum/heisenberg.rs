//! Heisenberg Hamiltonians on coupling graphs.
//!
//! `H(x) = Σ_{(i,j) ∈ E} x_ij (X_i X_j + Y_i Y_j + Z_i Z_j)`.

use crate::graph::{CouplingGraph, Edge};
use crate::{Error, Result};

use super::operator::Hamiltonian;
use super::{site_bit, MAX_QUBITS};

/// Matrix-free Heisenberg operator.
///
/// In the computational basis each edge contributes a diagonal `± w` from
/// `Z_i Z_j` (+ for equal bits, − for unequal) and, when the two bits differ,
/// an off-diagonal `2w` between `s` and `s` with both bits flipped
/// (`X_i X_j + Y_i Y_j` swaps `|01⟩ ↔ |10⟩` with amplitude 2 and annihilates
/// aligned pairs). The matrix is manifestly real symmetric.
#[derive(Debug, Clone)]
pub struct HeisenbergOperator {
    n: usize,
    /// Per edge: (flip mask of the two sites, weight).
    terms: Vec<(usize, f64)>,
    edges: Vec<Edge>,
}

/// Build the Heisenberg operator for a coupling graph.
pub fn build_heisenberg(graph: &CouplingGraph) -> Result<HeisenbergOperator> {
    let n = graph.n_sites();
    if n > MAX_QUBITS {
        return Err(Error::TooLarge {
            n,
            limit: MAX_QUBITS,
        });
    }
    let terms = graph
        .edges()
        .iter()
        .map(|e| ((1 << site_bit(n, e.a)) | (1 << site_bit(n, e.b)), e.w))
        .collect();
    Ok(HeisenbergOperator {
        n,
        terms,
        edges: graph.edges().to_vec(),
    })
}

impl HeisenbergOperator {
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Classical (diagonal) energy of basis state `s`: the `Z_i Z_j` part.
    pub fn diagonal_energy(&self, s: usize) -> f64 {
        let mut e = 0.0;
        for &(mask, w) in &self.terms {
            // Bits equal on the edge → +w, unequal → −w.
            let differing = (s & mask).count_ones() == 1;
            e += if differing { -w } else { w };
        }
        e
    }
}

impl Hamiltonian for HeisenbergOperator {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        debug_assert_eq!(y.len(), dim);
        for s in 0..dim {
            y[s] = self.diagonal_energy(s) * x[s];
        }
        for &(mask, w) in &self.terms {
            let c = 2.0 * w;
            for s in 0..dim {
                // Only anti-aligned edges hop; the partner index is s ^ mask.
                if (s & mask).count_ones() == 1 {
                    y[s ^ mask] += c * x[s];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dense_heisenberg_oracle;

    #[test]
    fn two_site_spectrum_is_singlet_triplet() {
        let g = CouplingGraph::chain(2, 1.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let m = h.dense();
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-3.0, 1.0, 1.0, 1.0];
        for (got, want) in evs.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-12, "got {evs:?}");
        }
    }

    #[test]
    fn matches_kron_oracle_on_random_graphs() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for (rows, cols) in [(1, 2), (1, 3), (2, 2), (2, 3)] {
            let g = CouplingGraph::random_grid(rows, cols, 0.0, 2.0, &mut rng).unwrap();
            let h = build_heisenberg(&g).unwrap();
            let got = h.dense();
            let want = dense_heisenberg_oracle(&g);
            let dim = got.nrows();
            for i in 0..dim {
                for j in 0..dim {
                    assert!(
                        (got[(i, j)] - want[(i, j)]).abs() < 1e-12,
                        "mismatch at ({i},{j}) on {rows}x{cols}"
                    );
                }
            }
        }
    }

    #[test]
    fn dense_matrix_is_exactly_symmetric() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let g = CouplingGraph::random_grid(2, 3, 0.0, 2.0, &mut rng).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let m = h.dense();
        for i in 0..m.nrows() {
            for j in 0..i {
                assert_eq!(m[(i, j)], m[(j, i)], "asymmetry at ({i},{j})");
            }
        }
    }

    #[test]
    fn zero_couplings_give_zero_operator() {
        let g = CouplingGraph::grid(2, 2, 0.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let x = vec![0.5; 16];
        let mut y = vec![1.0; 16];
        h.apply_real(&x, &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_oversized_lattices() {
        let g = CouplingGraph::grid(1, 17, 1.0).unwrap();
        assert!(matches!(
            build_heisenberg(&g),
            Err(crate::Error::TooLarge { .. })
        ));
    }
}
