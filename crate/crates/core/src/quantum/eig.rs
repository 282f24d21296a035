//! Ground states by exact diagonalization.
//!
//! Dense symmetric eigensolve for small systems; restarted Lanczos with full
//! reorthogonalization for larger ones (up to the 16-qubit cap). Both paths
//! verify the residual `‖Hψ − E ψ‖` before returning, tie-break degenerate
//! ground spaces the same deterministic way, and fix the global phase.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::{Error, Result};

use super::operator::Hamiltonian;
use super::state::StateVector;
use super::DENSE_MAX_QUBITS;

/// Energy and state returned by the diagonalization routines.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
}

/// Relative gap below which eigenvalues count as one degenerate cluster.
const DEGENERACY_RTOL: f64 = 1e-9;

/// Residual target for `‖Hψ − Eψ‖` (absolute, with a machine-precision
/// allowance that scales with the spectral range of H).
fn residual_target(scale: f64, dim: usize) -> f64 {
    (1e-8f64).max(1e-13 * scale.max(1.0) * (dim as f64).sqrt())
}

/// Fixed seed for the Lanczos start vector: results are bit-identical across
/// runs and independent of any caller RNG.
const LANCZOS_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Compute the ground state, choosing dense diagonalization for n ≤ 9 and
/// Lanczos above (both verified to the same residual target).
pub fn ground_state(op: &dyn Hamiltonian) -> Result<GroundState> {
    if op.n_qubits() <= 9 {
        ground_state_dense(op)
    } else {
        ground_state_lanczos(op)
    }
}

/// Dense-path ground state (n ≤ 12).
///
/// The dense solve supplies eigenvalues (and so the degeneracy structure) to
/// near machine precision, but its eigenvectors lose accuracy when the
/// excited spectrum is clustered, as it heavily is for SU(2)-symmetric
/// Hamiltonians. Each bottom-cluster vector is therefore polished with a few
/// matrix-free Lanczos restarts before the residual contract is enforced.
pub fn ground_state_dense(op: &dyn Hamiltonian) -> Result<GroundState> {
    let n = op.n_qubits();
    if n > DENSE_MAX_QUBITS {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_MAX_QUBITS,
        });
    }
    let dim = op.dim();
    let eig = nalgebra::SymmetricEigen::new(op.dense());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let e0 = eig.eigenvalues[order[0]];
    let scale = eig.eigenvalues.amax();

    // Gather the (near-)degenerate bottom cluster.
    let gap_tol = DEGENERACY_RTOL * scale.max(1.0);
    let cluster: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&k| eig.eigenvalues[k] - e0 <= gap_tol)
        .collect();

    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(cluster.len());
    for &k in &cluster {
        let start: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let (_, polished, _) = lanczos_extremal(op, start, &vecs)?;
        vecs.push(polished);
    }
    let psi = anchor_in_span(&vecs);
    finish(op, e0, psi, scale)
}

/// Lanczos-path ground state (any n up to the crate cap).
///
/// Restarted Lanczos with full two-pass reorthogonalization and an explicit
/// residual check per restart. Near-degenerate ground pairs are resolved by
/// converging a second deflated vector and anchoring inside the span, so the
/// returned state matches the dense path's deterministic tie-break.
pub fn ground_state_lanczos(op: &dyn Hamiltonian) -> Result<GroundState> {
    let dim = op.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(LANCZOS_SEED);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v0);

    let (e0, psi1, scale) = lanczos_extremal(op, v0, &[])?;

    // Probe for a degenerate partner: run a deflated solve and keep the pair
    // only if its energy actually ties.
    let gap_tol = DEGENERACY_RTOL * scale.max(1.0);
    let mut basis = vec![psi1];
    if dim > 1 {
        let mut w0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut w0, &basis);
        let wnorm = norm(&w0);
        if wnorm > 1e-12 {
            for x in &mut w0 {
                *x /= wnorm;
            }
            if let Ok((e1, psi2, _)) = lanczos_extremal(op, w0, &basis) {
                if e1 - e0 <= gap_tol {
                    basis.push(psi2);
                }
            }
        }
    }
    let psi = anchor_in_span(&basis);
    finish(op, e0, psi, scale)
}

/// One restarted-Lanczos solve for the smallest eigenpair of H restricted to
/// the orthogonal complement of `deflate`. Returns (energy, vector, scale).
fn lanczos_extremal(
    op: &dyn Hamiltonian,
    start: Vec<f64>,
    deflate: &[Vec<f64>],
) -> Result<(f64, Vec<f64>, f64)> {
    let dim = op.dim();
    let block = 48.min(dim);
    let max_restarts = 400;

    let mut v0 = start;
    let mut scale = 1.0f64;
    let mut best_res = f64::INFINITY;
    let mut stall = 0;

    for iter in 0..max_restarts {
        let mut vs: Vec<Vec<f64>> = Vec::with_capacity(block);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        orthogonalize(&mut v0, deflate);
        let n0 = norm(&v0);
        if n0 < 1e-14 {
            return Err(Error::NoConvergence {
                residual: f64::INFINITY,
                iters: iter,
                target: residual_target(scale, dim),
            });
        }
        for x in &mut v0 {
            *x /= n0;
        }
        vs.push(v0.clone());

        let mut w = vec![0.0; dim];
        for k in 0..block {
            op.apply_real(&vs[k], &mut w);
            let alpha = dot(&vs[k], &w);
            alphas.push(alpha);
            for i in 0..dim {
                w[i] -= alpha * vs[k][i];
            }
            if k > 0 {
                let beta_prev = betas[k - 1];
                for i in 0..dim {
                    w[i] -= beta_prev * vs[k - 1][i];
                }
            }
            // Full reorthogonalization (two passes) against the Krylov basis
            // and the deflation space.
            for _ in 0..2 {
                orthogonalize(&mut w, &vs);
                orthogonalize(&mut w, deflate);
            }
            let beta = norm(&w);
            scale = scale.max(alpha.abs() + beta);
            if k + 1 == block || beta < 1e-12 * scale.max(1.0) {
                break;
            }
            betas.push(beta);
            let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
            vs.push(next);
        }

        // Smallest Ritz pair of the tridiagonal.
        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for k in 0..m {
            t[(k, k)] = alphas[k];
            if k + 1 < m {
                t[(k, k + 1)] = betas[k];
                t[(k + 1, k)] = betas[k];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let mut kmin = 0;
        for k in 1..m {
            if eig.eigenvalues[k] < eig.eigenvalues[kmin] {
                kmin = k;
            }
        }
        let y = eig.eigenvectors.column(kmin);
        let mut psi = vec![0.0; dim];
        for k in 0..m {
            let c = y[k];
            for i in 0..dim {
                psi[i] += c * vs[k][i];
            }
        }
        orthogonalize(&mut psi, deflate);
        normalize(&mut psi);

        // True residual check.
        let mut hpsi = vec![0.0; dim];
        op.apply_real(&psi, &mut hpsi);
        let theta = dot(&psi, &hpsi);
        let mut res2 = 0.0;
        for i in 0..dim {
            let r = hpsi[i] - theta * psi[i];
            res2 += r * r;
        }
        let res = res2.sqrt();
        let target = residual_target(scale, dim);
        if res <= target {
            return Ok((theta, psi, scale));
        }
        if res < best_res * 0.99 {
            best_res = res;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 8 {
                return Err(Error::NoConvergence {
                    residual: res,
                    iters: iter + 1,
                    target,
                });
            }
        }
        v0 = psi;
    }
    Err(Error::NoConvergence {
        residual: best_res,
        iters: max_restarts,
        target: residual_target(scale, dim),
    })
}

/// Deterministic representative of a (possibly degenerate) eigenspace: the
/// projection of the lexicographically smallest dominant basis vector onto
/// the span. With a single vector this reduces to the vector itself (up to
/// sign, fixed later by the global-phase rule).
fn anchor_in_span(basis: &[Vec<f64>]) -> Vec<f64> {
    if basis.len() == 1 {
        return basis[0].clone();
    }
    let dim = basis[0].len();
    let mut pmax = 0.0f64;
    let mut pdiag = vec![0.0; dim];
    for j in 0..dim {
        let p: f64 = basis.iter().map(|v| v[j] * v[j]).sum();
        pdiag[j] = p;
        pmax = pmax.max(p);
    }
    let anchor = (0..dim)
        .find(|&j| pdiag[j] > 1e-10 * pmax.max(1e-300))
        .unwrap_or(0);
    let mut psi = vec![0.0; dim];
    for v in basis {
        let c = v[anchor];
        for i in 0..dim {
            psi[i] += c * v[i];
        }
    }
    normalize(&mut psi);
    psi
}

/// Final residual verification, complexification, and phase fixing.
fn finish(op: &dyn Hamiltonian, energy: f64, psi: Vec<f64>, scale: f64) -> Result<GroundState> {
    let dim = op.dim();
    let mut hpsi = vec![0.0; dim];
    op.apply_real(&psi, &mut hpsi);
    let energy_out = dot(&psi, &hpsi);
    let mut res2 = 0.0;
    for i in 0..dim {
        let r = hpsi[i] - energy_out * psi[i];
        res2 += r * r;
    }
    let res = res2.sqrt();
    let target = residual_target(scale, dim);
    if !res.is_finite() || res > target {
        return Err(Error::NoConvergence {
            residual: res,
            iters: 0,
            target,
        });
    }
    // Use the cluster energy when it was provided (dense path); the Rayleigh
    // quotient agrees within the residual target anyway.
    let energy = if energy.is_finite() { energy } else { energy_out };
    let amps: Vec<Complex64> = psi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut state = StateVector::new(op.n_qubits(), amps)?;
    state.fix_global_phase();
    Ok(GroundState { energy, state })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    for x in a {
        *x /= n;
    }
}

/// Subtract the projection of `w` onto each vector in `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for v in basis {
        let c = dot(w, v);
        for i in 0..w.len() {
            w[i] -= c * v[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CouplingGraph;
    use crate::quantum::{build_heisenberg, build_rydberg, RydbergParams};

    #[test]
    fn two_site_heisenberg_ground_is_the_singlet() {
        let g = CouplingGraph::chain(2, 1.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 3.0).abs() < 1e-10);
        let singlet = crate::testutil::singlet();
        assert!(gs.state.overlap(&singlet) > 1.0 - 1e-10);
        // Deterministic sign: amplitude at |01⟩ (index 1) is +1/√2.
        let a = gs.state.amplitudes()[1];
        assert!((a.re - 0.5f64.sqrt()).abs() < 1e-10 && a.im.abs() < 1e-12);
    }

    #[test]
    fn plaquette_ground_energy_matches_oracle() {
        // Uniform 2x2 Heisenberg plaquette: E0 = -8 (two-fold check against
        // the independent kron oracle's dense spectrum).
        let g = CouplingGraph::grid(2, 2, 1.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 8.0).abs() < 1e-9, "E0 = {}", gs.energy);

        let dense = crate::testutil::dense_heisenberg_oracle(&g);
        let eig = nalgebra::SymmetricEigen::new(dense);
        let emin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!((gs.energy - emin).abs() < 1e-9);
    }

    #[test]
    fn lanczos_agrees_with_dense_on_random_heisenberg() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let g = CouplingGraph::random_grid(2, 3, 0.0, 2.0, &mut rng).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let dense = ground_state_dense(&h).unwrap();
        let lanc = ground_state_lanczos(&h).unwrap();
        assert!((dense.energy - lanc.energy).abs() < 1e-8);
        assert!(dense.state.overlap(&lanc.state) > 1.0 - 1e-8);
    }

    #[test]
    fn lanczos_handles_ten_qubit_chain() {
        let g = CouplingGraph::chain(10, 1.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        let gs = ground_state(&h).unwrap(); // auto → Lanczos for n = 10
        // Residual contract rather than a magic number: verify Hψ ≈ Eψ.
        let dim = 1 << 10;
        let mut hpsi = vec![0.0; dim];
        let psi: Vec<f64> = gs.state.amplitudes().iter().map(|a| a.re).collect();
        h.apply_real(&psi, &mut hpsi);
        let mut res2 = 0.0;
        for i in 0..dim {
            let r = hpsi[i] - gs.energy * psi[i];
            res2 += r * r;
        }
        assert!(res2.sqrt() < 1e-7, "residual {}", res2.sqrt());
        // Antiferromagnetic chain: E0/n in the known window around -1.7.
        assert!(gs.energy < -14.0 && gs.energy > -19.0);
    }

    #[test]
    fn degenerate_ground_space_anchors_smallest_basis_state() {
        // Ω = 0 on a 6-chain with Δ = 2 V(2a): the classical minimum is the
        // mirror-image pair of three-excitation patterns {0,2,5} = |101001⟩
        // (41) and {0,3,5} = |100101⟩ (37), exactly degenerate by reflection.
        // The tie-break must anchor the smaller index, 37, on both paths.
        let a = 6.0f64;
        let v2 = crate::quantum::V0 / (2.0 * a).powi(6);
        let p = RydbergParams {
            n_rows: 1,
            n_cols: 6,
            spacing: a,
            omega: 0.0,
            delta: 2.0 * v2,
            time: 0.0,
        };
        let h = build_rydberg(&p).unwrap();
        assert!(
            (h.diagonal_energy(0b100101) - h.diagonal_energy(0b101001)).abs()
                < 1e-12 * v2,
            "test premise: the mirror pair should be degenerate"
        );

        let gs = ground_state_dense(&h).unwrap();
        let probs = gs.state.probabilities();
        assert!(
            (probs[0b100101] - 1.0).abs() < 1e-9,
            "dense path picked {probs:?}"
        );

        let gl = ground_state_lanczos(&h).unwrap();
        let probs = gl.state.probabilities();
        assert!(
            (probs[0b100101] - 1.0).abs() < 1e-9,
            "lanczos path disagrees: {probs:?}"
        );
        assert!((gs.energy - gl.energy).abs() < 1e-9 * gs.energy.abs().max(1.0));
    }

    #[test]
    fn dense_rejects_beyond_cap() {
        let g = CouplingGraph::chain(13, 1.0).unwrap();
        let h = build_heisenberg(&g).unwrap();
        assert!(matches!(
            ground_state_dense(&h),
            Err(Error::TooLarge { .. })
        ));
    }
}
