//! Exact observables on state vectors: Pauli strings, two-point correlations,
//! reduced-density-matrix purities, and diagonal (occupation-basis)
//! expectations.

use num_complex::Complex64;

use crate::{Error, Result};

use super::operator::Pauli;
use super::state::StateVector;
use super::{bit_value, site_bit};

/// `⟨ψ| P |ψ⟩` for a Pauli string given as `(site, operator)` pairs.
///
/// Sites must be distinct and in range; identity factors may be listed but
/// change nothing. The result of a Hermitian expectation is real; the
/// imaginary residue is checked to vanish.
pub fn expect_pauli(state: &StateVector, ops: &[(usize, Pauli)]) -> Result<f64> {
    let n = state.n_qubits();
    let mut seen = vec![false; n];
    let mut flip_mask = 0usize;
    let mut y_sites: Vec<usize> = Vec::new();
    let mut z_sites: Vec<usize> = Vec::new();
    for &(site, p) in ops {
        if site >= n {
            return Err(Error::Config(format!("pauli site {site} out of range {n}")));
        }
        if seen[site] && p != Pauli::I {
            return Err(Error::Config(format!("duplicate pauli site {site}")));
        }
        seen[site] = true;
        match p {
            Pauli::I => {}
            Pauli::X => flip_mask |= 1 << site_bit(n, site),
            Pauli::Y => {
                flip_mask |= 1 << site_bit(n, site);
                y_sites.push(site);
            }
            Pauli::Z => z_sites.push(site),
        }
    }

    let amps = state.amplitudes();
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, &a) in amps.iter().enumerate() {
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        // coefficient of P|s⟩ = coef * |s ^ flip_mask⟩
        let mut coef = Complex64::new(1.0, 0.0);
        for &site in &z_sites {
            if bit_value(s, n, site) == 1 {
                coef = -coef;
            }
        }
        for &site in &y_sites {
            // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
            coef *= if bit_value(s, n, site) == 0 {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, -1.0)
            };
        }
        acc += amps[s ^ flip_mask].conj() * coef * a;
    }
    debug_assert!(acc.im.abs() < 1e-10, "non-real pauli expectation {acc}");
    Ok(acc.re)
}

/// The two-point correlation `(⟨X_iX_j⟩ + ⟨Y_iY_j⟩ + ⟨Z_iZ_j⟩) / 3`.
pub fn pauli_correlation(state: &StateVector, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::Config(format!("correlation needs two distinct sites, got {i}")));
    }
    let xx = expect_pauli(state, &[(i, Pauli::X), (j, Pauli::X)])?;
    let yy = expect_pauli(state, &[(i, Pauli::Y), (j, Pauli::Y)])?;
    let zz = expect_pauli(state, &[(i, Pauli::Z), (j, Pauli::Z)])?;
    Ok((xx + yy + zz) / 3.0)
}

/// Purity `tr ρ_A²` of the reduced density matrix on `sites`.
pub fn rdm_purity(state: &StateVector, sites: &[usize]) -> Result<f64> {
    let n = state.n_qubits();
    let mut a_sites: Vec<usize> = sites.to_vec();
    a_sites.sort_unstable();
    a_sites.dedup();
    if a_sites.len() != sites.len() {
        return Err(Error::Config("duplicate subsystem sites".into()));
    }
    if a_sites.is_empty() {
        return Err(Error::Config("empty subsystem".into()));
    }
    if *a_sites.last().unwrap() >= n {
        return Err(Error::Config(format!(
            "subsystem site {} out of range {n}",
            a_sites.last().unwrap()
        )));
    }

    // Bit positions: subsystem index bits ordered like the global convention
    // (first listed site most significant); environment bits likewise.
    let a_bits: Vec<usize> = a_sites.iter().map(|&s| site_bit(n, s)).collect();
    let in_a: Vec<bool> = {
        let mut v = vec![false; n];
        for &b in &a_bits {
            v[b] = true;
        }
        v
    };
    let e_bits: Vec<usize> = (0..n).rev().filter(|&b| !in_a[b]).collect();

    let ka = a_sites.len();
    let dim_a = 1usize << ka;
    let dim_e = 1usize << (n - ka);
    let amps = state.amplitudes();

    let mut rho = vec![Complex64::new(0.0, 0.0); dim_a * dim_a];
    let mut col = vec![Complex64::new(0.0, 0.0); dim_a];
    for e in 0..dim_e {
        let mut base = 0usize;
        for (k, &b) in e_bits.iter().enumerate() {
            if (e >> (e_bits.len() - 1 - k)) & 1 == 1 {
                base |= 1 << b;
            }
        }
        for a in 0..dim_a {
            let mut s = base;
            for (k, &b) in a_bits.iter().enumerate() {
                if (a >> (ka - 1 - k)) & 1 == 1 {
                    s |= 1 << b;
                }
            }
            col[a] = amps[s];
        }
        for u in 0..dim_a {
            for v in 0..dim_a {
                rho[u * dim_a + v] += col[u] * col[v].conj();
            }
        }
    }

    Ok(rho.iter().map(|z| z.norm_sqr()).sum())
}

/// Exact Rényi-2 entropy `-ln tr ρ_A²` of the subsystem.
pub fn renyi2_entropy_exact(state: &StateVector, sites: &[usize]) -> Result<f64> {
    let p = rdm_purity(state, sites)?;
    Ok(-p.ln())
}

/// Expectation of a function diagonal in the occupation basis:
/// `Σ_s |ψ_s|² f(s)`.
pub fn diagonal_expectation(state: &StateVector, f: impl Fn(usize) -> f64) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(s, a)| a.norm_sqr() * f(s))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CouplingGraph;
    use crate::quantum::{build_heisenberg, ground_state};
    use crate::testutil::{dense_expectation, embed, pauli_x, pauli_y, pauli_z, singlet};

    #[test]
    fn singlet_correlations_are_minus_one() {
        let psi = singlet();
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let v = expect_pauli(&psi, &[(0, p), (1, p)]).unwrap();
            assert!((v + 1.0).abs() < 1e-12, "{p:?}: {v}");
        }
        assert!((pauli_correlation(&psi, 0, 1).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_strings_match_dense_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let g = CouplingGraph::random_grid(2, 2, 0.0, 2.0, &mut rng).unwrap();
        let gs = ground_state(&build_heisenberg(&g).unwrap()).unwrap();
        let cases: Vec<Vec<(usize, Pauli)>> = vec![
            vec![(0, Pauli::Z)],
            vec![(2, Pauli::X)],
            vec![(1, Pauli::Y)],
            vec![(0, Pauli::X), (3, Pauli::X)],
            vec![(1, Pauli::Y), (2, Pauli::Y)],
            vec![(0, Pauli::Z), (1, Pauli::Z)],
            vec![(0, Pauli::Y), (1, Pauli::X), (2, Pauli::Z)],
            vec![(0, Pauli::Y), (1, Pauli::Y), (2, Pauli::Y), (3, Pauli::Y)],
        ];
        for ops in cases {
            let got = expect_pauli(&gs.state, &ops).unwrap();
            let placed: Vec<_> = ops
                .iter()
                .map(|&(s, p)| {
                    let m = match p {
                        Pauli::X => pauli_x(),
                        Pauli::Y => pauli_y(),
                        Pauli::Z => pauli_z(),
                        Pauli::I => unreachable!(),
                    };
                    (s, m)
                })
                .collect();
            let want = dense_expectation(&embed(4, &placed), &gs.state);
            assert!(want.im.abs() < 1e-10);
            assert!(
                (got - want.re).abs() < 1e-10,
                "{ops:?}: got {got}, want {}",
                want.re
            );
        }
    }

    #[test]
    fn su2_symmetry_of_heisenberg_ground_state() {
        // Total magnetization vanishes in the singlet sector.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        let g = CouplingGraph::random_grid(2, 3, 0.5, 2.0, &mut rng).unwrap();
        let gs = ground_state(&build_heisenberg(&g).unwrap()).unwrap();
        let mut total_z = 0.0;
        for i in 0..6 {
            total_z += expect_pauli(&gs.state, &[(i, Pauli::Z)]).unwrap();
        }
        assert!(total_z.abs() < 1e-8, "⟨ΣZ⟩ = {total_z}");
    }

    #[test]
    fn singlet_entropies() {
        let psi = singlet();
        assert!((rdm_purity(&psi, &[0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((renyi2_entropy_exact(&psi, &[0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        // Full system is pure.
        assert!((rdm_purity(&psi, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let psi = StateVector::basis_state(2, 0b01).unwrap();
        assert!((renyi2_entropy_exact(&psi, &[0]).unwrap()).abs() < 1e-12);
        assert!((renyi2_entropy_exact(&psi, &[1]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn purity_is_basis_cut_invariant_for_pure_bipartition() {
        // tr ρ_A² = tr ρ_B² for any pure state.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let g = CouplingGraph::random_grid(2, 2, 0.0, 2.0, &mut rng).unwrap();
        let gs = ground_state(&build_heisenberg(&g).unwrap()).unwrap();
        let pa = rdm_purity(&gs.state, &[0, 2]).unwrap();
        let pb = rdm_purity(&gs.state, &[1, 3]).unwrap();
        assert!((pa - pb).abs() < 1e-10);
    }

    #[test]
    fn diagonal_expectation_on_basis_states() {
        let psi = StateVector::basis_state(3, 0b101).unwrap();
        let occupied = diagonal_expectation(&psi, |s| s.count_ones() as f64);
        assert_eq!(occupied, 2.0);
    }

    #[test]
    fn validation_errors() {
        let psi = singlet();
        assert!(expect_pauli(&psi, &[(2, Pauli::X)]).is_err());
        assert!(expect_pauli(&psi, &[(0, Pauli::X), (0, Pauli::Y)]).is_err());
        assert!(pauli_correlation(&psi, 1, 1).is_err());
        assert!(rdm_purity(&psi, &[]).is_err());
        assert!(rdm_purity(&psi, &[0, 0]).is_err());
        assert!(rdm_purity(&psi, &[5]).is_err());
    }
}
