//! Rydberg-atom array Hamiltonians.
//!
//! `H = (Ω/2) Σ_i X_i − Δ Σ_i N_i + Σ_{i<j} V0 / |r_i − r_j|^6 N_i N_j`
//! with `N = |r⟩⟨r|` the occupation of the excited (Rydberg) level, atoms on
//! a rectangular grid of spacing `a` (µm), and all rates in rad/µs.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::operator::Hamiltonian;
use super::MAX_QUBITS;

/// Interaction strength of the Rydberg level pair: `862690 · 2π rad/µs · µm^6`.
pub const V0: f64 = 862_690.0 * std::f64::consts::TAU;

/// Blockade radius `R0 = (V0 / Ω)^{1/6}` in µm: the distance at which the
/// pair interaction equals the Rabi frequency.
pub fn blockade_radius(omega: f64) -> f64 {
    (V0 / omega).powf(1.0 / 6.0)
}

/// Physical parameters of one Rydberg-array system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergParams {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Lattice spacing `a` in µm.
    pub spacing: f64,
    /// Rabi frequency Ω in rad/µs.
    pub omega: f64,
    /// Detuning Δ in rad/µs.
    pub delta: f64,
    /// Evolution time in µs; 0 means the exact ground state.
    pub time: f64,
}

impl RydbergParams {
    pub fn n_sites(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Dimensionless blockade-to-spacing ratio `R0/a`.
    pub fn r0_over_a(&self) -> f64 {
        blockade_radius(self.omega) / self.spacing
    }

    /// Dimensionless detuning `Δ/Ω`.
    pub fn delta_over_omega(&self) -> f64 {
        self.delta / self.omega
    }

    /// Construct from the dimensionless sweep coordinates at fixed Ω.
    pub fn from_dimensionless(
        n_rows: usize,
        n_cols: usize,
        r0_over_a: f64,
        delta_over_omega: f64,
        omega: f64,
        time: f64,
    ) -> Result<Self> {
        if r0_over_a <= 0.0 || !r0_over_a.is_finite() {
            return Err(Error::Config(format!("bad R0/a = {r0_over_a}")));
        }
        Ok(RydbergParams {
            n_rows,
            n_cols,
            spacing: blockade_radius(omega) / r0_over_a,
            omega,
            delta: delta_over_omega * omega,
            time,
        })
    }
}

/// Matrix-free Rydberg operator with the interaction diagonal precomputed.
///
/// The diagonal splits as `v_energy[s] − Δ · popcount(s)` (interactions are
/// Δ-independent), so the same operator serves time-dependent evolution where
/// Ω and Δ follow a schedule: see [`apply_with`](RydbergOperator::apply_with).
#[derive(Debug, Clone)]
pub struct RydbergOperator {
    n: usize,
    omega: f64,
    delta: f64,
    /// Pairwise interaction energy of each basis state.
    v_energy: Vec<f64>,
}

/// Build the Rydberg operator for a grid of `rows x cols` atoms.
pub fn build_rydberg(params: &RydbergParams) -> Result<RydbergOperator> {
    let n = params.n_sites();
    if n == 0 {
        return Err(Error::Config("empty atom array".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::TooLarge {
            n,
            limit: MAX_QUBITS,
        });
    }
    if !(params.spacing.is_finite() && params.spacing > 0.0) {
        return Err(Error::Config(format!("bad lattice spacing {}", params.spacing)));
    }
    if !params.omega.is_finite() || !params.delta.is_finite() {
        return Err(Error::Config("non-finite drive parameters".into()));
    }

    // Pair potentials from grid geometry: site i = (r, c) at (c·a, r·a).
    let cols = params.n_cols;
    let a = params.spacing;
    let mut v_pair = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (ri, ci) = ((i / cols) as f64, (i % cols) as f64);
            let (rj, cj) = ((j / cols) as f64, (j % cols) as f64);
            let d2 = a * a * ((ri - rj).powi(2) + (ci - cj).powi(2));
            v_pair[i * n + j] = V0 / d2.powi(3);
        }
    }

    // Interaction energy of every basis state. Site i occupies bit n-1-i,
    // but the sum over occupied pairs only needs consistent indexing.
    let dim = 1usize << n;
    let mut v_energy = vec![0.0; dim];
    for s in 0..dim {
        let mut e = 0.0;
        for i in 0..n {
            if (s >> (n - 1 - i)) & 1 == 1 {
                for j in (i + 1)..n {
                    if (s >> (n - 1 - j)) & 1 == 1 {
                        e += v_pair[i * n + j];
                    }
                }
            }
        }
        v_energy[s] = e;
    }

    Ok(RydbergOperator {
        n,
        omega: params.omega,
        delta: params.delta,
        v_energy,
    })
}

impl RydbergOperator {
    /// Diagonal element `⟨s|H|s⟩ = v_energy[s] − Δ · (number of excited atoms)`.
    pub fn diagonal_energy(&self, s: usize) -> f64 {
        self.v_energy[s] - self.delta * (s.count_ones() as f64)
    }

    /// `y = H(Ω, Δ) x` for complex vectors with explicit drive parameters —
    /// the building block for time-dependent evolution.
    pub fn apply_with(
        &self,
        omega: f64,
        delta: f64,
        x: &[num_complex::Complex64],
        y: &mut [num_complex::Complex64],
    ) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        debug_assert_eq!(y.len(), dim);
        for s in 0..dim {
            let d = self.v_energy[s] - delta * (s.count_ones() as f64);
            y[s] = x[s] * d;
        }
        let half = omega / 2.0;
        for b in 0..self.n {
            let mask = 1usize << b;
            for s in 0..dim {
                y[s] += x[s ^ mask] * half;
            }
        }
    }

    /// Largest |diagonal| entry plus the off-diagonal row sum `n·Ω/2`:
    /// an upper bound on the spectral radius, used for step-size control.
    pub fn spectral_bound(&self, omega: f64, delta: f64) -> f64 {
        let mut dmax = 0.0f64;
        for (s, v) in self.v_energy.iter().enumerate() {
            dmax = dmax.max((v - delta * s.count_ones() as f64).abs());
        }
        dmax + self.n as f64 * omega.abs() / 2.0
    }
}

impl Hamiltonian for RydbergOperator {
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
        let half = self.omega / 2.0;
        for b in 0..self.n {
            let mask = 1usize << b;
            for s in 0..dim {
                y[s] += half * x[s ^ mask];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dense_rydberg_oracle;

    fn params(rows: usize, cols: usize, a: f64, omega: f64, delta: f64) -> RydbergParams {
        RydbergParams {
            n_rows: rows,
            n_cols: cols,
            spacing: a,
            omega,
            delta,
            time: 0.0,
        }
    }

    #[test]
    fn blockade_radius_at_default_rabi() {
        // Ω = 2π·4 rad/µs → R0 = (862690/4)^{1/6} µm ≈ 7.744 µm.
        let omega = std::f64::consts::TAU * 4.0;
        let r0 = blockade_radius(omega);
        assert!((r0 - 7.7440).abs() < 1e-3, "r0 = {r0}");
        // At distance R0 the pair interaction equals Ω by definition.
        assert!((V0 / r0.powi(6) - omega).abs() < 1e-9);
    }

    #[test]
    fn matches_kron_oracle_on_small_arrays() {
        let omega = std::f64::consts::TAU * 4.0;
        for (rows, cols) in [(1, 2), (1, 3), (2, 2)] {
            let p = params(rows, cols, 6.5, omega, 1.7 * omega);
            let h = build_rydberg(&p).unwrap();
            let got = h.dense();
            let want = dense_rydberg_oracle(rows, cols, 6.5, omega, 1.7 * omega);
            let dim = got.nrows();
            let scale = want.amax();
            for i in 0..dim {
                for j in 0..dim {
                    assert!(
                        (got[(i, j)] - want[(i, j)]).abs() <= 1e-12 * scale,
                        "mismatch at ({i},{j}) on {rows}x{cols}"
                    );
                }
            }
        }
    }

    #[test]
    fn diagonal_matches_classical_energy_enumeration() {
        // 1x3 chain: basis states enumerated by hand.
        // Sites at 0, a, 2a; V_nn = V0/a^6, V_nnn = V0/(2a)^6.
        let a = 5.0f64;
        let omega = 10.0;
        let delta = 3.0;
        let p = params(1, 3, a, omega, delta);
        let h = build_rydberg(&p).unwrap();
        let vnn = V0 / a.powi(6);
        let vnnn = V0 / (2.0 * a).powi(6);
        // index: site0 site1 site2 = bits msb..lsb
        let want = [
            0.0,                              // 000
            -delta,                           // 001
            -delta,                           // 010
            -2.0 * delta + vnn,               // 011 (sites 1,2 adjacent)
            -delta,                           // 100
            -2.0 * delta + vnnn,              // 101 (sites 0,2)
            -2.0 * delta + vnn,               // 110 (sites 0,1)
            -3.0 * delta + 2.0 * vnn + vnnn,  // 111
        ];
        for (s, want) in want.iter().enumerate() {
            let got = h.diagonal_energy(s);
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "s = {s}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn apply_with_matches_trait_apply_at_build_parameters() {
        use num_complex::Complex64;
        let omega = std::f64::consts::TAU * 4.0;
        let p = params(1, 4, 6.0, omega, 2.0 * omega);
        let h = build_rydberg(&p).unwrap();
        let dim = 16;
        let x: Vec<Complex64> = (0..dim)
            .map(|s| Complex64::new((s as f64 * 0.37).sin(), (s as f64 * 0.11).cos()))
            .collect();
        let mut y1 = vec![Complex64::new(0.0, 0.0); dim];
        let mut y2 = vec![Complex64::new(0.0, 0.0); dim];
        h.apply(&x, &mut y1);
        h.apply_with(omega, 2.0 * omega, &x, &mut y2);
        for s in 0..dim {
            assert!((y1[s] - y2[s]).norm() < 1e-12);
        }
    }

    #[test]
    fn dimensionless_construction_round_trips() {
        let omega = std::f64::consts::TAU * 4.0;
        let p = RydbergParams::from_dimensionless(1, 7, 1.7, 3.0, omega, 0.0).unwrap();
        assert!((p.r0_over_a() - 1.7).abs() < 1e-12);
        assert!((p.delta_over_omega() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_bound_dominates_eigenvalues() {
        let omega = std::f64::consts::TAU * 4.0;
        let p = params(1, 4, 5.0, omega, 2.0 * omega);
        let h = build_rydberg(&p).unwrap();
        let bound = h.spectral_bound(omega, 2.0 * omega);
        let eig = nalgebra::SymmetricEigen::new(h.dense());
        for ev in eig.eigenvalues.iter() {
            assert!(ev.abs() <= bound + 1e-9);
        }
    }
}
