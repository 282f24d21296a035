//! Normalized state vectors.

use num_complex::Complex64;

use super::MAX_QUBITS;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-10;

/// A normalized pure state of `n ≤ 16` qubits.
///
/// Amplitudes are indexed by basis integers under the crate's site/bit
/// convention (site 0 = most significant bit). The invariant `|‖ψ‖ - 1| ≤
/// 1e-10` is checked at construction.
#[derive(Debug, Clone)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wrap raw amplitudes, validating length and normalization.
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::TooLarge {
                n,
                limit: MAX_QUBITS,
            });
        }
        if amps.len() != 1 << n {
            return Err(Error::Config(format!(
                "state of {n} qubits needs {} amplitudes, got {}",
                1usize << n,
                amps.len()
            )));
        }
        let state = StateVector { n, amps };
        let norm = state.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NonFinite {
                context: format!("state vector norm {norm}"),
            });
        }
        Ok(state)
    }

    /// Computational basis state `|s⟩`.
    pub fn basis_state(n: usize, s: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::TooLarge {
                n,
                limit: MAX_QUBITS,
            });
        }
        let dim = 1usize << n;
        if s >= dim {
            return Err(Error::Config(format!("basis index {s} out of range {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[s] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// The all-zeros state `|00...0⟩` (all atoms in the ground level).
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescale to unit norm (used internally after integrator steps).
    pub(crate) fn renormalize(&mut self) {
        let norm = self.norm();
        for a in &mut self.amps {
            *a /= norm;
        }
    }

    /// Born probabilities `|ψ_s|^2` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        debug_assert_eq!(self.n, other.n);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Squared overlap `|⟨self|other⟩|^2`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Remove the global phase: the largest-magnitude amplitude is made real
    /// and positive (ties keep the earliest index).
    pub fn fix_global_phase(&mut self) {
        let mut k = 0;
        let mut best = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best {
                best = m;
                k = i;
            }
        }
        if best == 0.0 {
            return;
        }
        let phase = self.amps[k] / self.amps[k].norm();
        let rot = phase.conj();
        for a in &mut self.amps {
            *a *= rot;
        }
        // Scrub the residual imaginary dust on the anchor amplitude.
        self.amps[k] = Complex64::new(self.amps[k].re, 0.0);
    }
}
