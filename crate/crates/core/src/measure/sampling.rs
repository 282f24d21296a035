//! Drawing measurement records from exact states.
//!
//! Pauli-6 sampling picks a uniformly random axis (X, Y, Z) per site per
//! shot, rotates the state into the corresponding product basis, and samples
//! one joint outcome from the exact Born distribution — outcomes across sites
//! carry the state's full correlations. Occupation-basis sampling draws
//! directly from `|ψ_s|²`.

use num_complex::Complex64;
use rand::Rng;

use crate::quantum::{site_bit, StateVector};
use crate::{Error, Result};

use super::povm::Basis;

/// Derive an independent substream seed from a base seed, a stream tag, and
/// an index (SplitMix64 mixing — unlike plain XOR this cannot collide across
/// (tag, index) pairs in practice).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)) ^ splitmix64(index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What to sample; bundles the arguments that travel together.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub basis: Basis,
    pub shots: usize,
}

/// Draw `spec.shots` measurement records from `state`.
///
/// Each record is one token per site (site order). The RNG fully determines
/// the output: same state, spec, and RNG stream → identical records.
pub fn sample_records<R: Rng>(
    state: &StateVector,
    spec: SampleSpec,
    rng: &mut R,
) -> Result<Vec<Vec<u8>>> {
    match spec.basis {
        Basis::ZBasis => sample_zbasis(state, spec.shots, rng),
        Basis::Pauli6 => sample_pauli6(state, spec.shots, rng),
    }
}

fn sample_zbasis<R: Rng>(state: &StateVector, shots: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    let n = state.n_qubits();
    let probs = state.probabilities();
    let mut out = Vec::with_capacity(shots);
    for _ in 0..shots {
        let s = draw_index(&probs, rng);
        out.push(index_to_tokens(s, n, 1));
    }
    Ok(out)
}

fn sample_pauli6<R: Rng>(state: &StateVector, shots: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    let n = state.n_qubits();
    let dim = state.dim();
    let mut rotated = vec![Complex64::new(0.0, 0.0); dim];
    let mut out = Vec::with_capacity(shots);
    let mut probs = vec![0.0f64; dim];
    for _ in 0..shots {
        // Uniform random measurement axis per site: 0 = X, 1 = Y, 2 = Z.
        let axes: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3u8)).collect();

        rotated.copy_from_slice(state.amplitudes());
        for (site, &axis) in axes.iter().enumerate() {
            match axis {
                0 => apply_single_qubit(&mut rotated, n, site, &H_GATE),
                1 => apply_single_qubit(&mut rotated, n, site, &HSDG_GATE),
                _ => {}
            }
        }
        for (s, a) in rotated.iter().enumerate() {
            probs[s] = a.norm_sqr();
        }
        let s = draw_index(&probs, rng);
        let mut tokens = index_to_tokens(s, n, 1);
        for (site, t) in tokens.iter_mut().enumerate() {
            *t += 2 * axes[site]; // axis block + sign bit
        }
        out.push(tokens);
    }
    Ok(out)
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Hadamard: maps X eigenstates onto the computational basis.
const H_GATE: [[Complex64; 2]; 2] = [
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    ],
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ],
];

/// H·S†: maps Y eigenstates onto the computational basis.
const HSDG_GATE: [[Complex64; 2]; 2] = [
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, -FRAC_1_SQRT_2),
    ],
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, FRAC_1_SQRT_2),
    ],
];

fn apply_single_qubit(amps: &mut [Complex64], n: usize, site: usize, u: &[[Complex64; 2]; 2]) {
    let mask = 1usize << site_bit(n, site);
    for s in 0..amps.len() {
        if s & mask == 0 {
            let a = amps[s];
            let b = amps[s | mask];
            amps[s] = u[0][0] * a + u[0][1] * b;
            amps[s | mask] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// Inverse-CDF draw from an (unnormalized up to rounding) probability vector.
fn draw_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    probs.len() - 1 // rounding dust at the top end
}

/// Expand a basis index into per-site tokens (bit of site i, scaled by
/// `stride` — 1 for plain bits).
fn index_to_tokens(s: usize, n: usize, stride: u8) -> Vec<u8> {
    (0..n)
        .map(|site| stride * ((s >> site_bit(n, site)) & 1) as u8)
        .collect()
}

/// Validate that every record has `n` tokens within the basis vocabulary.
pub fn validate_tokens(records: &[Vec<u8>], n: usize, basis: Basis) -> Result<()> {
    let vocab = basis.vocab_size() as u8;
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != n {
            return Err(Error::Config(format!(
                "record {i} has {} tokens, expected {n}",
                rec.len()
            )));
        }
        if let Some(&t) = rec.iter().find(|&&t| t >= vocab) {
            return Err(Error::Config(format!(
                "record {i} token {t} outside {} vocabulary",
                basis.name()
            )));
        }
    }
    Ok(())
}
