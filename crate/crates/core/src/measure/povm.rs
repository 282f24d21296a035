//! Measurement bases and the Pauli-6 POVM.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which single-site measurement produced a dataset's tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Random Pauli basis per site: tokens 0..6 = X+, X−, Y+, Y−, Z+, Z−;
    /// each outcome has POVM element (1/3)|b⟩⟨b|.
    Pauli6,
    /// Fixed occupation-number measurement: tokens 0 = ground, 1 = excited.
    ZBasis,
}

impl Basis {
    pub fn vocab_size(&self) -> usize {
        match self {
            Basis::Pauli6 => 6,
            Basis::ZBasis => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Basis::Pauli6 => "pauli6",
            Basis::ZBasis => "zbasis",
        }
    }
}

/// Display labels for Pauli-6 tokens in token order.
pub const PAULI6_TOKENS: [&str; 6] = ["X+", "X-", "Y+", "Y-", "Z+", "Z-"];

/// Display labels for occupation-basis tokens.
pub const ZBASIS_TOKENS: [&str; 2] = ["g", "r"];

type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unnormalized projector |b⟩⟨b| onto the eigenstate behind a Pauli-6 token.
///
/// Eigenstates: |x±⟩ = (|0⟩ ± |1⟩)/√2, |y±⟩ = (|0⟩ ± i|1⟩)/√2, |z+⟩ = |0⟩,
/// |z−⟩ = |1⟩. The POVM element is this divided by 3; summed over all six
/// tokens the unnormalized projectors add to exactly 3·I in floating point
/// (every entry is a sum of exactly representable halves), which the
/// completeness test exploits.
pub fn pauli6_projector(token: u8) -> Mat2 {
    match token {
        0 => [[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]],
        1 => [[c(0.5, 0.0), c(-0.5, 0.0)], [c(-0.5, 0.0), c(0.5, 0.0)]],
        2 => [[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.5, 0.0)]],
        3 => [[c(0.5, 0.0), c(0.0, 0.5)], [c(0.0, -0.5), c(0.5, 0.0)]],
        4 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]],
        5 => [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        _ => panic!("pauli6 token out of range: {token}"),
    }
}

/// Single-site shadow factor `3|b⟩⟨b| − I` for a Pauli-6 token: the inverse
/// measurement channel applied to one observed outcome. Has unit trace.
pub fn pauli6_factor(token: u8) -> Mat2 {
    let p = pauli6_projector(token);
    let mut f = [[c(0.0, 0.0); 2]; 2];
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            f[i][j] = v * 3.0;
        }
        f[i][i] -= 1.0;
    }
    f
}
