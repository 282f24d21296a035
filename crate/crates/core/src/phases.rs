//! Rydberg order parameters, phase classification, and phase-diagram tables.
//!
//! All functions consume occupation-basis measurement records: one `u8` per
//! site, `1` meaning the site was found in the Rydberg state and `0` the
//! ground state. Records may come from real sampling, from a generative
//! model, or (for exact references) from a ground-state wave function via
//! [`exact_phase_point`].
//!
//! Two families of order parameters are implemented:
//!
//! - **1D chains** — sublattice occupations `O_Z2` (period 2) and `O_Z3`
//!   (period 3). By default each is normalized by its sublattice size, so a
//!   perfect pattern scores exactly 1.0 regardless of chain length; the
//!   per-site normalization (divide by `n`) is available through
//!   [`ChainNorm::PerSite`].
//! - **2D grids** — single-shot Fourier amplitudes `F(k) = |Σ_i e^{i k·x_i}
//!   N_i| / √n` averaged over shots, combined into the checkboard, striated,
//!   star, and staggered order parameters.
//!
//! Classification applies fixed thresholds (0.7 / 0.6 in 1D; 0.65 after
//! rescaling in 2D) and deterministic tie-breaking, so the same inputs always
//! yield the same label.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{bit_value, RydbergParams, StateVector};

/// Occupation threshold for 1D Z2 classification.
pub const Z2_THRESHOLD: f64 = 0.7;
/// Occupation threshold for 1D Z3 classification.
pub const Z3_THRESHOLD: f64 = 0.6;
/// Shared threshold for the rescaled 2D order parameters.
pub const THRESHOLD_2D: f64 = 0.65;
/// Rescaling divisor applied to the checkboard order parameter.
pub const CHECKBOARD_SCALE: f64 = 1.6;
/// Rescaling divisor applied to the striated order parameter.
pub const STRIATED_SCALE: f64 = 0.8;

/// Normalization convention for the 1D sublattice order parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChainNorm {
    /// Divide by the sublattice size `m`, so perfect patterns score 1.0 and
    /// the classification thresholds are attainable at every chain length.
    #[default]
    Sublattice,
    /// Divide by the total site count `n`; a perfect Z2 pattern on 7 sites
    /// scores 4/7 under this convention.
    PerSite,
}

/// Phase labels assigned by the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLabel {
    Disordered,
    Z2,
    Z3,
    Checkboard,
    Striated,
    Star,
    Staggered,
}

impl PhaseLabel {
    /// Stable lowercase name used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Disordered => "disordered",
            PhaseLabel::Z2 => "Z2",
            PhaseLabel::Z3 => "Z3",
            PhaseLabel::Checkboard => "checkboard",
            PhaseLabel::Striated => "striated",
            PhaseLabel::Star => "star",
            PhaseLabel::Staggered => "staggered",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four 2D order parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order2d {
    Checkboard,
    Striated,
    Star,
    Staggered,
}

fn check_records(records: &[Vec<u8>], n_sites: usize) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Estimation(
            "order parameters need at least one measurement record".into(),
        ));
    }
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != n_sites {
            return Err(Error::Incompatible(format!(
                "record {i} has {} sites, expected {n_sites}",
                rec.len()
            )));
        }
        if let Some(&t) = rec.iter().find(|&&t| t > 1) {
            return Err(Error::Incompatible(format!(
                "record {i} contains outcome {t}; occupation-basis records must be 0/1"
            )));
        }
    }
    Ok(())
}

fn sublattice_order(records: &[Vec<u8>], period: usize, norm: ChainNorm) -> Result<f64> {
    let n = records
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Estimation("order parameters need at least one measurement record".into()))?;
    check_records(records, n)?;
    let m = n.div_ceil(period);
    let denom = match norm {
        ChainNorm::Sublattice => m as f64,
        ChainNorm::PerSite => n as f64,
    };
    let mut total = 0.0;
    for rec in records {
        let occupied: u32 = rec.iter().step_by(period).map(|&t| u32::from(t)).sum();
        total += f64::from(occupied) / denom;
    }
    Ok(total / records.len() as f64)
}

/// Z2 sublattice occupation: mean over shots of the occupation on sites
/// 0, 2, 4, … divided by the normalizer chosen by `norm`.
pub fn order_z2(records: &[Vec<u8>], norm: ChainNorm) -> Result<f64> {
    sublattice_order(records, 2, norm)
}

/// Z3 sublattice occupation: mean over shots of the occupation on sites
/// 0, 3, 6, … divided by the normalizer chosen by `norm`.
pub fn order_z3(records: &[Vec<u8>], norm: ChainNorm) -> Result<f64> {
    sublattice_order(records, 3, norm)
}

/// Single-shot Fourier amplitude averaged over shots.
///
/// Sites are laid out row-major on a `rows × cols` grid, and the phase of
/// site `(r, c)` is `k1·c + k2·r` (components of `k` in units of the inverse
/// lattice spacing). Each shot contributes `|Σ_i e^{i k·x_i} N_i| / √n`.
pub fn fourier_amplitude(
    records: &[Vec<u8>],
    rows: usize,
    cols: usize,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    let n = rows * cols;
    check_records(records, n)?;
    let root_n = (n as f64).sqrt();
    let mut total = 0.0;
    for rec in records {
        let (mut re, mut im) = (0.0, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                if rec[r * cols + c] == 1 {
                    let phase = k1 * c as f64 + k2 * r as f64;
                    re += phase.cos();
                    im += phase.sin();
                }
            }
        }
        total += re.hypot(im) / root_n;
    }
    Ok(total / records.len() as f64)
}

/// Symmetrized Fourier amplitude `(F(k1,k2) + F(k2,k1)) / 2`.
pub fn symmetric_fourier(
    records: &[Vec<u8>],
    rows: usize,
    cols: usize,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    let a = fourier_amplitude(records, rows, cols, k1, k2)?;
    let b = fourier_amplitude(records, rows, cols, k2, k1)?;
    Ok(0.5 * (a + b))
}

/// One of the four 2D order parameters on a `rows × cols` grid.
///
/// - checkboard: `F(π,π) − F̃(π,0)`
/// - striated: `F̃(π,0) − F̃(π/2,π)`
/// - star: `F̃(π,π/2)`
/// - staggered: mean of `F(±π/2, ±π/2)` over the four sign choices
///
/// Errors if the grid is not genuinely two-dimensional (both `rows ≥ 2` and
/// `cols ≥ 2`).
pub fn order_2d(
    records: &[Vec<u8>],
    rows: usize,
    cols: usize,
    which: Order2d,
) -> Result<f64> {
    if rows < 2 || cols < 2 {
        return Err(Error::Incompatible(format!(
            "2D order parameters need rows >= 2 and cols >= 2, got {rows}x{cols}"
        )));
    }
    match which {
        Order2d::Checkboard => {
            let f_pp = fourier_amplitude(records, rows, cols, PI, PI)?;
            let f_p0 = symmetric_fourier(records, rows, cols, PI, 0.0)?;
            Ok(f_pp - f_p0)
        }
        Order2d::Striated => {
            let f_p0 = symmetric_fourier(records, rows, cols, PI, 0.0)?;
            let f_hp = symmetric_fourier(records, rows, cols, FRAC_PI_2, PI)?;
            Ok(f_p0 - f_hp)
        }
        Order2d::Star => symmetric_fourier(records, rows, cols, PI, FRAC_PI_2),
        Order2d::Staggered => {
            let mut total = 0.0;
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    total +=
                        fourier_amplitude(records, rows, cols, s1 * FRAC_PI_2, s2 * FRAC_PI_2)?;
                }
            }
            Ok(total / 4.0)
        }
    }
}

/// Classify a 1D chain from its (sublattice-normalized) order parameters.
///
/// Z2 fires above 0.7 and Z3 above 0.6; when both fire, the label with the
/// larger margin over its threshold wins, with exact ties going to Z2.
pub fn classify_1d(o_z2: f64, o_z3: f64) -> PhaseLabel {
    let m2 = o_z2 - Z2_THRESHOLD;
    let m3 = o_z3 - Z3_THRESHOLD;
    match (m2 > 0.0, m3 > 0.0) {
        (true, true) => {
            if m3 > m2 {
                PhaseLabel::Z3
            } else {
                PhaseLabel::Z2
            }
        }
        (true, false) => PhaseLabel::Z2,
        (false, true) => PhaseLabel::Z3,
        (false, false) => PhaseLabel::Disordered,
    }
}

/// Classify a 2D grid from its checkboard, striated, and staggered order
/// parameters.
///
/// Values are first rescaled (checkboard / 1.6, striated / 0.8, staggered
/// unchanged); any rescaled value above 0.65 is a candidate, the largest
/// wins, and exact ties go to the first candidate in the order checkboard,
/// striated, staggered.
pub fn classify_2d(checkboard: f64, striated: f64, staggered: f64) -> PhaseLabel {
    let candidates = [
        (checkboard / CHECKBOARD_SCALE, PhaseLabel::Checkboard),
        (striated / STRIATED_SCALE, PhaseLabel::Striated),
        (staggered, PhaseLabel::Staggered),
    ];
    let mut best: Option<(f64, PhaseLabel)> = None;
    for (value, label) in candidates {
        if value > THRESHOLD_2D && best.is_none_or(|(b, _)| value > b) {
            best = Some((value, label));
        }
    }
    best.map_or(PhaseLabel::Disordered, |(_, label)| label)
}

/// One evaluated grid point of a phase diagram: the system parameters, all
/// order-parameter values (the inapplicable family is zero), the assigned
/// label, and where the measurements came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub r0_over_a: f64,
    pub delta_over_omega: f64,
    pub time: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub o_z2: f64,
    pub o_z3: f64,
    pub o_checkboard: f64,
    pub o_striated: f64,
    pub o_star: f64,
    pub o_staggered: f64,
    pub label: PhaseLabel,
    /// Provenance of the measurements, e.g. `"dataset"`, `"model"`,
    /// `"exact"`, or `"baseline_t0"`.
    pub source: String,
}

impl PhasePoint {
    /// Evaluate every order parameter on a batch of occupation-basis records
    /// and classify the point.
    ///
    /// Chains (a single row or column) get the Z2/Z3 parameters and the 1D
    /// classifier; genuine grids get the four Fourier parameters and the 2D
    /// classifier. The other family's columns are left at zero.
    pub fn from_records(
        params: &RydbergParams,
        records: &[Vec<u8>],
        source: &str,
    ) -> Result<Self> {
        let (rows, cols) = (params.n_rows, params.n_cols);
        check_records(records, rows * cols)?;
        let mut point = PhasePoint {
            r0_over_a: params.r0_over_a(),
            delta_over_omega: params.delta_over_omega(),
            time: params.time,
            n_rows: rows,
            n_cols: cols,
            o_z2: 0.0,
            o_z3: 0.0,
            o_checkboard: 0.0,
            o_striated: 0.0,
            o_star: 0.0,
            o_staggered: 0.0,
            label: PhaseLabel::Disordered,
            source: source.to_string(),
        };
        if rows < 2 || cols < 2 {
            point.o_z2 = order_z2(records, ChainNorm::Sublattice)?;
            point.o_z3 = order_z3(records, ChainNorm::Sublattice)?;
            point.label = classify_1d(point.o_z2, point.o_z3);
        } else {
            point.o_checkboard = order_2d(records, rows, cols, Order2d::Checkboard)?;
            point.o_striated = order_2d(records, rows, cols, Order2d::Striated)?;
            point.o_star = order_2d(records, rows, cols, Order2d::Star)?;
            point.o_staggered = order_2d(records, rows, cols, Order2d::Staggered)?;
            point.label = classify_2d(point.o_checkboard, point.o_striated, point.o_staggered);
        }
        Ok(point)
    }

    /// CSV header matching [`PhasePoint::csv_row`].
    pub fn csv_header() -> &'static str {
        "R0_over_a,delta_over_omega,T,n_rows,n_cols,O_z2,O_z3,O_checkboard,O_striated,O_star,O_staggered,label,source"
    }

    /// One CSV row (no trailing newline). Floats use the shortest
    /// round-trippable decimal form, so output is deterministic.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.r0_over_a,
            self.delta_over_omega,
            self.time,
            self.n_rows,
            self.n_cols,
            self.o_z2,
            self.o_z3,
            self.o_checkboard,
            self.o_striated,
            self.o_star,
            self.o_staggered,
            self.label,
            self.source
        )
    }
}

/// Render a full phase-diagram table as CSV (header plus one row per point,
/// each line `\n`-terminated).
pub fn phase_csv(points: &[PhasePoint]) -> String {
    let mut out = String::from(PhasePoint::csv_header());
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

/// Evaluate a [`PhasePoint`] exactly from a wave function instead of sampled
/// records.
///
/// Expectation values of the order parameters are taken over the Born
/// distribution of occupation-basis outcomes: every basis state contributes
/// its order-parameter value weighted by its probability. This equals the
/// infinite-shot limit of [`PhasePoint::from_records`] on samples from
/// `state`.
pub fn exact_phase_point(
    state: &StateVector,
    params: &RydbergParams,
    source: &str,
) -> Result<PhasePoint> {
    let n = params.n_sites();
    if state.n_qubits() != n {
        return Err(Error::Incompatible(format!(
            "state has {} qubits but the lattice has {n} sites",
            state.n_qubits()
        )));
    }
    let mut point = PhasePoint {
        r0_over_a: params.r0_over_a(),
        delta_over_omega: params.delta_over_omega(),
        time: params.time,
        n_rows: params.n_rows,
        n_cols: params.n_cols,
        o_z2: 0.0,
        o_z3: 0.0,
        o_checkboard: 0.0,
        o_striated: 0.0,
        o_star: 0.0,
        o_staggered: 0.0,
        label: PhaseLabel::Disordered,
        source: source.to_string(),
    };
    let chain = params.n_rows < 2 || params.n_cols < 2;
    let mut tokens = vec![0u8; n];
    for (basis, amp) in state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (site, t) in tokens.iter_mut().enumerate() {
            *t = bit_value(basis, n, site) as u8;
        }
        let rec = std::slice::from_ref(&tokens);
        if chain {
            point.o_z2 += p * order_z2(rec, ChainNorm::Sublattice)?;
            point.o_z3 += p * order_z3(rec, ChainNorm::Sublattice)?;
        } else {
            let (rows, cols) = (params.n_rows, params.n_cols);
            point.o_checkboard += p * order_2d(rec, rows, cols, Order2d::Checkboard)?;
            point.o_striated += p * order_2d(rec, rows, cols, Order2d::Striated)?;
            point.o_star += p * order_2d(rec, rows, cols, Order2d::Star)?;
            point.o_staggered += p * order_2d(rec, rows, cols, Order2d::Staggered)?;
        }
    }
    point.label = if chain {
        classify_1d(point.o_z2, point.o_z3)
    } else {
        classify_2d(point.o_checkboard, point.o_striated, point.o_staggered)
    };
    Ok(point)
}
