//! Classical-shadow estimators over Pauli-6 measurement records.
//!
//! Every record of tokens (one per site, 0..6 = X+, X−, Y+, Y−, Z+, Z−)
//! defines a product snapshot `⊗_q F_t` with single-site factors
//! `F_t = 3|b_t⟩⟨b_t| − I`. Snapshots average to the state: Pauli
//! expectations become means of per-record weights in {0, ±3} per site, and
//! subsystem purities become second-order U-statistics over record pairs.
//! The estimators here work on token counts, so their results are exactly
//! invariant under record reordering.

use crate::quantum::Pauli;
use crate::{Error, Result};

/// Cap on subsystem size for purity estimation (joint-token tables grow as
/// `36^k`).
pub const MAX_PURITY_SITES: usize = 4;

/// An estimate with its diagnostics: `value` is the reported (possibly
/// clipped/transformed) estimate, `raw` the untouched statistic, `n` the
/// number of records (or pairs) used, `std_err` a standard-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowEstimate {
    pub value: f64,
    pub raw: f64,
    pub n: usize,
    pub std_err: f64,
}

fn check_records(records: &[Vec<u8>], min: usize) -> Result<usize> {
    if records.len() < min {
        return Err(Error::Estimation(format!(
            "need at least {min} records, got {}",
            records.len()
        )));
    }
    let n_sites = records[0].len();
    for (i, r) in records.iter().enumerate() {
        if r.len() != n_sites {
            return Err(Error::Estimation(format!(
                "record {i} has {} tokens, expected {n_sites}",
                r.len()
            )));
        }
        if r.iter().any(|&t| t > 5) {
            return Err(Error::Estimation(format!(
                "record {i} contains non-pauli6 tokens"
            )));
        }
    }
    Ok(n_sites)
}

/// Per-record shadow weight of a Pauli string: the product over the string's
/// sites of `tr(P F_t) = ±3` on axis match, 0 otherwise.
fn snapshot_weight(tokens: &[u8], ops: &[(usize, Pauli)]) -> f64 {
    let mut w = 1.0;
    for &(site, p) in ops {
        let axis = match p {
            Pauli::I => continue,
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        };
        let t = tokens[site];
        if (t / 2) as usize != axis {
            return 0.0;
        }
        w *= if t % 2 == 0 { 3.0 } else { -3.0 };
    }
    w
}

/// Per-record estimator values for one Pauli string (useful for
/// median-of-means or custom aggregation).
pub fn pauli_snapshot_values(records: &[Vec<u8>], ops: &[(usize, Pauli)]) -> Result<Vec<f64>> {
    let n_sites = check_records(records, 1)?;
    let mut seen = vec![false; n_sites];
    for &(site, p) in ops {
        if site >= n_sites {
            return Err(Error::Estimation(format!(
                "pauli site {site} out of range {n_sites}"
            )));
        }
        if seen[site] && p != Pauli::I {
            return Err(Error::Estimation(format!("duplicate pauli site {site}")));
        }
        seen[site] = true;
    }
    Ok(records
        .iter()
        .map(|r| snapshot_weight(r, ops))
        .collect())
}

/// Shadow estimate of `⟨P⟩` for one Pauli string: the mean snapshot weight.
pub fn estimate_pauli(records: &[Vec<u8>], ops: &[(usize, Pauli)]) -> Result<ShadowEstimate> {
    let vals = pauli_snapshot_values(records, ops)?;
    let (mean, se) = mean_and_se(&vals);
    Ok(ShadowEstimate {
        value: mean,
        raw: mean,
        n: vals.len(),
        std_err: se,
    })
}

/// Shadow estimate of the two-point correlation
/// `(⟨X_iX_j⟩ + ⟨Y_iY_j⟩ + ⟨Z_iZ_j⟩)/3`, clipped into `[-1, 1]`.
///
/// The three strings are combined per record before averaging, so the
/// standard error accounts for their (anti-)correlations.
pub fn estimate_correlation(records: &[Vec<u8>], i: usize, j: usize) -> Result<ShadowEstimate> {
    if i == j {
        return Err(Error::Estimation(format!(
            "correlation needs distinct sites, got {i}"
        )));
    }
    let xs = pauli_snapshot_values(records, &[(i, Pauli::X), (j, Pauli::X)])?;
    let ys = pauli_snapshot_values(records, &[(i, Pauli::Y), (j, Pauli::Y)])?;
    let zs = pauli_snapshot_values(records, &[(i, Pauli::Z), (j, Pauli::Z)])?;
    let combined: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .zip(&zs)
        .map(|((x, y), z)| (x + y + z) / 3.0)
        .collect();
    let (mean, se) = mean_and_se(&combined);
    Ok(ShadowEstimate {
        value: mean.clamp(-1.0, 1.0),
        raw: mean,
        n: combined.len(),
        std_err: se,
    })
}

/// Single-site factor overlap table `tr(F_a F_b)`: 5 on identical tokens,
/// −4 on same-axis opposite-sign, 1/2 across axes.
fn trace_table() -> [[f64; 6]; 6] {
    let mut t = [[0.5; 6]; 6];
    for a in 0..6 {
        t[a][a] = 5.0;
        t[a][a ^ 1] = -4.0;
    }
    t
}

/// Shadow estimate of the subsystem purity `tr ρ_A²`: the U-statistic
/// `(2/N(N-1)) Σ_{i<j} Π_{q∈A} tr(F_{i,q} F_{j,q})`, evaluated from joint
/// token counts in `O(N + 36^|A|)`. Standard error by leave-one-out
/// jackknife. `raw` equals `value` (no clipping at this level).
pub fn estimate_purity(records: &[Vec<u8>], sites: &[usize]) -> Result<ShadowEstimate> {
    let n_sites = check_records(records, 2)?;
    let mut a_sites = sites.to_vec();
    a_sites.sort_unstable();
    a_sites.dedup();
    if a_sites.len() != sites.len() || sites.is_empty() {
        return Err(Error::Estimation("subsystem sites must be distinct and non-empty".into()));
    }
    if *a_sites.last().unwrap() >= n_sites {
        return Err(Error::Estimation(format!(
            "subsystem site {} out of range {n_sites}",
            a_sites.last().unwrap()
        )));
    }
    if a_sites.len() > MAX_PURITY_SITES {
        return Err(Error::Estimation(format!(
            "subsystem of {} sites exceeds the purity-estimation cap {MAX_PURITY_SITES}",
            a_sites.len()
        )));
    }

    let k = a_sites.len();
    let dim = 6usize.pow(k as u32);
    let table = trace_table();

    // Joint-token kernel K[u][v] = Π_q tr(F_{u_q} F_{v_q}).
    let mut kernel = vec![1.0f64; dim * dim];
    for u in 0..dim {
        for v in 0..dim {
            let (mut uu, mut vv) = (u, v);
            let mut prod = 1.0;
            for _ in 0..k {
                prod *= table[uu % 6][vv % 6];
                uu /= 6;
                vv /= 6;
            }
            kernel[u * dim + v] = prod;
        }
    }

    // Joint token of each record and the count table.
    let joint: Vec<usize> = records
        .iter()
        .map(|r| {
            a_sites
                .iter()
                .rev()
                .fold(0usize, |acc, &q| acc * 6 + r[q] as usize)
        })
        .collect();
    let mut cnt = vec![0.0f64; dim];
    for &u in &joint {
        cnt[u] += 1.0;
    }

    // Row sums R[u] = Σ_v K[u][v] cnt[v]; pair sum from counts.
    let mut row = vec![0.0f64; dim];
    let mut full = 0.0;
    let mut diag = 0.0;
    for u in 0..dim {
        if cnt[u] == 0.0 {
            // Row still needed for jackknife only if some record has token u,
            // which is exactly cnt[u] > 0 — skip.
            continue;
        }
        let mut s = 0.0;
        for v in 0..dim {
            s += kernel[u * dim + v] * cnt[v];
        }
        row[u] = s;
        full += cnt[u] * s;
        diag += cnt[u] * kernel[u * dim + u];
    }
    let n = records.len() as f64;
    let pair_sum = (full - diag) / 2.0;
    let purity = pair_sum / (n * (n - 1.0) / 2.0);

    // Leave-one-out jackknife; θ only depends on a record's joint token, so
    // it is aggregated over the count table (keeping the result independent
    // of record order down to the bit).
    let mut se = 0.0;
    if records.len() >= 3 {
        let m = (n - 1.0) * (n - 2.0) / 2.0;
        let theta = |u: usize| (pair_sum - (row[u] - kernel[u * dim + u])) / m;
        let mean: f64 = (0..dim)
            .filter(|&u| cnt[u] > 0.0)
            .map(|u| cnt[u] * theta(u))
            .sum::<f64>()
            / n;
        let var: f64 = (0..dim)
            .filter(|&u| cnt[u] > 0.0)
            .map(|u| {
                let d = theta(u) - mean;
                cnt[u] * d * d
            })
            .sum::<f64>()
            * (n - 1.0)
            / n;
        se = var.sqrt();
    }

    Ok(ShadowEstimate {
        value: purity,
        raw: purity,
        n: records.len(),
        std_err: se,
    })
}

/// Shadow estimate of the Rényi-2 entropy `−ln tr ρ_A²`.
///
/// The purity estimate is clamped into `[2^{-|A|}·10^{-3}, 1]` before the
/// logarithm so statistical fluctuations cannot produce infinities; `raw`
/// carries the unclamped purity and the standard error propagates through
/// the log at the clamped point.
pub fn estimate_renyi2(records: &[Vec<u8>], sites: &[usize]) -> Result<ShadowEstimate> {
    let p = estimate_purity(records, sites)?;
    let floor = 2f64.powi(-(sites.len() as i32)) * 1e-3;
    let clamped = p.value.clamp(floor, 1.0);
    Ok(ShadowEstimate {
        value: -clamped.ln(),
        raw: p.value,
        n: p.n,
        std_err: p.std_err / clamped,
    })
}

/// Median of `k` contiguous group means (robust aggregation for heavy-tailed
/// snapshot values). `k` must be in `1..=len`.
pub fn median_of_means(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::Estimation(format!(
            "median-of-means needs 1 ≤ k ≤ {}, got {k}",
            values.len()
        )));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..k)
        .map(|g| {
            let lo = g * n / k;
            let hi = (g + 1) * n / k;
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    })
}

fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{pauli6_factor, sample_records, Basis, SampleSpec};
    use crate::quantum::{expect_pauli, StateVector};
    use crate::testutil::singlet;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn trace_table_matches_matrix_products() {
        let t = trace_table();
        for a in 0..6u8 {
            for b in 0..6u8 {
                let fa = pauli6_factor(a);
                let fb = pauli6_factor(b);
                let mut tr = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        tr += fa[i][j] * fb[j][i];
                    }
                }
                assert!(tr.im.abs() < 1e-15);
                assert!(
                    (t[a as usize][b as usize] - tr.re).abs() < 1e-15,
                    "T[{a}][{b}]"
                );
            }
        }
    }

    /// Exhaustively enumerate the sampling distribution of a single qubit
    /// and verify the shadow weight averages to the exact expectation.
    #[test]
    fn single_qubit_estimator_is_exactly_unbiased() {
        let amps = vec![
            Complex64::new(0.6, 0.1),
            Complex64::new(-0.5, (1.0f64 - 0.62).sqrt() * -1.0),
        ];
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::new(1, amps.into_iter().map(|a| a / norm).collect()).unwrap();

        // p(token) = (1/3)·⟨b|ρ|b⟩ from the projectors.
        let probs: Vec<f64> = (0..6u8)
            .map(|t| {
                let p = crate::measure::pauli6_projector(t);
                let a = psi.amplitudes();
                let mut val = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        val += a[i].conj() * p[i][j] * a[j];
                    }
                }
                val.re / 3.0
            })
            .collect();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-14);

        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let mut mean = 0.0;
            for t in 0..6u8 {
                mean += probs[t as usize] * snapshot_weight(&[t], &[(0, p)]);
            }
            let want = expect_pauli(&psi, &[(0, p)]).unwrap();
            assert!((mean - want).abs() < 1e-12, "{p:?}: {mean} vs {want}");
        }
    }

    fn singlet_records(shots: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        sample_records(
            &singlet(),
            SampleSpec {
                basis: Basis::Pauli6,
                shots,
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn singlet_correlation_estimate() {
        let recs = singlet_records(20_000, 11);
        let est = estimate_correlation(&recs, 0, 1).unwrap();
        assert!(
            (est.value + 1.0).abs() < 0.05,
            "C = {} ± {}",
            est.value,
            est.std_err
        );
        assert!(est.std_err < 0.02);
        // Clipping: raw can drift below -1, value cannot.
        assert!(est.value >= -1.0);
    }

    #[test]
    fn singlet_entropy_estimate() {
        let recs = singlet_records(20_000, 12);
        let est = estimate_renyi2(&recs, &[0]).unwrap();
        assert!(
            (est.value - 2f64.ln()).abs() < 0.1,
            "S2 = {} (raw purity {})",
            est.value,
            est.raw
        );
        // Pair subsystem of the pure singlet: purity 1, entropy 0.
        let est2 = estimate_renyi2(&recs, &[0, 1]).unwrap();
        assert!(est2.value.abs() < 0.1, "S2(full) = {}", est2.value);
    }

    #[test]
    fn product_state_entropy_is_near_zero() {
        let psi = StateVector::basis_state(2, 0b01).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let recs = sample_records(
            &psi,
            SampleSpec {
                basis: Basis::Pauli6,
                shots: 20_000,
            },
            &mut rng,
        )
        .unwrap();
        for sites in [vec![0], vec![1]] {
            let est = estimate_renyi2(&recs, &sites).unwrap();
            assert!(est.value.abs() < 0.05, "S2{sites:?} = {}", est.value);
        }
        // ⟨Z0 Z1⟩ = −1 exactly on |01⟩; X and Y vanish → C = −1/3.
        let c = estimate_correlation(&recs, 0, 1).unwrap();
        assert!((c.value + 1.0 / 3.0).abs() < 0.05, "C = {}", c.value);
    }

    #[test]
    fn purity_is_exactly_permutation_invariant() {
        let mut recs = singlet_records(500, 14);
        let a = estimate_purity(&recs, &[0]).unwrap();
        recs.reverse();
        recs.swap(0, 99);
        let b = estimate_purity(&recs, &[0]).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn entropy_clamp_floors_the_purity() {
        // Two maximally conflicting records force a negative raw purity.
        let recs = vec![vec![4u8], vec![5u8]];
        let est = estimate_renyi2(&recs, &[0]).unwrap();
        assert!(est.raw < 0.0);
        let floor: f64 = 0.5 * 1e-3;
        assert!((est.value - -floor.ln()).abs() < 1e-12);
    }

    #[test]
    fn median_of_means_basic() {
        let vals = [1.0, 1.0, 1.0, 1.0, 100.0, 1.0];
        assert_eq!(median_of_means(&vals, 3).unwrap(), 1.0);
        let m = median_of_means(&vals, 1).unwrap();
        assert!((m - vals.iter().sum::<f64>() / 6.0).abs() < 1e-12);
        assert!(median_of_means(&vals, 0).is_err());
        assert!(median_of_means(&vals, 7).is_err());
    }

    #[test]
    fn estimator_input_validation() {
        let recs = singlet_records(10, 15);
        assert!(estimate_pauli(&[], &[(0, Pauli::X)]).is_err());
        assert!(estimate_pauli(&recs, &[(7, Pauli::X)]).is_err());
        assert!(estimate_correlation(&recs, 0, 0).is_err());
        assert!(estimate_purity(&recs, &[0, 0]).is_err());
        assert!(estimate_purity(&recs, &[0, 1, 2, 3, 4]).is_err());
        let zrecs = vec![vec![0u8, 1], vec![1, 1]];
        assert!(estimate_purity(&zrecs, &[0]).is_ok()); // tokens alias pauli6
        let bad = vec![vec![6u8, 1]];
        assert!(estimate_pauli(&bad, &[(0, Pauli::X)]).is_err());
    }
}
