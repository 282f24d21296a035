//! Shared numerical kernels.
//!
//! Both the differentiable tape ops and the fast (cache-friendly,
//! tape-free) inference path call these functions, so the two paths agree
//! to rounding between identical loop orders.

/// `out[m×n] += a[m×k] · b[k×n]`.
pub fn mm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bpj) in orow.iter_mut().zip(brow) {
                *o += aip * bpj;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ` (`b` stored row-major as `n×k`).
pub fn mm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            *o += acc;
        }
    }
}

/// `out[m×n] += a[k×m]ᵀ · b[k×n]` (`a` stored row-major as `k×m`).
pub fn mm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &api) in arow.iter().enumerate() {
            if api == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bpj) in orow.iter_mut().zip(brow) {
                *o += api * bpj;
            }
        }
    }
}

/// Stable softmax over each row of length `row`, written to `out`.
///
/// With `causal = true`, rows are interpreted as the trailing `[L, L]`
/// square blocks of the input and entry `(i, j)` with `j > i` is masked out
/// (probability 0, excluded from normalization).
pub fn softmax_rows(x: &[f64], row: usize, causal: bool, out: &mut [f64]) {
    debug_assert_eq!(x.len() % row, 0);
    debug_assert_eq!(x.len(), out.len());
    let n_rows = x.len() / row;
    for r in 0..n_rows {
        let limit = if causal { (r % row) + 1 } else { row };
        let xr = &x[r * row..r * row + limit];
        let or = &mut out[r * row..(r + 1) * row];
        let max = xr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, &v) in or[..limit].iter_mut().zip(xr) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in or[..limit].iter_mut() {
            *o /= sum;
        }
        for o in or[limit..].iter_mut() {
            *o = 0.0;
        }
    }
}

/// Row-wise layer normalization with trainable gain/bias of length `d`.
/// Returns the per-row `(mean, 1/std)` pairs the backward pass reuses.
pub fn layer_norm_rows(
    x: &[f64],
    d: usize,
    eps: f64,
    gain: &[f64],
    bias: &[f64],
    out: &mut [f64],
) -> Vec<(f64, f64)> {
    debug_assert_eq!(x.len() % d, 0);
    debug_assert_eq!(gain.len(), d);
    debug_assert_eq!(bias.len(), d);
    let n_rows = x.len() / d;
    let mut cache = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let xr = &x[r * d..(r + 1) * d];
        let or = &mut out[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for j in 0..d {
            or[j] = (xr[j] - mean) * inv * gain[j] + bias[j];
        }
        cache.push((mean, inv));
    }
    cache
}
