//! Finite-difference verification of analytic gradients.

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Outcome of a gradient check: the largest relative discrepancy found,
/// where it was, and how many entries were probed.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

/// Compares `analytic` gradients (aligned with `params`) against central
/// finite differences of `loss` with step `h`.
///
/// The relative error of a pair `(a, n)` is `|a − n| / max(|a|, |n|, 1e-3)`
/// — the floor keeps finite-difference noise on near-zero gradients from
/// dominating the report. With `per_tensor = Some(k)`, at most `k`
/// evenly-strided entries of each tensor are probed (deterministically);
/// `None` probes every entry.
pub fn grad_check(
    params: &mut ParamSet,
    analytic: &[Option<Tensor>],
    mut loss: impl FnMut(&ParamSet) -> Result<f64>,
    h: f64,
    per_tensor: Option<usize>,
) -> Result<GradCheckReport> {
    if analytic.len() != params.len() {
        return Err(Error::Incompatible(format!(
            "grad_check: {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("grad_check: invalid step {h}")));
    }
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for pi in 0..params.len() {
        let Some(grad) = &analytic[pi] else { continue };
        let numel = params.tensor(pi).numel();
        if grad.numel() != numel {
            let name = params.entry(pi).0;
            return Err(Error::Incompatible(format!(
                "grad_check: gradient size {} vs parameter '{name}' size {numel}",
                grad.numel()
            )));
        }
        let indices: Vec<usize> = match per_tensor {
            Some(k) if k < numel && k > 0 => {
                let stride = numel / k;
                (0..k).map(|i| i * stride).collect()
            }
            _ => (0..numel).collect(),
        };
        let grad_data = grad.data().to_vec();
        for &j in &indices {
            let orig = params.tensor(pi).data()[j];
            params.tensor_mut(pi).data_mut()[j] = orig + h;
            let plus = loss(params)?;
            params.tensor_mut(pi).data_mut()[j] = orig - h;
            let minus = loss(params)?;
            params.tensor_mut(pi).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = grad_data[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = params.entry(pi).0.to_string();
                report.worst_index = j;
            }
        }
    }
    Ok(report)
}
