//! Adam optimizer and the warmup-plus-cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Learning-rate schedule: linear from 0 to `peak` over `warmup` steps,
/// then cosine decay from `peak` down to `floor` at `total` steps (constant
/// at `floor` beyond). With `warmup = 0` the rate starts at `peak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub warmup: usize,
    pub total: usize,
    pub peak: f64,
    pub floor: f64,
}

impl LrSchedule {
    pub fn new(warmup: usize, total: usize, peak: f64, floor: f64) -> Result<Self> {
        if warmup > total {
            return Err(Error::Config(format!(
                "lr schedule: warmup {warmup} exceeds total steps {total}"
            )));
        }
        if !(peak.is_finite() && floor.is_finite()) || floor < 0.0 || peak < floor {
            return Err(Error::Config(format!(
                "lr schedule: need peak ≥ floor ≥ 0, got peak {peak}, floor {floor}"
            )));
        }
        Ok(Self { warmup, total, peak, floor })
    }

    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup {
            return self.peak * step as f64 / self.warmup as f64;
        }
        if step >= self.total {
            return self.floor;
        }
        let span = (self.total - self.warmup) as f64;
        let t = (step - self.warmup) as f64 / span;
        self.floor + (self.peak - self.floor) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Adam with bias correction. Moment buffers are kept per parameter tensor,
/// aligned by index with the [`ParamSet`] it was built from.
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            v: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update: `grads` is aligned with `params`; a `None` entry leaves
    /// that tensor (and its moments) untouched. A non-finite gradient
    /// aborts with the offending parameter's name before anything is
    /// modified.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        grads: &[Option<Tensor>],
        lr: f64,
    ) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Incompatible(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                let (name, t) = params.entry(i);
                if g.shape() != t.shape() {
                    return Err(Error::Incompatible(format!(
                        "adam: gradient shape {:?} vs parameter '{name}' {:?}",
                        g.shape(),
                        t.shape()
                    )));
                }
                if !g.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("gradient of parameter '{name}'"),
                    });
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let w = params.tensor_mut(i).data_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, &gj) in g.data().iter().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                w[j] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    /// Raw optimizer state for checkpointing.
    pub fn state(&self) -> (u64, &[Vec<f64>], &[Vec<f64>]) {
        (self.step, &self.m, &self.v)
    }

    /// Rebuilds an optimizer from checkpointed state; moment buffers must
    /// align with `params`.
    pub fn restore(
        params: &ParamSet,
        step: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let shapes_ok = m.len() == params.len()
            && v.len() == params.len()
            && params
                .iter()
                .enumerate()
                .all(|(i, (_, t))| m[i].len() == t.numel() && v[i].len() == t.numel());
        if !shapes_ok {
            return Err(Error::Checkpoint(
                "optimizer state does not match parameter shapes".into(),
            ));
        }
        Ok(Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step,
            m,
            v,
        })
    }
}
