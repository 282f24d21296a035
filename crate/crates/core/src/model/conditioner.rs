//! Conditioning networks: the map g(x) from a classical system description
//! to a d_model vector injected into the generative model.
//!
//! Two kinds exist. The GCN conditioner runs three graph convolutions over
//! a coupling graph (hidden sizes 64, 32, 16, no biases, symmetrically
//! normalized adjacency with self-loops) on the weighted-degree input
//! column, then pools with one trainable linear map per node (summed). The
//! linear conditioner is an affine map over six standardized features
//! `(n_rows, n_cols, spacing, Ω, Δ/Ω, T)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConditionerKind, TransformerConfig};
use crate::graph::CouplingGraph;
use crate::measure::SystemDescriptor;
use crate::nn::kernels::mm_nn;
use crate::nn::{xavier_uniform, ParamId, ParamSet, Tape, Tensor, Var};
use crate::quantum::RydbergParams;
use crate::{Error, Result};

/// GCN hidden-layer widths, in order.
pub const GCN_HIDDEN: [usize; 3] = [64, 32, 16];

/// Length of the linear conditioner's feature vector.
pub const CONDITION_FEATURES: usize = 6;

/// A system description in the form the conditioner consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    /// Heisenberg: the coupling graph itself.
    Graph(CouplingGraph),
    /// Rydberg: `(n_rows, n_cols, spacing, Ω, Δ/Ω, T)`.
    Features([f64; CONDITION_FEATURES]),
}

impl Condition {
    pub fn from_descriptor(d: &SystemDescriptor) -> Result<Self> {
        match d {
            SystemDescriptor::Heisenberg { .. } => Ok(Condition::Graph(d.to_graph()?)),
            SystemDescriptor::Rydberg { .. } => {
                Ok(Condition::Features(rydberg_features(&d.to_rydberg()?)?))
            }
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            Condition::Graph(g) => g.n_sites(),
            Condition::Features(f) => (f[0] * f[1]).round() as usize,
        }
    }
}

/// Feature vector for the linear conditioner.
pub fn rydberg_features(p: &RydbergParams) -> Result<[f64; CONDITION_FEATURES]> {
    if p.omega == 0.0 {
        return Err(Error::Config(
            "rydberg condition features use Δ/Ω and need Ω ≠ 0".into(),
        ));
    }
    Ok([
        p.n_rows as f64,
        p.n_cols as f64,
        p.spacing,
        p.omega,
        p.delta / p.omega,
        p.time,
    ])
}

/// Per-feature standardization constants fitted on the training systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    /// Identity normalization (mean 0, std 1).
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; CONDITION_FEATURES],
            std: vec![1.0; CONDITION_FEATURES],
        }
    }

    /// Fits mean/std per feature; near-constant features get std 1 so they
    /// standardize to ≈ 0 instead of dividing by zero.
    pub fn fit(features: &[[f64; CONDITION_FEATURES]]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config("cannot fit feature norm on no systems".into()));
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; CONDITION_FEATURES];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; CONDITION_FEATURES];
        for f in features {
            for (s, (v, m)) in std.iter_mut().zip(f.iter().zip(&mean)) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in std.iter_mut() {
            *s = s.sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, f: &[f64; CONDITION_FEATURES]) -> [f64; CONDITION_FEATURES] {
        let mut out = [0.0; CONDITION_FEATURES];
        for i in 0..CONDITION_FEATURES {
            out[i] = (f[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// Parameter ids of whichever conditioner the model carries.
#[derive(Debug, Clone)]
pub enum CondIds {
    Gcn {
        layers: [ParamId; 3],
        pool_w: ParamId,
        pool_b: ParamId,
    },
    Linear {
        w: ParamId,
        b: ParamId,
    },
}

/// Registers conditioner parameters and returns their ids.
pub(crate) fn register<R: Rng>(
    params: &mut ParamSet,
    rng: &mut R,
    config: &TransformerConfig,
) -> Result<CondIds> {
    let d = config.d_model;
    match config.conditioner {
        ConditionerKind::Gcn => {
            let mut dims = vec![1];
            dims.extend_from_slice(&GCN_HIDDEN);
            let mut layers = Vec::new();
            for l in 0..3 {
                layers.push(params.add(
                    &format!("cond.gcn.w{l}"),
                    xavier_uniform(rng, dims[l], dims[l + 1]),
                )?);
            }
            let pool_in = config.max_sites * GCN_HIDDEN[2];
            let pool_w = params.add("cond.pool.w", xavier_uniform(rng, pool_in, d))?;
            let pool_b = params.add("cond.pool.b", Tensor::zeros(vec![d]))?;
            Ok(CondIds::Gcn {
                layers: [layers[0], layers[1], layers[2]],
                pool_w,
                pool_b,
            })
        }
        ConditionerKind::Linear => {
            let w = params.add("cond.lin.w", xavier_uniform(rng, CONDITION_FEATURES, d))?;
            let b = params.add("cond.lin.b", Tensor::zeros(vec![d]))?;
            Ok(CondIds::Linear { w, b })
        }
    }
}

fn standardized(norm: &FeatureNorm, f: &[f64; CONDITION_FEATURES]) -> [f64; CONDITION_FEATURES] {
    norm.apply(f)
}

/// Differentiable conditioner forward for a batch of distinct conditions;
/// returns a `[n_conditions, d_model]` node. `vars` aligns with the
/// parameter set (see the model's tape bindings).
pub(crate) fn forward_tape(
    tape: &mut Tape,
    params: &ParamSet,
    vars: &[Var],
    ids: &CondIds,
    config: &TransformerConfig,
    norm: &FeatureNorm,
    conds: &[Condition],
) -> Result<Var> {
    if conds.is_empty() {
        return Err(Error::Incompatible("no conditions in batch".into()));
    }
    let var_of = |id: ParamId| vars[params.index(id)];
    match ids {
        CondIds::Linear { w, b } => {
            let mut feats = Vec::with_capacity(conds.len() * CONDITION_FEATURES);
            for c in conds {
                let Condition::Features(f) = c else {
                    return Err(Error::Incompatible(
                        "linear conditioner got a graph condition".into(),
                    ));
                };
                feats.extend_from_slice(&standardized(norm, f));
            }
            let x = tape.leaf(Tensor::new(vec![conds.len(), CONDITION_FEATURES], feats)?);
            let wx = tape.matmul(x, var_of(*w))?;
            tape.add(wx, var_of(*b))
        }
        CondIds::Gcn { layers, pool_w, pool_b } => {
            let mut rows = Vec::with_capacity(conds.len());
            for c in conds {
                let Condition::Graph(g) = c else {
                    return Err(Error::Incompatible(
                        "gcn conditioner got a feature condition".into(),
                    ));
                };
                let n = g.n_sites();
                if n != config.max_sites {
                    return Err(Error::Incompatible(format!(
                        "gcn pooling is sized for {} sites, graph has {n}",
                        config.max_sites
                    )));
                }
                let ahat = tape.leaf(Tensor::new(vec![n, n], g.normalized_adjacency())?);
                let mut h = tape.leaf(Tensor::new(vec![n, 1], g.weighted_degrees())?);
                for l in layers {
                    let hw = tape.matmul(h, var_of(*l))?;
                    let ah = tape.matmul(ahat, hw)?;
                    h = tape.relu(ah);
                }
                let flat = tape.reshape(h, vec![1, n * GCN_HIDDEN[2]])?;
                let pooled = tape.matmul(flat, var_of(*pool_w))?;
                rows.push(tape.add(pooled, var_of(*pool_b))?);
            }
            tape.concat_rows(&rows)
        }
    }
}

/// Inference-path conditioner: same math as [`forward_tape`] through the
/// shared kernels, producing one `d_model` vector.
pub(crate) fn condition_vector(
    params: &ParamSet,
    ids: &CondIds,
    config: &TransformerConfig,
    norm: &FeatureNorm,
    cond: &Condition,
) -> Result<Vec<f64>> {
    let d = config.d_model;
    match ids {
        CondIds::Linear { w, b } => {
            let Condition::Features(f) = cond else {
                return Err(Error::Incompatible(
                    "linear conditioner got a graph condition".into(),
                ));
            };
            let x = standardized(norm, f);
            let mut out = vec![0.0; d];
            mm_nn(&x, params.get(*w).data(), 1, CONDITION_FEATURES, d, &mut out);
            for (o, bv) in out.iter_mut().zip(params.get(*b).data()) {
                *o += bv;
            }
            Ok(out)
        }
        CondIds::Gcn { layers, pool_w, pool_b } => {
            let Condition::Graph(g) = cond else {
                return Err(Error::Incompatible(
                    "gcn conditioner got a feature condition".into(),
                ));
            };
            let n = g.n_sites();
            if n != config.max_sites {
                return Err(Error::Incompatible(format!(
                    "gcn pooling is sized for {} sites, graph has {n}",
                    config.max_sites
                )));
            }
            let ahat = g.normalized_adjacency();
            let mut h = g.weighted_degrees();
            let mut width = 1;
            for l in layers {
                let w = params.get(*l);
                let next = w.shape()[1];
                let mut hw = vec![0.0; n * next];
                mm_nn(&h, w.data(), n, width, next, &mut hw);
                let mut ah = vec![0.0; n * next];
                mm_nn(&ahat, &hw, n, n, next, &mut ah);
                for v in ah.iter_mut() {
                    *v = v.max(0.0);
                }
                h = ah;
                width = next;
            }
            let mut out = vec![0.0; d];
            mm_nn(&h, params.get(*pool_w).data(), 1, n * width, d, &mut out);
            for (o, bv) in out.iter_mut().zip(params.get(*pool_b).data()) {
                *o += bv;
            }
            Ok(out)
        }
    }
}
