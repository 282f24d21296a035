//! The conditional autoregressive transformer.
//!
//! Sequences are factorized left to right: the model reads
//! `[BOS, a_0, …, a_{n−2}]` and predicts `[a_0, …, a_{n−1}]`, so position
//! `i`'s output distribution conditions only on earlier outcomes — plus the
//! conditioning vector `g(x)`, which is added to every input position after
//! the sinusoidal positional encoding. Each decoder block applies
//! post-norm residual sublayers: causal multi-head self-attention, then a
//! two-layer ReLU feed-forward expansion, each followed by dropout, the
//! residual add, and layer normalization.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::Value;

use super::conditioner::{self, CondIds, Condition, FeatureNorm, CONDITION_FEATURES, GCN_HIDDEN};
use super::config::{positional_encoding_table, ConditionerKind, TransformerConfig};
use crate::measure::derive_seed;
use crate::nn::{
    load_checkpoint, normal_init, save_checkpoint, xavier_uniform, CheckpointData, ParamId,
    ParamSet, Tape, Tensor, Var,
};
use crate::{Error, Result};

/// Layer-norm stabilizer.
pub const LN_EPS: f64 = 1e-5;

/// Additive mask value for future positions (softmax maps it to exactly 0).
pub const MASK_FILL: f64 = -1e30;

/// Seed-derivation stream tags used by the model (init / shuffling /
/// dropout / sampling), kept distinct so no two purposes share a stream.
pub(crate) const STREAM_INIT: u64 = 101;
pub(crate) const STREAM_SHUFFLE: u64 = 102;
pub(crate) const STREAM_DROPOUT: u64 = 103;
pub(crate) const STREAM_SAMPLE: u64 = 104;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockIds {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub embed: ParamId,
    pub blocks: Vec<BlockIds>,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub cond: CondIds,
}

/// Canonical parameter list for a configuration: `(name, shape)` in
/// construction/checkpoint order.
fn parameter_manifest(config: &TransformerConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let f = config.ffn_hidden;
    let v = config.vocab_size;
    let mut m: Vec<(String, Vec<usize>)> = vec![("embed.tokens".into(), vec![v + 1, d])];
    for b in 0..config.n_blocks {
        for part in ["wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"] {
            let shape = if part.starts_with('w') { vec![d, d] } else { vec![d] };
            m.push((format!("block{b}.attn.{part}"), shape));
        }
        m.push((format!("block{b}.ln1.gain"), vec![d]));
        m.push((format!("block{b}.ln1.bias"), vec![d]));
        m.push((format!("block{b}.ffn.w1"), vec![d, f]));
        m.push((format!("block{b}.ffn.b1"), vec![f]));
        m.push((format!("block{b}.ffn.w2"), vec![f, d]));
        m.push((format!("block{b}.ffn.b2"), vec![d]));
        m.push((format!("block{b}.ln2.gain"), vec![d]));
        m.push((format!("block{b}.ln2.bias"), vec![d]));
    }
    m.push(("out.w".into(), vec![d, v]));
    m.push(("out.b".into(), vec![v]));
    match config.conditioner {
        ConditionerKind::Gcn => {
            let mut widths = vec![1];
            widths.extend_from_slice(&GCN_HIDDEN);
            for l in 0..GCN_HIDDEN.len() {
                m.push((format!("cond.gcn.w{l}"), vec![widths[l], widths[l + 1]]));
            }
            m.push(("cond.pool.w".into(), vec![config.max_sites * GCN_HIDDEN[2], d]));
            m.push(("cond.pool.b".into(), vec![d]));
        }
        ConditionerKind::Linear => {
            m.push(("cond.lin.w".into(), vec![CONDITION_FEATURES, d]));
            m.push(("cond.lin.b".into(), vec![d]));
        }
    }
    m
}

impl Layout {
    /// Resolves the layout against a parameter set, checking presence and
    /// shape of every tensor the configuration calls for.
    fn from_params(params: &ParamSet, config: &TransformerConfig) -> Result<Layout> {
        let fetch = |name: &str, shape: &[usize]| -> Result<ParamId> {
            let id = params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))?;
            let got = params.get(id).shape();
            if got != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {got:?}, expected {shape:?}"
                )));
            }
            Ok(id)
        };
        let manifest = parameter_manifest(config);
        for (name, shape) in &manifest {
            fetch(name, shape)?;
        }
        let d = config.d_model;
        let blocks = (0..config.n_blocks)
            .map(|b| -> Result<BlockIds> {
                let at = |p: &str, s: &[usize]| fetch(&format!("block{b}.attn.{p}"), s);
                Ok(BlockIds {
                    wq: at("wq", &[d, d])?,
                    bq: at("bq", &[d])?,
                    wk: at("wk", &[d, d])?,
                    bk: at("bk", &[d])?,
                    wv: at("wv", &[d, d])?,
                    bv: at("bv", &[d])?,
                    wo: at("wo", &[d, d])?,
                    bo: at("bo", &[d])?,
                    ln1_gain: fetch(&format!("block{b}.ln1.gain"), &[d])?,
                    ln1_bias: fetch(&format!("block{b}.ln1.bias"), &[d])?,
                    w1: fetch(&format!("block{b}.ffn.w1"), &[d, config.ffn_hidden])?,
                    b1: fetch(&format!("block{b}.ffn.b1"), &[config.ffn_hidden])?,
                    w2: fetch(&format!("block{b}.ffn.w2"), &[config.ffn_hidden, d])?,
                    b2: fetch(&format!("block{b}.ffn.b2"), &[d])?,
                    ln2_gain: fetch(&format!("block{b}.ln2.gain"), &[d])?,
                    ln2_bias: fetch(&format!("block{b}.ln2.bias"), &[d])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cond = match config.conditioner {
            ConditionerKind::Gcn => CondIds::Gcn {
                layers: [
                    fetch("cond.gcn.w0", &[1, GCN_HIDDEN[0]])?,
                    fetch("cond.gcn.w1", &[GCN_HIDDEN[0], GCN_HIDDEN[1]])?,
                    fetch("cond.gcn.w2", &[GCN_HIDDEN[1], GCN_HIDDEN[2]])?,
                ],
                pool_w: fetch("cond.pool.w", &[config.max_sites * GCN_HIDDEN[2], d])?,
                pool_b: fetch("cond.pool.b", &[d])?,
            },
            ConditionerKind::Linear => CondIds::Linear {
                w: fetch("cond.lin.w", &[CONDITION_FEATURES, d])?,
                b: fetch("cond.lin.b", &[d])?,
            },
        };
        Ok(Layout {
            embed: fetch("embed.tokens", &[config.vocab_size + 1, d])?,
            blocks,
            out_w: fetch("out.w", &[d, config.vocab_size])?,
            out_b: fetch("out.b", &[config.vocab_size])?,
            cond,
        })
    }
}

/// A trained (or trainable) conditional generative model.
pub struct GenerativeModel {
    pub(crate) config: TransformerConfig,
    pub(crate) params: ParamSet,
    pub(crate) layout: Layout,
    /// Positional encoding table, `[max_sites, d_model]` row-major.
    pub(crate) pos: Vec<f64>,
    pub feature_norm: FeatureNorm,
}

/// A finished differentiable forward pass over one batch.
pub(crate) struct ForwardPass {
    pub tape: Tape,
    /// Mean negative log-likelihood over all positions.
    pub loss: Var,
    /// `[batch·seq_len, vocab]` pre-softmax outputs (read by the causality
    /// tests; training only needs `loss`).
    #[cfg_attr(not(test), allow(dead_code))]
    pub logits: Var,
    /// Leaf vars aligned with the parameter set.
    pub vars: Vec<Var>,
}

impl GenerativeModel {
    /// Fresh model with seeded initialization: embeddings N(0, 0.02²),
    /// weight matrices Xavier-uniform, biases zero, layer-norm gains one.
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_INIT, 0));
        let d = config.d_model;
        let f = config.ffn_hidden;
        let v = config.vocab_size;
        let mut params = ParamSet::new();
        let embed = params.add("embed.tokens", normal_init(&mut rng, vec![v + 1, d], 0.02))?;
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for b in 0..config.n_blocks {
            let wq = params.add(&format!("block{b}.attn.wq"), xavier_uniform(&mut rng, d, d))?;
            let bq = params.add(&format!("block{b}.attn.bq"), Tensor::zeros(vec![d]))?;
            let wk = params.add(&format!("block{b}.attn.wk"), xavier_uniform(&mut rng, d, d))?;
            let bk = params.add(&format!("block{b}.attn.bk"), Tensor::zeros(vec![d]))?;
            let wv = params.add(&format!("block{b}.attn.wv"), xavier_uniform(&mut rng, d, d))?;
            let bv = params.add(&format!("block{b}.attn.bv"), Tensor::zeros(vec![d]))?;
            let wo = params.add(&format!("block{b}.attn.wo"), xavier_uniform(&mut rng, d, d))?;
            let bo = params.add(&format!("block{b}.attn.bo"), Tensor::zeros(vec![d]))?;
            let ln1_gain = params.add(&format!("block{b}.ln1.gain"), Tensor::full(vec![d], 1.0))?;
            let ln1_bias = params.add(&format!("block{b}.ln1.bias"), Tensor::zeros(vec![d]))?;
            let w1 = params.add(&format!("block{b}.ffn.w1"), xavier_uniform(&mut rng, d, f))?;
            let b1 = params.add(&format!("block{b}.ffn.b1"), Tensor::zeros(vec![f]))?;
            let w2 = params.add(&format!("block{b}.ffn.w2"), xavier_uniform(&mut rng, f, d))?;
            let b2 = params.add(&format!("block{b}.ffn.b2"), Tensor::zeros(vec![d]))?;
            let ln2_gain = params.add(&format!("block{b}.ln2.gain"), Tensor::full(vec![d], 1.0))?;
            let ln2_bias = params.add(&format!("block{b}.ln2.bias"), Tensor::zeros(vec![d]))?;
            blocks.push(BlockIds {
                wq, bq, wk, bk, wv, bv, wo, bo,
                ln1_gain, ln1_bias,
                w1, b1, w2, b2,
                ln2_gain, ln2_bias,
            });
        }
        let out_w = params.add("out.w", xavier_uniform(&mut rng, d, v))?;
        let out_b = params.add("out.b", Tensor::zeros(vec![v]))?;
        let cond = conditioner::register(&mut params, &mut rng, &config)?;
        let layout = Layout {
            embed,
            blocks,
            out_w,
            out_b,
            cond,
        };
        let pos = positional_encoding_table(config.max_sites, d);
        Ok(Self {
            config,
            params,
            layout,
            pos,
            feature_norm: FeatureNorm::identity(),
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn n_parameters(&self) -> usize {
        self.params.total_elements()
    }

    /// Checks a batch and returns its common sequence length.
    fn batch_len(&self, conds: &[Condition], records: &[(usize, &[u8])]) -> Result<usize> {
        if records.is_empty() {
            return Err(Error::Incompatible("empty batch".into()));
        }
        let l = records[0].1.len();
        if l == 0 || l > self.config.max_sites {
            return Err(Error::Incompatible(format!(
                "sequence length {l} outside 1..={}",
                self.config.max_sites
            )));
        }
        for (ci, toks) in records {
            if *ci >= conds.len() {
                return Err(Error::Incompatible(format!(
                    "condition index {ci} out of range for {} conditions",
                    conds.len()
                )));
            }
            if toks.len() != l {
                return Err(Error::Incompatible(format!(
                    "mixed sequence lengths in one batch: {l} vs {}",
                    toks.len()
                )));
            }
            if conds[*ci].n_sites() != l {
                return Err(Error::Incompatible(format!(
                    "record of length {l} paired with a {}-site system",
                    conds[*ci].n_sites()
                )));
            }
            if let Some(&bad) = toks.iter().find(|&&t| t as usize >= self.config.vocab_size) {
                return Err(Error::Incompatible(format!(
                    "token {bad} outside vocabulary of {}",
                    self.config.vocab_size
                )));
            }
        }
        Ok(l)
    }

    /// Differentiable forward pass over `records` (pairs of condition index
    /// and token sequence, all the same length). `params` is usually
    /// `&self.params`; gradient checking passes perturbed copies.
    /// `dropout = Some(rng)` enables train-mode dropout.
    pub(crate) fn forward_with<R: Rng>(
        &self,
        params: &ParamSet,
        conds: &[Condition],
        records: &[(usize, &[u8])],
        mut dropout: Option<&mut R>,
    ) -> Result<ForwardPass> {
        let l = self.batch_len(conds, records)?;
        let n = records.len();
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = self.config.head_dim();

        let mut tape = Tape::new();
        let vars: Vec<Var> = (0..params.len())
            .map(|i| tape.leaf(params.tensor(i).clone()))
            .collect();
        let var_of = |id: ParamId| vars[params.index(id)];

        // Shifted input ids and flat targets.
        let mut ids = Vec::with_capacity(n * l);
        let mut targets = Vec::with_capacity(n * l);
        for (_, toks) in records {
            ids.push(self.config.bos());
            ids.extend(toks[..l - 1].iter().map(|&t| t as usize));
            targets.extend(toks.iter().map(|&t| t as usize));
        }
        let mut x = tape.embedding(var_of(self.layout.embed), &ids)?;

        // Positional encoding, tiled over the batch.
        let mut pos_tiled = Vec::with_capacity(n * l * d);
        for _ in 0..n {
            pos_tiled.extend_from_slice(&self.pos[..l * d]);
        }
        let pos = Tensor::new(vec![n * l, d], pos_tiled)?;
        x = tape.add_const(x, &pos)?;

        // Condition vectors: one row per distinct system, gathered out to
        // one row per record, added to every position.
        let cond_mat = conditioner::forward_tape(
            &mut tape,
            params,
            &vars,
            &self.layout.cond,
            &self.config,
            &self.feature_norm,
            conds,
        )?;
        let gather_idx: Vec<usize> = records
            .iter()
            .flat_map(|(ci, _)| (0..d).map(move |j| ci * d + j))
            .collect();
        let cond_rows = tape.gather(cond_mat, gather_idx, vec![n, d])?;
        x = tape.add_cond(x, cond_rows, l)?;

        // Head split/merge index maps (shared by all blocks).
        let mut split_idx = Vec::with_capacity(n * l * d);
        for b in 0..n {
            for h in 0..heads {
                for t in 0..l {
                    let base = (b * l + t) * d + h * dh;
                    split_idx.extend(base..base + dh);
                }
            }
        }
        let mut merge_idx = Vec::with_capacity(n * l * d);
        for b in 0..n {
            for t in 0..l {
                for h in 0..heads {
                    let base = ((b * heads + h) * l + t) * dh;
                    merge_idx.extend(base..base + dh);
                }
            }
        }

        let p_drop = self.config.dropout;
        for block in &self.layout.blocks {
            // Multi-head causal self-attention.
            let q = tape.matmul(x, var_of(block.wq))?;
            let q = tape.add(q, var_of(block.bq))?;
            let k = tape.matmul(x, var_of(block.wk))?;
            let k = tape.add(k, var_of(block.bk))?;
            let v = tape.matmul(x, var_of(block.wv))?;
            let v = tape.add(v, var_of(block.bv))?;
            let qh = tape.gather(q, split_idx.clone(), vec![n * heads, l, dh])?;
            let kh = tape.gather(k, split_idx.clone(), vec![n * heads, l, dh])?;
            let vh = tape.gather(v, split_idx.clone(), vec![n * heads, l, dh])?;
            let scores = tape.bmm_nt(qh, kh)?;
            let scaled = tape.scale(scores, 1.0 / (dh as f64).sqrt());
            let masked = tape.masked_fill_causal(scaled, MASK_FILL)?;
            let attn = tape.softmax(masked)?;
            let ctx = tape.bmm_nn(attn, vh)?;
            let merged = tape.gather(ctx, merge_idx.clone(), vec![n * l, d])?;
            let proj = tape.matmul(merged, var_of(block.wo))?;
            let proj = tape.add(proj, var_of(block.bo))?;
            let proj = match dropout.as_deref_mut() {
                Some(rng) => tape.dropout(proj, p_drop, true, rng)?,
                None => proj,
            };
            let res = tape.add(x, proj)?;
            x = tape.layer_norm(res, var_of(block.ln1_gain), var_of(block.ln1_bias), LN_EPS)?;

            // Position-wise feed-forward.
            let h1 = tape.matmul(x, var_of(block.w1))?;
            let h1 = tape.add(h1, var_of(block.b1))?;
            let h1 = tape.relu(h1);
            let h2 = tape.matmul(h1, var_of(block.w2))?;
            let h2 = tape.add(h2, var_of(block.b2))?;
            let h2 = match dropout.as_deref_mut() {
                Some(rng) => tape.dropout(h2, p_drop, true, rng)?,
                None => h2,
            };
            let res = tape.add(x, h2)?;
            x = tape.layer_norm(res, var_of(block.ln2_gain), var_of(block.ln2_bias), LN_EPS)?;
        }

        let logits = tape.matmul(x, var_of(self.layout.out_w))?;
        let logits = tape.add(logits, var_of(self.layout.out_b))?;
        let loss = tape.log_softmax_nll(logits, &targets)?;
        Ok(ForwardPass {
            tape,
            loss,
            logits,
            vars,
        })
    }

    /// Training-mode loss and parameter gradients for one batch.
    pub fn loss_and_grads<R: Rng>(
        &self,
        conds: &[Condition],
        records: &[(usize, &[u8])],
        dropout: Option<&mut R>,
    ) -> Result<(f64, Vec<Option<Tensor>>)> {
        let mut pass = self.forward_with(&self.params, conds, records, dropout)?;
        pass.tape.backward(pass.loss)?;
        let grads = pass.vars.iter().map(|&v| pass.tape.grad(v)).collect();
        Ok((pass.tape.value(pass.loss).item(), grads))
    }

    /// Mean negative log-likelihood of `records` (no dropout).
    pub fn eval_loss(&self, conds: &[Condition], records: &[(usize, &[u8])]) -> Result<f64> {
        let pass =
            self.forward_with::<ChaCha12Rng>(&self.params, conds, records, None)?;
        Ok(pass.tape.value(pass.loss).item())
    }

    /// Serializable snapshot: model config, `feature_norm` (+ any extra meta
    /// fields), parameters, and any extra tensors (optimizer state).
    pub(crate) fn to_checkpoint(
        &self,
        extra_meta: Value,
        extra_tensors: Vec<(String, Tensor)>,
    ) -> Result<CheckpointData> {
        let mut meta = match extra_meta {
            Value::Null => serde_json::Map::new(),
            Value::Object(m) => m,
            other => {
                return Err(Error::Checkpoint(format!(
                    "checkpoint meta must be a JSON object, got {other}"
                )))
            }
        };
        meta.insert(
            "feature_norm".into(),
            serde_json::to_value(&self.feature_norm)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
        );
        let mut tensors: Vec<(String, Tensor)> = self
            .params
            .iter()
            .map(|(name, t)| (name.to_string(), t.clone()))
            .collect();
        tensors.extend(extra_tensors);
        Ok(CheckpointData {
            config: serde_json::to_value(self.config)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
            meta: Value::Object(meta),
            tensors,
        })
    }

    /// Rebuilds a model from checkpoint data, validating every tensor's
    /// presence and shape against the stored configuration. Tensors named
    /// `adam.*` (optimizer state) are ignored here.
    pub(crate) fn from_checkpoint(data: &CheckpointData) -> Result<Self> {
        let config: TransformerConfig = serde_json::from_value(data.config.clone())
            .map_err(|e| Error::Checkpoint(format!("bad model config: {e}")))?;
        config.validate()?;
        let manifest = parameter_manifest(&config);
        let mut params = ParamSet::new();
        for (name, shape) in &manifest {
            let t = data
                .tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))?;
            if t.shape() != &shape[..] {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            params.add(name, t.clone())?;
        }
        for (name, _) in &data.tensors {
            if !name.starts_with("adam.") && params.find(name).is_none() {
                return Err(Error::Checkpoint(format!(
                    "unexpected tensor '{name}' for this configuration"
                )));
            }
        }
        let layout = Layout::from_params(&params, &config)?;
        let feature_norm = match data.meta.get("feature_norm") {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Error::Checkpoint(format!("bad feature_norm: {e}")))?,
            None => FeatureNorm::identity(),
        };
        let pos = positional_encoding_table(config.max_sites, config.d_model);
        Ok(Self {
            config,
            params,
            layout,
            pos,
            feature_norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.to_checkpoint(Value::Null, Vec::new())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&load_checkpoint(path)?)
    }
}
