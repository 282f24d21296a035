//! Mini-batch training with deterministic shuffling, warmup + cosine decay,
//! and bit-exact checkpoint/resume.
//!
//! Every random choice is tied to the training seed through tagged
//! substreams: epoch shuffles use a fresh stream per epoch index, dropout
//! draws from one continuous stream whose position is checkpointed, so a
//! resumed run replays exactly the batches and masks an uninterrupted run
//! would have seen.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::conditioner::Condition;
use super::transformer::{GenerativeModel, STREAM_DROPOUT, STREAM_SHUFFLE};
use crate::measure::{derive_seed, Dataset};
use crate::nn::{load_checkpoint, save_checkpoint, Adam, LrSchedule, Tensor};
use crate::{Error, Result};

/// Optimization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate after warmup.
    pub peak_lr: f64,
    /// Learning rate the cosine decays to.
    pub floor_lr: f64,
    /// Steps of linear warmup from zero.
    pub warmup_steps: usize,
    pub seed: u64,
    /// Print a progress line every this many epochs (0 = silent).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            peak_lr: 1e-3,
            floor_lr: 1e-5,
            warmup_steps: 100,
            seed: 0,
            log_every: 0,
        }
    }
}

/// Conditions and records in the layout the trainer consumes.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub conditions: Vec<Condition>,
    /// `(condition index, tokens)` per record.
    pub records: Vec<(usize, Vec<u8>)>,
    /// Standardization fitted over the conditions (identity for graphs).
    pub feature_norm: super::FeatureNorm,
}

impl TrainingSet {
    /// Converts a dataset: one condition per system (in file order), one
    /// entry per record. For feature-conditioned systems the per-feature
    /// standardization is fitted here, over the training systems.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::from_datasets(&[ds])
    }

    /// Merges several datasets into one training set (e.g. one file per
    /// system size). All must share a measurement basis, and system ids must
    /// be unique across the whole collection.
    pub fn from_datasets(sets: &[&Dataset]) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::Incompatible("no datasets to train on".into()));
        };
        let mut conditions = Vec::new();
        let mut records = Vec::new();
        let mut index = BTreeMap::new();
        for ds in sets {
            if ds.meta.basis != first.meta.basis {
                return Err(Error::Incompatible(format!(
                    "datasets mix measurement bases ({} vs {})",
                    ds.meta.basis.name(),
                    first.meta.basis.name()
                )));
            }
            for entry in ds.systems() {
                if index
                    .insert(entry.id.clone(), conditions.len())
                    .is_some()
                {
                    return Err(Error::Incompatible(format!(
                        "system id '{}' appears in more than one dataset",
                        entry.id
                    )));
                }
                conditions.push(Condition::from_descriptor(&entry.descriptor)?);
            }
            for r in &ds.records {
                let ci = *index.get(&r.system_id).ok_or_else(|| {
                    Error::Incompatible(format!("unknown system '{}'", r.system_id))
                })?;
                records.push((ci, r.tokens.clone()));
            }
        }
        if records.is_empty() {
            return Err(Error::Incompatible(
                "dataset has no measurement records to train on".into(),
            ));
        }
        let feats: Vec<[f64; super::CONDITION_FEATURES]> = conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Features(f) => Some(*f),
                Condition::Graph(_) => None,
            })
            .collect();
        let feature_norm = if feats.len() == conditions.len() {
            super::FeatureNorm::fit(&feats)?
        } else {
            super::FeatureNorm::identity()
        };
        Ok(Self {
            conditions,
            records,
            feature_norm,
        })
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    /// Batches per epoch: records are bucketed by sequence length and each
    /// bucket is split into `batch_size` chunks.
    fn batches_per_epoch(&self, batch_size: usize) -> usize {
        let mut per_len: BTreeMap<usize, usize> = BTreeMap::new();
        for (_, toks) in &self.records {
            *per_len.entry(toks.len()).or_insert(0) += 1;
        }
        per_len.values().map(|n| n.div_ceil(batch_size)).sum()
    }
}

/// Training driver owning the model and optimizer state.
pub struct Trainer {
    pub model: GenerativeModel,
    config: TrainConfig,
    adam: Adam,
    schedule: LrSchedule,
    /// Completed epochs.
    epoch: usize,
    dropout_rng: ChaCha12Rng,
    epoch_losses: Vec<f64>,
}

impl Trainer {
    /// Sets up optimization of `model` on `data` (the model adopts the
    /// data's feature standardization).
    pub fn new(mut model: GenerativeModel, data: &TrainingSet, config: TrainConfig) -> Result<Self> {
        if config.epochs == 0 || config.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        model.feature_norm = data.feature_norm.clone();
        let total = config.epochs * data.batches_per_epoch(config.batch_size);
        let schedule = LrSchedule::new(config.warmup_steps, total, config.peak_lr, config.floor_lr)?;
        let adam = Adam::new(&model.params);
        let dropout_rng =
            ChaCha12Rng::seed_from_u64(derive_seed(config.seed, STREAM_DROPOUT, 0));
        Ok(Self {
            model,
            config,
            adam,
            schedule,
            epoch: 0,
            dropout_rng,
            epoch_losses: Vec::new(),
        })
    }

    pub fn completed_epochs(&self) -> usize {
        self.epoch
    }

    /// Token-weighted mean training loss of each completed epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.config
    }

    /// Runs up to `n` more epochs (clipped to the configured total).
    pub fn run_epochs(&mut self, data: &TrainingSet, n: usize) -> Result<()> {
        let stop = self.config.epochs.min(self.epoch + n);
        while self.epoch < stop {
            let loss = self.run_one_epoch(data)?;
            self.epoch += 1;
            self.epoch_losses.push(loss);
            if self.config.log_every > 0 && self.epoch % self.config.log_every == 0 {
                eprintln!(
                    "epoch {:>4}/{}: loss {loss:.6}  (lr {:.2e})",
                    self.epoch,
                    self.config.epochs,
                    self.schedule.lr(self.adam.step_count() as usize)
                );
            }
        }
        Ok(())
    }

    /// Runs all remaining epochs.
    pub fn run(&mut self, data: &TrainingSet) -> Result<()> {
        self.run_epochs(data, self.config.epochs)
    }

    fn run_one_epoch(&mut self, data: &TrainingSet) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.records.len()).collect();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(derive_seed(
            self.config.seed,
            STREAM_SHUFFLE,
            self.epoch as u64,
        ));
        order.shuffle(&mut shuffle_rng);

        // Group the shuffled order into same-length batches: a bucket per
        // sequence length, emitted whenever full, partials flushed at the
        // end in ascending length order.
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut batches: Vec<Vec<usize>> = Vec::new();
        for idx in order {
            let len = data.records[idx].1.len();
            let bucket = buckets.entry(len).or_default();
            bucket.push(idx);
            if bucket.len() == self.config.batch_size {
                batches.push(std::mem::take(bucket));
            }
        }
        for (_, bucket) in buckets {
            if !bucket.is_empty() {
                batches.push(bucket);
            }
        }

        let mut loss_sum = 0.0;
        let mut token_count = 0usize;
        for batch in batches {
            // Conditions actually present in this batch, first-appearance
            // order, with record-local indices.
            let mut local_of: BTreeMap<usize, usize> = BTreeMap::new();
            let mut conds: Vec<Condition> = Vec::new();
            let mut refs: Vec<(usize, &[u8])> = Vec::with_capacity(batch.len());
            for &idx in &batch {
                let (ci, toks) = &data.records[idx];
                let local = *local_of.entry(*ci).or_insert_with(|| {
                    conds.push(data.conditions[*ci].clone());
                    conds.len() - 1
                });
                refs.push((local, toks.as_slice()));
            }
            let step = self.adam.step_count() as usize;
            let at_step = |e: Error| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("{context} at training step {}", step + 1),
                },
                other => other,
            };
            let (loss, grads) = self
                .model
                .loss_and_grads(&conds, &refs, Some(&mut self.dropout_rng))
                .map_err(at_step)?;
            let lr = self.schedule.lr(step);
            self.adam
                .step(&mut self.model.params, &grads, lr)
                .map_err(at_step)?;
            let tokens = refs.iter().map(|(_, t)| t.len()).sum::<usize>();
            loss_sum += loss * tokens as f64;
            token_count += tokens;
        }
        Ok(loss_sum / token_count as f64)
    }

    /// Writes a resumable checkpoint: model parameters and config, Adam
    /// moments, and the exact optimizer/RNG position.
    pub fn save(&self, path: &Path) -> Result<()> {
        let (step, m, v) = self.adam.state();
        let mut extra: Vec<(String, Tensor)> = Vec::with_capacity(2 * m.len());
        for (i, (name, t)) in self.model.params.iter().enumerate() {
            extra.push((
                format!("adam.m.{name}"),
                Tensor::new(t.shape().to_vec(), m[i].clone())?,
            ));
            extra.push((
                format!("adam.v.{name}"),
                Tensor::new(t.shape().to_vec(), v[i].clone())?,
            ));
        }
        let meta = json!({
            "train": {
                "config": self.config,
                "epoch": self.epoch,
                "adam_step": step.to_string(),
                "dropout_word_pos": self.dropout_rng.get_word_pos().to_string(),
                "epoch_losses": self.epoch_losses,
                "schedule_total": self.schedule.total,
            }
        });
        save_checkpoint(path, &self.model.to_checkpoint(meta, extra)?)
    }

    /// Rebuilds a trainer mid-run from [`Trainer::save`] output; continuing
    /// it reproduces the uninterrupted run bit for bit.
    pub fn resume(path: &Path) -> Result<Self> {
        let data = load_checkpoint(path)?;
        let model = GenerativeModel::from_checkpoint(&data)?;
        let train = data
            .meta
            .get("train")
            .ok_or_else(|| Error::Checkpoint("not a training checkpoint (no train state)".into()))?;
        let config: TrainConfig = serde_json::from_value(
            train.get("config").cloned().unwrap_or(Value::Null),
        )
        .map_err(|e| Error::Checkpoint(format!("bad train config: {e}")))?;
        let epoch = train
            .get("epoch")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Checkpoint("missing epoch".into()))? as usize;
        let parse_str = |key: &str| -> Result<String> {
            Ok(train
                .get(key)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Checkpoint(format!("missing {key}")))?
                .to_string())
        };
        let adam_step: u64 = parse_str("adam_step")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad adam_step".into()))?;
        let word_pos: u128 = parse_str("dropout_word_pos")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad dropout_word_pos".into()))?;
        let epoch_losses: Vec<f64> = serde_json::from_value(
            train.get("epoch_losses").cloned().unwrap_or(Value::Null),
        )
        .map_err(|e| Error::Checkpoint(format!("bad epoch_losses: {e}")))?;

        let mut m = Vec::with_capacity(model.params.len());
        let mut v = Vec::with_capacity(model.params.len());
        for (name, t) in model.params.iter() {
            for (prefix, dst) in [("adam.m.", &mut m), ("adam.v.", &mut v)] {
                let full = format!("{prefix}{name}");
                let found = data
                    .tensors
                    .iter()
                    .find(|(n, _)| *n == full)
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{full}'")))?;
                if found.1.shape() != t.shape() {
                    return Err(Error::Checkpoint(format!(
                        "tensor '{full}' has shape {:?}, expected {:?}",
                        found.1.shape(),
                        t.shape()
                    )));
                }
                dst.push(found.1.data().to_vec());
            }
        }
        let adam = Adam::restore(&model.params, adam_step, m, v)?;

        // The schedule's horizon was fixed at Trainer::new time from the
        // dataset's batch count; the checkpoint carries it verbatim.
        let total = train
            .get("schedule_total")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Checkpoint("missing schedule_total".into()))?
            as usize;
        let schedule = LrSchedule::new(config.warmup_steps, total, config.peak_lr, config.floor_lr)?;
        let mut dropout_rng =
            ChaCha12Rng::seed_from_u64(derive_seed(config.seed, STREAM_DROPOUT, 0));
        dropout_rng.set_word_pos(word_pos);
        Ok(Self {
            model,
            config,
            adam,
            schedule,
            epoch,
            dropout_rng,
            epoch_losses,
        })
    }
}
