//! Versioned TOML experiment configuration.
//!
//! One file describes an experiment end to end: the system family and
//! lattice, data-generation parameters (system counts, shots, split), the
//! parameter sweep for Rydberg families, the model architecture, and the
//! training hyperparameters. Commands read the sections they need and ignore
//! the rest, so one config can drive `gen-data`, `train`, `sample`, and
//! `phase-diagram` for the same experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Basis, SystemDescriptor};
use crate::model::{ConditionerKind, TrainConfig, TransformerConfig};
use crate::quantum::{blockade_radius, RydbergParams};

/// Schema version this build reads.
pub const CONFIG_VERSION: u32 = 1;

/// System family of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Random-coupling Heisenberg models, Pauli-6 measurements.
    Heisenberg,
    /// Rydberg chains, occupation-basis measurements.
    #[serde(rename = "rydberg_1d")]
    Rydberg1d,
    /// Rydberg grids, occupation-basis measurements.
    #[serde(rename = "rydberg_2d")]
    Rydberg2d,
}

impl Family {
    pub fn basis(self) -> Basis {
        match self {
            Family::Heisenberg => Basis::Pauli6,
            Family::Rydberg1d | Family::Rydberg2d => Basis::ZBasis,
        }
    }

    pub fn conditioner(self) -> ConditionerKind {
        match self {
            Family::Heisenberg => ConditionerKind::Gcn,
            Family::Rydberg1d | Family::Rydberg2d => ConditionerKind::Linear,
        }
    }
}

/// An inclusive linear grid `min ..= max` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + h * i as f64).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config(format!("sweep.{name}: steps must be >= 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(Error::Config(format!(
                "sweep.{name}: need finite min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub family: Family,
    /// Free-form run name, recorded in dataset metadata.
    pub label: String,
    /// Base RNG seed; the `--seed` flag overrides it.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LatticeSection {
    pub rows: usize,
    pub cols: usize,
}

fn default_coupling() -> [f64; 2] {
    [0.0, 2.0]
}

fn default_split() -> Vec<f64> {
    vec![0.75, 0.25]
}

/// Data-generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    /// Number of random systems (Heisenberg; Rydberg counts come from the
    /// sweep grid).
    #[serde(default)]
    pub n_systems: usize,
    /// Measurement shots per system.
    pub shots: usize,
    /// Uniform coupling range for random Heisenberg graphs.
    #[serde(default = "default_coupling")]
    pub coupling: [f64; 2],
    /// Train/test (or train/val/test) fractions; must sum to 1.
    #[serde(default = "default_split")]
    pub split: Vec<f64>,
    /// Expand every training record into its dihedral orbit (Rydberg only:
    /// a uniform lattice is symmetric, random couplings are not).
    #[serde(default)]
    pub augment: bool,
}

/// Rydberg sweep grid. The full grid is the product of `sizes` (chains),
/// `r0_over_a`, `delta_over_omega`, and `times` (falling back to the single
/// `time`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub r0_over_a: GridSpec,
    pub delta_over_omega: GridSpec,
    /// Rabi frequency Ω in rad/µs (fixed across the sweep; the lattice
    /// spacing is derived from R0/a).
    pub omega: f64,
    /// Evolution time in µs; 0 means the exact ground state.
    #[serde(default)]
    pub time: f64,
    /// Optional grid of evolution times (overrides `time`).
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Optional chain lengths for 1D size sweeps.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
}

/// Architecture overrides; anything omitted takes the reference default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelSection {
    pub d_model: Option<usize>,
    pub n_heads: Option<usize>,
    pub n_blocks: Option<usize>,
    pub ffn_hidden: Option<usize>,
    pub dropout: Option<f64>,
}

/// The whole experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub lattice: Option<LatticeSection>,
    pub data: DataSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} not supported (this build reads version {CONFIG_VERSION})",
                self.version
            )));
        }
        let split = &self.data.split;
        if !(2..=3).contains(&split.len()) {
            return Err(Error::Config(format!(
                "data.split needs 2 or 3 fractions, got {}",
                split.len()
            )));
        }
        if split.iter().any(|&f| !(f.is_finite() && f > 0.0)) {
            return Err(Error::Config("data.split fractions must be positive".into()));
        }
        if (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "data.split fractions must sum to 1, got {}",
                split.iter().sum::<f64>()
            )));
        }
        if self.data.shots == 0 {
            return Err(Error::Config("data.shots must be >= 1".into()));
        }
        match self.experiment.family {
            Family::Heisenberg => {
                if self.data.n_systems == 0 {
                    return Err(Error::Config(
                        "heisenberg experiments need data.n_systems >= 1".into(),
                    ));
                }
                let lat = self.lattice_checked()?;
                if lat.rows * lat.cols < 2 {
                    return Err(Error::Config("lattice must have at least 2 sites".into()));
                }
                if !(self.data.coupling[0].is_finite()
                    && self.data.coupling[1].is_finite()
                    && self.data.coupling[0] >= 0.0
                    && self.data.coupling[1] > self.data.coupling[0])
                {
                    return Err(Error::Config(format!(
                        "data.coupling must satisfy 0 <= low < high, got {:?}",
                        self.data.coupling
                    )));
                }
                if self.data.augment {
                    return Err(Error::Config(
                        "data.augment only applies to uniform Rydberg lattices; random \
                         couplings break lattice symmetry"
                            .into(),
                    ));
                }
            }
            Family::Rydberg1d | Family::Rydberg2d => {
                let sweep = self.sweep_checked()?;
                sweep.r0_over_a.validate("r0_over_a")?;
                sweep.delta_over_omega.validate("delta_over_omega")?;
                if sweep.r0_over_a.min <= 0.0 {
                    return Err(Error::Config("sweep.r0_over_a must be positive".into()));
                }
                if !(sweep.omega.is_finite() && sweep.omega > 0.0) {
                    return Err(Error::Config(format!(
                        "sweep.omega must be finite and > 0, got {}",
                        sweep.omega
                    )));
                }
                for &t in sweep.times.as_deref().unwrap_or(&[sweep.time]) {
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(Error::Config(format!(
                            "sweep times must be finite and >= 0, got {t}"
                        )));
                    }
                }
                match self.experiment.family {
                    Family::Rydberg1d => {
                        if let Some(sizes) = &sweep.sizes {
                            if sizes.is_empty() || sizes.iter().any(|&n| n < 2) {
                                return Err(Error::Config(
                                    "sweep.sizes entries must be chain lengths >= 2".into(),
                                ));
                            }
                        } else {
                            let lat = self.lattice_checked()?;
                            if lat.rows != 1 && lat.cols != 1 {
                                return Err(Error::Config(
                                    "rydberg_1d lattices must be chains (one row or one column)"
                                        .into(),
                                ));
                            }
                        }
                    }
                    Family::Rydberg2d => {
                        if sweep.sizes.is_some() {
                            return Err(Error::Config(
                                "sweep.sizes is a 1D option; use lattice rows/cols for grids"
                                    .into(),
                            ));
                        }
                        let lat = self.lattice_checked()?;
                        if lat.rows < 2 || lat.cols < 2 {
                            return Err(Error::Config(
                                "rydberg_2d lattices need rows >= 2 and cols >= 2".into(),
                            ));
                        }
                    }
                    Family::Heisenberg => unreachable!(),
                }
            }
        }
        self.model_config()?.validate()
    }

    fn lattice_checked(&self) -> Result<LatticeSection> {
        self.lattice.ok_or_else(|| {
            Error::Config("this experiment family needs a [lattice] section".into())
        })
    }

    fn sweep_checked(&self) -> Result<&SweepSection> {
        self.sweep.as_ref().ok_or_else(|| {
            Error::Config("rydberg experiments need a [sweep] section".into())
        })
    }

    /// Largest site count any system in this experiment can have.
    pub fn max_sites(&self) -> Result<usize> {
        match self.experiment.family {
            Family::Heisenberg | Family::Rydberg2d => {
                let lat = self.lattice_checked()?;
                Ok(lat.rows * lat.cols)
            }
            Family::Rydberg1d => match self.sweep_checked()?.sizes.as_deref() {
                Some(sizes) => Ok(*sizes.iter().max().expect("validated nonempty")),
                None => {
                    let lat = self.lattice_checked()?;
                    Ok(lat.rows * lat.cols)
                }
            },
        }
    }

    /// The transformer architecture for this experiment: family defaults
    /// with any `[model]` overrides applied.
    pub fn model_config(&self) -> Result<TransformerConfig> {
        let family = self.experiment.family;
        let mut config =
            TransformerConfig::defaults(family.basis(), self.max_sites()?, family.conditioner());
        if let Some(v) = self.model.d_model {
            config.d_model = v;
        }
        if let Some(v) = self.model.n_heads {
            config.n_heads = v;
        }
        if let Some(v) = self.model.n_blocks {
            config.n_blocks = v;
        }
        if let Some(v) = self.model.ffn_hidden {
            config.ffn_hidden = v;
        }
        if let Some(v) = self.model.dropout {
            config.dropout = v;
        }
        Ok(config)
    }

    /// Enumerate the Rydberg sweep grid in deterministic order: sizes, then
    /// R0/a, then Δ/Ω, then evolution times (innermost).
    pub fn grid_points(&self) -> Result<Vec<RydbergParams>> {
        if self.experiment.family == Family::Heisenberg {
            return Err(Error::Config(
                "heisenberg experiments have no sweep grid".into(),
            ));
        }
        let sweep = self.sweep_checked()?;
        let (rows_list, cols_list): (Vec<usize>, Vec<usize>) = match self.experiment.family {
            Family::Rydberg1d => match sweep.sizes.as_deref() {
                Some(sizes) => (vec![1; sizes.len()], sizes.to_vec()),
                None => {
                    let lat = self.lattice_checked()?;
                    (vec![lat.rows], vec![lat.cols])
                }
            },
            Family::Rydberg2d => {
                let lat = self.lattice_checked()?;
                (vec![lat.rows], vec![lat.cols])
            }
            Family::Heisenberg => {
                return Err(Error::Config(
                    "heisenberg experiments have no sweep grid".into(),
                ))
            }
        };
        let times = sweep.times.clone().unwrap_or_else(|| vec![sweep.time]);
        let r0 = blockade_radius(sweep.omega);
        let mut points = Vec::new();
        for (&rows, &cols) in rows_list.iter().zip(&cols_list) {
            for &r0a in &sweep.r0_over_a.values() {
                for &doa in &sweep.delta_over_omega.values() {
                    for &t in &times {
                        points.push(RydbergParams {
                            n_rows: rows,
                            n_cols: cols,
                            spacing: r0 / r0a,
                            omega: sweep.omega,
                            delta: doa * sweep.omega,
                            time: t,
                        });
                    }
                }
            }
        }
        Ok(points)
    }
}

fn default_sample_label() -> String {
    "samples".to_string()
}

/// Conditions file for the `sample` command: a list of system descriptors to
/// generate measurements for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Base sampling seed; the `--seed` flag overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Label recorded in the generated dataset metadata.
    #[serde(default = "default_sample_label")]
    pub label: String,
    pub conditions: Vec<SystemDescriptor>,
}

impl SampleConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: SampleConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        if config.conditions.is_empty() {
            return Err(Error::Config("no [[conditions]] entries to sample".into()));
        }
        Ok(config)
    }
}
