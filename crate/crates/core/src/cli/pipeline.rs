//! The operations behind the CLI subcommands, as a library: state
//! preparation, dataset generation with splits, shadow-estimate tables,
//! model sampling, phase-diagram sources, and the self-contained gradient
//! check. Everything here is deterministic under the seeds it is given.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::cli::config::{ExperimentConfig, Family};
use crate::error::{Error, Result};
use crate::graph::CouplingGraph;
use crate::measure::{
    augment_record_d4, derive_seed, sample_records, Basis, Dataset, DatasetMeta, SampleSpec,
    SystemDescriptor, SystemEntry,
};
use crate::model::{Condition, GenerativeModel, TrainingSet, STREAM_SAMPLE};
use crate::phases::{exact_phase_point, PhasePoint};
use crate::quantum::{
    build_heisenberg, build_rydberg, evolve, ground_state, suggested_dt, RydbergParams, Schedule,
    StateVector,
};
use crate::shadows::{estimate_correlation, estimate_renyi2};

/// Seed stream for drawing random coupling graphs.
pub const STREAM_COUPLINGS: u64 = 1;
/// Seed stream for measurement sampling (one substream per system).
pub const STREAM_MEASURE: u64 = 2;
/// Seed stream for the training run.
pub const STREAM_TRAIN: u64 = 3;
/// Seed stream for the train/test split shuffle.
pub const STREAM_SPLIT: u64 = 4;

/// Prepare the quantum state a system descriptor describes: the exact ground
/// state for Heisenberg systems and zero-time Rydberg systems, the
/// adiabatically prepared state for Rydberg systems with a finite evolution
/// time.
pub fn prepare_state(desc: &SystemDescriptor) -> Result<StateVector> {
    match desc {
        SystemDescriptor::Heisenberg { .. } => {
            let op = build_heisenberg(&desc.to_graph()?)?;
            Ok(ground_state(&op)?.state)
        }
        SystemDescriptor::Rydberg { .. } => prepare_rydberg_state(&desc.to_rydberg()?),
    }
}

/// The Rydberg half of [`prepare_state`]: exact ground state at `time == 0`,
/// otherwise the standard adiabatic ramp integrated over `time` µs.
pub fn prepare_rydberg_state(params: &RydbergParams) -> Result<StateVector> {
    let op = build_rydberg(params)?;
    if params.time == 0.0 {
        return Ok(ground_state(&op)?.state);
    }
    let schedule = Schedule::adiabatic(params.omega, params.delta, params.time)?;
    let dt = suggested_dt(&op, &schedule);
    let psi0 = StateVector::zero_state(params.n_sites())?;
    evolve(&op, &schedule, &psi0, dt)
}

/// One generated dataset file: `name` is the file stem (`train`,
/// `test-n07`, ...).
#[derive(Debug)]
pub struct GeneratedFile {
    pub name: String,
    pub dataset: Dataset,
}

/// Everything `gen-data` produces, before any file is written.
#[derive(Debug)]
pub struct GeneratedData {
    pub files: Vec<GeneratedFile>,
    /// One row per system: id, split, and physical parameters.
    pub systems_csv: String,
}

/// Names of the split partitions for a fraction count.
fn split_names(n: usize) -> &'static [&'static str] {
    match n {
        2 => &["train", "test"],
        _ => &["train", "val", "test"],
    }
}

/// Deterministic split assignment: a seeded shuffle of `0..n`, cut into
/// contiguous runs sized by the fractions (train gets any remainder).
fn split_assignment(n: usize, fractions: &[f64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT, 0));
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    counts[0] += n - assigned;
    let mut assignment = vec![0usize; n];
    let mut pos = 0;
    for (split, &count) in counts.iter().enumerate() {
        for &sys in &order[pos..pos + count] {
            assignment[sys] = split;
        }
        pos += count;
    }
    assignment
}

fn descriptor_singular_values(desc: &SystemDescriptor) -> (String, String, String) {
    match desc {
        SystemDescriptor::Heisenberg { .. } => (String::new(), String::new(), String::new()),
        SystemDescriptor::Rydberg { .. } => {
            let p = desc.to_rydberg().expect("rydberg descriptor");
            (
                p.r0_over_a().to_string(),
                p.delta_over_omega().to_string(),
                p.time.to_string(),
            )
        }
    }
}

/// Generate all systems, states, and measurement records for an experiment,
/// split into train/test (or train/val/test) datasets. Mixed system sizes
/// produce one file per size within each split (`train-n05`, `train-n07`,
/// ...), since a dataset file holds one site count.
pub fn gen_data(config: &ExperimentConfig, seed: u64) -> Result<GeneratedData> {
    let family = config.experiment.family;
    let descriptors: Vec<SystemDescriptor> = match family {
        Family::Heisenberg => {
            let lat = config.lattice.expect("validated");
            let [lo, hi] = config.data.coupling;
            (0..config.data.n_systems)
                .map(|i| {
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_COUPLINGS, i as u64));
                    let graph = CouplingGraph::random_grid(lat.rows, lat.cols, lo, hi, &mut rng)?;
                    Ok(SystemDescriptor::from_graph(&graph))
                })
                .collect::<Result<_>>()?
        }
        Family::Rydberg1d | Family::Rydberg2d => config
            .grid_points()?
            .iter()
            .map(SystemDescriptor::from_rydberg)
            .collect(),
    };
    let basis = family.basis();
    let assignment = split_assignment(descriptors.len(), &config.data.split, seed);
    let names = split_names(config.data.split.len());

    // One dataset per (split, site count); keyed in deterministic order.
    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = descriptors.iter().map(|d| d.n_sites()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut files: Vec<GeneratedFile> = Vec::new();
    let mut slot = vec![vec![usize::MAX; sizes.len()]; names.len()];
    for (si, name) in names.iter().enumerate() {
        for (zi, &n_sites) in sizes.iter().enumerate() {
            let file_name = if sizes.len() == 1 {
                (*name).to_string()
            } else {
                format!("{name}-n{n_sites:02}")
            };
            slot[si][zi] = files.len();
            files.push(GeneratedFile {
                name: file_name,
                dataset: Dataset::new(DatasetMeta {
                    label: config.experiment.label.clone(),
                    basis,
                    n_sites,
                    seed,
                }),
            });
        }
    }

    let mut systems_csv =
        String::from("id,split,family,rows,cols,n_sites,r0_over_a,delta_over_omega,time\n");
    for (i, desc) in descriptors.iter().enumerate() {
        let id = format!("s{i:04}");
        let split = assignment[i];
        let state = prepare_state(desc)?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_MEASURE, i as u64));
        let mut records = sample_records(
            &state,
            SampleSpec {
                basis,
                shots: config.data.shots,
            },
            &mut rng,
        )?;
        let (rows, cols) = match desc {
            SystemDescriptor::Heisenberg { rows, cols, .. } => (*rows, *cols),
            SystemDescriptor::Rydberg { n_rows, n_cols, .. } => (*n_rows, *n_cols),
        };
        if config.data.augment && names[split] == "train" {
            records = records
                .iter()
                .flat_map(|r| augment_record_d4(r, rows, cols))
                .collect();
        }
        let zi = sizes.binary_search(&desc.n_sites()).expect("size listed");
        let file = &mut files[slot[split][zi]];
        file.dataset.add_system(SystemEntry {
            id: id.clone(),
            descriptor: desc.clone(),
        })?;
        file.dataset.add_records(&id, records)?;
        let (r0a, doa, time) = descriptor_singular_values(desc);
        let _ = writeln!(
            systems_csv,
            "{id},{},{},{rows},{cols},{},{r0a},{doa},{time}",
            names[split],
            desc.family_name(),
            desc.n_sites(),
        );
    }
    // Drop (split, size) combinations that received no systems.
    files.retain(|f| !f.dataset.systems().is_empty());
    Ok(GeneratedData { files, systems_csv })
}

/// Write generated data under `dir` as `<name>.qd` files plus
/// `systems.csv`. Returns the written paths (for logging).
pub fn write_gen_data(data: &GeneratedData, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for file in &data.files {
        let path = dir.join(format!("{}.qd", file.name));
        file.dataset.write_to(&path)?;
        written.push(path.display().to_string());
    }
    let path = dir.join("systems.csv");
    std::fs::write(&path, &data.systems_csv)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    written.push(path.display().to_string());
    Ok(written)
}

/// Which property tables `estimate` emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropertySelection {
    pub correlations: bool,
    pub entropies: bool,
}

impl PropertySelection {
    /// Parse a `--properties` list: comma-separated `correlations`,
    /// `entropies`, or `all`.
    pub fn parse(spec: Option<&str>) -> Result<Self> {
        let Some(spec) = spec else {
            return Ok(PropertySelection {
                correlations: true,
                entropies: true,
            });
        };
        let mut sel = PropertySelection {
            correlations: false,
            entropies: false,
        };
        for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "correlations" => sel.correlations = true,
                "entropies" => sel.entropies = true,
                "all" => {
                    sel.correlations = true;
                    sel.entropies = true;
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown property '{other}' (expected correlations, entropies, or all)"
                    )))
                }
            }
        }
        if sel == (PropertySelection { correlations: false, entropies: false }) {
            return Err(Error::Config("--properties selected nothing".into()));
        }
        Ok(sel)
    }
}

/// Header of the estimates table.
pub const ESTIMATES_HEADER: &str = "system_id,property,sites,estimate,raw,n,std_err";

/// Shadow-estimate table for every system in a Pauli-6 dataset: two-point
/// correlations for every site pair and/or single-site Rényi-2 entropies.
pub fn estimate_csv(ds: &Dataset, properties: PropertySelection) -> Result<String> {
    if ds.meta.basis != Basis::Pauli6 {
        return Err(Error::Incompatible(
            "shadow estimation needs pauli6 records; occupation-basis datasets are for \
             phase-diagram analysis"
                .into(),
        ));
    }
    let n = ds.meta.n_sites;
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for sys in ds.systems() {
        let records: Vec<Vec<u8>> = ds.records_for(&sys.id).map(|r| r.tokens.clone()).collect();
        if records.is_empty() {
            return Err(Error::Estimation(format!(
                "system {} has no measurement records",
                sys.id
            )));
        }
        if properties.correlations {
            for i in 0..n {
                for j in i + 1..n {
                    let est = estimate_correlation(&records, i, j)?;
                    let _ = writeln!(
                        out,
                        "{},correlation,{i}-{j},{},{},{},{}",
                        sys.id, est.value, est.raw, est.n, est.std_err
                    );
                }
            }
        }
        if properties.entropies {
            for i in 0..n {
                let est = estimate_renyi2(&records, &[i])?;
                let _ = writeln!(
                    out,
                    "{},renyi2,{i},{},{},{},{}",
                    sys.id, est.value, est.raw, est.n, est.std_err
                );
            }
        }
    }
    Ok(out)
}

fn model_basis(model: &GenerativeModel) -> Result<Basis> {
    match model.config().vocab_size {
        2 => Ok(Basis::ZBasis),
        6 => Ok(Basis::Pauli6),
        v => Err(Error::Incompatible(format!(
            "model vocabulary {v} maps to no known measurement basis"
        ))),
    }
}

/// Draw `shots` records from the model for each condition, as datasets (one
/// per site count, named by size when mixed). System ids are `s0000`,
/// `s0001`, ... in condition order; seeds derive per condition index, so a
/// subset of conditions reproduces its records exactly.
pub fn sample_to_datasets(
    model: &GenerativeModel,
    conditions: &[SystemDescriptor],
    shots: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<GeneratedFile>> {
    if shots == 0 {
        return Err(Error::Config("--shots must be >= 1".into()));
    }
    let basis = model_basis(model)?;
    let mut files: Vec<GeneratedFile> = Vec::new();
    for (i, desc) in conditions.iter().enumerate() {
        let cond = Condition::from_descriptor(desc)?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_SAMPLE, i as u64));
        let records = model.sample_records(&cond, shots, &mut rng)?;
        let n_sites = desc.n_sites();
        let file = match files.iter_mut().find(|f| f.dataset.meta.n_sites == n_sites) {
            Some(f) => f,
            None => {
                files.push(GeneratedFile {
                    name: String::new(), // named below once sizes are known
                    dataset: Dataset::new(DatasetMeta {
                        label: label.to_string(),
                        basis,
                        n_sites,
                        seed,
                    }),
                });
                files.last_mut().expect("just pushed")
            }
        };
        let id = format!("s{i:04}");
        file.dataset.add_system(SystemEntry {
            id: id.clone(),
            descriptor: desc.clone(),
        })?;
        file.dataset.add_records(&id, records)?;
    }
    let single = files.len() == 1;
    for f in &mut files {
        f.name = if single {
            "samples".to_string()
        } else {
            format!("samples-n{:02}", f.dataset.meta.n_sites)
        };
    }
    Ok(files)
}

fn rydberg_descriptor(sys: &SystemEntry) -> Result<RydbergParams> {
    match &sys.descriptor {
        SystemDescriptor::Rydberg { .. } => sys.descriptor.to_rydberg(),
        SystemDescriptor::Heisenberg { .. } => Err(Error::Incompatible(format!(
            "system {} is not a Rydberg system; phase analysis needs occupation-basis \
             Rydberg data",
            sys.id
        ))),
    }
}

/// Phase points from a dataset's own records (source label `dataset`).
pub fn phase_from_dataset(ds: &Dataset) -> Result<Vec<PhasePoint>> {
    if ds.meta.basis != Basis::ZBasis {
        return Err(Error::Incompatible(
            "phase analysis needs occupation-basis records".into(),
        ));
    }
    let mut points = Vec::new();
    for sys in ds.systems() {
        let params = rydberg_descriptor(sys)?;
        let records: Vec<Vec<u8>> = ds.records_for(&sys.id).map(|r| r.tokens.clone()).collect();
        if records.is_empty() {
            // A grid point with no measurements is a reported hole, not a
            // failure of the whole sweep.
            continue;
        }
        points.push(PhasePoint::from_records(&params, &records, "dataset")?);
    }
    Ok(points)
}

/// Phase points sampled from a trained model over a sweep grid (source label
/// `model`).
pub fn phase_from_model(
    model: &GenerativeModel,
    grid: &[RydbergParams],
    shots: usize,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    if shots == 0 {
        return Err(Error::Config("--shots must be >= 1".into()));
    }
    if model_basis(model)? != Basis::ZBasis {
        return Err(Error::Incompatible(
            "phase analysis needs an occupation-basis model".into(),
        ));
    }
    let mut points = Vec::new();
    for (i, params) in grid.iter().enumerate() {
        let desc = SystemDescriptor::from_rydberg(params);
        let cond = Condition::from_descriptor(&desc)?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_SAMPLE, i as u64));
        let records = model.sample_records(&cond, shots, &mut rng)?;
        points.push(PhasePoint::from_records(params, &records, "model")?);
    }
    Ok(points)
}

/// Exact phase points over a sweep grid: prepare each state and take order
/// parameters under the Born distribution (source label `exact`).
pub fn phase_exact(grid: &[RydbergParams]) -> Result<Vec<PhasePoint>> {
    grid.iter()
        .map(|p| exact_phase_point(&prepare_rydberg_state(p)?, p, "exact"))
        .collect()
}

/// The frozen-horizon predictor over a dataset: every system with
/// `time >= t0` gets the order parameters measured at `t0` on its own
/// lattice and detuning (source label `baseline_t0`). Errors if some group
/// has no `t0` entry.
pub fn phase_baseline_t0(ds: &Dataset, t0: f64) -> Result<Vec<PhasePoint>> {
    if ds.meta.basis != Basis::ZBasis {
        return Err(Error::Incompatible(
            "phase analysis needs occupation-basis records".into(),
        ));
    }
    let tol = 1e-9 * t0.abs().max(1.0);
    // Group systems by everything except time.
    let mut points = Vec::new();
    for sys in ds.systems() {
        let params = rydberg_descriptor(sys)?;
        if params.time < t0 - tol {
            continue;
        }
        let anchor = ds
            .systems()
            .iter()
            .find(|other| {
                let Ok(op) = rydberg_descriptor(other) else {
                    return false;
                };
                (op.time - t0).abs() <= tol
                    && op.n_rows == params.n_rows
                    && op.n_cols == params.n_cols
                    && op.spacing == params.spacing
                    && op.omega == params.omega
                    && op.delta == params.delta
            })
            .ok_or_else(|| {
                Error::Estimation(format!(
                    "frozen-horizon baseline: no t0 = {t0} data for the lattice/detuning of \
                     system {}",
                    sys.id
                ))
            })?;
        let records: Vec<Vec<u8>> =
            ds.records_for(&anchor.id).map(|r| r.tokens.clone()).collect();
        if records.is_empty() {
            continue;
        }
        let mut point = PhasePoint::from_records(&params, &records, "baseline_t0")?;
        point.time = params.time;
        points.push(point);
    }
    Ok(points)
}

/// Build the training set for one or more dataset files.
pub fn load_training_sets(paths: &[std::path::PathBuf]) -> Result<(Vec<Dataset>, TrainingSet)> {
    let sets: Vec<Dataset> = paths
        .iter()
        .map(|p| Dataset::read_from(p))
        .collect::<Result<_>>()?;
    let refs: Vec<&Dataset> = sets.iter().collect();
    let training = TrainingSet::from_datasets(&refs)?;
    Ok((sets, training))
}

/// Self-contained gradient check of the full model (both conditioner kinds),
/// returning the printable report. Errors when the worst relative error
/// exceeds `tolerance`.
pub fn grad_check_report(seed: u64, tolerance: f64) -> Result<String> {
    use crate::model::TransformerConfig;
    use crate::nn::grad_check;

    let mut out = String::new();
    for kind in [crate::model::ConditionerKind::Gcn, crate::model::ConditionerKind::Linear] {
        let mut config = TransformerConfig::defaults(Basis::Pauli6, 4, kind);
        config.d_model = 16;
        config.n_heads = 2;
        config.n_blocks = 2;
        config.ffn_hidden = 24;
        config.dropout = 0.0;
        let conds = match kind {
            crate::model::ConditionerKind::Gcn => {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, STREAM_COUPLINGS, 0));
                vec![Condition::Graph(CouplingGraph::random_grid(
                    2, 2, 0.2, 1.8, &mut rng,
                )?)]
            }
            crate::model::ConditionerKind::Linear => {
                vec![Condition::Features([1.0, 4.0, 5.0, 2.0, 1.5, 0.5])]
            }
        };
        let records: Vec<(usize, &[u8])> =
            vec![(0, &[0u8, 3, 5, 1][..]), (0, &[2u8, 2, 4, 0][..])];
        let model = GenerativeModel::new(config, derive_seed(seed, STREAM_TRAIN, 0))?;
        let (_, grads) = model.loss_and_grads::<ChaCha12Rng>(&conds, &records, None)?;
        let mut probe = model.params.clone();
        let report = grad_check(
            &mut probe,
            &grads,
            |p| {
                let pass = model.forward_with::<ChaCha12Rng>(p, &conds, &records, None)?;
                Ok(pass.tape.value(pass.loss).item())
            },
            1e-5,
            Some(4),
        )?;
        let _ = writeln!(
            out,
            "{} conditioner: max rel err {:.3e} at {} ({} entries probed)",
            match kind {
                crate::model::ConditionerKind::Gcn => "gcn",
                crate::model::ConditionerKind::Linear => "linear",
            },
            report.max_rel_err,
            report.worst_param,
            report.checked
        );
        if !report.passes(tolerance) {
            out.push_str(&format!(
                "FAIL: exceeds tolerance {tolerance:.1e}\n"
            ));
            return Err(Error::Estimation(format!(
                "gradient check failed:\n{out}"
            )));
        }
    }
    let _ = writeln!(out, "gradient check passed (tolerance {tolerance:.1e})");
    Ok(out)
}
