//! Reference predictors to compare the generative model against: Gaussian
//! kernel ridge regression, a small MLP regressor built on the same autodiff
//! engine, and the frozen-time predictor.
//!
//! Each regressor fits one scalar property at a time (one model per property,
//! e.g. per correlation pair). Inputs are plain feature vectors — flattened
//! coupling matrices, standardized Rydberg parameters, or anything else of
//! uniform dimension.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{xavier_uniform, Adam, ParamSet, Tape, Tensor, Var};

/// A scalar regression problem: one feature vector and one target per
/// training point.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    dim: usize,
}

impl RegressionTask {
    /// Validates and stores a training set. Inputs must be nonempty, of one
    /// common dimension ≥ 1, and entirely finite; targets must match in
    /// length and be finite.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Config("regression task has no training points".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Config(format!(
                "regression task has {} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return Err(Error::Config("regression inputs must have dimension >= 1".into()));
        }
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::Config(format!(
                    "regression input {i} has dimension {}, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("regression input {i}"),
                });
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("regression target {i}"),
            });
        }
        Ok(RegressionTask { inputs, targets, dim })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median-heuristic kernel width: `γ = 1 / (2 · median pairwise squared
/// distance)`. Degenerate inputs (a single point, or all points identical)
/// fall back to `γ = 0.5`.
pub fn median_heuristic_gamma(inputs: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::with_capacity(inputs.len() * (inputs.len().saturating_sub(1)) / 2);
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            dists.push(sq_dist(&inputs[i], &inputs[j]));
        }
    }
    if dists.is_empty() {
        return 0.5;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = if dists.len() % 2 == 1 {
        dists[dists.len() / 2]
    } else {
        0.5 * (dists[dists.len() / 2 - 1] + dists[dists.len() / 2])
    };
    if median > 0.0 {
        1.0 / (2.0 * median)
    } else {
        0.5
    }
}

/// Gaussian kernel ridge regressor: `k(x, x') = exp(−γ‖x − x'‖²)`,
/// coefficients `α = (K + λI)⁻¹ y`, prediction `Σ_i α_i k(x_i, x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRidge {
    gamma: f64,
    lambda: f64,
    train_inputs: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

impl KernelRidge {
    /// Fit on a task. `gamma = None` applies the median heuristic; `lambda`
    /// is the ridge strength (0 is allowed but risks a singular system).
    pub fn fit(task: &RegressionTask, gamma: Option<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("ridge lambda must be finite and >= 0, got {lambda}")));
        }
        let gamma = gamma.unwrap_or_else(|| median_heuristic_gamma(task.inputs()));
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!("kernel gamma must be finite and > 0, got {gamma}")));
        }
        let n = task.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = (-gamma * sq_dist(&task.inputs()[i], &task.inputs()[j])).exp();
            }
            k[(i, i)] += lambda;
        }
        let y = DVector::from_column_slice(task.targets());
        let chol = Cholesky::new(k).ok_or_else(|| {
            Error::Linalg(
                "kernel system K + lambda*I is not positive definite (duplicate training \
                 points?); increase lambda above 0"
                    .into(),
            )
        })?;
        let alpha = chol.solve(&y);
        Ok(KernelRidge {
            gamma,
            lambda,
            train_inputs: task.inputs().to_vec(),
            alpha: alpha.iter().copied().collect(),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Predicted value at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let dim = self.train_inputs[0].len();
        if x.len() != dim {
            return Err(Error::Incompatible(format!(
                "kernel ridge expects inputs of dimension {dim}, got {}",
                x.len()
            )));
        }
        Ok(self
            .train_inputs
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * (-self.gamma * sq_dist(xi, x)).exp())
            .sum())
    }
}

/// Hyperparameters of the MLP regressor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden-layer widths; both must be ≥ 1.
    pub hidden: [usize; 2],
    /// Full-batch Adam steps.
    pub epochs: usize,
    /// Fixed learning rate.
    pub lr: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: [64, 64],
            epochs: 500,
            lr: 1e-2,
            seed: 0,
        }
    }
}

/// Two-hidden-layer ReLU network trained with full-batch Adam on squared
/// error. Runs on the same tape-based autodiff engine as the generative
/// model, and is deterministic for a fixed seed.
#[derive(Debug)]
pub struct MlpRegressor {
    config: MlpConfig,
    dim: usize,
    params: ParamSet,
}

impl MlpRegressor {
    fn init_params(dim: usize, hidden: [usize; 2], seed: u64) -> Result<ParamSet> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let widths = [dim, hidden[0], hidden[1], 1];
        for layer in 0..3 {
            let (fan_in, fan_out) = (widths[layer], widths[layer + 1]);
            params.add(&format!("mlp.w{layer}"), xavier_uniform(&mut rng, fan_in, fan_out))?;
            params.add(&format!("mlp.b{layer}"), Tensor::zeros(vec![fan_out]))?;
        }
        Ok(params)
    }

    /// Forward pass and mean-squared-error loss on a batch, with parameter
    /// leaves returned in `ParamSet` index order (for gradient extraction).
    fn mse_loss(
        &self,
        params: &ParamSet,
        x: &Tensor,
        y: &Tensor,
    ) -> Result<(Tape, Var, Vec<Var>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = (0..params.len())
            .map(|i| tape.leaf(params.tensor(i).clone()))
            .collect();
        let mut h = tape.leaf(x.clone());
        for layer in 0..3 {
            h = tape.matmul(h, vars[2 * layer])?;
            h = tape.add(h, vars[2 * layer + 1])?;
            if layer < 2 {
                h = tape.relu(h);
            }
        }
        let target = tape.leaf(y.clone());
        let diff = tape.sub(h, target)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean(sq);
        Ok((tape, loss, vars))
    }

    /// Train a fresh regressor on `task`.
    pub fn fit(task: &RegressionTask, config: MlpConfig) -> Result<Self> {
        if config.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "mlp hidden widths must be >= 1, got {:?}",
                config.hidden
            )));
        }
        if !(config.lr.is_finite() && config.lr > 0.0) {
            return Err(Error::Config(format!("mlp learning rate must be finite and > 0, got {}", config.lr)));
        }
        let dim = task.dim();
        let params = Self::init_params(dim, config.hidden, config.seed)?;
        let mut model = MlpRegressor { config, dim, params };
        let m = task.len();
        let x = Tensor::new(
            vec![m, dim],
            task.inputs().iter().flatten().copied().collect(),
        )?;
        let y = Tensor::new(vec![m, 1], task.targets().to_vec())?;
        let mut adam = Adam::new(&model.params);
        for step in 0..config.epochs {
            let (mut tape, loss, vars) = model.mse_loss(&model.params, &x, &y)?;
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("mlp loss at training step {}", step + 1),
                });
            }
            tape.backward(loss)?;
            let grads: Vec<Option<Tensor>> = vars.iter().map(|&v| tape.grad(v)).collect();
            adam.step(&mut model.params, &grads, config.lr)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    /// Mean squared error on a task (no training).
    pub fn mse(&self, task: &RegressionTask) -> Result<f64> {
        let mut total = 0.0;
        for (x, &t) in task.inputs().iter().zip(task.targets()) {
            let p = self.predict(x)?;
            total += (p - t) * (p - t);
        }
        Ok(total / task.len() as f64)
    }

    /// Predicted value at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Incompatible(format!(
                "mlp expects inputs of dimension {}, got {}",
                self.dim,
                x.len()
            )));
        }
        let mut h = x.to_vec();
        for layer in 0..3 {
            let w = self.params.get(
                self.params
                    .find(&format!("mlp.w{layer}"))
                    .expect("mlp parameter present"),
            );
            let b = self.params.get(
                self.params
                    .find(&format!("mlp.b{layer}"))
                    .expect("mlp parameter present"),
            );
            let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
            debug_assert_eq!(h.len(), fan_in);
            let mut out = b.data().to_vec();
            for (i, &hi) in h.iter().enumerate() {
                if hi == 0.0 {
                    continue;
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o += hi * w.data()[i * fan_out + j];
                }
            }
            if layer < 2 {
                for o in &mut out {
                    *o = o.max(0.0);
                }
            }
            h = out;
        }
        Ok(h[0])
    }
}

/// The frozen-time predictor: report the value measured at the training
/// horizon `t0` for every later query time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenT {
    t0: f64,
    value: f64,
}

impl FrozenT {
    /// Collect all points whose time matches `t0` (relative tolerance 1e-9)
    /// and store their mean value. Errors when no point matches.
    pub fn fit(points: &[(f64, f64)], t0: f64) -> Result<Self> {
        let tol = 1e-9 * t0.abs().max(1.0);
        let matching: Vec<f64> = points
            .iter()
            .filter(|(t, _)| (t - t0).abs() <= tol)
            .map(|&(_, v)| v)
            .collect();
        if matching.is_empty() {
            return Err(Error::Estimation(format!(
                "frozen-time baseline needs training points at t0 = {t0}, found none"
            )));
        }
        Ok(FrozenT {
            t0,
            value: matching.iter().sum::<f64>() / matching.len() as f64,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// The frozen prediction, independent of the query time.
    pub fn predict(&self, _t: f64) -> f64 {
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::Rng;

    fn toy_task() -> RegressionTask {
        // Five 1D points with a smooth target.
        let xs: Vec<Vec<f64>> = [0.0, 0.7, 1.1, 2.3, 3.0].iter().map(|&x| vec![x]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] * 1.3).sin()).collect();
        RegressionTask::new(xs, ys).unwrap()
    }

    #[test]
    fn single_point_interpolates_exactly_with_zero_ridge() {
        let task = RegressionTask::new(vec![vec![1.0, 2.0]], vec![3.5]).unwrap();
        let kr = KernelRidge::fit(&task, Some(1.0), 0.0).unwrap();
        let p = kr.predict(&[1.0, 2.0]).unwrap();
        assert!((p - 3.5).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn vanishing_gamma_flattens_the_predictor() {
        let task = toy_task();
        let kr = KernelRidge::fit(&task, Some(1e-14), 0.5).unwrap();
        let p1 = kr.predict(&[0.1]).unwrap();
        let p2 = kr.predict(&[100.0]).unwrap();
        assert!((p1 - p2).abs() < 1e-6, "{p1} vs {p2}");
        // All kernel entries are ~1, so every prediction is ~ sum(alpha).
        let alpha_sum: f64 = kr.alpha.iter().sum();
        assert!((p1 - alpha_sum).abs() < 1e-6);
    }

    #[test]
    fn matches_an_independent_dense_solve() {
        let task = toy_task();
        let (gamma, lambda) = (0.8, 1e-3);
        let kr = KernelRidge::fit(&task, Some(gamma), lambda).unwrap();
        // Direct LU solve of the same linear system.
        let n = task.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = (-gamma * sq_dist(&task.inputs()[i], &task.inputs()[j])).exp();
            }
            k[(i, i)] += lambda;
        }
        let alpha = k
            .lu()
            .solve(&DVector::from_column_slice(task.targets()))
            .unwrap();
        for q in [0.0, 0.5, 1.7, 2.9] {
            let direct: f64 = task
                .inputs()
                .iter()
                .zip(alpha.iter())
                .map(|(xi, a)| a * (-gamma * sq_dist(xi, &[q])).exp())
                .sum();
            let p = kr.predict(&[q]).unwrap();
            assert!((p - direct).abs() < 1e-10, "q={q}: {p} vs {direct}");
        }
    }

    #[test]
    fn training_point_order_does_not_matter() {
        let task = toy_task();
        let kr = KernelRidge::fit(&task, Some(0.8), 1e-3).unwrap();
        let mut rev_inputs = task.inputs().to_vec();
        let mut rev_targets = task.targets().to_vec();
        rev_inputs.reverse();
        rev_targets.reverse();
        let rev_task = RegressionTask::new(rev_inputs, rev_targets).unwrap();
        let kr_rev = KernelRidge::fit(&rev_task, Some(0.8), 1e-3).unwrap();
        for q in [0.0, 0.9, 2.2, 3.1] {
            let a = kr.predict(&[q]).unwrap();
            let b = kr_rev.predict(&[q]).unwrap();
            assert!((a - b).abs() < 1e-9, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn ridge_strength_shrinks_predictions_monotonically() {
        let task = toy_task();
        let queries = [0.0, 0.7, 1.1, 2.3, 3.0];
        let mut last = f64::INFINITY;
        for lambda in [1e-3, 1.0, 1e3, 1e6] {
            let kr = KernelRidge::fit(&task, Some(0.8), lambda).unwrap();
            let peak = queries
                .iter()
                .map(|&q| kr.predict(&[q]).unwrap().abs())
                .fold(0.0, f64::max);
            assert!(peak < last, "lambda={lambda}: {peak} !< {last}");
            last = peak;
        }
    }

    #[test]
    fn duplicate_points_without_ridge_are_rejected_with_advice() {
        let task =
            RegressionTask::new(vec![vec![1.0], vec![1.0], vec![2.0]], vec![0.1, 0.1, 0.4])
                .unwrap();
        let err = KernelRidge::fit(&task, Some(1.0), 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda"), "unhelpful message: {msg}");
    }

    #[test]
    fn median_heuristic_has_the_hand_computed_value() {
        // Pairwise squared distances of {0, 1, 3}: 1, 9, 4 -> median 4.
        let inputs = vec![vec![0.0], vec![1.0], vec![3.0]];
        let g = median_heuristic_gamma(&inputs);
        assert!((g - 1.0 / 8.0).abs() < 1e-15, "gamma = {g}");
        // Degenerate cases fall back without dividing by zero.
        assert_eq!(median_heuristic_gamma(&[vec![1.0]]), 0.5);
        assert_eq!(median_heuristic_gamma(&[vec![1.0], vec![1.0]]), 0.5);
    }

    #[test]
    fn mlp_learns_a_linear_target() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] + 1.0).collect();
        let task = RegressionTask::new(xs, ys).unwrap();
        let config = MlpConfig {
            hidden: [16, 16],
            epochs: 800,
            lr: 1e-2,
            seed: 7,
        };
        let mlp = MlpRegressor::fit(&task, config).unwrap();
        let mse = mlp.mse(&task).unwrap();
        assert!(mse < 1e-3, "mse = {mse}");

        // Deterministic under the seed...
        let again = MlpRegressor::fit(&task, config).unwrap();
        for x in task.inputs() {
            assert_eq!(mlp.predict(x).unwrap(), again.predict(x).unwrap());
        }
        // ...and sensitive to it.
        let other = MlpRegressor::fit(&task, MlpConfig { seed: 8, ..config }).unwrap();
        assert_ne!(
            mlp.predict(&[0.35]).unwrap(),
            other.predict(&[0.35]).unwrap()
        );
    }

    #[test]
    fn mlp_fits_a_constant_target() {
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 / 10.0, (i * i) as f64 / 100.0])
            .collect();
        let task = RegressionTask::new(xs, vec![0.75; 10]).unwrap();
        // A small learning rate keeps Adam's terminal oscillation below the
        // target error once the bias has absorbed the constant.
        let config = MlpConfig {
            hidden: [8, 8],
            epochs: 20_000,
            lr: 3e-4,
            seed: 1,
        };
        let mlp = MlpRegressor::fit(&task, config).unwrap();
        let mse = mlp.mse(&task).unwrap();
        assert!(mse < 1e-6, "mse = {mse}");
    }

    #[test]
    fn mlp_gradients_agree_with_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let ys: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
        let task = RegressionTask::new(xs, ys).unwrap();
        let config = MlpConfig {
            hidden: [5, 4],
            epochs: 0,
            lr: 1e-2,
            seed: 3,
        };
        let mut mlp = MlpRegressor::fit(&task, config).unwrap();
        // Central differences misbehave when a perturbation crosses a ReLU
        // kink. Shrink the weights and lift the biases so every hidden
        // pre-activation sits far from zero relative to the probe step.
        for i in 0..mlp.params.len() {
            let (name, _) = mlp.params.entry(i);
            let is_bias = name.contains(".b");
            for v in mlp.params.tensor_mut(i).data_mut() {
                if is_bias {
                    *v = 1.0;
                } else {
                    *v *= 0.1;
                }
            }
        }
        let x = Tensor::new(
            vec![task.len(), task.dim()],
            task.inputs().iter().flatten().copied().collect(),
        )
        .unwrap();
        let y = Tensor::new(vec![task.len(), 1], task.targets().to_vec()).unwrap();
        let (mut tape, loss, vars) = mlp.mse_loss(&mlp.params, &x, &y).unwrap();
        tape.backward(loss).unwrap();
        let analytic: Vec<Option<Tensor>> = vars.iter().map(|&v| tape.grad(v)).collect();
        let mut probe = mlp.params.clone();
        let report = grad_check(
            &mut probe,
            &analytic,
            |p| {
                let (t, l, _) = mlp.mse_loss(p, &x, &y)?;
                Ok(t.value(l).item())
            },
            1e-5,
            None,
        )
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn mlp_config_validation_and_divergence() {
        let task = toy_task();
        let bad = MlpConfig {
            hidden: [0, 8],
            ..MlpConfig::default()
        };
        assert!(matches!(
            MlpRegressor::fit(&task, bad),
            Err(Error::Config(_))
        ));

        // Adam's normalized steps move weights by about lr per step, so the
        // rate must be outrageous for the forward pass to overflow quickly.
        let explosive = MlpConfig {
            hidden: [8, 8],
            epochs: 200,
            lr: 1e60,
            seed: 0,
        };
        let err = MlpRegressor::fit(&task, explosive).unwrap_err();
        assert!(
            matches!(err, Error::NonFinite { .. }),
            "expected divergence, got {err}"
        );
    }

    #[test]
    fn frozen_t_repeats_the_t0_value() {
        let points = vec![(0.5, 0.2), (1.0, 0.8), (1.0, 0.9), (1.5, 0.95)];
        let frozen = FrozenT::fit(&points, 1.0).unwrap();
        assert!((frozen.predict(1.0) - 0.85).abs() < 1e-15);
        assert_eq!(frozen.predict(1.0), frozen.predict(2.0));
        assert_eq!(frozen.predict(3.0), frozen.predict(100.0));
        assert_eq!(frozen.t0(), 1.0);
        assert!(FrozenT::fit(&points, 0.75).is_err());
    }

    #[test]
    fn task_validation_rejects_malformed_inputs() {
        assert!(RegressionTask::new(vec![], vec![]).is_err());
        assert!(RegressionTask::new(vec![vec![1.0]], vec![1.0, 2.0]).is_err());
        assert!(RegressionTask::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
        assert!(RegressionTask::new(vec![vec![]], vec![0.0]).is_err());
        assert!(RegressionTask::new(vec![vec![f64::NAN]], vec![0.0]).is_err());
        assert!(RegressionTask::new(vec![vec![0.0]], vec![f64::INFINITY]).is_err());
        // Dimension mismatches at predict time.
        let task = toy_task();
        let kr = KernelRidge::fit(&task, None, 1e-3).unwrap();
        assert!(kr.predict(&[0.0, 1.0]).is_err());
    }
}
