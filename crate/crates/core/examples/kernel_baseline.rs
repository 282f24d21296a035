//! The regression baselines on a physical curve: kernel ridge, an MLP, and
//! the frozen-horizon predictor.
//!
//! Task 1 — interpolation: predict the Z2 order parameter of a 7-atom
//! Rydberg chain as a function of detuning, training on a coarse grid of
//! exact values and testing between the grid points. Kernel ridge with the
//! median-heuristic bandwidth and a small MLP both fit this smooth curve.
//!
//! Task 2 — extrapolation in time: predict how the order parameter of an
//! adiabatically prepared state keeps growing after the training horizon
//! t0. The frozen-horizon baseline (predicting the t0 value forever) is
//! exactly what its name says, which is why a model that actually learns
//! the time dependence can beat it.
//!
//! ```text
//! cargo run --release --example kernel_baseline
//! ```

use shadowgen::baselines::{FrozenT, KernelRidge, MlpConfig, MlpRegressor, RegressionTask};
use shadowgen::phases::{exact_phase_point, PhasePoint};
use shadowgen::quantum::{blockade_radius, RydbergParams};
use shadowgen::Result;

fn chain_params(omega: f64, doa: f64, time: f64) -> RydbergParams {
    RydbergParams {
        n_rows: 1,
        n_cols: 7,
        spacing: blockade_radius(omega) / 1.5,
        omega,
        delta: doa * omega,
        time,
    }
}

fn exact_point(params: &RydbergParams) -> Result<PhasePoint> {
    let state = shadowgen::cli::pipeline::prepare_rydberg_state(params)?;
    exact_phase_point(&state, params, "exact")
}

fn main() -> Result<()> {
    let omega = 2.0 * std::f64::consts::PI;

    // ---- Task 1: O_Z2(detuning), interpolation --------------------------
    eprintln!("computing the exact O_Z2(detuning) curve ...");
    let train_x: Vec<f64> = (0..9).map(|i| 0.5 * i as f64).collect();
    let test_x: Vec<f64> = (0..8).map(|i| 0.25 + 0.5 * i as f64).collect();
    let curve = |doa: f64| -> Result<f64> { Ok(exact_point(&chain_params(omega, doa, 0.0))?.o_z2) };

    let inputs: Vec<Vec<f64>> = train_x.iter().map(|&x| vec![x]).collect();
    let targets: Vec<f64> = train_x.iter().map(|&x| curve(x)).collect::<Result<_>>()?;
    let task = RegressionTask::new(inputs, targets)?;

    let krr = KernelRidge::fit(&task, None, 1e-6)?;
    let mlp = MlpRegressor::fit(
        &task,
        MlpConfig {
            hidden: [32, 32],
            epochs: 4000,
            lr: 3e-3,
            seed: 4,
        },
    )?;

    println!("interpolating O_Z2 between training detunings:");
    println!("Delta/Omega   exact    kernel ridge   mlp");
    let (mut se_k, mut se_m) = (0.0, 0.0);
    for &x in &test_x {
        let truth = curve(x)?;
        let k = krr.predict(&[x])?;
        let m = mlp.predict(&[x])?;
        se_k += (k - truth).powi(2);
        se_m += (m - truth).powi(2);
        println!("{x:>11.2}   {truth:.4}   {k:>12.4}   {m:.4}");
    }
    let n = test_x.len() as f64;
    println!(
        "RMSE: kernel ridge {:.4}, mlp {:.4}   (gamma = {:.3} from the median heuristic)",
        (se_k / n).sqrt(),
        (se_m / n).sqrt(),
        krr.gamma()
    );

    // ---- Task 2: O_Z2(T), extrapolation past the horizon ----------------
    eprintln!();
    eprintln!("computing the exact O_Z2(T) ramp curve ...");
    let t0 = 1.0;
    let doa = 3.0;
    let history: Vec<(f64, f64)> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&t| Ok((t, exact_point(&chain_params(omega, doa, t))?.o_z2)))
        .collect::<Result<_>>()?;
    let frozen = FrozenT::fit(&history, t0)?;

    println!();
    println!("extrapolating past the training horizon t0 = {t0} us:");
    println!("T (us)   exact O_Z2   frozen-t0 prediction   |error|");
    for &t in &[1.5, 2.0, 3.0] {
        let truth = exact_point(&chain_params(omega, doa, t))?.o_z2;
        let pred = frozen.predict(t);
        println!(
            "{t:>6.1}   {truth:>10.4}   {pred:>20.4}   {:>7.4}",
            (pred - truth).abs()
        );
    }
    println!();
    println!("the prepared state keeps ordering as the ramp slows down, so the");
    println!("frozen prediction lags further behind at every later time — the");
    println!("gap a time-conditioned generative model is able to close.");
    Ok(())
}
