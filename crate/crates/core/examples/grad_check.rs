//! Finite-difference audit of the autodiff engine and the full model.
//!
//! First differentiates a small hand-built tape expression and compares
//! every gradient entry against central differences; then runs the
//! end-to-end check of the full generative model (both conditioner kinds)
//! that the `shadowgen grad-check` subcommand exposes.
//!
//! ```text
//! cargo run --release --example grad_check
//! ```

use shadowgen::cli::pipeline::grad_check_report;
use shadowgen::nn::{grad_check, ParamSet, Tape, Tensor};
use shadowgen::Result;

fn inputs() -> Result<Tensor> {
    Tensor::new(vec![2, 3], vec![1.0, 2.0, -1.0, 0.5, -2.0, 1.5])
}

/// loss = mean(relu(x W + b)^2), evaluated at the given parameters.
fn loss_at(p: &ParamSet) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(inputs()?);
    let w = tape.leaf(p.get(p.find("w").expect("w")).clone());
    let b = tape.leaf(p.get(p.find("b").expect("b")).clone());
    let h = tape.matmul(x, w)?;
    let h = tape.add(h, b)?;
    let h = tape.relu(h);
    let sq = tape.mul(h, h)?;
    let loss = tape.mean(sq);
    Ok(tape.value(loss).item())
}

fn main() -> Result<()> {
    let mut params = ParamSet::new();
    params.add(
        "w",
        Tensor::new(vec![3, 2], vec![0.4, -0.3, 0.8, 0.1, -0.5, 0.9])?,
    )?;
    params.add("b", Tensor::new(vec![2], vec![0.2, -0.1])?)?;

    // Analytic gradients from one backward pass.
    let mut tape = Tape::new();
    let x = tape.leaf(inputs()?);
    let vars: Vec<_> = params.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
    let h = tape.matmul(x, vars[0])?;
    let h = tape.add(h, vars[1])?;
    let h = tape.relu(h);
    let sq = tape.mul(h, h)?;
    let loss = tape.mean(sq);
    tape.backward(loss)?;
    let grads: Vec<Option<Tensor>> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut probe = params.clone();
    let report = grad_check(&mut probe, &grads, loss_at, 1e-6, None)?;
    println!(
        "hand-built tape: {} entries checked, max relative error {:.3e} (at {})",
        report.checked, report.max_rel_err, report.worst_param
    );
    assert!(report.passes(1e-6));

    // The full transformer + conditioner, as run by `shadowgen grad-check`.
    println!();
    print!("{}", grad_check_report(0, 1e-4)?);
    Ok(())
}
