//! Adiabatic preparation of a Rydberg-chain ground state.
//!
//! A 7-atom chain with the blockade radius covering nearest neighbors
//! (R0/a = 1.5) and detuning Delta = 3*Omega has a Z2-ordered ground state:
//! every other atom excited. This example integrates the standard adiabatic
//! ramp for increasing total times and reports how the prepared state
//! approaches the exact ground state — both in overlap and in the Z2 order
//! parameter.
//!
//! ```text
//! cargo run --release --example adiabatic_rydberg
//! ```

use shadowgen::quantum::{
    blockade_radius, build_rydberg, evolve, ground_state, suggested_dt, RydbergParams, Schedule,
    StateVector,
};
use shadowgen::Result;

/// Z2 order parameter of a basis state: mean occupation of the even
/// sublattice {0, 2, 4, ...}.
fn z2_of_basis(s: usize, n: usize) -> f64 {
    let m = n.div_ceil(2);
    let occupied = (0..n)
        .step_by(2)
        .filter(|&site| (s >> (n - 1 - site)) & 1 == 1)
        .count();
    occupied as f64 / m as f64
}

fn main() -> Result<()> {
    let omega = 2.0 * std::f64::consts::PI; // 1 MHz Rabi drive, in rad/us
    let params = RydbergParams {
        n_rows: 1,
        n_cols: 7,
        spacing: blockade_radius(omega) / 1.5, // R0/a = 1.5
        omega,
        delta: 3.0 * omega,
        time: 0.0,
    };
    let op = build_rydberg(&params)?;
    let exact = ground_state(&op)?;
    let exact_z2 = shadowgen::quantum::diagonal_expectation(&exact.state, |s| z2_of_basis(s, 7));
    println!(
        "7-atom chain, R0/a = 1.5, Delta/Omega = 3: exact ground state has O_Z2 = {exact_z2:.4}"
    );
    println!();
    println!("ramp time (us)    overlap with exact    O_Z2 of prepared state");

    for &total in &[0.2, 0.5, 1.0, 2.0, 4.0] {
        let schedule = Schedule::adiabatic(params.omega, params.delta, total)?;
        let dt = suggested_dt(&op, &schedule);
        let psi0 = StateVector::zero_state(7)?;
        let prepared = evolve(&op, &schedule, &psi0, dt)?;
        let overlap = prepared.overlap(&exact.state);
        let z2 = shadowgen::quantum::diagonal_expectation(&prepared, |s| z2_of_basis(s, 7));
        println!("{total:>13.1}    {overlap:>18.4}    {z2:>22.4}");
    }
    println!();
    println!("longer ramps track the instantaneous ground state more closely,");
    println!("so both columns rise toward their exact values.");
    Ok(())
}
