//! Exact phase diagram of a small Rydberg chain, as text and PNG.
//!
//! Sweeps blockade range against detuning for a 5-atom chain, computes the
//! exact order parameters of every ground state, classifies each point, and
//! renders the diagram both as an ASCII map, a CSV table, and the PNG the
//! `phase-diagram --format png` subcommand produces.
//!
//! ```text
//! cargo run --release --example phase_diagram
//! ```

use shadowgen::cli::report::write_phase_png;
use shadowgen::phases::{exact_phase_point, phase_csv, PhaseLabel, PhasePoint};
use shadowgen::quantum::{blockade_radius, build_rydberg, ground_state, RydbergParams};
use shadowgen::Result;

fn main() -> Result<()> {
    let omega = 2.0 * std::f64::consts::PI;
    let r0 = blockade_radius(omega);
    let radii: Vec<f64> = (0..6).map(|i| 1.0 + 0.4 * i as f64).collect();
    let detunings: Vec<f64> = (0..9).map(|i| 0.5 * i as f64).collect();

    eprintln!(
        "diagonalizing {} ground states of a 5-atom chain ...",
        radii.len() * detunings.len()
    );
    let mut points: Vec<PhasePoint> = Vec::new();
    for &r0a in &radii {
        for &doa in &detunings {
            let params = RydbergParams {
                n_rows: 1,
                n_cols: 5,
                spacing: r0 / r0a,
                omega,
                delta: doa * omega,
                time: 0.0,
            };
            let state = ground_state(&build_rydberg(&params)?)?.state;
            points.push(exact_phase_point(&state, &params, "exact")?);
        }
    }

    // ASCII map: rows are R0/a (descending), columns are Delta/Omega.
    println!();
    println!("phase map (. disordered, 2 = Z2, 3 = Z3):");
    println!();
    print!("R0/a \\ D/O |");
    for &doa in &detunings {
        print!("{doa:>4.1}");
    }
    println!();
    for &r0a in radii.iter().rev() {
        print!("{r0a:>10.1} |");
        for &doa in &detunings {
            let p = points
                .iter()
                .find(|p| p.r0_over_a == r0a && p.delta_over_omega == doa)
                .unwrap();
            let mark = match p.label {
                PhaseLabel::Z2 => "2",
                PhaseLabel::Z3 => "3",
                _ => ".",
            };
            print!("{mark:>4}");
        }
        println!();
    }

    println!();
    println!("Z2 order grows with detuning once the blockade couples nearest");
    println!("neighbors (R0/a > 1); wider blockades favor the Z3 pattern.");

    let png = std::env::temp_dir().join("shadowgen-phase-diagram.png");
    write_phase_png(&points, &png)?;
    println!();
    println!("wrote {}", png.display());

    println!();
    print!("{}", phase_csv(&points));
    Ok(())
}
