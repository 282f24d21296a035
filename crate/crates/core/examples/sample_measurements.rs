//! Randomized measurements of a ground state, saved as a dataset file.
//!
//! Prepares the ground state of a 2x2 Heisenberg lattice, samples
//! randomized Pauli (Pauli-6) measurement records from it, and writes a
//! dataset file that round-trips byte for byte. Each record token encodes
//! (basis, outcome) for one site: 0..5 = X+, X-, Y+, Y-, Z+, Z-.
//!
//! ```text
//! cargo run --release --example sample_measurements
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use shadowgen::graph::CouplingGraph;
use shadowgen::measure::{
    sample_records, Basis, Dataset, DatasetMeta, SampleSpec, SystemDescriptor, SystemEntry,
};
use shadowgen::quantum::{build_heisenberg, ground_state};
use shadowgen::Result;

const TOKEN_NAMES: [&str; 6] = ["X+", "X-", "Y+", "Y-", "Z+", "Z-"];

fn main() -> Result<()> {
    let graph = CouplingGraph::grid(2, 2, 1.0)?;
    let state = ground_state(&build_heisenberg(&graph)?)?.state;

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let spec = SampleSpec {
        basis: Basis::Pauli6,
        shots: 500,
    };
    let records = sample_records(&state, spec, &mut rng)?;
    println!("sampled {} Pauli-6 records of 4 sites each", records.len());
    println!();
    println!("first five records:");
    for rec in &records[..5] {
        let pretty: Vec<&str> = rec.iter().map(|&t| TOKEN_NAMES[t as usize]).collect();
        println!("  {rec:?}  =  {}", pretty.join(" "));
    }

    // Package the records as a dataset file.
    let mut ds = Dataset::new(DatasetMeta {
        label: "example-2x2".into(),
        basis: Basis::Pauli6,
        n_sites: 4,
        seed: 7,
    });
    ds.add_system(SystemEntry {
        id: "sys0".into(),
        descriptor: SystemDescriptor::from_graph(&graph),
    })?;
    ds.add_records("sys0", records)?;

    let path = std::env::temp_dir().join("shadowgen-example.qd");
    ds.write_to(&path)?;
    let reread = Dataset::read_from(&path)?;
    assert_eq!(ds, reread);
    println!();
    println!(
        "wrote {} ({} records) and read it back identically",
        path.display(),
        reread.records_for("sys0").count()
    );
    Ok(())
}
