//! Conditional generative models of quantum measurement data.
//!
//! This crate learns autoregressive transformer models of projective
//! measurement records taken on families of quantum ground states, conditioned
//! on the Hamiltonian parameters that produced each state. A trained model
//! generates artificial measurements for parameter values it never saw, and
//! physical properties (two-point correlations, Rényi-2 entropies, Rydberg
//! order parameters) are estimated from real or generated records with
//! randomized-measurement classical shadows.
//!
//! The main pieces:
//!
//! - [`graph`] — lattice graphs and coupling geometries.
//! - [`quantum`] — state vectors, Hamiltonians (Heisenberg, Rydberg), exact
//!   diagonalization, Schrödinger evolution, observables.
//! - [`measure`] — POVM definitions (Pauli-6, occupation basis), measurement
//!   sampling, dataset files, symmetry augmentation.
//! - [`shadows`] — classical-shadow estimators built from measurement records.
//! - [`nn`] — a small reverse-mode autodiff engine (tape + Adam + gradient
//!   checking) used by the models; no external ML dependencies.
//! - [`model`] — the conditional autoregressive transformer, graph/parameter
//!   conditioners, training loop, ancestral sampling, checkpoints.
//! - [`phases`] — Rydberg order parameters, phase classification, phase-diagram
//!   sweeps.
//! - [`baselines`] — Gaussian kernel ridge regression, a small MLP, and a
//!   frozen-horizon predictor for comparison experiments.
//! - [`cli`] — configuration files and the `shadowgen` command-line interface.
//!
//! # Examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! ```text
//! cargo run --release --example exact_ground_state
//! cargo run --release --example sample_measurements
//! cargo run --release --example shadow_estimation
//! cargo run --release --example adiabatic_rydberg
//! cargo run --release --example grad_check
//! cargo run --release --example train_heisenberg
//! cargo run --release --example train_rydberg_sweep
//! cargo run --release --example phase_diagram
//! cargo run --release --example kernel_baseline
//! ```
//!
//! The examples are ordered roughly by pipeline stage: exact solvers first,
//! then measurement sampling and shadow estimation, then model training and
//! the downstream experiments. The `shadowgen` binary exposes the same
//! pipeline as subcommands (`gen-data`, `train`, `sample`, `estimate`,
//! `phase-diagram`, `evaluate`, `grad-check`); see `README.md`.

pub mod baselines;
pub mod cli;
pub mod graph;
pub mod measure;
pub mod model;
pub mod nn;
pub mod phases;
pub mod quantum;
pub mod shadows;

mod error;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
