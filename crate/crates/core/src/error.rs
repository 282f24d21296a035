//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the pipeline.
///
/// Errors split into two broad families, mirrored by the CLI exit codes:
/// configuration/usage problems (exit code 2) and numerical failures
/// (exit code 3). [`Error::exit_code`] encodes the mapping.
#[derive(Debug, Error)]
pub enum Error {
    // --- configuration / usage -------------------------------------------
    /// Invalid run configuration or CLI arguments.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed lattice or coupling graph.
    #[error("graph error: {0}")]
    Graph(String),

    /// File could not be parsed; carries a 1-based line number where known.
    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Checkpoint file is malformed or incompatible with this build.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Dataset and model disagree (qubit count, vocabulary, family...).
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    /// Underlying I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    // --- numerics ---------------------------------------------------------
    /// System size exceeds what exact methods support.
    #[error("system too large: {n} qubits (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    /// Iterative eigensolver failed to reach the residual target.
    #[error("eigensolver did not converge: residual {residual:.3e} after {iters} iterations (target {target:.1e})")]
    NoConvergence {
        residual: f64,
        iters: usize,
        target: f64,
    },

    /// Time step too coarse: the integrator lost unitarity.
    #[error("time step too large: norm drifted by {drift:.3e} at t = {t:.6} (allowed 1e-6); reduce dt")]
    StepSize { drift: f64, t: f64 },

    /// A non-finite value appeared during optimization.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Linear solve failed (singular or not positive definite).
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// An estimator was asked for something its inputs cannot support.
    #[error("estimation error: {0}")]
    Estimation(String),
}

impl Error {
    /// Process exit code the CLI maps this error to:
    /// 2 for configuration/usage errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Graph(_)
            | Error::Parse { .. }
            | Error::Checkpoint(_)
            | Error::Incompatible(_)
            | Error::Io { .. }
            | Error::TooLarge { .. } => 2,
            Error::NoConvergence { .. }
            | Error::StepSize { .. }
            | Error::NonFinite { .. }
            | Error::Linalg(_)
            | Error::Estimation(_) => 3,
        }
    }

    /// Shorthand for [`Error::Io`] with a path attached.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
