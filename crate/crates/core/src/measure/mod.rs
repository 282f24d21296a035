//! Measurements: POVM definitions, sampling from states, dataset files, and
//! lattice-symmetry augmentation.
//!
//! Outcomes are stored as token strings, one token per site in site order.
//! The Pauli-6 POVM uses tokens 0..6 = X+, X−, Y+, Y−, Z+, Z−; the occupation
//! (Z) basis uses 0 = ground/dark, 1 = excited (Rydberg).

mod augment;
mod dataset;
mod povm;
mod sampling;

pub use augment::{augment_record_d4, dihedral_images};
pub use dataset::{Dataset, DatasetMeta, Record, SystemDescriptor, SystemEntry};
pub use povm::{pauli6_factor, pauli6_projector, Basis, PAULI6_TOKENS, ZBASIS_TOKENS};
pub use sampling::{sample_records, derive_seed, SampleSpec};
