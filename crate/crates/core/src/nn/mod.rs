//! A small reverse-mode automatic-differentiation engine.
//!
//! The pieces: [`Tensor`] (dense f64 storage), [`Tape`] (operation
//! recording and backward sweep), [`ParamSet`] with initializers,
//! [`Adam`]/[`LrSchedule`] (optimization), [`grad_check`]
//! (finite-difference verification), and binary checkpoints. Everything is
//! f64 and single-threaded; two runs from equal seeds produce bit-identical
//! parameters.

pub mod kernels;

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointData, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{Adam, LrSchedule};
pub use params::{normal_init, xavier_uniform, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
