//! A small NCHW tensor engine: a reverse-mode tape over the handful of ops a
//! convolutional encoder/decoder needs, named parameters with ADAM state,
//! a stepwise learning-rate schedule and a binary checkpoint format.
//!
//! Everything is generic over [`Real`] so the same model code runs in `f32`
//! for training and `f64` for finite-difference gradient checks.
//!
//! Kernels are single-threaded and reduce in a fixed order, so a given graph
//! gives bit-identical results from run to run. Independent graphs may be
//! evaluated on different threads.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod store;
pub mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use error::{NeuralError, Result};
pub use graph::{Gradients, Graph, Var};
pub use optim::{adam_step, lr_at, AdamConfig, LrSchedule};
pub use store::{Param, ParamStore};
pub use tensor::{Gemm, Real, Shape, Strides, Tensor};
