//! Exact, normalized density estimation for general real-valued vectors:
//! an invertible transform stack (LU-parameterized linear map plus forward
//! and backward recurrent transforms) feeds a GRU-driven autoregressive
//! model whose per-dimension conditionals are Gaussian mixtures. The crate
//! covers training with Adam and a decayed learning rate, exact sampling by
//! inverting the stack, checkpointing, dataset pipelines, and anomaly
//! detection metrics over the resulting log-likelihood scores.

pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod data;
pub mod model;
pub mod pipeline;
pub mod training;
pub mod numerics;
pub mod conditional;
pub mod transforms;

pub use error::{ErrorCategory, RedError, Result};
