//! Zero-padded 1-D deep convolutional neural networks.
//!
//! - [`seqconv`]: sequences, convolution, convolutional matrices, downsampling.
//! - [`factorize`]: splitting a long sequence into short real filters.
//! - [`dcnn`]: the network model, forward evaluation, parameter counting, JSON.
//! - [`deepen`]: deepening a teacher network into an interpolating student.
//! - [`capacity`]: pseudo-dimension, covering and learning-rate bound evaluators.
//! - [`trainer`]: empirical risk minimization with exact backpropagation.
//! - [`harness`]: simulated data, sample-size sweeps and the end-to-end pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod error;
pub mod capacity;
pub mod dataset;
pub mod dcnn;
pub mod deepen;
pub mod factorize;
pub mod harness;
pub mod seqconv;
pub mod trainer;

pub use error::{Error, Result};
pub use seqconv::FilterSeq;
