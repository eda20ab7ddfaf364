//! Quanta image sensor (QIS) and CMOS image sensor (CIS) simulation, plus a
//! small reverse-mode autodiff engine used to train low-light classifiers
//! with a student-teacher perceptual-feature protocol.
//!
//! The crate is split into five layers:
//!
//! - [`sensor`]: clean RGB scene to quantized Bayer photon counts.
//! - [`autodiff`]: tensors, a recording graph, optimizers and checkpoints.
//! - [`models`]: entrance networks, the classifier backbone and feature taps.
//! - [`training`]: losses, teacher pre-training, the four training protocols
//!   and evaluation.
//! - [`harness`]: datasets, the experiment sweep, reports and CLI plumbing.

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod models;
pub mod rng;
pub mod sensor;
pub mod training;

pub use error::{Error, Result};
