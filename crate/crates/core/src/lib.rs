//! Single-pixel imaging in the Hadamard basis, with classical and
//! statevector-simulated quantum models for classifying and reconstructing
//! the measured objects.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod hadamard;
pub mod history;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pgm;
pub mod qml;
pub mod qpu_time;
pub mod qsim;

pub use error::{Error, ErrorKind, Result};
