//! Wall-clock estimate for one training epoch on gate-based hardware when
//! gradients come from parameter-shift circuits.

use crate::error::{Error, Result};
use crate::qsim::AnsatzSpec;

/// Gate times and per-circuit overhead, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareProfile {
    pub t_1q: f64,
    pub t_2q: f64,
    /// Register initialization, measurement and delays per circuit.
    pub overhead: f64,
    pub n_shots: u64,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_1q", self.t_1q), ("t_2q", self.t_2q), ("overhead", self.overhead)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n_shots == 0 {
            return Err(Error::Argument("n_shots must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitDepthProfile {
    pub d_1q: u64,
    pub d_2q: u64,
    pub n_params: u64,
    pub n_dataset: u64,
}

/// Time for one sample: a forward circuit plus two shifted circuits per
/// parameter, each followed by the fixed overhead.
///
/// `(d_1q·t_1q + d_2q·t_2q)·(2·n_params + 1) + C`
pub fn element_time(hw: &HardwareProfile, depth: &CircuitDepthProfile) -> Result<f64> {
    hw.validate()?;
    let gates = depth.d_1q as f64 * hw.t_1q + depth.d_2q as f64 * hw.t_2q;
    Ok(gates * (2 * depth.n_params + 1) as f64 + hw.overhead)
}

/// `element_time · n_shots · n_dataset`.
pub fn epoch_time(hw: &HardwareProfile, depth: &CircuitDepthProfile) -> Result<f64> {
    Ok(element_time(hw, depth)? * hw.n_shots as f64 * depth.n_dataset as f64)
}

/// Pessimistic amplitude-embedding depth, `(2^n, 2^n)`.
pub fn default_embedding_depth(n_qubits: usize) -> (u64, u64) {
    (1 << n_qubits, 1 << n_qubits)
}

/// Depths of the layered ansatz on top of a given embedding depth.
///
/// Each Ry row adds one to the single-qubit depth. The CNOT chain cannot be
/// parallelized (each gate's control is the previous target), so every
/// layer adds `n_qubits − 1` to the two-qubit depth.
pub fn depth_from_ansatz(
    spec: &AnsatzSpec,
    embedding_depth_1q: u64,
    embedding_depth_2q: u64,
    n_dataset: u64,
) -> CircuitDepthProfile {
    let (n, l) = (spec.n_qubits() as u64, spec.n_layers() as u64);
    CircuitDepthProfile {
        d_1q: (l + 1) + embedding_depth_1q,
        d_2q: l * (n - 1) + embedding_depth_2q,
        n_params: spec.n_params() as u64,
        n_dataset,
    }
}
