//! Statevector simulation of Ry/CNOT circuits.
//!
//! Bit convention: qubit 0 is the most significant bit of a basis index,
//! `i = Σ_k b_k 2^(n-1-k)`. Amplitude embedding places the features on the
//! leading qubits, so with `q` feature qubits in an `n`-qubit register
//! feature `k` lands on basis index `k · 2^(n-q)` and the trailing qubits
//! act as ancillas in `|0⟩`.
//!
//! Ry and CNOT map real states to real states and embedded features are
//! real, so the training hot path (`PreparedAnsatz`) works on `f64`
//! amplitudes. The complex [`StateVector`] runs the same arithmetic; its
//! real parts are bit-identical to the real path.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Bounds { index, len: dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap amplitudes, rejecting anything that is not unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Dimension(format!("{n} amplitudes is not 2^n with n >= 1")));
        }
        let s = Self {
            n_qubits: n.trailing_zeros() as usize,
            amps,
        };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numeric(format!("state norm² {norm} is not 1")));
        }
        Ok(s)
    }

    pub(crate) fn from_real(n_qubits: usize, amps: &[f64]) -> Self {
        Self {
            n_qubits,
            amps: amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Bounds {
                index: q,
                len: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (s, c) = (theta / 2.0).sin_cos();
        let stride = 1usize << (self.n_qubits - 1 - qubit);
        for block in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = x * c - y * s;
                *a1 = x * s + y * c;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Argument(format!("CNOT control and target both {control}")));
        }
        cnot_generic(&mut self.amps, self.n_qubits, control, target);
        Ok(())
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > 24 {
        return Err(Error::Argument(format!("{n} qubits not supported (1..=24)")));
    }
    Ok(())
}

fn cnot_generic<T>(amps: &mut [T], n_qubits: usize, control: usize, target: usize) {
    let cbit = 1usize << (n_qubits - 1 - control);
    let tbit = 1usize << (n_qubits - 1 - target);
    for i in 0..amps.len() {
        if i & cbit != 0 && i & tbit == 0 {
            amps.swap(i, i | tbit);
        }
    }
}

/// L2-normalized features on the leading qubits of an `n_qubits` register.
pub fn amplitude_embed(features: &[f64], n_qubits: usize) -> Result<StateVector> {
    let amps = embed_real(features, n_qubits)?;
    Ok(StateVector::from_real(n_qubits, &amps))
}

pub(crate) fn embed_real(features: &[f64], n_qubits: usize) -> Result<Vec<f64>> {
    check_qubits(n_qubits)?;
    let len = features.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "{len} features is not a power of two >= 2"
        )));
    }
    let q = len.trailing_zeros() as usize;
    if q > n_qubits {
        return Err(Error::Dimension(format!(
            "{len} features need {q} qubits, register has {n_qubits}"
        )));
    }
    let norm = features.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numeric(format!(
            "cannot normalize feature vector with norm {norm}"
        )));
    }
    let spacing = 1usize << (n_qubits - q);
    let mut amps = vec![0.0; 1 << n_qubits];
    for (k, &v) in features.iter().enumerate() {
        amps[k * spacing] = v / norm;
    }
    Ok(amps)
}

/// Layered hardware-efficient ansatz: `n_layers` × (Ry on every qubit, then
/// CNOT(k → k+1) for k = 0..n-2), followed by one closing Ry row.
///
/// `thetas` is row-major `(n_layers + 1) × n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    n_qubits: usize,
    n_layers: usize,
    thetas: Vec<f64>,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, n_layers: usize, thetas: Vec<f64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if n_layers == 0 {
            return Err(Error::Argument("ansatz needs at least one layer".into()));
        }
        let want = n_qubits * (n_layers + 1);
        if thetas.len() != want {
            return Err(Error::Dimension(format!(
                "{n_qubits} qubits × {} rows needs {want} angles, got {}",
                n_layers + 1,
                thetas.len()
            )));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            thetas,
        })
    }

    pub fn zeros(n_qubits: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, n_layers, vec![0.0; n_qubits * (n_layers + 1)])
    }

    /// Angles drawn uniformly from `[0, 2π)`.
    pub fn random<R: Rng>(n_qubits: usize, n_layers: usize, rng: &mut R) -> Result<Self> {
        let n = n_qubits * (n_layers + 1);
        let thetas = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        Self::new(n_qubits, n_layers, thetas)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_params(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn thetas_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    pub fn theta(&self, row: usize, qubit: usize) -> f64 {
        self.thetas[row * self.n_qubits + qubit]
    }
}

/// Apply the ansatz to a state.
pub fn run_ansatz(mut state: StateVector, spec: &AnsatzSpec) -> Result<StateVector> {
    if state.n_qubits != spec.n_qubits {
        return Err(Error::Dimension(format!(
            "{}-qubit ansatz on a {}-qubit state",
            spec.n_qubits, state.n_qubits
        )));
    }
    let n = spec.n_qubits;
    for row in 0..=spec.n_layers {
        for q in 0..n {
            state.apply_ry(q, spec.theta(row, q))?;
        }
        if row < spec.n_layers {
            for k in 0..n - 1 {
                state.apply_cnot(k, k + 1)?;
            }
        }
    }
    Ok(state)
}

#[inline]
fn ry_real(amps: &mut [f64], n_qubits: usize, qubit: usize, sin_half: f64, cos_half: f64) {
    let stride = 1usize << (n_qubits - 1 - qubit);
    let (s, c) = (sin_half, cos_half);
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a0, *a1);
            *a0 = x * c - y * s;
            *a1 = x * s + y * c;
        }
    }
}

/// Basis permutation of one full CNOT chain: input index `i` ends up at `chain[i]`.
///
/// CNOT(k → k+1) for k = 0..n-2 in sequence turns bits `b` into their prefix
/// XOR, `b'_k = b_0 ⊕ … ⊕ b_k` (qubit 0 = MSB).
pub(crate) fn cnot_chain_permutation(n_qubits: usize) -> Vec<usize> {
    (0..1usize << n_qubits)
        .map(|i| {
            let mut out = 0;
            let mut acc = 0;
            for k in 0..n_qubits {
                acc ^= (i >> (n_qubits - 1 - k)) & 1;
                out |= acc << (n_qubits - 1 - k);
            }
            out
        })
        .collect()
}

/// An ansatz with its rotation coefficients and CNOT-chain permutation
/// precomputed, for evaluating many samples under the same angles.
#[derive(Debug, Clone)]
pub(crate) struct PreparedAnsatz {
    n_qubits: usize,
    n_layers: usize,
    /// `(sin θ/2, cos θ/2)` per angle, same layout as the thetas.
    trig: Vec<(f64, f64)>,
    chain: Vec<usize>,
}

impl PreparedAnsatz {
    pub fn new(spec: &AnsatzSpec) -> Self {
        Self {
            n_qubits: spec.n_qubits,
            n_layers: spec.n_layers,
            trig: spec.thetas.iter().map(|t| (t / 2.0).sin_cos()).collect(),
            chain: cnot_chain_permutation(spec.n_qubits),
        }
    }

    pub fn n_params(&self) -> usize {
        self.trig.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Run the circuit in place; `scratch` must have the same length as `amps`.
    pub fn forward(&self, amps: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        let n = self.n_qubits;
        for row in 0..=self.n_layers {
            for q in 0..n {
                let (s, c) = self.trig[row * n + q];
                ry_real(amps, n, q, s, c);
            }
            if row < self.n_layers {
                for (i, &j) in self.chain.iter().enumerate() {
                    scratch[j] = amps[i];
                }
                std::mem::swap(amps, scratch);
            }
        }
    }

    /// Reverse-mode sweep from the final state.
    ///
    /// `state` is the circuit output and `adjoint` holds ∂L/∂ψ for a real
    /// scalar loss L. Gates are undone one at a time, so no intermediate
    /// states are stored. ∂L/∂θ is added into `grad`.
    pub fn backprop(
        &self,
        state: &mut Vec<f64>,
        adjoint: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
        grad: &mut [f64],
    ) {
        let n = self.n_qubits;
        for row in (0..=self.n_layers).rev() {
            if row < self.n_layers {
                for buf in [&mut *state, &mut *adjoint] {
                    for (i, &j) in self.chain.iter().enumerate() {
                        scratch[i] = buf[j];
                    }
                    std::mem::swap(buf, scratch);
                }
            }
            for q in (0..n).rev() {
                let (s, c) = self.trig[row * n + q];
                // Ry(θ)ᵀ = Ry(−θ) undoes the gate
                ry_real(state, n, q, -s, c);
                let stride = 1usize << (n - 1 - q);
                let mut g = 0.0;
                for (sb, ab) in state.chunks_exact(2 * stride).zip(adjoint.chunks_exact(2 * stride)) {
                    let (s_lo, s_hi) = sb.split_at(stride);
                    let (a_lo, a_hi) = ab.split_at(stride);
                    for i in 0..stride {
                        let (x, y) = (s_lo[i], s_hi[i]);
                        // d/dθ of (c x − s y, s x + c y) with c = cos θ/2, s = sin θ/2
                        let d0 = -0.5 * (s * x + c * y);
                        let d1 = 0.5 * (c * x - s * y);
                        g += a_lo[i] * d0 + a_hi[i] * d1;
                    }
                }
                grad[row * n + q] += g;
                ry_real(adjoint, n, q, -s, c);
            }
        }
    }
}

/// Real-amplitude forward pass; `amps` must hold `2^n_qubits` values.
pub(crate) fn forward_real(amps: &mut Vec<f64>, spec: &AnsatzSpec) {
    let mut scratch = vec![0.0; amps.len()];
    PreparedAnsatz::new(spec).forward(amps, &mut scratch);
}

/// ⟨Z⟩ on qubit 0 of a real state.
pub(crate) fn z0_real(amps: &[f64]) -> f64 {
    let half = amps.len() / 2;
    let plus: f64 = amps[..half].iter().map(|a| a * a).sum();
    let minus: f64 = amps[half..].iter().map(|a| a * a).sum();
    plus - minus
}

pub fn expectation_z0(state: &StateVector) -> f64 {
    let half = state.amps.len() / 2;
    let plus: f64 = state.amps[..half].iter().map(Complex64::norm_sqr).sum();
    let minus: f64 = state.amps[half..].iter().map(Complex64::norm_sqr).sum();
    plus - minus
}

pub fn probabilities(state: &StateVector) -> Vec<f64> {
    state.amps.iter().map(Complex64::norm_sqr).collect()
}

/// What is read out at the end of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    ZExpectationQubit0,
    FullProbabilities,
}

/// A single expectation value, as required by the parameter-shift rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarReadout {
    ZExpectationQubit0,
    Probability(usize),
}

/// Exact gradient of `Σ_k upstream_k · readout_k` with respect to every angle.
///
/// `upstream` has length 1 for the Z readout and `2^n` for probabilities.
pub fn gradients_backprop(
    features: &[f64],
    spec: &AnsatzSpec,
    readout: Readout,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let mut state = embed_real(features, spec.n_qubits)?;
    forward_real(&mut state, spec);
    let dim = state.len();
    let mut adjoint = match readout {
        Readout::ZExpectationQubit0 => {
            if upstream.len() != 1 {
                return Err(Error::Dimension(format!(
                    "Z readout takes 1 upstream value, got {}",
                    upstream.len()
                )));
            }
            let u = upstream[0];
            state
                .iter()
                .enumerate()
                .map(|(i, a)| if i < dim / 2 { 2.0 * u * a } else { -2.0 * u * a })
                .collect::<Vec<_>>()
        }
        Readout::FullProbabilities => {
            if upstream.len() != dim {
                return Err(Error::Dimension(format!(
                    "probability readout takes {dim} upstream values, got {}",
                    upstream.len()
                )));
            }
            state.iter().zip(upstream).map(|(a, u)| 2.0 * u * a).collect()
        }
    };
    let mut grad = vec![0.0; spec.n_params()];
    let mut scratch = vec![0.0; dim];
    PreparedAnsatz::new(spec).backprop(&mut state, &mut adjoint, &mut scratch, &mut grad);
    Ok(grad)
}

fn scalar_value(features: &[f64], spec: &AnsatzSpec, readout: ScalarReadout) -> Result<f64> {
    let mut state = embed_real(features, spec.n_qubits)?;
    forward_real(&mut state, spec);
    Ok(match readout {
        ScalarReadout::ZExpectationQubit0 => z0_real(&state),
        ScalarReadout::Probability(i) => {
            let a = *state.get(i).ok_or(Error::Bounds {
                index: i,
                len: state.len(),
            })?;
            a * a
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGradient {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Circuit executions used: one unshifted plus two per angle.
    pub circuits_evaluated: usize,
}

/// ∂E/∂θ = (E(θ + π/2) − E(θ − π/2)) / 2 for every angle.
pub fn gradients_parameter_shift(
    features: &[f64],
    spec: &AnsatzSpec,
    readout: ScalarReadout,
) -> Result<ShiftGradient> {
    let value = scalar_value(features, spec, readout)?;
    let mut circuits = 1;
    let mut shifted = spec.clone();
    let mut gradient = Vec::with_capacity(spec.n_params());
    for k in 0..spec.n_params() {
        let base = spec.thetas[k];
        shifted.thetas[k] = base + FRAC_PI_2;
        let plus = scalar_value(features, &shifted, readout)?;
        shifted.thetas[k] = base - FRAC_PI_2;
        let minus = scalar_value(features, &shifted, readout)?;
        shifted.thetas[k] = base;
        circuits += 2;
        gradient.push((plus - minus) / 2.0);
    }
    Ok(ShiftGradient {
        value,
        gradient,
        circuits_evaluated: circuits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_state(state: &StateVector, expected: &[f64], tol: f64) {
        for (a, e) in state.amplitudes().iter().zip(expected) {
            assert!((a - c(*e)).norm() < tol, "{:?} vs {expected:?}", state.amplitudes());
        }
    }

    #[test]
    fn embedding_examples() {
        let mut e5 = vec![0.0; 64];
        e5[5] = 1.0;
        let s = amplitude_embed(&e5, 6).unwrap();
        assert_eq!(s.amplitudes()[5], c(1.0));
        assert_eq!(amplitude_embed(&[2.0; 4], 2).unwrap().amplitudes(), &[c(0.5); 4]);
        let s = amplitude_embed(&[0.0, -3.0], 1).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.0), c(-1.0)]);
        assert!(matches!(amplitude_embed(&[0.0; 4], 2), Err(Error::Numeric(_))));
        assert!(matches!(amplitude_embed(&[1.0; 3], 2), Err(Error::Dimension(_))));
        assert!(amplitude_embed(&[1.0; 8], 2).is_err());
    }

    #[test]
    fn ancillas_are_trailing_qubits() {
        let feats: Vec<f64> = (1..=64).map(f64::from).collect();
        let s = amplitude_embed(&feats, 10).unwrap();
        let norm = feats.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expect = if i % 16 == 0 { feats[i / 16] / norm } else { 0.0 };
            assert_eq!(a.re, expect);
        }
    }

    #[test]
    fn ry_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let feats: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = amplitude_embed(&feats, 3).unwrap();
        let mut t = s.clone();
        t.apply_ry(1, 0.0).unwrap();
        assert_eq!(t, s);

        let mut one = StateVector::zero(1).unwrap();
        one.apply_ry(0, PI).unwrap();
        assert_state(&one, &[0.0, 1.0], 1e-15);

        let mut plus = StateVector::zero(1).unwrap();
        plus.apply_ry(0, PI / 2.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_state(&plus, &[r, r], 1e-15);
        assert!(plus.apply_ry(1, 0.3).is_err());
    }

    #[test]
    fn cnot_examples() {
        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());
        let mut z = StateVector::zero(2).unwrap();
        z.apply_cnot(0, 1).unwrap();
        assert_eq!(z, StateVector::zero(2).unwrap());
        assert!(matches!(z.apply_cnot(1, 1), Err(Error::Argument(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let feats: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let orig = amplitude_embed(&feats, 4).unwrap();
        let mut twice = orig.clone();
        twice.apply_cnot(2, 0).unwrap();
        assert_ne!(twice, orig);
        twice.apply_cnot(2, 0).unwrap();
        assert_eq!(twice, orig);
    }

    #[test]
    fn ansatz_examples() {
        let spec = AnsatzSpec::zeros(5, 3).unwrap();
        let zero = StateVector::zero(5).unwrap();
        assert_eq!(run_ansatz(zero.clone(), &spec).unwrap(), zero);

        let (a, b) = (0.7, -1.9);
        let spec = AnsatzSpec::new(1, 1, vec![a, b]).unwrap();
        let out = run_ansatz(StateVector::zero(1).unwrap(), &spec).unwrap();
        let mut direct = StateVector::zero(1).unwrap();
        direct.apply_ry(0, a + b).unwrap();
        assert_state(&out, &[direct.amplitudes()[0].re, direct.amplitudes()[1].re], 1e-15);

        assert!(run_ansatz(StateVector::zero(2).unwrap(), &AnsatzSpec::zeros(3, 1).unwrap()).is_err());
        assert!(AnsatzSpec::new(3, 1, vec![0.0; 5]).is_err());
        assert!(AnsatzSpec::zeros(3, 0).is_err());
    }

    #[test]
    fn readouts() {
        assert_eq!(expectation_z0(&StateVector::zero(3).unwrap()), 1.0);
        assert_eq!(expectation_z0(&StateVector::basis(3, 0b100).unwrap()), -1.0);
        for theta in [0.0, 0.4, 2.0, -2.8] {
            let mut s = StateVector::zero(1).unwrap();
            s.apply_ry(0, theta).unwrap();
            assert!((expectation_z0(&s) - theta.cos()).abs() < 1e-15);
        }
        assert_eq!(probabilities(&StateVector::basis(2, 2).unwrap()), vec![0.0, 0.0, 1.0, 0.0]);
        let u = amplitude_embed(&[1.0; 4], 2).unwrap();
        assert_eq!(probabilities(&u), vec![0.25; 4]);
    }

    #[test]
    fn real_path_is_bit_identical_to_complex_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=7 {
            let spec = AnsatzSpec::random(n, 4, &mut rng).unwrap();
            let feats: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let complex = run_ansatz(amplitude_embed(&feats, n).unwrap(), &spec).unwrap();
            let mut real = embed_real(&feats, n).unwrap();
            forward_real(&mut real, &spec);
            for (z, r) in complex.amplitudes().iter().zip(&real) {
                assert_eq!(z.re.to_bits(), r.to_bits());
                assert_eq!(z.im, 0.0);
            }
        }
    }

    #[test]
    fn parameter_shift_single_qubit() {
        let spec = AnsatzSpec::new(1, 1, vec![PI / 2.0, 0.0]).unwrap();
        let g = gradients_parameter_shift(&[1.0, 0.0], &spec, ScalarReadout::ZExpectationQubit0).unwrap();
        assert!((g.gradient[0] + 1.0).abs() < 1e-15);
        assert_eq!(g.circuits_evaluated, 2 * 2 + 1);
        let spec0 = AnsatzSpec::zeros(1, 1).unwrap();
        let g0 = gradients_parameter_shift(&[1.0, 0.0], &spec0, ScalarReadout::ZExpectationQubit0).unwrap();
        assert!(g0.gradient.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(g0.value, 1.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = AnsatzSpec::random(4, 2, &mut rng).unwrap();
        let feats: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = gradients_backprop(&feats, &spec, Readout::ZExpectationQubit0, &[0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = gradients_backprop(&feats, &spec, Readout::FullProbabilities, &[0.0; 16]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gradients_backprop(&feats, &spec, Readout::FullProbabilities, &[0.0; 3]).is_err());
    }

    #[test]
    fn forward_plus_backprop_is_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = AnsatzSpec::random(6, 30, &mut rng).unwrap();
        let feats: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prepared = PreparedAnsatz::new(&spec);
        let reps = 2000;
        let start = std::time::Instant::now();
        let mut sink = 0.0;
        let mut scratch = vec![0.0; 64];
        let mut grad = vec![0.0; spec.n_params()];
        for _ in 0..reps {
            let mut state = embed_real(&feats, 6).unwrap();
            prepared.forward(&mut state, &mut scratch);
            let mut adjoint: Vec<f64> = state
                .iter()
                .enumerate()
                .map(|(i, a)| if i < 32 { 2.0 * a } else { -2.0 * a })
                .collect();
            prepared.backprop(&mut state, &mut adjoint, &mut scratch, &mut grad);
            sink += grad[0];
        }
        let per = start.elapsed().as_secs_f64() / reps as f64;
        assert!(sink.is_finite());
        // loose bound so a busy machine does not fail it
        assert!(per < 1e-3, "{:.1} µs per sample", per * 1e6);
    }
}
