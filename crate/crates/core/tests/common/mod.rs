//! Independent reference implementations, shared by the oracle tests and
//! the acceptance report. Each check returns the worst deviation it saw.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixel::hadamard::{
    fwht_in_place, hadamard_row, select_top_variance, HadamardOrder, MeasurementVector,
};
use spixel::metrics::{ssim, SsimConfig};
use spixel::qsim::{
    amplitude_embed, expectation_z0, gradients_backprop, gradients_parameter_shift, probabilities,
    run_ansatz, AnsatzSpec, Readout, ScalarReadout, StateVector,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().any(|x| x.abs() > 1e-3) {
            return v;
        }
    }
}

/// Random shape with up to `max_qubits` qubits and `max_layers` layers,
/// plus a feature vector whose length is a power of two that fits.
pub fn random_circuit(rng: &mut ChaCha8Rng, max_qubits: usize, max_layers: usize) -> (AnsatzSpec, Vec<f64>) {
    let n = rng.gen_range(1..=max_qubits);
    let layers = rng.gen_range(1..=max_layers);
    let spec = AnsatzSpec::random(n, layers, rng).unwrap();
    let q = rng.gen_range(1..=n);
    (spec, random_features(rng, 1 << q))
}

// ---- dense circuit oracle ----

pub type Matrix = Vec<Vec<f64>>;

fn identity(d: usize) -> Matrix {
    (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let d = a.len();
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![0.0; ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn ry(theta: f64) -> Matrix {
    let (s, c) = (theta / 2.0).sin_cos();
    vec![vec![c, -s], vec![s, c]]
}

/// CNOT as an explicit permutation; qubit 0 is the most significant bit.
fn cnot(n: usize, control: usize, target: usize) -> Matrix {
    let d = 1 << n;
    let mut m = vec![vec![0.0; d]; d];
    for col in 0..d {
        let row = if (col >> (n - 1 - control)) & 1 == 1 {
            col ^ (1 << (n - 1 - target))
        } else {
            col
        };
        m[row][col] = 1.0;
    }
    m
}

/// The whole ansatz as one matrix, built gate by gate from Kronecker products.
pub fn dense_unitary(spec: &AnsatzSpec) -> Matrix {
    let n = spec.n_qubits();
    let mut u = identity(1 << n);
    for row in 0..=spec.n_layers() {
        let mut layer = ry(spec.theta(row, 0));
        for q in 1..n {
            layer = kron(&layer, &ry(spec.theta(row, q)));
        }
        u = matmul(&layer, &u);
        if row < spec.n_layers() {
            for k in 0..n - 1 {
                u = matmul(&cnot(n, k, k + 1), &u);
            }
        }
    }
    u
}

/// Worst state error against the dense oracle and worst `|UᵀU − I|` entry,
/// over `count` random circuits with at most 3 qubits.
pub fn dense_oracle_errors(count: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut state_err, mut unit_err) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let (spec, x) = random_circuit(&mut r, 3, 4);
        let n = spec.n_qubits();
        let u = dense_unitary(&spec);
        let d = 1 << n;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let stride = d / x.len();
        let mut psi = vec![0.0; d];
        for (k, v) in x.iter().enumerate() {
            psi[k * stride] = v / norm;
        }
        let out = run_ansatz(amplitude_embed(&x, n).unwrap(), &spec).unwrap();
        for i in 0..d {
            let want: f64 = (0..d).map(|j| u[i][j] * psi[j]).sum();
            let got = out.amplitudes()[i];
            state_err = state_err.max((got.re - want).abs()).max(got.im.abs());
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| u[k][i] * u[k][j]).sum();
                unit_err = unit_err.max((dot - f64::from(u8::from(i == j))).abs());
            }
        }
    }
    (state_err, unit_err)
}

// ---- gradients ----

#[derive(Debug, Clone, Copy, Default)]
pub struct GradientAgreement {
    pub shift_vs_backprop: f64,
    pub finite_diff_vs_backprop: f64,
    pub circuits: usize,
    pub max_qubits: usize,
    pub max_layers: usize,
}

fn scalar(x: &[f64], spec: &AnsatzSpec, readout: ScalarReadout) -> f64 {
    let s = run_ansatz(amplitude_embed(x, spec.n_qubits()).unwrap(), spec).unwrap();
    match readout {
        ScalarReadout::ZExpectationQubit0 => expectation_z0(&s),
        ScalarReadout::Probability(i) => probabilities(&s)[i],
    }
}

/// Backprop vs parameter shift vs central differences (step 1e-6, through
/// the complex simulator) for both readouts on each random circuit.
pub fn gradient_agreement(count: usize, seed: u64) -> GradientAgreement {
    let mut r = rng(seed);
    let mut out = GradientAgreement {
        circuits: count,
        ..Default::default()
    };
    let h = 1e-6;
    // sweep every shape corner first, then random shapes
    for c in 0..count {
        let (spec, x) = if c < 2 {
            let n = [6, 1][c];
            let spec = AnsatzSpec::random(n, 5, &mut r).unwrap();
            (spec, random_features(&mut r, 1 << n))
        } else {
            random_circuit(&mut r, 6, 5)
        };
        out.max_qubits = out.max_qubits.max(spec.n_qubits());
        out.max_layers = out.max_layers.max(spec.n_layers());
        let dim = 1 << spec.n_qubits();
        let idx = r.gen_range(0..dim);
        let mut onehot = vec![0.0; dim];
        onehot[idx] = 1.0;
        let cases = [
            (ScalarReadout::ZExpectationQubit0, Readout::ZExpectationQubit0, vec![1.0]),
            (ScalarReadout::Probability(idx), Readout::FullProbabilities, onehot),
        ];
        for (scalar_readout, readout, upstream) in cases {
            let bp = gradients_backprop(&x, &spec, readout, &upstream).unwrap();
            let ps = gradients_parameter_shift(&x, &spec, scalar_readout).unwrap();
            assert_eq!(ps.circuits_evaluated, 2 * spec.n_params() + 1);
            for k in 0..spec.n_params() {
                let mut plus = spec.clone();
                plus.thetas_mut()[k] += h;
                let mut minus = spec.clone();
                minus.thetas_mut()[k] -= h;
                let fd = (scalar(&x, &plus, scalar_readout) - scalar(&x, &minus, scalar_readout)) / (2.0 * h);
                out.shift_vs_backprop = out.shift_vs_backprop.max((ps.gradient[k] - bp[k]).abs());
                out.finite_diff_vs_backprop = out.finite_diff_vs_backprop.max((fd - bp[k]).abs());
            }
        }
    }
    out
}

/// Worst `| ‖ψ‖² − 1 |` and `| Σp − 1 |` over random circuits up to 10 qubits.
pub fn norm_drift(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (spec, x) = random_circuit(&mut r, 10, 6);
        let s = run_ansatz(amplitude_embed(&x, spec.n_qubits()).unwrap(), &spec).unwrap();
        let p: f64 = probabilities(&s).iter().sum();
        worst = worst.max((s.norm_sqr() - 1.0).abs()).max((p - 1.0).abs());
        let z = expectation_z0(&s);
        assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
    }
    let zero = StateVector::zero(4).unwrap();
    worst.max((zero.norm_sqr() - 1.0).abs())
}

// ---- transform, selection, similarity ----

/// ±1 matrix by the Kronecker recursion `H_{2k} = [[H, H], [H, −H]]`.
pub fn naive_hadamard(n: usize) -> Matrix {
    let mut h = vec![vec![1.0]];
    while h.len() < n {
        let k = h.len();
        let mut next = vec![vec![0.0; 2 * k]; 2 * k];
        for i in 0..k {
            for j in 0..k {
                next[i][j] = h[i][j];
                next[i][j + k] = h[i][j];
                next[i + k][j] = h[i][j];
                next[i + k][j + k] = -h[i][j];
            }
        }
        h = next;
    }
    h
}

/// Fast transform against a dense matrix product, for lengths 2 to 1024.
pub fn fwht_vs_naive(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for log in 1..=10 {
        let n = 1usize << log;
        let h = naive_hadamard(n);
        let order = HadamardOrder::from_len(n).unwrap();
        for i in [0, n / 3, n - 1] {
            let row = hadamard_row(order, i).unwrap();
            worst = worst.max(row.iter().zip(&h[i]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
        let mut fast = x.clone();
        fwht_in_place(&mut fast);
        for i in 0..n {
            let want: f64 = (0..n).map(|j| h[i][j] * x[j]).sum();
            worst = worst.max((fast[i] - want).abs());
        }
    }
    worst
}

/// Every window evaluated directly with two-pass statistics.
pub fn naive_ssim(a: &[f64], b: &[f64], side: usize) -> f64 {
    let cfg = SsimConfig::default();
    let w = cfg.window;
    let c = (w as f64 - 1.0) / 2.0;
    let mut g = vec![vec![0.0; w]; w];
    let mut total_w = 0.0;
    for (y, row) in g.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
            *v = (-d2 / (2.0 * cfg.sigma * cfg.sigma)).exp();
            total_w += *v;
        }
    }
    let (c1, c2) = ((cfg.k1 * cfg.data_range).powi(2), (cfg.k2 * cfg.data_range).powi(2));
    let out = side + 1 - w;
    let mut sum = 0.0;
    for y0 in 0..out {
        for x0 in 0..out {
            let px = |img: &[f64], dy: usize, dx: usize| img[(y0 + dy) * side + x0 + dx];
            let (mut ma, mut mb) = (0.0, 0.0);
            for dy in 0..w {
                for dx in 0..w {
                    let wt = g[dy][dx] / total_w;
                    ma += wt * px(a, dy, dx);
                    mb += wt * px(b, dy, dx);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..w {
                for dx in 0..w {
                    let wt = g[dy][dx] / total_w;
                    let (da, db) = (px(a, dy, dx) - ma, px(b, dy, dx) - mb);
                    va += wt * da * da;
                    vb += wt * db * db;
                    cov += wt * da * db;
                }
            }
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    sum / (out * out) as f64
}

pub fn ssim_vs_naive(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let a: Vec<f64> = (0..1024).map(|_| r.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| (0.7 * v + r.gen_range(0.0..0.3)).min(1.0)).collect();
        worst = worst.max((ssim(&a, &b, 32).unwrap() - naive_ssim(&a, &b, 32)).abs());
    }
    worst
}

/// Library selection against sorting exact integer variances of small
/// integer data, where ties are common. Returns the worst variance mismatch, or infinity if
/// the chosen index sets differ.
pub fn selection_vs_bruteforce(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for (n, rows, m) in [(16usize, 9usize, 5usize), (64, 30, 64), (1024, 40, 64), (256, 12, 1)] {
        let order = HadamardOrder::from_len(n).unwrap();
        // coarse values so that exact ties occur
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..n).map(|_| f64::from(r.gen_range(0u8..4))).collect())
            .collect();
        let vectors: Vec<MeasurementVector> =
            data.iter().map(|v| MeasurementVector::full(order, v.clone()).unwrap()).collect();
        let mask = select_top_variance(&vectors, m).unwrap();
        let var: Vec<f64> = (0..n)
            .map(|j| {
                let mean = data.iter().map(|v| v[j]).sum::<f64>() / rows as f64;
                data.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / rows as f64
            })
            .collect();
        // rank by the exact integer N²·var = N·Σx² − (Σx)², so ties are true ties
        let exact: Vec<i64> = (0..n)
            .map(|j| {
                let s: i64 = data.iter().map(|v| v[j] as i64).sum();
                let s2: i64 = data.iter().map(|v| (v[j] as i64).pow(2)).sum();
                rows as i64 * s2 - s * s
            })
            .collect();
        let mut pairs: Vec<(i64, usize)> = exact.iter().copied().zip(0..).collect();
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut want: Vec<usize> = pairs[..m].iter().map(|p| p.1).collect();
        want.sort_unstable();
        if mask.indices() != want.as_slice() {
            return f64::INFINITY;
        }
        for (&i, &v) in mask.indices().iter().zip(mask.variances()) {
            worst = worst.max((v - var[i]).abs());
        }
    }
    worst
}
