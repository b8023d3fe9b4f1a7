//! Accuracy, MSE and windowed SSIM.

use crate::error::{Error, Result};

pub fn accuracy(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Argument("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// SSIM constants: Gaussian window, stabilizers and dynamic range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimConfig {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - c;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }
}

/// "Valid" separable filtering of a `side × side` image.
fn filter_valid(img: &[f64], side: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let out = side + 1 - w;
    let mut rows = vec![0.0; side * out];
    for y in 0..side {
        for x in 0..out {
            rows[y * out + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img[y * side + x + k])
                .sum();
        }
    }
    let mut res = vec![0.0; out * out];
    for y in 0..out {
        for x in 0..out {
            res[y * out + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(y + k) * out + x])
                .sum();
        }
    }
    res
}

/// Mean SSIM over all valid windows of two square images.
pub fn ssim_with(a: &[f64], b: &[f64], side: usize, cfg: &SsimConfig) -> Result<f64> {
    if a.len() != side * side || b.len() != side * side {
        return Err(Error::Dimension(format!(
            "ssim needs two {side}x{side} images, got {} and {} pixels",
            a.len(),
            b.len()
        )));
    }
    if side < cfg.window {
        return Err(Error::Dimension(format!(
            "image side {side} smaller than the {}-pixel window",
            cfg.window
        )));
    }
    let taps = cfg.taps();
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(a, side, &taps);
    let mu_b = filter_valid(b, side, &taps);
    let e_aa = filter_valid(&prod(|x, _| x * x), side, &taps);
    let e_bb = filter_valid(&prod(|_, y| y * y), side, &taps);
    let e_ab = filter_valid(&prod(|x, y| x * y), side, &taps);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// SSIM with the default 11-tap, σ = 1.5 Gaussian window.
pub fn ssim(a: &[f64], b: &[f64], side: usize) -> Result<f64> {
    ssim_with(a, b, side, &SsimConfig::default())
}

/// Affine map onto `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_rescale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Mean SSIM between min-max-rescaled outputs and targets.
pub fn dataset_ssim<O, T>(outputs: &[O], targets: &[T], side: usize) -> Result<f64>
where
    O: AsRef<[f64]>,
    T: AsRef<[f64]>,
{
    if outputs.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} outputs for {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::Argument("ssim over an empty set".into()));
    }
    let mut total = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        total += ssim(&min_max_rescale(o.as_ref()), t.as_ref(), side)?;
    }
    Ok(total / outputs.len() as f64)
}
