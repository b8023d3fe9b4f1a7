//! Adam over a fixed list of named parameter blocks.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Argument(format!("{name} = {b} must lie in (0, 1)")));
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Argument(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl AdamState {
    pub fn new(blocks: &[(String, usize)]) -> Self {
        Self {
            step: 0,
            first: blocks.iter().map(|(_, n)| vec![0.0; *n]).collect(),
            second: blocks.iter().map(|(_, n)| vec![0.0; *n]).collect(),
            names: blocks.iter().map(|(s, _)| s.clone()).collect(),
        }
    }

    /// Rebuild from stored moments (e.g. a checkpoint).
    pub fn from_parts(
        names: Vec<String>,
        step: u64,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let shapes_ok = names.len() == first.len()
            && first.len() == second.len()
            && first.iter().zip(&second).all(|(a, b)| a.len() == b.len());
        if !shapes_ok {
            return Err(Error::Dimension("adam moment blocks do not line up".into()));
        }
        Ok(Self {
            step,
            first,
            second,
            names,
        })
    }

    pub fn block_names(&self) -> &[String] {
        &self.names
    }

    /// One bias-corrected Adam update.
    ///
    /// Every gradient is checked before any parameter moves, so a
    /// non-finite gradient leaves parameters and moments untouched.
    pub fn step(
        &mut self,
        config: &AdamConfig,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
    ) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Dimension(format!(
                "adam has {} blocks, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[k].len() || g.len() != p.len() {
                return Err(Error::Dimension(format!(
                    "block {}: {} params, {} grads, {} moments",
                    self.names[k],
                    p.len(),
                    g.len(),
                    self.first[k].len()
                )));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {} in {} at {i}",
                    g[i], self.names[k]
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        let (b1, b2, lr, eps) = (config.beta1, config.beta2, config.learning_rate, config.epsilon);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
