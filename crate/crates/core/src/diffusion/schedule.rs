use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Beta range of the latent-diffusion family the default backend adapter targets.
pub const DEFAULT_BETA_RANGE: (f64, f64) = (0.00085, 0.012);
/// Number of training timesteps the default schedule is subsampled from.
pub const DEFAULT_TRAIN_STEPS: usize = 1000;

/// Cumulative signal levels `alpha_bar[0..=T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    alpha_bar: Vec<f64>,
}

/// Linear betas from `beta_range.0` to `beta_range.1` over `num_steps`, then cumulative product.
pub fn make_schedule(num_steps: usize, beta_range: (f64, f64)) -> Result<Schedule> {
    Schedule::linear(num_steps, beta_range)
}

impl Schedule {
    pub fn linear(num_steps: usize, (beta_min, beta_max): (f64, f64)) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::config("schedule needs at least one step"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::config(format!(
                "beta range ({beta_min}, {beta_max}) must satisfy 0 < min <= max < 1"
            )));
        }
        let mut alpha_bar = Vec::with_capacity(num_steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for i in 0..num_steps {
            let beta = if num_steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (num_steps - 1) as f64
            };
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Self::from_alpha_bar(alpha_bar)
    }

    /// A `train_steps`-long linear schedule sampled at `num_steps` evenly spaced points.
    pub fn subsampled(train_steps: usize, beta_range: (f64, f64), num_steps: usize) -> Result<Self> {
        if num_steps == 0 || num_steps > train_steps {
            return Err(Error::config(format!(
                "cannot subsample {num_steps} steps from {train_steps} training steps"
            )));
        }
        let full = Self::linear(train_steps, beta_range)?;
        let alpha_bar = (0..=num_steps)
            .map(|t| full.alpha_bar[t * train_steps / num_steps])
            .collect();
        Self::from_alpha_bar(alpha_bar)
    }

    /// The default schedule for `num_steps` sampling steps.
    pub fn default_for(num_steps: usize) -> Result<Self> {
        Self::subsampled(DEFAULT_TRAIN_STEPS, DEFAULT_BETA_RANGE, num_steps)
    }

    /// Validate an explicit table: `alpha_bar[0] = 1`, entries in (0, 1], strictly decreasing.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(Error::config("schedule needs at least one step"));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::config("alpha_bar[0] must be 1"));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::config("alpha_bar entries must lie in (0, 1]"));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("alpha_bar must be strictly decreasing"));
        }
        Ok(Self { alpha_bar })
    }

    pub fn num_steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    /// `alpha_bar[t]`; panics when `t > T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.num_steps() {
            return Err(Error::contract(format!(
                "timestep {t} outside 1..={}",
                self.num_steps()
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 of the little-endian table; identifies the schedule in dumps.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.alpha_bar {
            h.update(a.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
