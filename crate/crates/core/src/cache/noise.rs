use crate::error::{Error, Result};

/// Noise scale per timestep index `0..=T`.
///
/// `sigma(k)` is the weight on fresh Gaussian noise when a cached image
/// re-enters denoising after `k` skipped steps:
/// `noisy = sigma * noise + (1 - sigma) * cached`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    /// `sigma(k) = 1 - k / T`.
    pub fn linear(total_steps: u32) -> Self {
        let t = f64::from(total_steps.max(1));
        NoiseSchedule {
            sigmas: (0..=total_steps).map(|k| 1.0 - f64::from(k) / t).collect(),
        }
    }

    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() < 2 {
            return Err(Error::Config("noise schedule needs at least two entries".into()));
        }
        if sigmas[0] != 1.0 || *sigmas.last().unwrap() != 0.0 {
            return Err(Error::Config("noise schedule must start at 1 and end at 0".into()));
        }
        if sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("noise schedule must be non-increasing".into()));
        }
        Ok(NoiseSchedule { sigmas })
    }

    pub fn total_steps(&self) -> u32 {
        (self.sigmas.len() - 1) as u32
    }

    /// Noise level for re-entering after `k` skipped steps.
    pub fn reentry_level(&self, k: u32) -> Result<f64> {
        self.sigmas.get(k as usize).copied().ok_or(Error::StepOutOfRange {
            k,
            total: self.total_steps(),
        })
    }
}
