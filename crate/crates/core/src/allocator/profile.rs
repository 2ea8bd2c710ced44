use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Large,
    Small,
}

impl ModelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelClass::Large => "large",
            ModelClass::Small => "small",
        }
    }
}

impl std::fmt::Display for ModelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cost model of one diffusion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub name: String,
    pub class: ModelClass,
    /// Seconds per denoising step.
    pub per_step_latency_s: f64,
    /// Joules per denoising step.
    pub per_step_energy_j: f64,
    pub total_steps: u32,
    /// Seconds to load this model onto a worker.
    #[serde(default)]
    pub switch_latency_s: f64,
}

impl ModelProfile {
    pub fn new(name: &str, class: ModelClass, per_step_latency_s: f64, per_step_energy_j: f64) -> Self {
        ModelProfile {
            name: name.to_string(),
            class,
            per_step_latency_s,
            per_step_energy_j,
            total_steps: 50,
            switch_latency_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.per_step_latency_s > 0.0 && self.per_step_latency_s.is_finite()) {
            return Err(Error::Config(format!(
                "profile {}: per_step_latency_s must be positive",
                self.name
            )));
        }
        if !(self.per_step_energy_j >= 0.0 && self.per_step_energy_j.is_finite()) {
            return Err(Error::Config(format!(
                "profile {}: per_step_energy_j must be non-negative",
                self.name
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::Config(format!(
                "profile {}: total_steps must be at least 1",
                self.name
            )));
        }
        if !(self.switch_latency_s >= 0.0 && self.switch_latency_s.is_finite()) {
            return Err(Error::Config(format!(
                "profile {}: switch_latency_s must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    /// Full generations per minute on one worker.
    pub fn throughput_rpm(&self) -> f64 {
        60.0 / (self.per_step_latency_s * f64::from(self.total_steps))
    }
}

/// The large model plus an ordered escalation list of small models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSet {
    pub large: ModelProfile,
    pub small: Vec<ModelProfile>,
}

impl ProfileSet {
    pub fn validate(&self) -> Result<()> {
        self.large.validate()?;
        if self.large.class != ModelClass::Large {
            return Err(Error::Config(format!(
                "profile {} is listed as large but has class {}",
                self.large.name, self.large.class
            )));
        }
        if self.small.is_empty() {
            return Err(Error::Config("at least one small profile is required".into()));
        }
        for p in &self.small {
            p.validate()?;
            if p.class != ModelClass::Small {
                return Err(Error::Config(format!(
                    "profile {} is listed as small but has class {}",
                    p.name, p.class
                )));
            }
            if p.total_steps != self.large.total_steps {
                return Err(Error::Config(format!(
                    "profile {} has {} steps but the large model has {}",
                    p.name, p.total_steps, self.large.total_steps
                )));
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u32 {
        self.large.total_steps
    }
}

impl Default for ProfileSet {
    /// Reference profiles loosely shaped after an 8B large model and two
    /// smaller refiners on a 50-step schedule.
    fn default() -> Self {
        ProfileSet {
            large: ModelProfile::new("sd3.5-large", ModelClass::Large, 1.9, 570.0),
            small: vec![
                ModelProfile::new("sdxl", ModelClass::Small, 0.8, 240.0),
                ModelProfile::new("sana-1.6b", ModelClass::Small, 0.25, 75.0),
            ],
        }
    }
}
