//! Experiment files and the named baseline configurations.
//!
//! An experiment file holds a `name`, a `[sim]` table and a `[workload]`
//! table. TOML dotted keys (`sim.cache.capacity = 1000`) and JSON with the
//! same nesting are both accepted; unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CachePolicy, ThresholdTable};
use crate::engine::{self, SimConfig, SimOutput};
use crate::error::{Error, Result};
use crate::metrics::SweepRow;
use crate::scheduler::RetrievalKey;
use crate::workload::{self, GeneratorConfig, ImageModel, RateSegment, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub sim: SimConfig,
    pub workload: GeneratorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "modm-cache-all".into(),
            sim: SimConfig::default(),
            workload: GeneratorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.workload.validate()
    }

    /// Sets the trace seed and the simulation seed together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.workload.seed = seed;
        self
    }

    pub fn image_model(&self) -> ImageModel {
        ImageModel {
            beta: self.workload.beta,
            seed: self.sim.seed,
        }
    }

    pub fn generate_trace(&self) -> Result<Vec<TraceRecord>> {
        workload::generate_trace(&self.workload)
    }

    pub fn run(&self, trace: &[TraceRecord]) -> Result<SimOutput> {
        engine::run(&self.sim, trace, &self.image_model())
    }
}

pub const PRESETS: [&str; 4] = ["vanilla", "nirvana-emulation", "modm-cache-large", "modm-cache-all"];

/// Applies a named baseline on top of `base`, keeping cluster size, cost
/// profiles and everything the preset does not define.
///
/// * `vanilla`: every worker large, no cache.
/// * `nirvana-emulation`: every worker large; prompts are matched against
///   cached prompts and hits only skip steps.
/// * `modm-cache-large` / `modm-cache-all`: monitor-driven mixture with
///   the corresponding cache policy.
pub fn preset(name: &str, base: &SimConfig) -> Result<SimConfig> {
    let mut c = base.clone();
    match name {
        "vanilla" => {
            c.static_n_large = Some(c.workers);
            c.cache.policy = CachePolicy::Disabled;
        }
        "nirvana-emulation" => {
            c.static_n_large = Some(c.workers);
            c.cache.policy = CachePolicy::CacheLarge;
            c.cache.key = RetrievalKey::Text;
            c.cache.thresholds = ThresholdTable::text_baseline();
        }
        "modm-cache-large" => {
            c.static_n_large = None;
            c.cache.policy = CachePolicy::CacheLarge;
            c.cache.key = RetrievalKey::Image;
        }
        "modm-cache-all" => {
            c.static_n_large = None;
            c.cache.policy = CachePolicy::CacheAll;
            c.cache.key = RetrievalKey::Image;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown config name {other:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub throughput_rpm: f64,
    /// Throughput relative to the vanilla baseline on the same trace.
    pub normalized_throughput: f64,
    pub hit_rate: f64,
    pub energy_savings: f64,
    pub p99_latency_s: Option<f64>,
}

/// Runs each named preset on the same trace. Throughput is normalized to a
/// vanilla run, which is added behind the scenes when not requested.
pub fn compare(base: &ExperimentConfig, names: &[String], trace: &[TraceRecord]) -> Result<Vec<CompareRow>> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::Config(format!("config {n:?} listed twice")));
        }
    }
    let mut runs: Vec<String> = names.to_vec();
    if !seen.contains("vanilla") {
        runs.push("vanilla".into());
    }
    let configs = runs.iter().map(|n| preset(n, &base.sim)).collect::<Result<Vec<_>>>()?;
    let images = base.image_model();
    let outputs = configs
        .par_iter()
        .map(|c| engine::run(c, trace, &images))
        .collect::<Result<Vec<_>>>()?;
    let vanilla = runs
        .iter()
        .position(|n| n == "vanilla")
        .map(|i| outputs[i].report.throughput_rpm)
        .expect("vanilla always runs");
    Ok(runs
        .iter()
        .zip(&outputs)
        .take(names.len())
        .map(|(name, out)| CompareRow {
            name: name.clone(),
            throughput_rpm: out.report.throughput_rpm,
            normalized_throughput: if vanilla > 0.0 {
                out.report.throughput_rpm / vanilla
            } else {
                0.0
            },
            hit_rate: out.report.hit_rate,
            energy_savings: out.report.energy_savings_vs_vanilla,
            p99_latency_s: out.report.p99_latency_s,
        })
        .collect())
}

/// The experiment with its arrival schedule replaced by one constant rate
/// over the same total duration.
pub fn at_rate(base: &ExperimentConfig, rate_rpm: f64) -> ExperimentConfig {
    let mut c = base.clone();
    c.workload.rate_schedule = vec![RateSegment {
        duration_s: base.workload.total_duration_s(),
        rate_rpm,
    }];
    c
}

/// One simulation per offered rate, run in parallel. Results come back in
/// input order; a failed rate does not discard the others.
pub fn sweep(base: &ExperimentConfig, rates: &[f64]) -> Vec<Result<SweepRow>> {
    rates
        .par_iter()
        .map(|&rate_rpm| {
            let c = at_rate(base, rate_rpm);
            let trace = c.generate_trace()?;
            let out = c.run(&trace)?;
            Ok(SweepRow {
                rate_rpm,
                report: out.report,
            })
        })
        .collect()
}
