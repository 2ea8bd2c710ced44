//! Command-line front end: trace generation, single runs, rate sweeps,
//! baseline comparisons and workload calibration. Every command writes the
//! effective configuration to its output directory before doing any work.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use modm_core::allocator::AllocationMode;
use modm_core::experiment::{self, CompareRow, ExperimentConfig};
use modm_core::metrics::{self, SweepRow};
use modm_core::workload::{self, Calibration, TraceRecord};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const REQUESTS_FILE: &str = "requests.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const COMPARE_CSV_FILE: &str = "compare.csv";
pub const COMPARE_JSON_FILE: &str = "compare.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const CALIBRATED_CONFIG_FILE: &str = "calibrated.toml";

/// Query pairs drawn per calibration.
pub const CALIBRATION_SAMPLES: usize = 4000;

#[derive(Debug, Parser)]
#[command(
    name = "modm",
    version,
    about = "Simulate mixture-of-models diffusion serving with a semantic image cache"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered Poisson trace from the workload table.
    GenTrace(Common),
    /// Run one simulation and write the report, time series and logs.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trace to replay; generated from the workload table when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run one simulation per offered rate (requests per minute).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
    },
    /// Run named baselines on the same trace, normalized to vanilla.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::PRESETS.map(String::from))]
        configs: Vec<String>,
    },
    /// Fit the image-model mixing weight to a median query-to-image cosine.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.28)]
        target: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML or JSON experiment file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides both the trace seed and the simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<AllocationMode>,
}

impl Common {
    /// Loads the experiment, applies flag overrides and writes the
    /// effective-config snapshot.
    pub fn prepare(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(mode) = self.mode {
            cfg.sim.mode = mode;
        }
        cfg.validate()?;
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(EFFECTIVE_CONFIG_FILE);
        fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTrace(common) => cmd_gen_trace(&common).map(drop),
        Command::Simulate { common, trace } => cmd_simulate(&common, trace.as_deref()).map(drop),
        Command::Sweep { common, rates } => cmd_sweep(&common, &rates).map(drop),
        Command::Compare { common, trace, configs } => cmd_compare(&common, trace.as_deref(), &configs).map(drop),
        Command::Calibrate { common, target } => cmd_calibrate(&common, target).map(drop),
    }
}

fn trace_header(cfg: &ExperimentConfig, records: usize) -> Vec<String> {
    vec![
        format!("modm trace name={}", cfg.name),
        format!("seed={}", cfg.workload.seed),
        format!("requests={records}"),
    ]
}

pub fn cmd_gen_trace(common: &Common) -> Result<PathBuf> {
    let cfg = common.prepare()?;
    let records = cfg.generate_trace()?;
    let path = common.out.join(TRACE_FILE);
    workload::save_trace(&path, &records, &trace_header(&cfg, records.len()))?;
    Ok(path)
}

fn load_or_generate(cfg: &ExperimentConfig, trace: Option<&Path>) -> Result<Vec<TraceRecord>> {
    Ok(match trace {
        Some(p) => workload::load_trace(p, Some(&cfg.workload.clusters()))?,
        None => cfg.generate_trace()?,
    })
}

fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Output of `simulate`, by file.
#[derive(Debug, Clone)]
pub struct SimulateFiles {
    pub summary: PathBuf,
    pub series: PathBuf,
    pub decisions: PathBuf,
    pub requests: PathBuf,
}

pub fn cmd_simulate(common: &Common, trace: Option<&Path>) -> Result<SimulateFiles> {
    let cfg = common.prepare()?;
    let records = load_or_generate(&cfg, trace)?;
    let out = cfg.run(&records)?;
    let (summary, series) = metrics::emit(&out.report, &out.series, &common.out)?;
    let decisions = common.out.join(DECISIONS_FILE);
    write_jsonl(&out.decisions, &decisions)?;
    let requests = common.out.join(REQUESTS_FILE);
    metrics::write_audit_log(&out.outcomes, &requests)?;
    Ok(SimulateFiles {
        summary,
        series,
        decisions,
        requests,
    })
}

/// Writes every successful row; the first failed rate is returned as the
/// error after the partial file is on disk.
pub fn cmd_sweep(common: &Common, rates: &[f64]) -> Result<PathBuf> {
    let cfg = common.prepare()?;
    let results = experiment::sweep(&cfg, rates);
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut failure = None;
    for (rate, r) in rates.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) if failure.is_none() => failure = Some((*rate, e)),
            Err(_) => {}
        }
    }
    let path = common.out.join(SWEEP_FILE);
    metrics::write_sweep_csv(&rows, &path)?;
    match failure {
        Some((rate, e)) => Err(anyhow::Error::new(e).context(format!("sweep failed at rate {rate} rpm"))),
        None => Ok(path),
    }
}

pub fn cmd_compare(common: &Common, trace: Option<&Path>, names: &[String]) -> Result<Vec<CompareRow>> {
    let cfg = common.prepare()?;
    let records = load_or_generate(&cfg, trace)?;
    let rows = experiment::compare(&cfg, names, &records)?;
    let csv_path = common.out.join(COMPARE_CSV_FILE);
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let json_path = common.out.join(COMPARE_JSON_FILE);
    let mut text = serde_json::to_string_pretty(&rows)?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    Ok(rows)
}

/// Fits beta on the configured workload and writes both the calibration
/// record and a copy of the experiment with the fitted beta. The fit only
/// depends on the target, geometry and seed, so re-running on the produced
/// file reproduces it.
pub fn cmd_calibrate(common: &Common, target: f64) -> Result<Calibration> {
    let mut cfg = common.prepare()?;
    let cal = workload::calibrate_beta(target, &cfg.workload, CALIBRATION_SAMPLES, cfg.workload.seed)?;
    let path = common.out.join(CALIBRATION_FILE);
    let mut text = serde_json::to_string_pretty(&cal)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    cfg.workload.beta = cal.beta;
    let path = common.out.join(CALIBRATED_CONFIG_FILE);
    fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
    Ok(cal)
}

/// Process exit code for an error: 3 for an invariant violation, 2 for
/// anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<modm_core::Error>() {
        Some(modm_core::Error::Invariant(_)) => 3,
        _ => 2,
    }
}
