use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{AuditRecord, MetricsReport, RequestOutcome, TickSample};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SERIES_FILE: &str = "series.csv";

/// One offered rate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate_rpm: f64,
    pub report: MetricsReport,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_summary(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_series_csv(series: &[TickSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if series.is_empty() {
        // serde only emits the header alongside the first row
        w.write_record([
            "time_s",
            "hit_queue",
            "miss_queue",
            "n_large",
            "n_small",
            "arrivals",
            "completions",
            "throughput_rpm",
            "hit_rate",
            "small_profile",
            "saturated",
        ])?;
    }
    for s in series {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Summary JSON and per-tick CSV under `dir`.
pub fn emit(report: &MetricsReport, series: &[TickSample], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = dir.join(SUMMARY_FILE);
    let csv = dir.join(SERIES_FILE);
    write_summary(report, &summary)?;
    write_series_csv(series, &csv)?;
    Ok((summary, csv))
}

pub fn write_audit_log(outcomes: &[RequestOutcome], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    for o in outcomes {
        serde_json::to_writer(&mut f, &AuditRecord::from(o))?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per offered rate. SLO columns follow the multipliers of the
/// first row.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let multipliers: Vec<f64> = rows
        .first()
        .map(|r| r.report.slo.iter().map(|s| s.multiplier).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "rate_rpm",
        "requests",
        "throughput_rpm",
        "hit_rate",
        "mean_latency_s",
        "p99_latency_s",
        "energy_savings",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(multipliers.iter().map(|m| format!("slo_violation_{m}x")));
    w.write_record(&header)?;
    for row in rows {
        let r = &row.report;
        let mut rec = vec![
            row.rate_rpm.to_string(),
            r.requests.to_string(),
            r.throughput_rpm.to_string(),
            r.hit_rate.to_string(),
            opt(r.mean_latency_s),
            opt(r.p99_latency_s),
            r.energy_savings_vs_vanilla.to_string(),
        ];
        rec.extend(multipliers.iter().map(|&m| opt(r.slo_rate(m))));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::ReportContext;
    use super::*;

    fn ctx() -> ReportContext {
        ReportContext {
            l_ref_s: 10.0,
            slo_multipliers: vec![2.0, 4.0],
            large_step_energy_j: 1.0,
            total_steps: 50,
            switches: 0,
            warmup_requests: 0,
        }
    }

    #[test]
    fn empty_run_writes_valid_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = MetricsReport::from_outcomes(&[], &ctx());
        let (summary, csv) = emit(&report, &[], dir.path()).unwrap();
        let back: MetricsReport = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.requests, 0);
        assert!(std::fs::read_to_string(csv).unwrap().starts_with("time_s,"));
    }

    #[test]
    fn re_emit_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let report = MetricsReport::from_outcomes(&[], &ctx());
        let series = vec![TickSample {
            time_s: 60.0,
            hit_queue: 1,
            miss_queue: 2,
            n_large: 3,
            n_small: 1,
            arrivals: 5,
            completions: 4,
            throughput_rpm: 4.0,
            hit_rate: 0.4,
            small_profile: "sdxl".into(),
            saturated: false,
        }];
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        emit(&report, &series, &a).unwrap();
        emit(&report, &series, &b).unwrap();
        for f in [SUMMARY_FILE, SERIES_FILE] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        }
    }

    #[test]
    fn sweep_has_one_row_per_rate() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<SweepRow> = [2.0, 4.0, 6.0, 8.0, 10.0]
            .iter()
            .map(|&rate_rpm| SweepRow {
                rate_rpm,
                report: MetricsReport::from_outcomes(&[], &ctx()),
            })
            .collect();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&rows, &path).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let headers = r.headers().unwrap().clone();
        assert_eq!(&headers[0], "rate_rpm");
        assert!(headers.iter().any(|h| h == "slo_violation_2x"));
        let keys: Vec<String> = r.records().map(|x| x.unwrap()[0].to_string()).collect();
        assert_eq!(keys, ["2", "4", "6", "8", "10"]);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = write_summary(
            &MetricsReport::from_outcomes(&[], &ctx()),
            Path::new("/nonexistent/dir/s.json"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/s.json"));
    }
}
