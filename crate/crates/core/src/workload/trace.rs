//! JSONL trace files. Lines starting with `#` are comments; every other
//! non-blank line is one record:
//! `{"id": "...", "arrival_ms": 1200, "embedding": [...]}`. A record may give
//! `cluster_id` instead of `embedding`, in which case the query is drawn from
//! a [`ClusterModel`] at load time.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClusterModel;
use crate::cache::{Embedding, NORM_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub id: String,
    pub arrival_ms: u64,
    pub embedding: Embedding,
    /// Generating cluster, when known.
    pub cluster: Option<u64>,
}

impl TraceRecord {
    pub fn arrival_s(&self) -> f64 {
        self.arrival_ms as f64 / 1000.0
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    arrival_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_id: Option<u64>,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], header: &[String], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let mut w = |s: &str| out.write_all(s.as_bytes()).map_err(|e| Error::io("<trace>", e));
    for h in header {
        w(&format!("# {h}\n"))?;
    }
    for r in records {
        let line = Line {
            id: r.id.clone(),
            arrival_ms: r.arrival_ms,
            embedding: Some(r.embedding.as_slice().to_vec()),
            cluster_id: r.cluster,
        };
        w(&serde_json::to_string(&line)?)?;
        w("\n")?;
    }
    out.flush().map_err(|e| Error::io("<trace>", e))
}

pub fn save_trace(path: &Path, records: &[TraceRecord], header: &[String]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(records, header, f).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses and validates a trace: arrivals must be non-decreasing, every
/// embedding must share one dimension and be finite and non-zero. Vectors
/// already of unit norm are kept bit-for-bit; others are normalized.
pub fn parse_trace<R: Read>(input: R, clusters: Option<&ClusterModel>) -> Result<Vec<TraceRecord>> {
    let mut out: Vec<TraceRecord> = Vec::new();
    let mut dim = None;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let lineno = i + 1;
        let bad = |message: String| Error::Trace { line: lineno, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let raw: Line = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let embedding = match (raw.embedding, raw.cluster_id, clusters) {
            (Some(v), _, _) => to_embedding(v).map_err(bad)?,
            (None, Some(c), Some(model)) => model.query(c, out.len() as u64),
            (None, Some(_), None) => return Err(bad("cluster_id given but no cluster model to expand it".into())),
            (None, None, _) => return Err(bad("record needs embedding or cluster_id".into())),
        };
        match dim {
            None => dim = Some(embedding.dim()),
            Some(d) if d != embedding.dim() => {
                return Err(bad(format!("dimension {} differs from {d}", embedding.dim())));
            }
            _ => {}
        }
        if let Some(prev) = out.last() {
            if raw.arrival_ms < prev.arrival_ms {
                return Err(bad(format!(
                    "arrival_ms {} before previous {}",
                    raw.arrival_ms, prev.arrival_ms
                )));
            }
        }
        out.push(TraceRecord {
            id: raw.id,
            arrival_ms: raw.arrival_ms,
            embedding,
            cluster: raw.cluster_id,
        });
    }
    Ok(out)
}

fn to_embedding(v: Vec<f32>) -> std::result::Result<Embedding, String> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err("non-finite embedding component".into());
    }
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if (norm - 1.0).abs() <= NORM_TOLERANCE {
        Embedding::from_unit(v)
    } else {
        Embedding::normalize(&v)
    }
    .map_err(|e| e.to_string())
}

pub fn load_trace(path: &Path, clusters: Option<&ClusterModel>) -> Result<Vec<TraceRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(f, clusters)
}
