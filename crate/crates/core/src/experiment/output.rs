//! Result files and their manifest.
//!
//! Every writer here is byte-deterministic: no timestamps, no hash-map
//! iteration order, floats printed in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contest::WorkerId;
use crate::error::{Error, Result};
use crate::experiment::runner::{
    ContestSummary, FailedReplication, SpreadRow, SweepResult, TrendReport, CURVE_POINTS,
};
use crate::inference::fit::{write_fitted_jsonl, FittedBehavior};
use crate::sim::EventLog;

pub const MANIFEST_NAME: &str = "manifest.json";

/// One file to write: a name relative to the output directory and its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read(dir.join(MANIFEST_NAME))?;
        Ok(serde_json::from_slice(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `artifacts` and a manifest into `dir`. If any write fails, every
/// file this call already wrote is removed again.
pub fn write_bundle(dir: &Path, artifacts: &[Artifact]) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut files = Vec::with_capacity(artifacts.len());
        for a in artifacts {
            if a.name == MANIFEST_NAME || a.name.contains(['/', '\\']) {
                return Err(Error::Contract(format!(
                    "artifact name {:?} not allowed",
                    a.name
                )));
            }
            let path = dir.join(&a.name);
            fs::write(&path, &a.bytes)?;
            written.push(path);
            files.push(ManifestEntry {
                path: a.name.clone(),
                bytes: a.bytes.len() as u64,
                sha256: sha256_hex(&a.bytes),
            });
        }
        let manifest = Manifest { files };
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
        written.push(path);
        Ok(manifest)
    })();
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn csv_bytes<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

const SWEEP_HEADER: [&str; 10] = [
    "spread",
    "replications",
    "mean_total",
    "sd_total",
    "mean_distinct",
    "sd_distinct",
    "mean_per_active_worker",
    "mean_active_fraction_at_90",
    "mean_exits",
    "mean_payout",
];

pub fn sweep_csv(rows: &[SpreadRow]) -> Result<Vec<u8>> {
    csv_bytes(&SWEEP_HEADER, rows)
}

#[derive(Debug, Serialize)]
struct CurveRow {
    spread: u32,
    checkpoint: usize,
    elapsed_fraction: f64,
    mean_active: f64,
}

pub fn exit_curves_csv(curves: &[(u32, Vec<f64>)]) -> Result<Vec<u8>> {
    let rows = curves.iter().flat_map(|(spread, curve)| {
        curve.iter().enumerate().map(move |(c, &m)| CurveRow {
            spread: *spread,
            checkpoint: c,
            elapsed_fraction: c as f64 / (CURVE_POINTS - 1) as f64,
            mean_active: m,
        })
    });
    csv_bytes(
        &["spread", "checkpoint", "elapsed_fraction", "mean_active"],
        rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub spread: u32,
    pub worker_id: WorkerId,
    pub event_index: u64,
    pub time_s: f64,
    pub cumulative_annotations: u64,
    pub cumulative_score: u64,
}

/// Cumulative annotations and score of every worker after each of its
/// events.
pub fn trajectory(log: &EventLog) -> Vec<TrajectoryPoint> {
    let mut out = Vec::with_capacity(log.events.len());
    for w in log.worker_ids() {
        let mut score = 0;
        for e in log.events.iter().filter(|e| e.worker_id == w) {
            score += e.points;
            out.push(TrajectoryPoint {
                spread: log.config.reward_spread,
                worker_id: w,
                event_index: e.event_index,
                time_s: e.event_time_ms as f64 / 1000.0,
                cumulative_annotations: e.event_index + 1,
                cumulative_score: score,
            });
        }
    }
    out
}

pub fn trajectories_csv(logs: &[EventLog]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "spread",
            "worker_id",
            "event_index",
            "time_s",
            "cumulative_annotations",
            "cumulative_score",
        ],
        logs.iter().flat_map(trajectory),
    )
}

#[derive(Debug, Serialize)]
struct TrendFile<'a> {
    partial: bool,
    trend: &'a TrendReport,
    failures: &'a [FailedReplication],
}

/// Everything a sweep writes, plus fitted behaviours when any.
pub fn sweep_artifacts(sweep: &SweepResult, fitted: &[FittedBehavior]) -> Result<Vec<Artifact>> {
    let mut fitted_bytes = Vec::new();
    write_fitted_jsonl(fitted, &mut fitted_bytes)?;
    let trend = TrendFile {
        partial: sweep.is_partial(),
        trend: &sweep.trend,
        failures: &sweep.failures,
    };
    Ok(vec![
        Artifact::new("sweep.csv", sweep_csv(&sweep.rows)?),
        Artifact::new("summaries.jsonl", jsonl_bytes(&sweep.summaries)?),
        Artifact::new("exit_curves.csv", exit_curves_csv(&sweep.exit_curves)?),
        Artifact::new("trajectories.csv", trajectories_csv(&sweep.sample_logs)?),
        Artifact::new("fitted.jsonl", fitted_bytes),
        Artifact::new("trend.json", serde_json::to_vec_pretty(&trend)?),
    ])
}

pub fn emit_outputs(
    sweep: &SweepResult,
    fitted: &[FittedBehavior],
    dir: &Path,
) -> Result<Manifest> {
    write_bundle(dir, &sweep_artifacts(sweep, fitted)?)
}

pub fn read_summaries_jsonl(bytes: &[u8]) -> Result<Vec<ContestSummary>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::runner::{TrendReport, TrendVerdict};

    fn empty_sweep() -> SweepResult {
        SweepResult {
            rows: vec![],
            summaries: vec![],
            failures: vec![],
            trend: TrendReport {
                verdict: TrendVerdict::NotApplicable,
                comparisons: vec![],
                anova: None,
            },
            exit_curves: vec![],
            sample_logs: vec![],
        }
    }

    #[test]
    fn empty_sweep_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_outputs(&empty_sweep(), &[], dir.path()).unwrap();
        assert_eq!(m.files.len(), 6);
        let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(sweep.lines().count(), 1);
        assert!(sweep.starts_with("spread,replications,mean_total"));
        assert_eq!(fs::read(dir.path().join("summaries.jsonl")).unwrap(), b"");
        assert_eq!(Manifest::read(dir.path()).unwrap(), m);
        for e in &m.files {
            let bytes = fs::read(dir.path().join(&e.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), e.sha256);
        }
    }

    #[test]
    fn failed_write_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        // a directory where a file should go makes the second write fail
        fs::create_dir(dir.path().join("b.csv")).unwrap();
        let artifacts = vec![
            Artifact::new("a.csv", b"x".to_vec()),
            Artifact::new("b.csv", b"y".to_vec()),
        ];
        assert!(write_bundle(dir.path(), &artifacts).is_err());
        assert!(!dir.path().join("a.csv").exists());
        assert!(!dir.path().join(MANIFEST_NAME).exists());
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
