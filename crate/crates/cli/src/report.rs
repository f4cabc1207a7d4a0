//! CSV and JSON outputs, written atomically (temp file + rename).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::ExperimentConfig;
use crate::records::{Aggregates, Records};
use crate::runner::{EnsembleReport, RunError, RunStats};
use lowedge_core::field::ContinuityProbe;

/// Paths written for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPaths {
    pub records: PathBuf,
    pub summary_json: PathBuf,
    /// Per-scale table, for experiments that have one.
    pub scale_table: Option<PathBuf>,
}

#[derive(Serialize)]
struct JsonSummary<'a> {
    schema_version: u32,
    kind: &'a str,
    created: String,
    config: &'a ExperimentConfig,
    stream_seed: u64,
    aggregates: &'a Aggregates,
    #[serde(skip_serializing_if = "Option::is_none")]
    continuity: Option<&'a ContinuityProbe>,
    stats: &'a RunStats,
    within_budget: bool,
    records_file: String,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<(), RunError>) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist_noclobber(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV bytes of the per-trial records.
pub fn records_csv(records: &Records) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    records.write_csv(&mut buf)?;
    Ok(buf)
}

fn unique_stem(dir: &Path, base: &str) -> PathBuf {
    let mut stem = dir.join(base);
    let mut k = 1;
    while stem.with_extension("csv").exists() || stem.with_extension("json").exists() {
        k += 1;
        stem = dir.join(format!("{base}-{k}"));
    }
    stem
}

/// Writes `<out>/<kind>-<timestamp>.csv` and `.json` (plus a per-scale
/// summary CSV for `msa-initial`).
pub fn write_report(report: &EnsembleReport, out: &Path) -> Result<OutputPaths, RunError> {
    std::fs::create_dir_all(out)?;
    let now = chrono::Utc::now();
    let kind = report.config.kind.name();
    let stem = unique_stem(out, &format!("{kind}-{}", now.format("%Y%m%dT%H%M%SZ")));
    let records = stem.with_extension("csv");
    let summary_json = stem.with_extension("json");

    let csv_bytes = records_csv(&report.records)?;
    write_atomic(&records, |w| Ok(w.write_all(&csv_bytes)?))?;

    let scale_table = match &report.aggregates {
        Aggregates::MsaInitial(rows) => {
            let path = PathBuf::from(format!("{}-summary.csv", stem.display()));
            write_atomic(&path, |w| {
                let mut out = csv::Writer::from_writer(w);
                for r in rows {
                    out.serialize(r)?;
                }
                out.flush()?;
                Ok(())
            })?;
            Some(path)
        }
        _ => None,
    };

    let summary = JsonSummary {
        schema_version: report.schema_version,
        kind,
        created: now.to_rfc3339(),
        config: &report.config,
        stream_seed: report.stream_seed,
        aggregates: &report.aggregates,
        continuity: report.continuity.as_ref(),
        stats: &report.stats,
        within_budget: report.within_budget(),
        records_file: records.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    write_atomic(&summary_json, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        Ok(w.write_all(b"\n")?)
    })?;
    Ok(OutputPaths { records, summary_json, scale_table })
}
