//! Result persistence: CSV curves plus a JSON provenance sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{ExperimentResult, ReceiverSummary};
use crate::error::{Error, Result};
use crate::metrics::{curves_csv, SerCurve};

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    csv: String,
}

/// Writes `curves` to `path` as CSV and the resolved config next to it as
/// `<path>.json`; returns the sidecar path.
pub fn emit_results(curves: &[SerCurve], path: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::Contract("refusing to emit an empty SER curve".into()));
    }
    write(path, &curves_csv(curves))?;
    let sidecar = path.with_extension("json");
    let doc = Sidecar {
        config: cfg,
        csv: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    write(&sidecar, &(serde_json::to_string_pretty(&doc).expect("sidecar serializes") + "\n"))?;
    Ok(sidecar)
}

/// Files written by [`emit_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub ser: PathBuf,
    pub sidecar: PathBuf,
    pub learning: Option<PathBuf>,
    pub summary: PathBuf,
}

/// Writes `ser.csv` (+ `ser.json`), `learning.csv` when present and
/// `summary.json` into `dir`.
pub fn emit_experiment(result: &ExperimentResult, dir: &Path, cfg: &ExperimentConfig) -> Result<EmittedFiles> {
    let ser = dir.join("ser.csv");
    let sidecar = emit_results(&result.curves, &ser, cfg)?;
    let learning = if result.learning.is_empty() {
        None
    } else {
        let p = dir.join("learning.csv");
        write(&p, &curves_csv(&result.learning))?;
        Some(p)
    };
    let summary = dir.join("summary.json");
    let rows: Vec<&ReceiverSummary> = result.summaries.iter().flatten().collect();
    #[derive(Serialize)]
    struct Row<'a> {
        label: &'a str,
        x: f64,
        ser: f64,
        ci_halfwidth: f64,
        run_ci_halfwidth: f64,
        overall_ser: f64,
        mean_final_norm: f64,
        branch_usage: &'a [usize],
    }
    let rows: Vec<Row> = rows
        .iter()
        .map(|s| Row {
            label: &s.label,
            x: s.x,
            ser: s.ser,
            ci_halfwidth: s.ci_halfwidth,
            run_ci_halfwidth: s.run_ci_halfwidth,
            overall_ser: s.overall_ser,
            mean_final_norm: s.mean_final_norm,
            branch_usage: &s.branch_usage,
        })
        .collect();
    write(&summary, &(serde_json::to_string_pretty(&rows).expect("summary serializes") + "\n"))?;
    Ok(EmittedFiles {
        ser,
        sidecar,
        learning,
        summary,
    })
}
