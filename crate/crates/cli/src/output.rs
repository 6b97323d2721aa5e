//! CSV and JSON writers. Every file is written to a temporary name and renamed into place.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use certilind::estimators::{EstimatorLedger, LedgerKind};
use certilind::solver::{ResizeEvent, RunOutput, SolverConfig, TrajectoryRecord};
use certilind::DenseOperator;
use serde::{Deserialize, Serialize};

use crate::model_file::ShapeSpec;

/// Dense complex matrix, row-major, as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSpec>,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn of(m: &DenseOperator) -> Self {
        MatrixJson {
            dim: m.dim(),
            shape: Some(ShapeSpec::of(m.shape())),
            data: m.to_row_major().iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub t_final: f64,
    pub xi: f64,
    pub dim: usize,
    pub shape: ShapeSpec,
    pub scheme: String,
    pub space_tol: f64,
    pub time_tol: f64,
    pub adaptive_space: bool,
    /// Sum of the time-discretization certificate entries (0 when disabled).
    pub time_bound: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub grow_events: usize,
    pub shrink_events: usize,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn of(run: &RunOutput, config: &SolverConfig, adaptive_space: bool, wall_time_s: f64) -> Self {
        let count = |f: &dyn Fn(&TrajectoryRecord) -> bool| run.trajectory.iter().filter(|r| f(r)).count();
        Summary {
            t_final: config.t_final,
            xi: run.xi(),
            dim: run.state.rho.dim(),
            shape: ShapeSpec::of(run.shape()),
            scheme: config.scheme.to_string(),
            space_tol: config.space_tol,
            time_tol: config.time_tol,
            adaptive_space,
            time_bound: run.ledger.total(LedgerKind::TimeTaylor) + run.ledger.total(LedgerKind::TimeEuler),
            accepted_steps: count(&|r| r.accepted && r.resize == ResizeEvent::None),
            rejected_steps: count(&|r| !r.accepted),
            grow_events: count(&|r| r.resize == ResizeEvent::Grow),
            shrink_events: count(&|r| r.resize == ResizeEvent::Shrink),
            warnings: run.warnings.clone(),
            wall_time_s,
        }
    }
}

/// Shortest round-trip decimal in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// CSV text with `,` separators and LF line endings.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> Result<Vec<u8>> {
    csv_text(
        &["t", "dim", "trace_re", "xi", "defect_rate", "accepted", "resize"],
        records.iter().map(|r| {
            vec![
                num(r.time),
                r.dim.to_string(),
                num(r.trace),
                num(r.xi),
                num(r.defect_rate),
                r.accepted.to_string(),
                r.resize.as_str().to_string(),
            ]
        }),
    )
}

pub fn ledger_csv(ledger: &EstimatorLedger) -> Result<Vec<u8>> {
    csv_text(
        &["time", "kind", "value"],
        ledger.entries().iter().map(|e| vec![num(e.time), e.kind.as_str().to_string(), num(e.value)]),
    )
}

pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Writes `trajectory.csv`, `ledger.csv`, `final_state.json` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, run: &RunOutput, summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&run.trajectory)?)?;
    write_atomic(&dir.join("ledger.csv"), &ledger_csv(&run.ledger)?)?;
    write_atomic(&dir.join("final_state.json"), &json_bytes(&MatrixJson::of(&run.state.rho))?)?;
    write_atomic(&dir.join("summary.json"), &json_bytes(summary)?)?;
    Ok(())
}
