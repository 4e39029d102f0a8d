//! One CSV row per run.

use crate::driver::ProblemKind;
use crate::error::{Error, Result};
use crate::preconditioners::{Composition, Target};
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::Mode;

/// Result of one solve. The first six columns follow the usual table order:
/// triangles, free dofs, iterations, total, setup and solve seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub triangles: usize,
    /// Free dofs of the condensed velocity-pressure system (velocity only in elliptic mode).
    pub dofs: usize,
    pub iterations: usize,
    pub t_tot: f64,
    pub t_sup: f64,
    pub t_sol: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub cond: Option<f64>,
    pub problem: ProblemKind,
    pub mode: Mode,
    pub k: usize,
    pub level: usize,
    pub composition: Composition,
    pub target: Target,
    pub converged: bool,
    pub max_div: f64,
    pub nt_jump: f64,
    pub monotone: bool,
    /// Failure message of a row that could not be computed.
    pub error: Option<String>,
}

/// CSV header, identical to the field names of [`RunRecord`].
pub const RUN_RECORD_COLUMNS: [&str; 20] = [
    "triangles",
    "dofs",
    "iterations",
    "t_tot",
    "t_sup",
    "t_sol",
    "lambda_min",
    "lambda_max",
    "cond",
    "problem",
    "mode",
    "k",
    "level",
    "composition",
    "target",
    "converged",
    "max_div",
    "nt_jump",
    "monotone",
    "error",
];

impl RunRecord {
    /// A row for a run that failed before producing a solution.
    pub fn failed(
        problem: ProblemKind,
        mode: Mode,
        k: usize,
        level: usize,
        composition: Composition,
        target: Target,
        error: String,
    ) -> Self {
        RunRecord {
            triangles: 0,
            dofs: 0,
            iterations: 0,
            t_tot: 0.0,
            t_sup: 0.0,
            t_sol: 0.0,
            lambda_min: None,
            lambda_max: None,
            cond: None,
            problem,
            mode,
            k,
            level,
            composition,
            target,
            converged: false,
            max_div: f64::NAN,
            nt_jump: f64::NAN,
            monotone: false,
            error: Some(error),
        }
    }

    /// The record with the wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        RunRecord {
            t_tot: 0.0,
            t_sup: 0.0,
            t_sol: 0.0,
            ..self.clone()
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Write records as RFC 4180 CSV; the header is written even without rows.
pub fn write_records<W: Write>(w: W, records: &[RunRecord]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(RUN_RECORD_COLUMNS).map_err(csv_err)?;
    for r in records {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(r: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|row| row.map_err(csv_err)).collect()
}
