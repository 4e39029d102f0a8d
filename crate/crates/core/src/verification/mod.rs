//! Numeric experiments for the analytical constants of the discretization:
//! interpolation bounds, trace-norm inverse estimates, Schur-complement norm
//! identities and equivalences, the γ constant and the pressure inf-sup constant.

mod constants;
mod interp;
mod solver;
mod trace;

pub use constants::{
    check_norm_equivalences, estimate_gamma, estimate_infsup, gamma_reference, infsup_eigenvalues, reference_system,
    InfSupSpectrum,
};
pub use interp::{broken_from_velocity, check_interp_bound, interp_forms, interp_nodal_average, BrokenSpace};
pub use solver::{
    asp_condition, asp_h_robustness, asp_k_growth, check_dense_oracle, check_solve_structure, oracle_system,
};
pub use trace::{estimate_trace, trace_forms, trace_norms, trace_ratio, TraceForms};

use crate::error::{Error, Result};
use std::fmt;
use std::io::Write;

/// Measured constants of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantReport {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Exponent of a least-squares power-law fit, where one applies.
    pub fit_exponent: Option<f64>,
    /// How the numbers were obtained and which assertions were made.
    pub notes: Vec<String>,
    pub passed: bool,
}

impl ConstantReport {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        ConstantReport {
            experiment: experiment.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fit_exponent: None,
            notes: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Record an assertion; a failed one marks the report as failed.
    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.notes
            .push(format!("[{}] {what}", if ok { "pass" } else { "FAIL" }));
        self.passed &= ok;
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            wr.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl fmt::Display for ConstantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# {} ({})",
            self.experiment,
            if self.passed { "pass" } else { "FAIL" }
        )?;
        writeln!(f, "{}", self.columns.join("\t"))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.6e}")).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        if let Some(p) = self.fit_exponent {
            writeln!(f, "fit exponent: {p:.4}")?;
        }
        for n in &self.notes {
            writeln!(f, "{n}")?;
        }
        Ok(())
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// max/min − 1 of a positive sequence.
pub fn relative_spread(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::MIN, f64::max);
    let mn = v.iter().cloned().fold(f64::MAX, f64::min);
    mx / mn - 1.0
}

#[cfg(test)]
mod tests;
