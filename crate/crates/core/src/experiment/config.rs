//! TOML run configuration.
//!
//! Every key is optional; missing keys take the values of
//! [`RunConfig::default`]. Example:
//!
//! ```toml
//! problem = "channel"        # channel | cavity | manufactured | polynomial
//! mode = "stokes"            # stokes | elliptic
//! k = 2
//! level = 0                  # uniform refinements of the base mesh
//! nu = 1e-3
//! composition = "multiplicative"   # additive | multiplicative
//! target = "condensed"       # full_s | condensed
//! smoother = "gauss_seidel"  # jacobi | gauss_seidel | l1_jacobi
//! steps = 1
//! penalty = 4.0              # tangential penalty constant on Γ_Ñ
//! rtol = 1e-6
//! maxit = 500
//! seed = 0
//! lanczos_steps = 60         # optional spectral estimate
//!
//! [study]
//! ks = [2]
//! levels = [0, 1, 2, 3]
//! compositions = ["additive", "multiplicative"]
//!
//! [output]
//! dir = "out"
//! solution = true
//! residuals = true
//! ```

use crate::driver::{ProblemKind, SolveOptions};
use crate::error::{Error, Result};
use crate::preconditioners::{AspConfig, Composition, SmootherVariant, Target};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Saddle-point Stokes system with GMRES.
    Stokes,
    /// Condensed velocity operator S alone with CG.
    Elliptic,
}

/// A sweep over (k, level) pairs and preconditioner compositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub ks: Vec<usize>,
    pub levels: Vec<usize>,
    /// Explicit (k, level) pairs; used instead of `ks × levels` when non-empty.
    pub pairs: Vec<(usize, usize)>,
    /// Compositions to run at every pair; empty means the run composition.
    pub compositions: Vec<Composition>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            ks: vec![2],
            levels: vec![0, 1, 2, 3],
            pairs: Vec::new(),
            compositions: Vec::new(),
        }
    }
}

impl StudyConfig {
    /// The (k, level) pairs of the sweep in order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        if !self.pairs.is_empty() {
            return self.pairs.clone();
        }
        self.ks
            .iter()
            .flat_map(|&k| self.levels.iter().map(move |&l| (k, l)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write solution coefficients as JSON.
    pub solution: bool,
    /// Write the Krylov residual history as CSV.
    pub residuals: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            solution: false,
            residuals: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub mode: Mode,
    pub k: usize,
    pub level: usize,
    pub nu: f64,
    pub composition: Composition,
    pub target: Target,
    pub smoother: SmootherVariant,
    pub steps: usize,
    pub penalty: f64,
    pub rtol: f64,
    pub maxit: usize,
    pub seed: u64,
    pub lanczos_steps: Option<usize>,
    pub study: StudyConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let asp = AspConfig::default();
        RunConfig {
            problem: ProblemKind::Channel,
            mode: Mode::Stokes,
            k: 2,
            level: 0,
            nu: 1e-3,
            composition: asp.composition,
            target: asp.target,
            smoother: asp.smoother,
            steps: asp.steps,
            penalty: asp.penalty,
            rtol: 1e-6,
            maxit: 500,
            seed: 0,
            lanczos_steps: None,
            study: StudyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let ks = std::iter::once(self.k)
            .chain(self.study.ks.iter().copied())
            .chain(self.study.pairs.iter().map(|p| p.0));
        for k in ks {
            if k < 2 {
                return Err(Error::Degree(k));
            }
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::Config(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if self.maxit == 0 || self.steps == 0 {
            return Err(Error::Config("maxit and steps must be positive".into()));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Config(format!("penalty must be positive, got {}", self.penalty)));
        }
        Ok(())
    }

    pub fn asp(&self) -> AspConfig {
        AspConfig {
            composition: self.composition,
            target: self.target,
            smoother: self.smoother,
            steps: self.steps,
            penalty: self.penalty,
            seed: self.seed,
            ..AspConfig::default()
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            asp: self.asp(),
            rtol: self.rtol,
            maxit: self.maxit,
            lanczos_steps: self.lanczos_steps,
        }
    }
}
