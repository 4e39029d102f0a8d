//! Runners behind the command-line subcommands.

use super::config::{Mode, RunConfig};
use super::record::{write_records, RunRecord};
use crate::assembly::{assemble_elliptic_system, assemble_full_system};
use crate::condensation::double_schur;
use crate::driver::{
    asp_spectrum, build_problem, prepare, solve_elliptic, solve_stokes, Problem, ProblemKind, Solution,
};
use crate::error::{Error, Result};
use crate::mesh::{build_structured, side, BoundaryKind, Rect, RegionRule};
use crate::preconditioners::{AspPreconditioner, Composition, Target};
use crate::sparse::{CsrMatrix, Triplets};
use crate::verification::{self as ver, ConstantReport};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

fn record_from(cfg: &RunConfig, pr: &Problem, level: usize, sol: &Solution, t_build: f64, t_all: f64) -> RunRecord {
    RunRecord {
        triangles: pr.sys.n_triangles(),
        dofs: sol.n_dofs,
        iterations: sol.report.iterations,
        t_tot: t_all,
        t_sup: t_build + sol.timings.setup,
        t_sol: sol.timings.solve,
        lambda_min: sol.report.lambda_min,
        lambda_max: sol.report.lambda_max,
        cond: sol.report.cond,
        problem: cfg.problem,
        mode: cfg.mode,
        k: pr.sys.k,
        level,
        composition: cfg.composition,
        target: cfg.target,
        converged: sol.report.converged,
        max_div: sol.checks.max_div,
        nt_jump: sol.checks.nt_jump,
        monotone: sol.checks.monotone,
        error: None,
    }
}

/// Assemble, condense, precondition, solve, recover and post-check one configuration.
///
/// Non-convergence is not an error here; it is flagged in the record.
pub fn run_solve(cfg: &RunConfig) -> Result<(RunRecord, Solution)> {
    cfg.validate()?;
    let t0 = Instant::now();
    let pr = build_problem(cfg.problem, cfg.k, cfg.level, cfg.nu)?;
    let t_build = t0.elapsed().as_secs_f64();
    let opts = cfg.solve_options();
    let sol = match cfg.mode {
        Mode::Stokes => solve_stokes(&pr.sys, cfg.nu, pr.force.as_ref(), &opts)?,
        Mode::Elliptic => solve_elliptic(&pr.sys, cfg.nu, pr.force.as_ref(), &opts)?,
    };
    let rec = record_from(cfg, &pr, cfg.level, &sol, t_build, t0.elapsed().as_secs_f64());
    Ok((rec, sol))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write the record, and optionally the residual history and solution, into the output directory.
pub fn write_solve_outputs(cfg: &RunConfig, rec: &RunRecord, sol: &Solution) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut written = vec![dir.join("record.csv")];
    write_records(create(&written[0])?, std::slice::from_ref(rec))?;
    if cfg.output.residuals {
        let p = dir.join("residuals.csv");
        sol.report.write_residuals_csv(create(&p)?)?;
        written.push(p);
    }
    if cfg.output.solution {
        let p = dir.join("solution.json");
        let doc = serde_json::json!({
            "k": cfg.k,
            "level": cfg.level,
            "triangles": rec.triangles,
            "velocity": sol.velocity,
            "pressure": sol.pressure,
            "sigma": sol.stress.sigma,
            "omega": sol.stress.omega,
        });
        serde_json::to_writer(create(&p)?, &doc).map_err(|e| Error::Io(e.into()))?;
        written.push(p);
    }
    Ok(written)
}

/// One sweep point; failures become a row with the error column set.
pub fn run_point(cfg: &RunConfig, k: usize, level: usize, composition: Composition) -> RunRecord {
    let c = RunConfig {
        k,
        level,
        composition,
        ..cfg.clone()
    };
    match run_solve(&c) {
        Ok((rec, _)) => rec,
        Err(e) => RunRecord::failed(c.problem, c.mode, k, level, composition, c.target, e.to_string()),
    }
}

/// Every (k, level) pair of the study for every composition, in sweep order.
pub fn run_study(cfg: &RunConfig) -> Vec<RunRecord> {
    let comps = if cfg.study.compositions.is_empty() {
        vec![cfg.composition]
    } else {
        cfg.study.compositions.clone()
    };
    let mut out = Vec::new();
    for (k, level) in cfg.study.points() {
        for &comp in &comps {
            out.push(run_point(cfg, k, level, comp));
        }
    }
    out
}

/// Lanczos estimate of the preconditioned spectrum without a solve.
pub fn run_spectrum(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let t0 = Instant::now();
    let pr = build_problem(cfg.problem, cfg.k, cfg.level, cfg.nu)?;
    let cs = prepare(&pr.sys, cfg.nu, pr.force.as_ref(), cfg.target)?;
    let pc = AspPreconditioner::new(&pr.sys, &cs, cfg.asp())?;
    let t_sup = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let rep = asp_spectrum(&cs, &pc, cfg.lanczos_steps.unwrap_or(60), cfg.seed)?;
    let t_sol = t1.elapsed().as_secs_f64();
    let n_dofs = match cfg.mode {
        Mode::Stokes => pr.sys.dofs.n_free_condensed(),
        Mode::Elliptic => pr.sys.dofs.layout.len(),
    };
    Ok(RunRecord {
        triangles: pr.sys.n_triangles(),
        dofs: n_dofs,
        iterations: 0,
        t_tot: t0.elapsed().as_secs_f64(),
        t_sup,
        t_sol,
        lambda_min: rep.lambda_min,
        lambda_max: rep.lambda_max,
        cond: rep.cond,
        problem: cfg.problem,
        mode: cfg.mode,
        k: cfg.k,
        level: cfg.level,
        composition: cfg.composition,
        target: cfg.target,
        converged: true,
        max_div: 0.0,
        nt_jump: 0.0,
        monotone: true,
        error: None,
    })
}

/// Half-open range of one block in an exported matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct BlockRange {
    pub name: String,
    pub offset: usize,
    pub size: usize,
}

/// JSON sidecar of [`export_system`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ExportSidecar {
    pub problem: ProblemKind,
    pub mode: Mode,
    pub k: usize,
    pub level: usize,
    pub nu: f64,
    pub triangles: usize,
    /// Blocks of K in order; their sizes sum to `dimension`.
    pub blocks: Vec<BlockRange>,
    pub dimension: usize,
    /// Blocks of S: element-interior velocity dofs, then facet coupling dofs.
    pub velocity_blocks: Vec<BlockRange>,
    pub pressure: usize,
    pub files: Vec<String>,
    /// Set when the pressure is determined only up to a constant.
    pub pressure_null_space: Option<String>,
    pub notes: Vec<String>,
}

fn diagonal(d: &[f64]) -> CsrMatrix {
    let mut t = Triplets::new(d.len(), d.len());
    for (i, v) in d.iter().enumerate() {
        t.push(i, i, *v);
    }
    t.to_csr()
}

fn ranges(parts: &[(&str, usize)]) -> Vec<BlockRange> {
    let mut off = 0;
    parts
        .iter()
        .map(|(n, s)| {
            let r = BlockRange {
                name: n.to_string(),
                offset: off,
                size: *s,
            };
            off += s;
            r
        })
        .collect()
}

/// Write K, S, S^∂, B and M_p in MatrixMarket format with a JSON sidecar.
pub fn export_system(cfg: &RunConfig, dir: &Path) -> Result<ExportSidecar> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let pr = build_problem(cfg.problem, cfg.k, cfg.level, cfg.nu)?;
    let sys = &pr.sys;
    let full = match cfg.mode {
        Mode::Stokes => assemble_full_system(sys, cfg.nu, pr.force.as_ref())?,
        Mode::Elliptic => assemble_elliptic_system(sys, cfg.nu, pr.force.as_ref())?,
    };
    let o = full.offsets;
    let mut cs = prepare(sys, cfg.nu, pr.force.as_ref(), Target::FullS)?;
    double_schur(sys, &mut cs)?;
    let mats: [(&str, &CsrMatrix); 5] = [
        ("K.mtx", &full.matrix),
        ("S.mtx", &cs.s),
        ("S_boundary.mtx", &cs.double()?.s_bd),
        ("B.mtx", &cs.b),
        ("Mp.mtx", &diagonal(&cs.mass_p)),
    ];
    let mut files = Vec::new();
    for (name, m) in mats {
        m.write_matrix_market(create(&dir.join(name))?)?;
        files.push(name.to_string());
    }
    let n = cs.n_velocity();
    let mut parts = vec![
        ("sigma", o.omega - o.sigma),
        ("omega", o.velocity - o.omega),
        ("velocity", o.pressure - o.velocity),
    ];
    if cfg.mode == Mode::Stokes {
        parts.push(("pressure", o.end - o.pressure));
    }
    let side = ExportSidecar {
        problem: cfg.problem,
        mode: cfg.mode,
        k: cfg.k,
        level: cfg.level,
        nu: cfg.nu,
        triangles: sys.n_triangles(),
        blocks: ranges(&parts),
        dimension: full.matrix.nrows,
        velocity_blocks: ranges(&[("interior", cs.n_interior), ("coupling", n - cs.n_interior)]),
        pressure: cs.n_pressure(),
        files: files.clone(),
        pressure_null_space: (cfg.mode == Mode::Stokes && sys.regions.mean_zero_pressure)
            .then(|| "constant pressure: the whole boundary is Dirichlet, so K is singular along it".into()),
        notes: vec![
            "K is symmetric indefinite with σ, ω, free velocity and pressure blocks; Dirichlet dofs are eliminated"
                .into(),
            "B carries +(div v, q): the pressure unknown of K is the negative physical pressure".into(),
            "Mp is the ν^{-1}-scaled pressure mass matrix in the orthonormal basis".into(),
        ],
    };
    let f = create(&dir.join("system.json"))?;
    serde_json::to_writer_pretty(f, &side).map_err(|e| Error::Io(e.into()))?;
    Ok(side)
}

/// Groups of verification experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Norm identities, the dense oracle and structural checks of solves.
    Identities,
    /// γ, the inf-sup constant, trace ratios and the interpolation bound.
    Constants,
    /// Spectra of the auxiliary-space preconditioner.
    Preconditioner,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Suite::Identities),
            "constants" => Ok(Suite::Constants),
            "preconditioner" => Ok(Suite::Preconditioner),
            "all" => Ok(Suite::All),
            _ => Err(Error::Config(format!(
                "unknown suite '{s}', expected identities, constants, preconditioner or all"
            ))),
        }
    }
}

/// 8 triangles on the unit square, Dirichlet on the left side and outflow elsewhere.
pub fn identity_system(k: usize) -> Result<crate::fespace::FeSystem> {
    let m = build_structured(2, 2, Rect::unit_square())?;
    let rules = [
        RegionRule::sides(BoundaryKind::Dirichlet, &[side::LEFT]),
        RegionRule::new(BoundaryKind::Neumann, |f| f.label != Some(side::LEFT)),
    ];
    let regions = crate::mesh::classify_boundary(&m, &rules, None)?;
    crate::fespace::FeSystem::new(m, regions, k)
}

/// Run a verification suite; the reports carry their own pass/fail state.
pub fn run_verification(suite: Suite, seed: u64) -> Result<Vec<ConstantReport>> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    if want(Suite::Identities) {
        for k in [2, 3] {
            let mut r = ver::check_norm_equivalences(&identity_system(k)?, 1e-2, 200, seed)?;
            r.experiment = format!("{} (k = {k})", r.experiment);
            out.push(r);
        }
        out.push(ver::check_dense_oracle(
            &ver::oracle_system(2)?,
            0.5,
            None,
            1e-10,
            1e-9,
        )?);
        let kinds = [
            ProblemKind::Channel,
            ProblemKind::Cavity,
            ProblemKind::Manufactured,
            ProblemKind::Polynomial,
        ];
        out.push(ver::check_solve_structure(&kinds, 2, 1e-3, 1e-12, 1e-9)?);
    }
    if want(Suite::Constants) {
        let ks = [2, 3, 4, 5, 6];
        out.push(ver::estimate_gamma(&ks, 1e-3, 10.0)?);
        out.push(ver::estimate_infsup(
            &build_structured(4, 4, Rect::unit_square())?,
            2,
            2,
            1.0,
            0.2,
        )?);
        out.push(ver::estimate_trace(&ks)?);
        out.push(ver::check_interp_bound(
            500,
            &build_structured(2, 2, Rect::unit_square())?,
            2,
            2,
            seed,
            0.25,
        )?);
    }
    if want(Suite::Preconditioner) {
        let asp = crate::preconditioners::AspConfig {
            seed,
            ..Default::default()
        };
        out.push(ver::asp_h_robustness(2, 3, asp, 1e-3, 100, 0.25)?);
        out.push(ver::asp_k_growth(&[2, 3, 4, 5, 6], &[2, 3], 0, asp, 1e-3, 100)?);
    }
    Ok(out)
}

/// Write each report as `<dir>/<experiment>.csv` plus a combined text summary.
pub fn write_reports(dir: &Path, reports: &[ConstantReport]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut text = String::new();
    for r in reports {
        let stem: String = r
            .experiment
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        let p = dir.join(format!("{}.csv", stem.trim_matches('_')));
        r.write_csv(create(&p)?)?;
        written.push(p);
        text.push_str(&r.to_string());
        text.push('\n');
    }
    let p = dir.join("reports.txt");
    std::fs::write(&p, text)?;
    written.push(p);
    Ok(written)
}
