//! Checks on the discrete solver: the condensed operators against dense
//! brute-force Schur complements, structural properties of computed solutions
//! and Lanczos spectra of the auxiliary-space preconditioner.

use super::ConstantReport;
use crate::assembly::{assemble_all_blocks, assemble_full_from_blocks, BodyForce};
use crate::condensation::{condense_sigma_omega, double_schur};
use crate::driver::{asp_spectrum, build_problem, prepare, solve_elliptic, solve_stokes, ProblemKind, SolveOptions};
use crate::error::Result;
use crate::fespace::{FeSystem, Vec2};
use crate::mesh::side::{BOTTOM, LEFT, RIGHT, TOP};
use crate::mesh::{build_structured, classify_boundary, BoundaryKind, Rect, RegionRule, VectorField};
use crate::preconditioners::{AspConfig, AspPreconditioner, Target};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Two triangles, Dirichlet data on three sides and an outflow side.
pub fn oracle_system(k: usize) -> Result<FeSystem> {
    let m = build_structured(1, 1, Rect::unit_square())?;
    let rules = vec![
        RegionRule::sides(BoundaryKind::Dirichlet, &[BOTTOM, LEFT, TOP]),
        RegionRule::sides(BoundaryKind::Neumann, &[RIGHT]),
    ];
    let g: VectorField = Arc::new(|x: Vec2| [x[1] * (1.0 - x[1]), 0.3 * x[0]]);
    let r = classify_boundary(&m, &rules, Some(g))?;
    FeSystem::new(m, r, k)
}

fn dense_schur(k: &DMatrix<f64>, keep: &[usize], elim: &[usize]) -> Option<DMatrix<f64>> {
    let a = k.select_rows(keep).select_columns(keep);
    let b = k.select_rows(keep).select_columns(elim);
    let c = k.select_rows(elim).select_columns(elim);
    let x = c.lu().solve(&b.transpose())?;
    Some(a - b * x)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Compare S, S^∂ and the condensed solve with dense computations on the full system.
///
/// Rows: 1 = S against the dense Schur complement of the full matrix,
/// 2 = S^∂ against the dense Schur complement of S, 3..7 = u/û, p, σ, ω
/// of the condensed solve against a dense LU solve of the full system.
/// Differences are absolute, scaled by the largest entry of the reference.
pub fn check_dense_oracle(
    sys: &FeSystem,
    nu: f64,
    f: Option<&BodyForce>,
    tol_op: f64,
    tol_sol: f64,
) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new("dense oracle", &["check", "max_difference", "reference_scale"]);
    rep.notes.push(format!(
        "{} triangles, k = {}; checks 1-2 operators, 3-6 solution blocks u/û, p, σ, ω",
        sys.n_triangles(),
        sys.k
    ));
    let blocks = assemble_all_blocks(sys, nu, f);
    let full = assemble_full_from_blocks(sys, &blocks)?;
    let kd = full.matrix.to_dense();
    let o = full.offsets;
    let mut cs = condense_sigma_omega(sys, &blocks, nu)?;
    double_schur(sys, &mut cs)?;
    let keep: Vec<usize> = (o.velocity..o.pressure).collect();
    let elim: Vec<usize> = (0..o.velocity).collect();
    let sd = dense_schur(&kd, &keep, &elim).ok_or_else(|| crate::Error::Singular("stress block".into()))?;
    let s = cs.s.to_dense();
    rep.push(vec![1.0, (&sd - &s).amax(), sd.amax()]);
    let ni = cs.n_interior;
    let n = cs.n_velocity();
    let inner: Vec<usize> = (0..ni).collect();
    let outer: Vec<usize> = (ni..n).collect();
    let sbd_dense = dense_schur(&s, &outer, &inner).ok_or_else(|| crate::Error::Singular("interior block".into()))?;
    let sbd = cs.double()?.s_bd.to_dense();
    rep.push(vec![2.0, (&sbd_dense - &sbd).amax(), sbd_dense.amax()]);

    let xf = kd
        .lu()
        .solve(&DVector::from_vec(full.rhs.clone()))
        .ok_or_else(|| crate::Error::Singular("full system".into()))?;
    let np = cs.n_pressure();
    let mut kc = DMatrix::zeros(n + np, n + np);
    kc.view_mut((0, 0), (n, n)).copy_from(&s);
    let b = cs.b.to_dense();
    kc.view_mut((n, 0), (np, n)).copy_from(&b);
    kc.view_mut((0, n), (n, np)).copy_from(&b.transpose());
    let xc = kc
        .lu()
        .solve(&DVector::from_vec(cs.saddle_rhs()))
        .ok_or_else(|| crate::Error::Singular("condensed system".into()))?;
    let y = cs.expand(sys, &xc.as_slice()[..n]);
    let rec = cs.recover_stress(&y);
    let xf = xf.as_slice();
    let blocks = [
        (3.0, &xf[o.velocity..o.pressure], &xc.as_slice()[..n]),
        (4.0, &xf[o.pressure..o.end], &xc.as_slice()[n..]),
        (5.0, &xf[o.sigma..o.omega], rec.sigma.as_slice()),
        (6.0, &xf[o.omega..o.velocity], rec.omega.as_slice()),
    ];
    for (id, a, b) in blocks {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rep.push(vec![id, max_diff(a, b), scale]);
    }
    for r in rep.rows.clone() {
        let tol = if r[0] <= 2.0 { tol_op } else { tol_sol };
        rep.check(
            r[1] <= tol * r[2].max(1.0),
            format!("check {} difference {:.3e} <= {tol:e}", r[0], r[1]),
        );
    }
    Ok(rep)
}

/// Structural properties of Stokes solves on the benchmark problems.
///
/// Columns: problem id (position in `kinds`), scaled max |div u_h|, scaled
/// nt-jump, GMRES monotone flag, smallest Lanczos Ritz value of the ASP
/// on S and on S^∂, and whether the elliptic CG solve finished without
/// detecting negative curvature.
pub fn check_solve_structure(kinds: &[ProblemKind], k: usize, nu: f64, rtol: f64, tol: f64) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new(
        "solve structure",
        &[
            "problem",
            "max_div",
            "nt_jump",
            "monotone",
            "ritz_min_s",
            "ritz_min_sbd",
            "cg_spd",
        ],
    );
    rep.notes
        .push(format!("k = {k}, ν = {nu:e}, GMRES rtol {rtol:e}; problems {kinds:?}"));
    for (i, &kind) in kinds.iter().enumerate() {
        let pr = build_problem(kind, k, 0, nu)?;
        let opts = SolveOptions {
            rtol,
            maxit: 1000,
            ..SolveOptions::default()
        };
        let sol = solve_stokes(&pr.sys, nu, pr.force.as_ref(), &opts)?;
        let mut ritz = [0.0; 2];
        for (j, target) in [Target::FullS, Target::Condensed].into_iter().enumerate() {
            let cs = prepare(&pr.sys, nu, pr.force.as_ref(), target)?;
            let cfg = AspConfig {
                target,
                ..AspConfig::default()
            };
            let pc = AspPreconditioner::new(&pr.sys, &cs, cfg)?;
            ritz[j] = asp_spectrum(&cs, &pc, 40, 1)?.lambda_min.unwrap_or(f64::NAN);
        }
        let cg_ok = solve_elliptic(&pr.sys, nu, pr.force.as_ref(), &opts).is_ok();
        rep.push(vec![
            i as f64,
            sol.checks.max_div,
            sol.checks.nt_jump,
            f64::from(u8::from(sol.checks.monotone && sol.report.converged)),
            ritz[0],
            ritz[1],
            f64::from(u8::from(cg_ok)),
        ]);
    }
    let col = |n: &str| rep.column(n).unwrap_or_default();
    let (div, jump) = (col("max_div"), col("nt_jump"));
    let (mono, cg) = (col("monotone"), col("cg_spd"));
    let ritz: Vec<f64> = col("ritz_min_s").into_iter().chain(col("ritz_min_sbd")).collect();
    rep.check(
        div.iter().all(|v| *v <= tol),
        format!("scaled max |div u_h| <= {tol:e}"),
    );
    rep.check(jump.iter().all(|v| *v <= tol), format!("scaled nt-jump <= {tol:e}"));
    rep.check(
        mono.iter().all(|v| *v == 1.0),
        "GMRES converged with a monotone residual",
    );
    rep.check(
        ritz.iter().all(|v| *v > 0.0),
        "smallest Ritz values positive (S and S∂ SPD)",
    );
    rep.check(cg.iter().all(|v| *v == 1.0), "CG on S without negative curvature");
    Ok(rep)
}

/// Lanczos condition number of the ASP on its own operator for the channel problem.
pub fn asp_condition(k: usize, level: usize, cfg: AspConfig, nu: f64, steps: usize) -> Result<(usize, f64, f64, f64)> {
    let pr = build_problem(ProblemKind::Channel, k, level, nu)?;
    let cs = prepare(&pr.sys, nu, None, cfg.target)?;
    let pc = AspPreconditioner::new(&pr.sys, &cs, cfg)?;
    let rep = asp_spectrum(&cs, &pc, steps, cfg.seed)?;
    let lo = rep.lambda_min.unwrap_or(f64::NAN);
    let hi = rep.lambda_max.unwrap_or(f64::NAN);
    Ok((pr.sys.n_triangles(), lo, hi, hi / lo))
}

/// h-robustness of the preconditioned spectrum over uniform refinements.
pub fn asp_h_robustness(
    k: usize,
    levels: usize,
    cfg: AspConfig,
    nu: f64,
    steps: usize,
    tol: f64,
) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new(
        "ASP h-robustness",
        &["level", "triangles", "lambda_min", "lambda_max", "cond"],
    );
    rep.notes.push(format!(
        "channel, k = {k}, {:?} {:?} ASP, {} Lanczos steps",
        cfg.composition, cfg.target, steps
    ));
    for level in 0..levels {
        let (nt, lo, hi, c) = asp_condition(k, level, cfg, nu, steps)?;
        rep.push(vec![level as f64, nt as f64, lo, hi, c]);
    }
    let cond = rep.column("cond").unwrap_or_default();
    rep.check(
        cond.iter().all(|c| c.is_finite() && *c >= 1.0),
        "condition numbers finite",
    );
    let spread = super::relative_spread(&cond);
    rep.check(spread <= tol, format!("cond level spread {spread:.4} <= {tol}"));
    Ok(rep)
}

/// Growth of the preconditioned condition number in k against c (log k)³,
/// with c the largest ratio cond/(log k)³ over the calibration degrees.
pub fn asp_k_growth(
    ks: &[usize],
    calibrate: &[usize],
    level: usize,
    cfg: AspConfig,
    nu: f64,
    steps: usize,
) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new("ASP k-growth", &["k", "lambda_min", "lambda_max", "cond", "bound"]);
    let mut conds = Vec::new();
    for &k in ks {
        let (_, lo, hi, c) = asp_condition(k, level, cfg, nu, steps)?;
        conds.push((k, lo, hi, c));
    }
    let logk3 = |k: usize| (k as f64).ln().powi(3);
    let c = conds
        .iter()
        .filter(|r| calibrate.contains(&r.0))
        .map(|r| r.3 / logk3(r.0))
        .fold(0.0f64, f64::max);
    for (k, lo, hi, cond) in conds {
        rep.push(vec![k as f64, lo, hi, cond, c * logk3(k)]);
    }
    rep.notes.push(format!(
        "channel level {level}, {:?} {:?} ASP, {steps} Lanczos steps; c = {c:.4} calibrated at k in {calibrate:?}",
        cfg.composition, cfg.target
    ));
    let ok = rep
        .rows
        .iter()
        .all(|r| r[3].is_finite() && r[3] <= r[4] * (1.0 + 1e-12));
    rep.check(ok, "cond(k) <= c (log k)³");
    let kk = rep.column("k").unwrap_or_default();
    rep.fit_exponent = Some(super::loglog_slope(&kk, &rep.column("cond").unwrap_or_default()));
    Ok(rep)
}
