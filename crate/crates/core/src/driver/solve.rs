//! The Stokes and elliptic solve pipelines: condensation, auxiliary-space
//! preconditioning, Krylov iteration, recovery and structural post-checks.

use super::problems::ExactSolution;
use crate::assembly::{BodyForce, VelocityEval};
use crate::condensation::{build_condensed, double_schur, CondensedSystem, RecoveredFields};
use crate::error::{Error, Result};
use crate::fespace::{dot, frob, matvec, ElementTab, FeSystem, Mat2};
use crate::krylov::{cg, gmres, lanczos_spectrum, KrylovReport};
use crate::preconditioners::{
    AspConfig, AspPreconditioner, Preconditioner, PressureMass, PressureMode, SaddlePreconditioner, Target,
};
use rayon::prelude::*;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub asp: AspConfig,
    pub rtol: f64,
    pub maxit: usize,
    /// Lanczos steps for the spectral estimate of the preconditioned velocity operator.
    pub lanczos_steps: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            asp: AspConfig::default(),
            rtol: 1e-6,
            maxit: 500,
            lanczos_steps: None,
        }
    }
}

/// Wall-clock seconds: setup (assembly, condensation, preconditioner), Krylov solve, total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub total: f64,
    pub setup: f64,
    pub solve: f64,
}

/// Structural checks on a computed solution, both scaled to be dimensionless.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PostChecks {
    /// max |div u_h| over volume quadrature points divided by max |∇u_h|.
    pub max_div: f64,
    /// max |⟦σ_nt⟧| over interior facet quadrature points divided by max |σ_h|.
    pub nt_jump: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// All velocity dofs (V then V̂), constrained ones from the Dirichlet data.
    pub velocity: Vec<f64>,
    /// Physical pressure coefficients in the orthonormal Q basis.
    pub pressure: Vec<f64>,
    pub stress: RecoveredFields,
    pub report: KrylovReport,
    pub timings: Timings,
    pub checks: PostChecks,
    /// Free dofs of the condensed velocity-pressure system.
    pub n_dofs: usize,
}

/// Condense and, for the condensed target, form the double Schur complement.
pub fn prepare(sys: &FeSystem, nu: f64, f: Option<&BodyForce>, target: Target) -> Result<CondensedSystem> {
    let mut cs = build_condensed(sys, nu, f)?;
    if target == Target::Condensed {
        double_schur(sys, &mut cs)?;
    }
    Ok(cs)
}

/// Lanczos estimate for the ASP on its own operator (S or S^∂).
pub fn asp_spectrum(cs: &CondensedSystem, pc: &AspPreconditioner, steps: usize, seed: u64) -> Result<KrylovReport> {
    let a = match pc.config.target {
        Target::FullS => &cs.s,
        Target::Condensed => &cs.double()?.s_bd,
    };
    let (rep, _) = lanczos_spectrum(
        &|x: &[f64]| a.matvec(x),
        &|r: &[f64]| pc.apply_inner(r),
        a.nrows,
        steps,
        seed,
    )?;
    Ok(rep)
}

fn attach_spectrum(rep: &mut KrylovReport, spec: &KrylovReport) {
    rep.lambda_min = spec.lambda_min;
    rep.lambda_max = spec.lambda_max;
    rep.cond = spec.cond;
    rep.lanczos_steps = spec.lanczos_steps;
}

/// Solve the Stokes problem with block-preconditioned GMRES.
///
/// The pressure unknown of the saddle system is the negative physical
/// pressure; the returned `pressure` carries the physical sign.
pub fn solve_stokes(sys: &FeSystem, nu: f64, f: Option<&BodyForce>, opts: &SolveOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let cs = prepare(sys, nu, f, opts.asp.target)?;
    let asp = AspPreconditioner::new(sys, &cs, opts.asp)?;
    let mass = PressureMass::new(&cs);
    let mode = cs.mean_zero_pressure.then(|| PressureMode::new(sys, &cs));
    let pc = SaddlePreconditioner {
        velocity: &asp,
        pressure: &mass,
        b: &cs.b,
        mode: mode.clone(),
    };
    let setup = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let rhs = cs.saddle_rhs();
    let (x, mut report) = gmres(
        &|x: &[f64]| cs.apply_saddle(x),
        &|r: &[f64]| pc.apply(r),
        &rhs,
        opts.rtol,
        opts.maxit,
    )?;
    let solve = t1.elapsed().as_secs_f64();
    if let Some(steps) = opts.lanczos_steps {
        let spec = asp_spectrum(&cs, &asp, steps, opts.asp.seed)?;
        attach_spectrum(&mut report, &spec);
    }
    let n = cs.n_velocity();
    let velocity = cs.expand(sys, &x[..n]);
    let mut p = x[n..].to_vec();
    if let Some(m) = &mode {
        m.project(&mut p);
    }
    let pressure: Vec<f64> = p.iter().map(|v| -v).collect();
    let stress = cs.recover_stress(&velocity);
    let checks = PostChecks {
        max_div: max_divergence(sys, &velocity),
        nt_jump: max_nt_jump(sys, &stress.sigma),
        monotone: report.is_monotone(),
    };
    Ok(Solution {
        velocity,
        pressure,
        stress,
        report,
        timings: Timings {
            total: t0.elapsed().as_secs_f64(),
            setup,
            solve,
        },
        checks,
        n_dofs: sys.dofs.n_free_condensed(),
    })
}

/// Solve the elliptic problem S u = f with ASP-preconditioned CG.
///
/// Negative curvature in CG is reported as an error, so a successful return
/// certifies that S was positive definite on the Krylov space.
pub fn solve_elliptic(sys: &FeSystem, nu: f64, f: Option<&BodyForce>, opts: &SolveOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let cs = prepare(sys, nu, f, opts.asp.target)?;
    let asp = AspPreconditioner::new(sys, &cs, opts.asp)?;
    let setup = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (x, mut report) = cg(
        &|x: &[f64]| cs.s.matvec(x),
        &|r: &[f64]| asp.apply(r),
        &cs.rhs_u,
        opts.rtol,
        opts.maxit,
    )?;
    let solve = t1.elapsed().as_secs_f64();
    if let Some(steps) = opts.lanczos_steps {
        let spec = asp_spectrum(&cs, &asp, steps, opts.asp.seed)?;
        attach_spectrum(&mut report, &spec);
    }
    let velocity = cs.expand(sys, &x);
    let stress = cs.recover_stress(&velocity);
    let checks = PostChecks {
        max_div: max_divergence(sys, &velocity),
        nt_jump: max_nt_jump(sys, &stress.sigma),
        monotone: report.is_monotone(),
    };
    Ok(Solution {
        velocity,
        pressure: vec![0.0; sys.dofs.n_q()],
        stress,
        report,
        timings: Timings {
            total: t0.elapsed().as_secs_f64(),
            setup,
            solve,
        },
        checks,
        n_dofs: sys.dofs.layout.len(),
    })
}

/// Largest pointwise divergence relative to the largest velocity gradient.
pub fn max_divergence(sys: &FeSystem, y: &[f64]) -> f64 {
    let (div, grad) = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            let ev = VelocityEval::new(sys, &tab, t, y);
            (0..tab.nq()).fold((0.0f64, 0.0f64), |(d, g), q| {
                let gq = ev.grad(q);
                (d.max(ev.div(q).abs()), g.max(frob(&gq, &gq).sqrt()))
            })
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if grad == 0.0 {
        div
    } else {
        div / grad
    }
}

fn sigma_at_edge(tab: &ElementTab, e: usize, coef: &[f64], q: usize) -> Mat2 {
    let edge = &tab.edges[e];
    let ne = edge.nq();
    let mut s = [[0.0; 2]; 2];
    for (i, c) in coef.iter().enumerate() {
        let si = edge.sig[i * ne + q];
        for a in 0..2 {
            for b in 0..2 {
                s[a][b] += c * si[a][b];
            }
        }
    }
    s
}

/// Largest normal-tangential jump of σ_h across interior facets relative to max |σ_h|.
pub fn max_nt_jump(sys: &FeSystem, sigma: &[f64]) -> f64 {
    let m = &sys.mesh;
    let ns = sys.dofs.n_sigma_local;
    let mut trace: Vec<Vec<(usize, Vec<(crate::fespace::Vec2, Mat2)>)>> = vec![Vec::new(); m.num_facets()];
    let per_element: Vec<Vec<(usize, Vec<(crate::fespace::Vec2, Mat2)>)>> = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            let coef = &sigma[t * ns..(t + 1) * ns];
            (0..3)
                .map(|e| {
                    let edge = &tab.edges[e];
                    let pts = (0..edge.nq())
                        .map(|q| (edge.x[q], sigma_at_edge(&tab, e, coef, q)))
                        .collect();
                    (edge.facet, pts)
                })
                .collect()
        })
        .collect();
    for (t, list) in per_element.into_iter().enumerate() {
        for (f, pts) in list {
            trace[f].push((t, pts));
        }
    }
    let mut jump = 0.0f64;
    let mut scale = 0.0f64;
    for (f, sides) in trace.iter().enumerate() {
        for (_, pts) in sides {
            for (_, s) in pts {
                scale = scale.max(frob(s, s).sqrt());
            }
        }
        if sides.len() != 2 {
            continue;
        }
        let (tf, nf) = m.facet_frame(f);
        let nt = |s: &Mat2| dot(&tf, &matvec(s, &nf));
        for (x, s) in &sides[0].1 {
            let (_, s2) = sides[1]
                .1
                .iter()
                .min_by(|a, b| dist2(&a.0, x).total_cmp(&dist2(&b.0, x)))
                .expect("edge has quadrature points");
            jump = jump.max((nt(s) - nt(s2)).abs());
        }
    }
    if scale == 0.0 {
        jump
    } else {
        jump / scale
    }
}

fn dist2(a: &crate::fespace::Vec2, b: &crate::fespace::Vec2) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Errors against an exact solution: L² velocity, broken ε(u), pressure (both
/// mean-free when the pressure is only determined up to a constant) and the
/// stress `σ_h + ν dev ε(u)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    pub velocity: f64,
    pub eps: f64,
    pub pressure: f64,
    pub stress: f64,
}

fn pressure_at(tab: &ElementTab, pc: &[f64], q: usize) -> f64 {
    let nq = tab.nq();
    pc.iter().enumerate().map(|(i, c)| c * tab.q[i * nq + q]).sum()
}

pub fn error_norms(sys: &FeSystem, nu: f64, sol: &Solution, exact: &ExactSolution) -> ErrorNorms {
    let ns = sys.dofs.n_sigma_local;
    let np = sys.dofs.n_q_local;
    let shift = if sys.regions.mean_zero_pressure {
        let (int, area) = (0..sys.n_triangles())
            .into_par_iter()
            .map(|t| {
                let tab = sys.tab(t);
                let pc = &sol.pressure[t * np..(t + 1) * np];
                (0..tab.nq()).fold((0.0, 0.0), |(i, a), q| {
                    let dp = (exact.p)(tab.x[q]) - pressure_at(&tab, pc, q);
                    (i + tab.w[q] * dp, a + tab.w[q])
                })
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        int / area
    } else {
        0.0
    };
    let parts: Vec<[f64; 4]> = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            let ev = VelocityEval::new(sys, &tab, t, &sol.velocity);
            let nq = tab.nq();
            let sc = &sol.stress.sigma[t * ns..(t + 1) * ns];
            let pc = &sol.pressure[t * np..(t + 1) * np];
            let mut acc = [0.0; 4];
            for q in 0..nq {
                let x = tab.x[q];
                let w = tab.w[q];
                let (u, g) = ((exact.u)(x), (exact.grad)(x));
                let uh = ev.value(q);
                acc[0] += w * ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2));
                let gh = ev.grad(q);
                let d = [
                    [g[0][0] - gh[0][0], g[0][1] - gh[0][1]],
                    [g[1][0] - gh[1][0], g[1][1] - gh[1][1]],
                ];
                let e = sym(&d);
                acc[1] += w * frob(&e, &e);
                let dp = (exact.p)(x) - pressure_at(&tab, pc, q) - shift;
                acc[2] += w * dp * dp;
                let mut sh = [[0.0; 2]; 2];
                for (i, c) in sc.iter().enumerate() {
                    let si = tab.sig[i * nq + q];
                    for a in 0..2 {
                        for b in 0..2 {
                            sh[a][b] += c * si[a][b];
                        }
                    }
                }
                let ee = dev(&sym(&g));
                let r = [
                    [sh[0][0] + nu * ee[0][0], sh[0][1] + nu * ee[0][1]],
                    [sh[1][0] + nu * ee[1][0], sh[1][1] + nu * ee[1][1]],
                ];
                acc[3] += w * frob(&r, &r);
            }
            acc
        })
        .collect();
    let mut s = [0.0; 4];
    for a in parts {
        for i in 0..4 {
            s[i] += a[i];
        }
    }
    ErrorNorms {
        velocity: s[0].sqrt(),
        eps: s[1].sqrt(),
        pressure: s[2].sqrt(),
        stress: s[3].sqrt(),
    }
}

fn sym(g: &Mat2) -> Mat2 {
    let o = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], o], [o, g[1][1]]]
}

fn dev(a: &Mat2) -> Mat2 {
    let h = 0.5 * (a[0][0] + a[1][1]);
    [[a[0][0] - h, a[0][1]], [a[1][0], a[1][1] - h]]
}

/// Reject a non-converged solve.
pub fn require_converged(sol: &Solution) -> Result<()> {
    if sol.report.converged {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "Krylov solver did not converge in {} iterations",
            sol.report.iterations
        )))
    }
}
