//! Benchmark and manufactured problems.

use crate::assembly::BodyForce;
use crate::error::{Error, Result};
use crate::fespace::{FeSystem, Mat2, Vec2};
use crate::mesh::side::{BOTTOM, LEFT, RIGHT, TOP};
use crate::mesh::{build_structured, classify_boundary, refine_uniform, BoundaryKind, Rect, RegionRule, VectorField};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// [0,4]×[0,1] channel: parabolic inflow on the left, walls, Γ_Ñ outflow on the right.
    Channel,
    /// Unit square, pure Dirichlet, regularized moving lid on top.
    Cavity,
    /// Unit square, pure Dirichlet, smooth trigonometric solution.
    Manufactured,
    /// Unit square, pure Dirichlet, polynomial solution inside the discrete spaces.
    Polynomial,
}

/// Exact velocity, velocity Jacobian (∂_j u_i) and pressure.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>,
    pub grad: Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>,
    pub p: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
}

pub struct Problem {
    pub kind: ProblemKind,
    pub sys: FeSystem,
    pub force: Option<BodyForce>,
    pub exact: Option<ExactSolution>,
}

/// Bivariate polynomial as a list of `(c, a, b)` terms `c x^a y^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2(pub Vec<(f64, i32, i32)>);

impl Poly2 {
    pub fn eval(&self, x: Vec2) -> f64 {
        self.0.iter().map(|&(c, a, b)| c * x[0].powi(a) * x[1].powi(b)).sum()
    }

    pub fn dx(&self) -> Poly2 {
        Poly2(
            self.0
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(c, a, b)| (c * a as f64, a - 1, b))
                .collect(),
        )
    }

    pub fn dy(&self) -> Poly2 {
        Poly2(
            self.0
                .iter()
                .filter(|t| t.2 > 0)
                .map(|&(c, a, b)| (c * b as f64, a, b - 1))
                .collect(),
        )
    }

    pub fn laplace(&self) -> Poly2 {
        let mut t = self.dx().dx().0;
        t.extend(self.dy().dy().0);
        Poly2(t)
    }

    pub fn degree(&self) -> i32 {
        self.0.iter().map(|t| t.1 + t.2).max().unwrap_or(0)
    }
}

/// Stream function of degree k+1 (velocity of degree k) and pressure of degree k−1.
pub fn polynomial_data(k: usize) -> (Poly2, Poly2) {
    let k = k as i32;
    let psi = Poly2(vec![
        (1.0, 2, k - 1),
        (-0.5, k + 1, 0),
        (0.7, 1, k),
        (0.3, 1, 1),
        (-0.4, 0, 2),
    ]);
    let p = Poly2(vec![(1.0, k - 1, 0), (-0.6, 0, k - 1), (0.25, 1, 0)]);
    (psi, p)
}

/// Exact solution and body force for the stream function `psi` and pressure `p`.
pub fn polynomial_solution(psi: &Poly2, p: &Poly2, nu: f64) -> (ExactSolution, BodyForce) {
    let u1 = psi.dy();
    let u2 = Poly2(psi.dx().0.into_iter().map(|(c, a, b)| (-c, a, b)).collect());
    let g = [[u1.dx(), u1.dy()], [u2.dx(), u2.dy()]];
    let (l1, l2) = (u1.laplace(), u2.laplace());
    let (px, py) = (p.dx(), p.dy());
    let (u1c, u2c, pc) = (u1.clone(), u2.clone(), p.clone());
    let exact = ExactSolution {
        u: Arc::new(move |x| [u1c.eval(x), u2c.eval(x)]),
        grad: Arc::new(move |x| [[g[0][0].eval(x), g[0][1].eval(x)], [g[1][0].eval(x), g[1][1].eval(x)]]),
        p: Arc::new(move |x| pc.eval(x)),
    };
    let f: BodyForce = Arc::new(move |x| [-0.5 * nu * l1.eval(x) + px.eval(x), -0.5 * nu * l2.eval(x) + py.eval(x)]);
    (exact, f)
}

/// Smooth divergence-free solution vanishing on the boundary of the unit square.
pub fn trigonometric_solution(nu: f64) -> (ExactSolution, BodyForce) {
    let exact = ExactSolution {
        u: Arc::new(|x| {
            let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
            [
                PI * sx * sx * (2.0 * PI * x[1]).sin(),
                -PI * (2.0 * PI * x[0]).sin() * sy * sy,
            ]
        }),
        grad: Arc::new(|x| {
            let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
            let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
            let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
            [
                [PI * PI * s2x * s2y, 2.0 * PI * PI * sx * sx * c2y],
                [-2.0 * PI * PI * c2x * sy * sy, -PI * PI * s2x * s2y],
            ]
        }),
        p: Arc::new(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()),
    };
    let f: BodyForce = Arc::new(move |x| {
        let p3 = PI * PI * PI;
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        let lap = [2.0 * p3 * s2y * (2.0 * c2x - 1.0), -2.0 * p3 * s2x * (2.0 * c2y - 1.0)];
        let gp = [2.0 * PI * c2x * s2y, 2.0 * PI * s2x * c2y];
        [-0.5 * nu * lap[0] + gp[0], -0.5 * nu * lap[1] + gp[1]]
    });
    (exact, f)
}

/// Peak inflow velocity of the channel.
pub const CHANNEL_U: f64 = 1.0;

/// Poiseuille flow through the channel; also the exact discrete solution for k ≥ 2.
pub fn channel_solution(nu: f64) -> ExactSolution {
    ExactSolution {
        u: Arc::new(|x| [4.0 * CHANNEL_U * x[1] * (1.0 - x[1]), 0.0]),
        grad: Arc::new(|x| [[0.0, 4.0 * CHANNEL_U * (1.0 - 2.0 * x[1])], [0.0, 0.0]]),
        p: Arc::new(move |x| -4.0 * nu * CHANNEL_U * (x[0] - 4.0)),
    }
}

fn refined(nx: usize, ny: usize, rect: Rect, level: usize) -> Result<crate::mesh::Mesh> {
    let mut m = build_structured(nx, ny, rect)?;
    for _ in 0..level {
        m = refine_uniform(&m);
    }
    Ok(m)
}

/// Build a problem at polynomial degree k on the base mesh refined `level` times.
pub fn build_problem(kind: ProblemKind, k: usize, level: usize, nu: f64) -> Result<Problem> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    if !(nu > 0.0) {
        return Err(Error::Config("viscosity must be positive".into()));
    }
    let (mesh, rules, g, force, exact): (_, Vec<RegionRule>, Option<VectorField>, Option<BodyForce>, _) = match kind {
        ProblemKind::Channel => {
            let m = refined(8, 2, Rect::new(0.0, 4.0, 0.0, 1.0), level)?;
            let rules = vec![
                RegionRule::sides(BoundaryKind::Dirichlet, &[BOTTOM, LEFT, TOP]),
                RegionRule::sides(BoundaryKind::TildeNeumann, &[RIGHT]),
            ];
            let ex = channel_solution(nu);
            let g: VectorField = Arc::new(|x: Vec2| {
                if x[0] < 1e-12 {
                    [4.0 * CHANNEL_U * x[1] * (1.0 - x[1]), 0.0]
                } else {
                    [0.0, 0.0]
                }
            });
            (m, rules, Some(g), None, Some(ex))
        }
        ProblemKind::Cavity => {
            let m = refined(4, 4, Rect::unit_square(), level)?;
            let rules = vec![RegionRule::new(BoundaryKind::Dirichlet, |_| true)];
            let g: VectorField = Arc::new(|x: Vec2| {
                if x[1] > 1.0 - 1e-12 {
                    [16.0 * (x[0] * (1.0 - x[0])).powi(2), 0.0]
                } else {
                    [0.0, 0.0]
                }
            });
            (m, rules, Some(g), None, None)
        }
        ProblemKind::Manufactured => {
            let m = refined(4, 4, Rect::unit_square(), level)?;
            let rules = vec![RegionRule::new(BoundaryKind::Dirichlet, |_| true)];
            let (ex, f) = trigonometric_solution(nu);
            (m, rules, None, Some(f), Some(ex))
        }
        ProblemKind::Polynomial => {
            let m = refined(2, 2, Rect::unit_square(), level)?;
            let rules = vec![RegionRule::new(BoundaryKind::Dirichlet, |_| true)];
            let (psi, p) = polynomial_data(k);
            let (ex, f) = polynomial_solution(&psi, &p, nu);
            let u = ex.u.clone();
            let g: VectorField = Arc::new(move |x| u(x));
            (m, rules, Some(g), Some(f), Some(ex))
        }
    };
    let regions = classify_boundary(&mesh, &rules, g)?;
    regions.validate_for_solve()?;
    let sys = FeSystem::new(mesh, regions, k)?;
    Ok(Problem {
        kind,
        sys,
        force,
        exact,
    })
}
