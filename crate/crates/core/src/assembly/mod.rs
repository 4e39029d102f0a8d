//! Element matrices of the mixed-stress saddle system, global assembly with
//! Dirichlet elimination, and the discrete norms.
//!
//! Local velocity unknowns of an element are ordered as the V functions
//! (3(k+1) edge functions, then bubbles) followed by the 3k facet functions.
//! Global velocity indices put the V dofs first and the V̂ dofs after them.
//!
//! The bilinear form is
//! `b(τ, (u, û, ω)) = Σ_T ∫ div τ·u − ∫_∂T τ_nn u_n + ∫ τ:ω − ∫_∂T τ_nt·û`.

mod interp;
mod norms;

pub use interp::{interpolate_velocity, project_element_scalar, velocity_at};

pub use norms::{
    element_eps_gram, element_eps_gram_with, eps_gram, hdg_eps_norm, jump_moments, jump_norm, uh_norms, JumpNormKind,
    JumpNorms, UhNorms,
};

use crate::error::{Error, Result};
use crate::fespace::{dot, frob, matvec, ElementTab, FeSystem, Vec2};
use crate::sparse::{CsrMatrix, Triplets};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

/// Body force f(x).
pub type BodyForce = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// All element matrices of one triangle.
#[derive(Debug, Clone)]
pub struct ElementBlocks {
    pub triangle: usize,
    /// ν^{-1}(σ, τ)
    pub m_ss: DMatrix<f64>,
    /// (σ, η), rows W, columns Σ
    pub b_ws: DMatrix<f64>,
    /// b(σ, (v, v̂, 0)), rows local velocity, columns Σ
    pub b_vs: DMatrix<f64>,
    /// ν/2 (div u, div v) over the local V functions
    pub a_div: DMatrix<f64>,
    /// (div v, q), rows Q, columns local V
    pub b_pu: DMatrix<f64>,
    /// (f, v) over the local V functions
    pub load: DVector<f64>,
    /// Global velocity indices of the local velocity unknowns.
    pub vel_dofs: Vec<usize>,
}

impl ElementBlocks {
    /// Rows of `b_vs` that belong to the V̂ functions.
    pub fn b_us(&self, n_v_local: usize) -> DMatrix<f64> {
        self.b_vs.rows(0, n_v_local).into_owned()
    }

    pub fn b_hs(&self, n_v_local: usize) -> DMatrix<f64> {
        let n = self.b_vs.nrows() - n_v_local;
        self.b_vs.rows(n_v_local, n).into_owned()
    }
}

/// Compute every element block of triangle `t`.
pub fn assemble_element_blocks(sys: &FeSystem, t: usize, nu: f64, f: Option<&BodyForce>) -> ElementBlocks {
    let tab = sys.tab(t);
    element_blocks_from_tab(sys, &tab, t, nu, f)
}

pub(crate) fn element_blocks_from_tab(
    sys: &FeSystem,
    tab: &ElementTab,
    t: usize,
    nu: f64,
    f: Option<&BodyForce>,
) -> ElementBlocks {
    let r = &sys.reference;
    let k = sys.k;
    let nq = tab.nq();
    let nv = r.n_v();
    let ns = r.n_sigma();
    let nw = r.n_omega();
    let np = r.n_q();
    let nvel = nv + 3 * k;

    let mut m_ss = DMatrix::zeros(ns, ns);
    let mut b_ws = DMatrix::zeros(nw, ns);
    let mut b_vs = DMatrix::zeros(nvel, ns);
    let mut a_div = DMatrix::zeros(nv, nv);
    let mut b_pu = DMatrix::zeros(np, nv);
    let mut load = DVector::zeros(nv);

    for q in 0..nq {
        let w = tab.w[q];
        for i in 0..ns {
            let si = &tab.sig[i * nq + q];
            for j in i..ns {
                let v = w * frob(si, &tab.sig[j * nq + q]) / nu;
                m_ss[(i, j)] += v;
            }
            for a in 0..nw {
                b_ws[(a, i)] += w * frob(si, &tab.omega[a * nq + q]);
            }
            let di = &tab.sig_div[i * nq + q];
            for a in 0..nv {
                b_vs[(a, i)] += w * dot(di, &tab.v[a * nq + q]);
            }
        }
        for a in 0..nv {
            let da = tab.v_div[a * nq + q];
            for b in a..nv {
                a_div[(a, b)] += 0.5 * nu * w * da * tab.v_div[b * nq + q];
            }
            for p in 0..np {
                b_pu[(p, a)] += w * da * tab.q[p * nq + q];
            }
        }
        if let Some(f) = f {
            let fx = f(tab.x[q]);
            for a in 0..nv {
                load[a] += w * dot(&fx, &tab.v[a * nq + q]);
            }
        }
    }
    for i in 0..ns {
        for j in 0..i {
            m_ss[(i, j)] = m_ss[(j, i)];
        }
    }
    for a in 0..nv {
        for b in 0..a {
            a_div[(a, b)] = a_div[(b, a)];
        }
    }

    for (e, edge) in tab.edges.iter().enumerate() {
        let ne = edge.nq();
        let n = edge.n;
        for q in 0..ne {
            let w = edge.w[q];
            for i in 0..ns {
                let sn = matvec(&edge.sig[i * ne + q], &n);
                let snn = dot(&sn, &n);
                let snt = dot(&sn, &edge.t);
                for a in 0..nv {
                    let vn = dot(&edge.v[a * ne + q], &n);
                    if vn != 0.0 {
                        b_vs[(a, i)] -= w * snn * vn;
                    }
                }
                for j in 0..k {
                    b_vs[(nv + e * k + j, i)] -= w * snt * edge.vhat[j * ne + q];
                }
            }
        }
    }

    ElementBlocks {
        triangle: t,
        m_ss,
        b_ws,
        b_vs,
        a_div,
        b_pu,
        load,
        vel_dofs: sys.dofs.element_velocity_dofs(&sys.mesh, t),
    }
}

/// Element blocks of every triangle, computed in parallel and returned in element order.
pub fn assemble_all_blocks(sys: &FeSystem, nu: f64, f: Option<&BodyForce>) -> Vec<ElementBlocks> {
    (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| assemble_element_blocks(sys, t, nu, f))
        .collect()
}

/// Prescribed values of all velocity dofs: Dirichlet data on constrained dofs, zero elsewhere.
///
/// Normal dofs take the moments `∫_F g·n_F P_j(2s−1) ds`; tangential facet dofs
/// take the L² projection of `g·t_F` onto P^{k−1}(F).
pub fn dirichlet_lifting(sys: &FeSystem) -> Vec<f64> {
    let d = &sys.dofs;
    let mut g = vec![0.0; d.n_velocity()];
    let Some(val) = sys.regions.dirichlet_value.as_ref() else {
        return g;
    };
    let k = sys.k;
    let rule = &sys.reference.edge;
    for &f in &sys.regions.dirichlet_facets {
        let [a, b] = sys.mesh.facets[f];
        let (pa, pb) = (sys.mesh.vertices[a], sys.mesh.vertices[b]);
        let len = sys.mesh.facet_length(f);
        let (t, n) = sys.mesh.facet_frame(f);
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let gx = val(x);
            let (gn, gt) = (dot(&gx, &n), dot(&gx, &t));
            let leg = crate::polynomial::shifted_legendre(k, *s);
            for j in 0..=k {
                g[d.v_edge_dof(f, j)] += w * len * gn * leg[j];
            }
            for j in 0..k {
                g[d.vhat_dof(f, j)] += w * (2 * j + 1) as f64 * gt * leg[j];
            }
        }
    }
    g
}

/// Block offsets of the full system: σ, ω, velocity (free, layout order), p, end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FullOffsets {
    pub sigma: usize,
    pub omega: usize,
    pub velocity: usize,
    pub pressure: usize,
    pub end: usize,
}

/// A globally assembled saddle system with Dirichlet dofs eliminated.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub offsets: FullOffsets,
    /// Values of all velocity dofs used for the lifting.
    pub lifting: Vec<f64>,
}

fn assemble_saddle(sys: &FeSystem, blocks: &[ElementBlocks], with_pressure: bool) -> Result<AssembledSystem> {
    let d = &sys.dofs;
    if blocks.len() != d.n_triangles {
        return Err(Error::Dimension("element blocks do not match the dof map".into()));
    }
    let ns = d.n_sigma_local;
    let nw = d.n_omega_local;
    let np = d.n_q_local;
    let nv = d.n_v_local();
    let lay = &d.layout;
    let o_s = 0;
    let o_w = d.n_sigma();
    let o_u = o_w + d.n_omega();
    let o_p = o_u + lay.len();
    let end = if with_pressure { o_p + d.n_q() } else { o_p };
    let g = dirichlet_lifting(sys);
    let mut trip = Triplets::new(end, end);
    let mut rhs = vec![0.0; end];
    for (t, eb) in blocks.iter().enumerate() {
        if eb.vel_dofs.len() != d.n_vel_local() || eb.m_ss.nrows() != ns {
            return Err(Error::Dimension("element blocks built for another dof map".into()));
        }
        let sg = |i: usize| o_s + t * ns + i;
        for i in 0..ns {
            for j in 0..ns {
                trip.push(sg(i), sg(j), -eb.m_ss[(i, j)]);
            }
            for a in 0..nw {
                let v = eb.b_ws[(a, i)];
                trip.push(o_w + t * nw + a, sg(i), v);
                trip.push(sg(i), o_w + t * nw + a, v);
            }
        }
        for (a, &ga) in eb.vel_dofs.iter().enumerate() {
            let row = lay.sys[ga];
            for i in 0..ns {
                let v = eb.b_vs[(a, i)];
                match row {
                    Some(ra) => {
                        trip.push(o_u + ra, sg(i), v);
                        trip.push(sg(i), o_u + ra, v);
                    }
                    None => rhs[sg(i)] -= v * g[ga],
                }
            }
        }
        for a in 0..nv {
            let ga = eb.vel_dofs[a];
            let Some(ra) = lay.sys[ga] else { continue };
            rhs[o_u + ra] += eb.load[a];
            for b in 0..nv {
                let gb = eb.vel_dofs[b];
                match lay.sys[gb] {
                    Some(rb) => trip.push(o_u + ra, o_u + rb, eb.a_div[(a, b)]),
                    None => rhs[o_u + ra] -= eb.a_div[(a, b)] * g[gb],
                }
            }
        }
        if with_pressure {
            for p in 0..np {
                let rp = o_p + t * np + p;
                for a in 0..nv {
                    let ga = eb.vel_dofs[a];
                    let v = eb.b_pu[(p, a)];
                    match lay.sys[ga] {
                        Some(ra) => {
                            trip.push(rp, o_u + ra, v);
                            trip.push(o_u + ra, rp, v);
                        }
                        None => rhs[rp] -= v * g[ga],
                    }
                }
            }
        }
    }
    Ok(AssembledSystem {
        matrix: trip.to_csr(),
        rhs,
        offsets: FullOffsets {
            sigma: o_s,
            omega: o_w,
            velocity: o_u,
            pressure: o_p,
            end,
        },
        lifting: g,
    })
}

/// The full symmetric saddle system in (σ, ω, u/û, p) block order.
pub fn assemble_full_system(sys: &FeSystem, nu: f64, f: Option<&BodyForce>) -> Result<AssembledSystem> {
    let blocks = assemble_all_blocks(sys, nu, f);
    assemble_saddle(sys, &blocks, true)
}

/// Same as [`assemble_full_system`] from precomputed element blocks.
pub fn assemble_full_from_blocks(sys: &FeSystem, blocks: &[ElementBlocks]) -> Result<AssembledSystem> {
    assemble_saddle(sys, blocks, true)
}

/// The elliptic (σ, ω, u/û) system without the pressure row and column.
pub fn assemble_elliptic_system(sys: &FeSystem, nu: f64, f: Option<&BodyForce>) -> Result<AssembledSystem> {
    let blocks = assemble_all_blocks(sys, nu, f);
    assemble_saddle(sys, &blocks, false)
}

/// Global (div v, q) matrix over all V dofs (rows Q, columns global V indices).
pub fn assemble_divergence(sys: &FeSystem, blocks: &[ElementBlocks]) -> CsrMatrix {
    let d = &sys.dofs;
    let np = d.n_q_local;
    let mut trip = Triplets::new(d.n_q(), d.n_velocity());
    for (t, eb) in blocks.iter().enumerate() {
        for p in 0..np {
            for a in 0..d.n_v_local() {
                trip.push(t * np + p, eb.vel_dofs[a], eb.b_pu[(p, a)]);
            }
        }
    }
    trip.to_csr()
}

/// Scatter a free velocity vector (layout order) into all velocity dofs on top of `fixed`.
pub fn expand_velocity(sys: &FeSystem, free: &[f64], fixed: &[f64]) -> Vec<f64> {
    let mut y = fixed.to_vec();
    for (i, &g) in sys.dofs.layout.global.iter().enumerate() {
        y[g] = free[i];
    }
    y
}

/// Restrict a vector over all velocity dofs to the free ones (layout order).
pub fn restrict_velocity(sys: &FeSystem, all: &[f64]) -> Vec<f64> {
    sys.dofs.layout.global.iter().map(|&g| all[g]).collect()
}

/// Pointwise evaluation of a velocity field from its V coefficients.
pub struct VelocityEval<'a> {
    pub tab: &'a ElementTab,
    pub coef: Vec<f64>,
}

impl<'a> VelocityEval<'a> {
    pub fn new(sys: &FeSystem, tab: &'a ElementTab, t: usize, y: &[f64]) -> Self {
        let dofs = sys.dofs.element_velocity_dofs(&sys.mesh, t);
        let nv = sys.dofs.n_v_local();
        VelocityEval {
            tab,
            coef: dofs[..nv].iter().map(|&g| y[g]).collect(),
        }
    }

    pub fn value(&self, q: usize) -> Vec2 {
        let nq = self.tab.nq();
        let mut u = [0.0; 2];
        for (i, c) in self.coef.iter().enumerate() {
            let v = self.tab.v[i * nq + q];
            u[0] += c * v[0];
            u[1] += c * v[1];
        }
        u
    }

    pub fn grad(&self, q: usize) -> [[f64; 2]; 2] {
        let nq = self.tab.nq();
        let mut g = [[0.0; 2]; 2];
        for (i, c) in self.coef.iter().enumerate() {
            let gi = self.tab.v_grad[i * nq + q];
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += c * gi[a][b];
                }
            }
        }
        g
    }

    pub fn div(&self, q: usize) -> f64 {
        let nq = self.tab.nq();
        self.coef
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.tab.v_div[i * nq + q])
            .sum()
    }
}
