//! Discrete norms: the facet jump norm (definition and Legendre formula), the
//! HDG ε-norm with its Gram matrix, and the two U_h norms.

use super::VelocityEval;
use crate::fespace::{dot, reference_edge_point, ElementTab, FeSystem, Mat2};
use crate::sparse::{CsrMatrix, Triplets};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Jump norm squared of a facet polynomial, by both methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpNorms {
    /// Supremum over vector P^k(T) of (u, σ)_F² / ‖σ‖_T².
    pub a: f64,
    /// h^{-1} Σ_j k(k−j+1) ‖(Π^j − Π^{j−1}) u‖_F².
    pub b: f64,
}

/// Squared jump norm of the scalar facet polynomial `u = Σ_j c_j P_j(2s−1)`
/// (facet parameter s) on edge `e` of the element tabulated in `tab`.
///
/// A vector-valued trace along a fixed direction has the same norm as its
/// scalar coefficient, because the supremum decouples by component.
pub fn jump_norm(sys: &FeSystem, tab: &ElementTab, e: usize, coeffs: &[f64]) -> JumpNorms {
    let k = sys.k;
    assert!(coeffs.len() <= k + 1, "facet trace must lie in P^k");
    let h = tab.geo.diam;
    assert!(h > 0.0, "zero element diameter");
    let edge = &tab.edges[e];
    let r = &sys.reference;
    let len = edge.length;
    let b: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| (k * (k - j + 1)) as f64 * c * c * len / (2 * j + 1) as f64)
        .sum::<f64>()
        / h;
    // method A: σ ranges over the orthonormal P^k basis mapped to T; its mass
    // matrix is det(J)·I, so the supremum is Σ g_i² / det(J).
    let nd = r.ortho.dim();
    let mut g = vec![0.0; nd];
    for (q, sh) in r.edge.points.iter().enumerate() {
        let leg = crate::polynomial::shifted_legendre(k, edge.s[q]);
        let u: f64 = coeffs.iter().zip(&leg).map(|(c, p)| c * p).sum();
        let psi = r.ortho.eval(reference_edge_point(e, *sh));
        for i in 0..nd {
            g[i] += edge.w[q] * u * psi.val[i];
        }
    }
    let a = g.iter().map(|x| x * x).sum::<f64>() / tab.geo.det;
    JumpNorms { a, b }
}

/// Facet Legendre moments of the tangential jump: row `e * k + m` holds
/// `∫_F (φ_i − φ̂_i)·t_F P_m(2s_F−1) ds` over the local velocity unknowns i.
pub fn jump_moments(sys: &FeSystem, tab: &ElementTab) -> DMatrix<f64> {
    let k = sys.k;
    let nv = sys.dofs.n_v_local();
    let mut c = DMatrix::zeros(3 * k, nv + 3 * k);
    for (e, edge) in tab.edges.iter().enumerate() {
        let ne = edge.nq();
        for q in 0..ne {
            let w = edge.w[q];
            for m in 0..k {
                let pm = w * edge.vhat[m * ne + q];
                for i in 0..nv {
                    c[(e * k + m, i)] += pm * dot(&edge.v[i * ne + q], &edge.t);
                }
                for j in 0..k {
                    c[(e * k + m, nv + e * k + j)] -= pm * edge.vhat[j * ne + q];
                }
            }
        }
    }
    c
}

fn sym(g: &Mat2) -> Mat2 {
    let o = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], o], [o, g[1][1]]]
}

/// Which of the two equivalent expressions of the jump norm to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpNormKind {
    /// The supremum over P^k(T) test functions.
    Definition,
    /// The Legendre-weighted formula.
    Legendre,
}

/// Element Gram matrix of the squared ε-norm over the local velocity unknowns,
/// with the jump terms from the supremum definition.
pub fn element_eps_gram(sys: &FeSystem, tab: &ElementTab) -> DMatrix<f64> {
    element_eps_gram_with(sys, tab, JumpNormKind::Definition)
}

pub fn element_eps_gram_with(sys: &FeSystem, tab: &ElementTab, kind: JumpNormKind) -> DMatrix<f64> {
    let k = sys.k;
    let nv = sys.dofs.n_v_local();
    let n = nv + 3 * k;
    let nq = tab.nq();
    let mut g = DMatrix::zeros(n, n);
    for q in 0..nq {
        let w = tab.w[q];
        let eps: Vec<Mat2> = (0..nv).map(|i| sym(&tab.v_grad[i * nq + q])).collect();
        for i in 0..nv {
            for j in i..nv {
                g[(i, j)] += w * crate::fespace::frob(&eps[i], &eps[j]);
            }
        }
    }
    for i in 0..nv {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    let c = jump_moments(sys, tab);
    let h = tab.geo.diam;
    let r = &sys.reference;
    let nd = r.ortho.dim();
    for (e, edge) in tab.edges.iter().enumerate() {
        match kind {
            JumpNormKind::Legendre => {
                for m in 0..k {
                    let wt = (k * (k - m + 1) * (2 * m + 1)) as f64 / (edge.length * h);
                    let row = c.row(e * k + m);
                    g.ger(wt, &row.transpose(), &row.transpose(), 1.0);
                }
            }
            JumpNormKind::Definition => {
                // (j, ψ_i)_F for the Legendre coefficients (2m+1)/|F| μ_m of the jump
                let mut a = DMatrix::<f64>::zeros(nd, k);
                for (q, sh) in r.edge.points.iter().enumerate() {
                    let leg = crate::polynomial::shifted_legendre(k, edge.s[q]);
                    let psi = r.ortho.eval(reference_edge_point(e, *sh));
                    for i in 0..nd {
                        for m in 0..k {
                            a[(i, m)] += edge.w[q] * leg[m] * psi.val[i] * (2 * m + 1) as f64 / edge.length;
                        }
                    }
                }
                let am = a * c.rows(e * k, k);
                g += am.transpose() * &am / tab.geo.det;
            }
        }
    }
    g
}

/// Global ε-norm Gram matrix over all velocity dofs (V then V̂).
pub fn eps_gram(sys: &FeSystem) -> CsrMatrix {
    let n = sys.dofs.n_velocity();
    let locals: Vec<(Vec<usize>, DMatrix<f64>)> = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            (
                sys.dofs.element_velocity_dofs(&sys.mesh, t),
                element_eps_gram(sys, &tab),
            )
        })
        .collect();
    let mut trip = Triplets::new(n, n);
    for (dofs, g) in &locals {
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                trip.push(ga, gb, g[(a, b)]);
            }
        }
    }
    trip.to_csr()
}

/// ‖(u, û)‖_{ε,h} of a velocity vector over all dofs.
pub fn hdg_eps_norm(sys: &FeSystem, y: &[f64]) -> f64 {
    let s: f64 = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            let g = element_eps_gram(sys, &tab);
            let x = nalgebra::DVector::from_iterator(
                g.nrows(),
                sys.dofs.element_velocity_dofs(&sys.mesh, t).iter().map(|&d| y[d]),
            );
            x.dot(&(&g * &x))
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s.max(0.0).sqrt()
}

/// The U_h norm, the U_h seminorm and ‖div u‖.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UhNorms {
    pub uh: f64,
    pub star: f64,
    pub div: f64,
}

/// Evaluate both U_h norms of (u, û, ω); `omega` holds W coefficients element by element.
pub fn uh_norms(sys: &FeSystem, y: &[f64], omega: &[f64]) -> UhNorms {
    let nw = sys.dofs.n_omega_local;
    let k = sys.k;
    let parts: Vec<[f64; 3]> = (0..sys.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = sys.tab(t);
            let ev = VelocityEval::new(sys, &tab, t, y);
            let nq = tab.nq();
            let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
            for q in 0..nq {
                let g = ev.grad(q);
                let mut om = [[0.0; 2]; 2];
                for i in 0..nw {
                    let c = omega[t * nw + i];
                    let o = tab.omega[i * nq + q];
                    for r in 0..2 {
                        for s in 0..2 {
                            om[r][s] += c * o[r][s];
                        }
                    }
                }
                let e = sym(&g);
                let skew = [[0.0, 0.5 * (g[0][1] - g[1][0])], [0.5 * (g[1][0] - g[0][1]), 0.0]];
                let mut r1 = 0.0;
                let mut dm = [[0.0; 2]; 2];
                for r in 0..2 {
                    for s in 0..2 {
                        r1 += (skew[r][s] - om[r][s]).powi(2);
                        dm[r][s] = g[r][s] - om[r][s];
                    }
                }
                let tr = 0.5 * (dm[0][0] + dm[1][1]);
                dm[0][0] -= tr;
                dm[1][1] -= tr;
                let w = tab.w[q];
                a += w * (crate::fespace::frob(&e, &e) + r1);
                b += w * crate::fespace::frob(&dm, &dm);
                d += w * (g[0][0] + g[1][1]).powi(2);
            }
            let c = jump_moments(sys, &tab);
            let x = nalgebra::DVector::from_iterator(
                c.ncols(),
                sys.dofs.element_velocity_dofs(&sys.mesh, t).iter().map(|&dd| y[dd]),
            );
            let mom = &c * x;
            let h = tab.geo.diam;
            let mut jmp = 0.0;
            for (e, edge) in tab.edges.iter().enumerate() {
                for m in 0..k {
                    let am = (2 * m + 1) as f64 / edge.length * mom[e * k + m];
                    jmp += am * am * edge.length / (2 * m + 1) as f64;
                }
            }
            [a + jmp / h, b + jmp / h, d]
        })
        .collect();
    let s = parts
        .iter()
        .fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
    UhNorms {
        uh: s[0].sqrt(),
        star: s[1].sqrt(),
        div: s[2].sqrt(),
    }
}
