//! Interpolation of given fields into the discrete spaces.

use crate::fespace::{dot, FeSystem, Vec2};
use nalgebra::{DMatrix, DVector};

/// Canonical interpolant over all velocity dofs.
///
/// V edge dofs are the facet normal moments, bubbles complete the element-wise
/// L² projection with the edge part fixed, and V̂ dofs are the L² projection of
/// the tangential component. Polynomials of degree ≤ k are reproduced exactly.
pub fn interpolate_velocity(sys: &FeSystem, u: &dyn Fn(Vec2) -> Vec2) -> Vec<f64> {
    let d = &sys.dofs;
    let k = sys.k;
    let m = &sys.mesh;
    let mut y = vec![0.0; d.n_velocity()];
    let rule = &sys.reference.edge;
    for f in 0..m.num_facets() {
        let [a, b] = m.facets[f];
        let (pa, pb) = (m.vertices[a], m.vertices[b]);
        let len = m.facet_length(f);
        let (t, n) = m.facet_frame(f);
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let ux = u(x);
            let leg = crate::polynomial::shifted_legendre(k, *s);
            for j in 0..=k {
                y[d.v_edge_dof(f, j)] += w * len * dot(&ux, &n) * leg[j];
            }
            for j in 0..k {
                y[d.vhat_dof(f, j)] += w * (2 * j + 1) as f64 * dot(&ux, &t) * leg[j];
            }
        }
    }
    let ne = 3 * d.n_v_edge;
    let nb = d.n_bubbles;
    for tri in 0..m.num_triangles() {
        let tab = sys.tab(tri);
        let nq = tab.nq();
        let mut mass = DMatrix::zeros(nb, nb);
        let mut rhs = DVector::zeros(nb);
        let dofs = d.element_velocity_dofs(m, tri);
        for q in 0..nq {
            let w = tab.w[q];
            let mut r = u(tab.x[q]);
            for i in 0..ne {
                let v = tab.v[i * nq + q];
                r[0] -= y[dofs[i]] * v[0];
                r[1] -= y[dofs[i]] * v[1];
            }
            for a in 0..nb {
                let va = tab.v[(ne + a) * nq + q];
                rhs[a] += w * dot(&r, &va);
                for b in 0..nb {
                    mass[(a, b)] += w * dot(&va, &tab.v[(ne + b) * nq + q]);
                }
            }
        }
        let c = mass.cholesky().expect("bubble mass is SPD").solve(&rhs);
        for a in 0..nb {
            y[dofs[ne + a]] = c[a];
        }
    }
    y
}

/// L² projection of a scalar function onto the first `n` orthonormal functions of element t
/// (the Q and W coefficient convention).
pub fn project_element_scalar(sys: &FeSystem, t: usize, n: usize, s: &dyn Fn(Vec2) -> f64) -> Vec<f64> {
    let r = &sys.reference;
    let geo = crate::fespace::Geometry::new(&sys.mesh, t);
    let mut c = vec![0.0; n];
    for (p, w) in r.vol.points.iter().zip(&r.vol.weights) {
        let v = s(geo.map(*p));
        let psi = r.ortho.eval(*p);
        for i in 0..n {
            c[i] += w * v * psi.val[i];
        }
    }
    c
}

/// Value of the V part of a velocity field at a physical point inside triangle t.
pub fn velocity_at(sys: &FeSystem, t: usize, y: &[f64], x: Vec2) -> Vec2 {
    let geo = crate::fespace::Geometry::new(&sys.mesh, t);
    let xh = geo.inverse_map(x);
    let tb = sys.reference.bdm.tabulate(&[xh]);
    let dofs = sys.dofs.element_velocity_dofs(&sys.mesh, t);
    let tab_sign = sys.tab(t).v_sign;
    let mut out = [0.0; 2];
    for i in 0..sys.dofs.n_v_local() {
        let vh = [tb.val[0][(i, 0)], tb.val[1][(i, 0)]];
        let v = crate::fespace::matvec(&geo.jac, &vh);
        let c = y[dofs[i]] * tab_sign[i] / geo.det;
        out[0] += c * v[0];
        out[1] += c * v[1];
    }
    out
}
