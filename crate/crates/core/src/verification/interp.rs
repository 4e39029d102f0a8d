//! The nodal-averaging interpolant into continuous P1 and its approximation bound
//! for broken (element-wise) polynomial fields.

use super::{relative_spread, ConstantReport};
use crate::assembly::VelocityEval;
use crate::error::{Error, Result};
use crate::fespace::{FeSystem, Geometry, Vec2};
use crate::linalg::{generalized_eigenvalues, orthogonal_complement, psd_kernel};
use crate::mesh::{refine_uniform, Mesh};
use crate::polynomial::{OrthoBasis, ScalarEval};
use crate::quadrature::{edge_rule, triangle_rule};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

const REF_VERTICES: [Vec2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Vector fields that are polynomials of degree k on each element, with
/// coefficients `t * 2n + c * n + i` over the reference orthonormal basis.
#[derive(Debug, Clone)]
pub struct BrokenSpace {
    pub mesh: Mesh,
    pub k: usize,
    pub ortho: OrthoBasis,
    geos: Vec<Geometry>,
    /// Incident (triangle, local vertex) pairs of every vertex.
    patches: Vec<Vec<(usize, usize)>>,
}

impl BrokenSpace {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let geos = (0..mesh.num_triangles()).map(|t| Geometry::new(mesh, t)).collect();
        let mut patches = vec![Vec::new(); mesh.num_vertices()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (lv, &v) in tri.iter().enumerate() {
                patches[v].push((t, lv));
            }
        }
        BrokenSpace {
            mesh: mesh.clone(),
            k,
            ortho: OrthoBasis::new(k),
            geos,
            patches,
        }
    }

    /// Scalar dimension of P^k.
    pub fn n(&self) -> usize {
        self.ortho.dim()
    }

    pub fn dim(&self) -> usize {
        2 * self.n() * self.mesh.num_triangles()
    }

    pub fn value(&self, u: &[f64], t: usize, x: Vec2) -> Vec2 {
        let n = self.n();
        let psi = self.ortho.eval(self.geos[t].inverse_map(x));
        let c = &u[t * 2 * n..(t + 1) * 2 * n];
        let v0: f64 = (0..n).map(|i| c[i] * psi.val[i]).sum();
        let v1: f64 = (0..n).map(|i| c[n + i] * psi.val[i]).sum();
        [v0, v1]
    }

    /// L²(T) projection of a vector function, element by element.
    pub fn project(&self, f: &dyn Fn(Vec2) -> Vec2) -> Vec<f64> {
        let n = self.n();
        let rule = triangle_rule(2 * self.k + 2);
        let mut u = vec![0.0; self.dim()];
        for (t, geo) in self.geos.iter().enumerate() {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let v = f(geo.map(*p));
                let psi = self.ortho.eval(*p);
                for i in 0..n {
                    u[t * 2 * n + i] += w * v[0] * psi.val[i];
                    u[t * 2 * n + n + i] += w * v[1] * psi.val[i];
                }
            }
        }
        u
    }

    /// Physical gradients of the orthonormal functions at a reference point.
    fn grads(&self, t: usize, e: &ScalarEval) -> Vec<Vec2> {
        let ji = &self.geos[t].jinv;
        (0..self.n())
            .map(|i| {
                [
                    ji[0][0] * e.dx[i] + ji[1][0] * e.dy[i],
                    ji[0][1] * e.dx[i] + ji[1][1] * e.dy[i],
                ]
            })
            .collect()
    }

    /// Sparse row of the averaging map for vertex v and component c.
    fn average_row(&self, v: usize, c: usize, zero: Option<&[bool]>) -> Vec<(usize, f64)> {
        if zero.is_some_and(|z| z[v]) {
            return Vec::new();
        }
        let n = self.n();
        let patch = &self.patches[v];
        let scale = 1.0 / patch.len() as f64;
        let mut row = Vec::with_capacity(patch.len() * n);
        for &(t, lv) in patch {
            let psi = self.ortho.eval(REF_VERTICES[lv]);
            for i in 0..n {
                row.push((t * 2 * n + c * n + i, scale * psi.val[i]));
            }
        }
        row
    }
}

/// Vertex values of the continuous P1 interpolant: at each vertex, the average
/// of the traces of all incident elements. Vertices flagged in `zero` get 0.
pub fn interp_nodal_average(space: &BrokenSpace, u: &[f64], zero: Option<&[bool]>) -> Vec<Vec2> {
    (0..space.mesh.num_vertices())
        .map(|v| {
            let mut out = [0.0; 2];
            for (c, o) in out.iter_mut().enumerate() {
                *o = space.average_row(v, c, zero).iter().map(|(j, w)| w * u[*j]).sum();
            }
            out
        })
        .collect()
}

/// Broken representation of the V part of an HDG velocity (all velocity dofs).
pub fn broken_from_velocity(sys: &FeSystem, space: &BrokenSpace, y: &[f64]) -> Vec<f64> {
    let n = space.n();
    let r = &sys.reference;
    let mut u = vec![0.0; space.dim()];
    for t in 0..sys.n_triangles() {
        let tab = sys.tab(t);
        let ev = VelocityEval::new(sys, &tab, t, y);
        for (q, (p, w)) in r.vol.points.iter().zip(&r.vol.weights).enumerate() {
            let v = ev.value(q);
            let psi = space.ortho.eval(*p);
            for i in 0..n {
                u[t * 2 * n + i] += w * v[0] * psi.val[i];
                u[t * 2 * n + n + i] += w * v[1] * psi.val[i];
            }
        }
    }
    u
}

/// Dense Gram matrices of both sides of the interpolation bound:
/// `Σ_T h_T^{-2}‖u − 𝓘u‖² + ‖∇(u − 𝓘u)‖²` and
/// `Σ_T ‖ε(u)‖² + Σ_F |F|^{-1}‖Π^R_F⟦u⟧‖²` over interior facets.
///
/// Π^R_F is the L²(F) projection onto the traces of rigid modes, which on a
/// straight facet are the constant vectors plus the linear normal field.
pub fn interp_forms(space: &BrokenSpace, zero: Option<&[bool]>) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = &space.mesh;
    let n = space.n();
    let k = space.k;
    let nn = space.dim();
    let rule = triangle_rule(2 * k);
    let mut lhs = DMatrix::zeros(nn, nn);
    let mut rhs = DMatrix::zeros(nn, nn);
    let lam_hat = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    for t in 0..m.num_triangles() {
        let geo = &space.geos[t];
        let h2 = geo.diam * geo.diam;
        let nl = 2 * n + 6;
        let lam_g: Vec<Vec2> = lam_hat
            .iter()
            .map(|v| {
                [
                    geo.jinv[0][0] * v[0] + geo.jinv[1][0] * v[1],
                    geo.jinv[0][1] * v[0] + geo.jinv[1][1] * v[1],
                ]
            })
            .collect();
        let mut kt = DMatrix::zeros(nl, nl);
        let mut et = DMatrix::zeros(2 * n, 2 * n);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let w = w * geo.det;
            let e = space.ortho.eval(*p);
            let g = space.grads(t, &e);
            let lam = [1.0 - p[0] - p[1], p[0], p[1]];
            for c in 0..2 {
                // value and gradient rows of component c of u − 𝓘u
                let mut val = DVector::zeros(nl);
                let mut gx = DVector::zeros(nl);
                let mut gy = DVector::zeros(nl);
                for i in 0..n {
                    val[c * n + i] = e.val[i];
                    gx[c * n + i] = g[i][0];
                    gy[c * n + i] = g[i][1];
                }
                for j in 0..3 {
                    val[2 * n + 2 * j + c] = -lam[j];
                    gx[2 * n + 2 * j + c] = -lam_g[j][0];
                    gy[2 * n + 2 * j + c] = -lam_g[j][1];
                }
                kt.ger(w / h2, &val, &val, 1.0);
                kt.ger(w, &gx, &gx, 1.0);
                kt.ger(w, &gy, &gy, 1.0);
            }
            // ε(ψ_i e_c) has entries ∂_c ψ on the diagonal and ∂_{1−c}ψ / 2 off it
            let mut e11 = DVector::zeros(2 * n);
            let mut e22 = DVector::zeros(2 * n);
            let mut e12 = DVector::zeros(2 * n);
            for i in 0..n {
                e11[i] = g[i][0];
                e22[n + i] = g[i][1];
                e12[i] = 0.5 * g[i][1];
                e12[n + i] = 0.5 * g[i][0];
            }
            et.ger(w, &e11, &e11, 1.0);
            et.ger(w, &e22, &e22, 1.0);
            et.ger(2.0 * w, &e12, &e12, 1.0);
        }
        let base = t * 2 * n;
        for a in 0..2 * n {
            for b in 0..2 * n {
                rhs[(base + a, base + b)] += et[(a, b)];
            }
        }
        let tri = m.triangles[t];
        let rows: Vec<Vec<(usize, f64)>> = (0..nl)
            .map(|r| {
                if r < 2 * n {
                    vec![(base + r, 1.0)]
                } else {
                    let j = (r - 2 * n) / 2;
                    space.average_row(tri[j], (r - 2 * n) % 2, zero)
                }
            })
            .collect();
        for a in 0..nl {
            for b in 0..nl {
                let kab = kt[(a, b)];
                if kab == 0.0 {
                    continue;
                }
                for &(ca, va) in &rows[a] {
                    for &(cb, vb) in &rows[b] {
                        lhs[(ca, cb)] += va * kab * vb;
                    }
                }
            }
        }
    }
    let er = edge_rule(2 * k + 2);
    for f in m.interior_facets() {
        let adj = m.facet_adjacency[f];
        let (t1, t2) = (adj.owner, adj.neighbor.expect("interior facet"));
        let [a, b] = m.facets[f];
        let (pa, pb) = (m.vertices[a], m.vertices[b]);
        let len = m.facet_length(f);
        let (_, nf) = m.facet_frame(f);
        let mut r = DMatrix::zeros(3, nn);
        let phi_norm = (len / 12.0).sqrt();
        for (s, w) in er.points.iter().zip(&er.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let w = w * len;
            for (t, sign) in [(t1, 1.0), (t2, -1.0)] {
                let psi = space.ortho.eval(space.geos[t].inverse_map(x));
                for i in 0..n {
                    for c in 0..2 {
                        let col = t * 2 * n + c * n + i;
                        let v = sign * w * psi.val[i];
                        r[(c, col)] += v / len.sqrt();
                        r[(2, col)] += v * nf[c] * (s - 0.5) / phi_norm;
                    }
                }
            }
        }
        rhs += r.transpose() * &r / len;
    }
    (lhs, rhs)
}

/// Largest LHS/RHS ratio over `samples` random broken fields and over the
/// whole space (generalized eigensolve on the complement of the RHS kernel).
/// Returns `(sampled, exact, kernel_lhs)` where `kernel_lhs` is the largest
/// LHS value on unit vectors of the RHS kernel, relative to the largest LHS entry.
fn interp_ratios(space: &BrokenSpace, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let (lhs, rhs) = interp_forms(space, None);
    let nn = lhs.nrows();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = 0.0f64;
    for _ in 0..samples {
        let x = DVector::from_iterator(nn, (0..nn).map(|_| StandardNormal.sample(&mut rng)));
        let (l, r) = (x.dot(&(&lhs * &x)), x.dot(&(&rhs * &x)));
        if r <= 1e-14 * x.norm_squared() {
            continue;
        }
        sampled = sampled.max(l / r);
    }
    let z = psd_kernel(&rhs, 1e-10);
    let kernel_lhs = if z.ncols() > 0 {
        (z.transpose() * &lhs * &z).symmetric_eigenvalues().amax() / lhs.amax()
    } else {
        0.0
    };
    let q = orthogonal_complement(&z, nn);
    let ev = generalized_eigenvalues(&(q.transpose() * &lhs * &q), &(q.transpose() * &rhs * &q))?;
    let exact = *ev.last().ok_or_else(|| Error::Verification("empty space".into()))?;
    Ok((sampled, exact, kernel_lhs))
}

/// The interpolation-bound experiment on `base` and its uniform refinements.
///
/// Samples are standard-normal coefficient vectors under `seed`. Asserts that
/// the LHS vanishes wherever the RHS does and that the sampled maximum ratio is
/// stable across levels within `tolerance` (relative spread).
pub fn check_interp_bound(
    samples: usize,
    base: &Mesh,
    levels: usize,
    k: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new(
        "interpolation bound",
        &["level", "triangles", "sampled_max_ratio", "sup_ratio", "kernel_lhs"],
    );
    rep.notes.push(format!(
        "{samples} standard-normal broken P^{k} fields per level (seed {seed}); sup by generalized eigensolve"
    ));
    let mut m = base.clone();
    for level in 0..levels {
        if level > 0 {
            m = refine_uniform(&m);
        }
        let space = BrokenSpace::new(&m, k);
        let (s, e, z) = interp_ratios(&space, samples, seed)?;
        rep.push(vec![level as f64, m.num_triangles() as f64, s, e, z]);
    }
    let sampled = rep.column("sampled_max_ratio").unwrap_or_default();
    let kern = rep.column("kernel_lhs").unwrap_or_default();
    rep.check(
        sampled.iter().all(|v| v.is_finite() && *v > 0.0),
        "sampled ratios finite and positive",
    );
    rep.check(kern.iter().all(|v| *v < 1e-8), "LHS vanishes on the RHS kernel");
    let spread = relative_spread(&sampled);
    rep.check(
        spread <= tolerance,
        format!("sampled max ratio level spread {spread:.4} <= {tolerance}"),
    );
    Ok(rep)
}
