//! Physical-element tabulation: affine geometry, Piola-mapped bases and the
//! global orientation signs of the facet-coupled velocity functions.

use super::{reference_edge_point, RefElement};
use crate::mesh::Mesh;
use crate::polynomial::EDGE_VERTICES;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Affine map x = p0 + J x̂ of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub p0: Vec2,
    /// `jac[i][j] = ∂x_i / ∂x̂_j`
    pub jac: Mat2,
    pub jinv: Mat2,
    pub det: f64,
    pub area: f64,
    pub diam: f64,
}

impl Geometry {
    pub fn new(m: &Mesh, t: usize) -> Self {
        let [p0, p1, p2] = m.coords(t);
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Geometry {
            p0,
            jac,
            jinv,
            det,
            area: 0.5 * det,
            diam: m.diameter(t),
        }
    }

    pub fn map(&self, xh: Vec2) -> Vec2 {
        [
            self.p0[0] + self.jac[0][0] * xh[0] + self.jac[0][1] * xh[1],
            self.p0[1] + self.jac[1][0] * xh[0] + self.jac[1][1] * xh[1],
        ]
    }

    pub fn inverse_map(&self, x: Vec2) -> Vec2 {
        let d = [x[0] - self.p0[0], x[1] - self.p0[1]];
        [
            self.jinv[0][0] * d[0] + self.jinv[0][1] * d[1],
            self.jinv[1][0] * d[0] + self.jinv[1][1] * d[1],
        ]
    }
}

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn matvec(a: &Mat2, v: &Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn frob(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn dot(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// One edge of an element, tabulated at the edge quadrature points.
#[derive(Debug, Clone)]
pub struct EdgeTab {
    pub facet: usize,
    /// The element owns the facet (its traversal matches the facet orientation).
    pub owner: bool,
    /// Arc-length quadrature weights.
    pub w: Vec<f64>,
    pub x: Vec<Vec2>,
    /// Outward unit normal of the element.
    pub n: Vec2,
    /// Unit tangent of the facet (global orientation).
    pub t: Vec2,
    pub length: f64,
    /// Facet parameter in [0, 1] along the facet tangent.
    pub s: Vec<f64>,
    /// V basis values, `v[i * nq + q]`.
    pub v: Vec<Vec2>,
    /// Σ basis values, `sig[i * nq + q]`.
    pub sig: Vec<Mat2>,
    /// Facet Legendre values, `vhat[j * nq + q]`.
    pub vhat: Vec<f64>,
}

impl EdgeTab {
    pub fn nq(&self) -> usize {
        self.w.len()
    }
}

/// Physical basis values of every element space at the volume quadrature points.
///
/// V functions carry their global orientation signs, so the local function i
/// is exactly the restriction of the corresponding global basis function.
#[derive(Debug, Clone)]
pub struct ElementTab {
    pub geo: Geometry,
    pub w: Vec<f64>,
    pub x: Vec<Vec2>,
    pub v: Vec<Vec2>,
    /// Jacobian `grad[i * nq + q][a][b] = ∂_b v_a`.
    pub v_grad: Vec<Mat2>,
    pub v_div: Vec<f64>,
    pub sig: Vec<Mat2>,
    pub sig_div: Vec<Vec2>,
    pub omega: Vec<Mat2>,
    pub q: Vec<f64>,
    pub edges: [EdgeTab; 3],
    /// Sign applied to each local V function.
    pub v_sign: Vec<f64>,
}

impl ElementTab {
    pub fn nq(&self) -> usize {
        self.w.len()
    }

    pub fn new(r: &RefElement, m: &Mesh, t: usize) -> Self {
        let geo = Geometry::new(m, t);
        let k = r.k;
        let nq = r.vol.len();
        let nv = r.n_v();
        let ns = r.n_sigma();
        let nw = r.n_omega();
        let np = r.n_q();
        let owns = m.triangle_owns[t];
        let v_sign: Vec<f64> = (0..nv)
            .map(|i| match r.bdm.edge_moment[i] {
                Some((e, j)) if !owns[e]
                    && j % 2 == 0 => {
                        -1.0
                    }
                _ => 1.0,
            })
            .collect();
        let jt = transpose(&geo.jac);
        let jinv_t = transpose(&geo.jinv);
        let w: Vec<f64> = r.vol.weights.iter().map(|w| w * geo.det).collect();
        let x: Vec<Vec2> = r.vol.points.iter().map(|p| geo.map(*p)).collect();

        let mut v = vec![[0.0; 2]; nv * nq];
        let mut v_grad = vec![[[0.0; 2]; 2]; nv * nq];
        let mut v_div = vec![0.0; nv * nq];
        let tb = &r.bdm_vol;
        for i in 0..nv {
            let sg = v_sign[i] / geo.det;
            for q in 0..nq {
                let vh = [tb.val[0][(i, q)], tb.val[1][(i, q)]];
                let gh = [
                    [tb.dx[0][(i, q)], tb.dy[0][(i, q)]],
                    [tb.dx[1][(i, q)], tb.dy[1][(i, q)]],
                ];
                let vv = matvec(&geo.jac, &vh);
                v[i * nq + q] = [sg * vv[0], sg * vv[1]];
                let g = matmul(&matmul(&geo.jac, &gh), &geo.jinv);
                v_grad[i * nq + q] = [[sg * g[0][0], sg * g[0][1]], [sg * g[1][0], sg * g[1][1]]];
                v_div[i * nq + q] = sg * (gh[0][0] + gh[1][1]);
            }
        }

        let map_sigma = |sh: Mat2| matmul(&matmul(&jinv_t, &sh), &jt);
        let mut sig = vec![[[0.0; 2]; 2]; ns * nq];
        let mut sig_div = vec![[0.0; 2]; ns * nq];
        let ts = &r.sigma_vol;
        for i in 0..ns {
            for q in 0..nq {
                let sh = [
                    [ts.val[0][(i, q)], ts.val[1][(i, q)]],
                    [ts.val[2][(i, q)], ts.val[3][(i, q)]],
                ];
                sig[i * nq + q] = map_sigma(sh);
                let dh = [ts.dx[0][(i, q)] + ts.dy[1][(i, q)], ts.dx[2][(i, q)] + ts.dy[3][(i, q)]];
                sig_div[i * nq + q] = matvec(&jinv_t, &dh);
            }
        }

        let mut omega = vec![[[0.0; 2]; 2]; nw * nq];
        let mut qv = vec![0.0; np * nq];
        let tp = &r.pressure_vol;
        for i in 0..np {
            for q in 0..nq {
                let p = tp.val[0][(i, q)];
                qv[i * nq + q] = p;
                if i < nw {
                    omega[i * nq + q] = [[0.0, -0.5 * p], [0.5 * p, 0.0]];
                }
            }
        }

        let edges = [0, 1, 2].map(|e| {
            let facet = m.triangle_facets[t][e];
            let owner = owns[e];
            let (ft, _) = m.facet_frame(facet);
            let tri = m.triangles[t];
            let [a, b] = EDGE_VERTICES[e];
            let (pa, pb) = (m.vertices[tri[a]], m.vertices[tri[b]]);
            let length = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let tl = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
            let n = [tl[1], -tl[0]];
            let ne = r.edge.len();
            let w: Vec<f64> = r.edge.weights.iter().map(|w| w * length).collect();
            let x: Vec<Vec2> = r
                .edge
                .points
                .iter()
                .map(|s| geo.map(reference_edge_point(e, *s)))
                .collect();
            let s: Vec<f64> = r.edge.points.iter().map(|s| if owner { *s } else { 1.0 - s }).collect();
            let te = &r.bdm_edge[e];
            let mut ev = vec![[0.0; 2]; nv * ne];
            for i in 0..nv {
                let sg = v_sign[i] / geo.det;
                for q in 0..ne {
                    let vv = matvec(&geo.jac, &[te.val[0][(i, q)], te.val[1][(i, q)]]);
                    ev[i * ne + q] = [sg * vv[0], sg * vv[1]];
                }
            }
            let tse = &r.sigma_edge[e];
            let mut es = vec![[[0.0; 2]; 2]; ns * ne];
            for i in 0..ns {
                for q in 0..ne {
                    es[i * ne + q] = map_sigma([
                        [tse.val[0][(i, q)], tse.val[1][(i, q)]],
                        [tse.val[2][(i, q)], tse.val[3][(i, q)]],
                    ]);
                }
            }
            let mut vhat = vec![0.0; k * ne];
            for (q, sq) in s.iter().enumerate() {
                let l = r.facet.eval(*sq);
                for j in 0..k {
                    vhat[j * ne + q] = l[j];
                }
            }
            EdgeTab {
                facet,
                owner,
                w,
                x,
                n,
                t: ft,
                length,
                s,
                v: ev,
                sig: es,
                vhat,
            }
        });

        ElementTab {
            geo,
            w,
            x,
            v,
            v_grad,
            v_div,
            sig,
            sig_div,
            omega,
            q: qv,
            edges,
            v_sign,
        }
    }
}
