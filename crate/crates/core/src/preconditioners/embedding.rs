//! The conforming auxiliary space: continuous P1 vector fields, their embedding
//! into the HDG velocity space and the coarse operator Ā.

use crate::error::{Error, Result};
use crate::fespace::{dot, FeSystem};
use crate::linalg::SparseCholesky;
use crate::mesh::BoundaryKind;
use crate::sparse::{CsrMatrix, Triplets};
use nalgebra::DMatrix;

/// Embedding of free V̄ coefficients into free velocity unknowns.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    /// Rows: all free velocity unknowns (layout order); columns: free V̄ dofs.
    pub e: CsrMatrix,
    /// Rows of `e` for the facet-coupled unknowns only.
    pub e_boundary: CsrMatrix,
}

/// Value of the nodal basis function (vertex `a` of the facet, a ∈ {0, 1}) at parameter s.
fn hat(a: usize, s: f64) -> f64 {
    if a == 0 {
        1.0 - s
    } else {
        s
    }
}

/// Build E: normal moments and tangential L² moments on facets, bubbles by
/// element-wise L² projection with the edge part fixed. Since P1 fields lie in
/// BDM^k, the embedded field equals ū exactly; the V̂ rows of Γ_Ñ facets are
/// constrained and therefore absent.
pub fn build_embedding(sys: &FeSystem) -> EmbeddingMatrix {
    let d = &sys.dofs;
    let m = &sys.mesh;
    let k = sys.k;
    let lay = &d.layout;
    let rule = &sys.reference.edge;
    let mut trip = Triplets::new(lay.len(), d.n_vbar_free);
    // facet moments of each nodal function: facet_mom[f][(a, c)] -> (V rows, V̂ rows)
    let facet_rows = |f: usize| -> Vec<(usize, usize, Vec<f64>, Vec<f64>)> {
        let len = m.facet_length(f);
        let (t, n) = m.facet_frame(f);
        let mut out = Vec::new();
        for (a, &v) in m.facets[f].iter().enumerate() {
            for c in 0..2 {
                let mut vm = vec![0.0; k + 1];
                let mut hm = vec![0.0; k];
                for (s, w) in rule.points.iter().zip(&rule.weights) {
                    let leg = crate::polynomial::shifted_legendre(k, *s);
                    let phi = hat(a, *s);
                    for j in 0..=k {
                        vm[j] += w * len * phi * n[c] * leg[j];
                    }
                    for j in 0..k {
                        hm[j] += w * (2 * j + 1) as f64 * phi * t[c] * leg[j];
                    }
                }
                out.push((v, c, vm, hm));
            }
        }
        out
    };
    for f in 0..m.num_facets() {
        for (v, c, vm, hm) in facet_rows(f) {
            let Some(col) = d.vbar_sys[2 * v + c] else { continue };
            for j in 0..=k {
                if let Some(r) = lay.sys[d.v_edge_dof(f, j)] {
                    trip.push(r, col, vm[j]);
                }
            }
            if !sys.regions.is(f, BoundaryKind::TildeNeumann) {
                for j in 0..k {
                    if let Some(r) = lay.sys[d.vhat_dof(f, j)] {
                        trip.push(r, col, hm[j]);
                    }
                }
            }
        }
    }
    let ne = 3 * d.n_v_edge;
    let nb = d.n_bubbles;
    for t in 0..m.num_triangles() {
        let tab = sys.tab(t);
        let nq = tab.nq();
        let dofs = d.element_velocity_dofs(m, t);
        let tri = m.triangles[t];
        // edge coefficients of each local nodal function from the facet moments
        let mut edge_coef = DMatrix::zeros(ne, 6);
        for e in 0..3 {
            let f = m.triangle_facets[t][e];
            for (v, c, vm, _) in facet_rows(f) {
                let i = tri
                    .iter()
                    .position(|&x| x == v)
                    .expect("facet vertex belongs to the triangle");
                for j in 0..=k {
                    edge_coef[(e * (k + 1) + j, 2 * i + c)] = vm[j];
                }
            }
        }
        let mut mass = DMatrix::zeros(nb, nb);
        let mut rhs = DMatrix::zeros(nb, 6);
        for q in 0..nq {
            let w = tab.w[q];
            let xh = sys.reference.vol.points[q];
            let lam = [1.0 - xh[0] - xh[1], xh[0], xh[1]];
            for a in 0..nb {
                let va = tab.v[(ne + a) * nq + q];
                for b in 0..nb {
                    mass[(a, b)] += w * dot(&va, &tab.v[(ne + b) * nq + q]);
                }
                for col in 0..6 {
                    let (i, c) = (col / 2, col % 2);
                    let mut r = [0.0; 2];
                    r[c] = lam[i];
                    for ei in 0..ne {
                        let v = tab.v[ei * nq + q];
                        r[0] -= edge_coef[(ei, col)] * v[0];
                        r[1] -= edge_coef[(ei, col)] * v[1];
                    }
                    rhs[(a, col)] += w * dot(&r, &va);
                }
            }
        }
        let coef = mass.cholesky().expect("bubble mass is SPD").solve(&rhs);
        for col in 0..6 {
            let (i, c) = (col / 2, col % 2);
            let Some(cc) = d.vbar_sys[2 * tri[i] + c] else { continue };
            for a in 0..nb {
                let r = lay.sys[dofs[ne + a]].expect("bubbles are free");
                let v = coef[(a, col)];
                if v != 0.0 {
                    trip.push(r, cc, v);
                }
            }
        }
    }
    let e = trip.to_csr();
    let rows: Vec<usize> = (lay.n_interior..lay.len()).collect();
    let cols: Vec<usize> = (0..d.n_vbar_free).collect();
    let e_boundary = e.submatrix(&rows, &cols);
    EmbeddingMatrix { e, e_boundary }
}

/// Free V̄ coefficients of a continuous P1 field given by its vertex values.
pub fn vbar_from_vertex_values(sys: &FeSystem, val: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let d = &sys.dofs;
    let mut out = vec![0.0; d.n_vbar_free];
    for (v, x) in sys.mesh.vertices.iter().enumerate() {
        let u = val(*x);
        for c in 0..2 {
            if let Some(i) = d.vbar_sys[2 * v + c] {
                out[i] = u[c];
            }
        }
    }
    out
}

/// Ā = ν ∫ ε(ū):ε(v̄) plus, on Γ_Ñ, the tangential penalty ν C k²/h_T ∫_F ū_t v̄_t.
pub fn assemble_coarse(sys: &FeSystem, nu: f64, penalty: Option<f64>) -> CsrMatrix {
    let d = &sys.dofs;
    let m = &sys.mesh;
    let n = d.n_vbar_free;
    let mut trip = Triplets::new(n, n);
    for t in 0..m.num_triangles() {
        let geo = crate::fespace::Geometry::new(m, t);
        // reference gradients of λ0, λ1, λ2 mapped by J^{-T}
        let gh = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let g: Vec<[f64; 2]> = gh
            .iter()
            .map(|v| {
                [
                    geo.jinv[0][0] * v[0] + geo.jinv[1][0] * v[1],
                    geo.jinv[0][1] * v[0] + geo.jinv[1][1] * v[1],
                ]
            })
            .collect();
        let tri = m.triangles[t];
        // ε of λ_i e_c: sym(e_c ⊗ ∇λ_i)
        let eps = |i: usize, c: usize| -> [[f64; 2]; 2] {
            let mut gr = [[0.0; 2]; 2];
            gr[c] = g[i];
            let o = 0.5 * (gr[0][1] + gr[1][0]);
            [[gr[0][0], o], [o, gr[1][1]]]
        };
        for a in 0..6 {
            let Some(ra) = d.vbar_sys[2 * tri[a / 2] + a % 2] else {
                continue;
            };
            let ea = eps(a / 2, a % 2);
            for b in 0..6 {
                let Some(rb) = d.vbar_sys[2 * tri[b / 2] + b % 2] else {
                    continue;
                };
                let eb = eps(b / 2, b % 2);
                trip.push(ra, rb, nu * geo.area * crate::fespace::frob(&ea, &eb));
            }
        }
    }
    if let Some(c) = penalty {
        let k2 = (sys.k * sys.k) as f64;
        for &f in &sys.regions.tilde_neumann_facets {
            let owner = m.facet_adjacency[f].owner;
            let h = m.diameter(owner);
            let len = m.facet_length(f);
            let (tg, _) = m.facet_frame(f);
            let wgt = nu * c * k2 / h;
            for (a, &va) in m.facets[f].iter().enumerate() {
                for (b, &vb) in m.facets[f].iter().enumerate() {
                    let mab = if a == b { len / 3.0 } else { len / 6.0 };
                    for ca in 0..2 {
                        let Some(ra) = d.vbar_sys[2 * va + ca] else { continue };
                        for cb in 0..2 {
                            let Some(rb) = d.vbar_sys[2 * vb + cb] else { continue };
                            trip.push(ra, rb, wgt * mab * tg[ca] * tg[cb]);
                        }
                    }
                }
            }
        }
    }
    trip.to_csr()
}

/// Exact factorization of the coarse operator.
#[derive(Debug, Clone)]
pub struct CoarseSolver {
    pub a_bar: CsrMatrix,
    chol: SparseCholesky,
}

impl CoarseSolver {
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        self.chol.solve(r)
    }

    pub fn dim(&self) -> usize {
        self.a_bar.nrows
    }
}

/// Assemble and factorize Ā. With Γ_Ñ present the penalty is mandatory.
pub fn build_coarse(sys: &FeSystem, nu: f64, penalty: Option<f64>) -> Result<CoarseSolver> {
    if !sys.regions.tilde_neumann_facets.is_empty() && penalty.is_none() {
        return Err(Error::Config("a Γ_Ñ boundary requires the tangential penalty".into()));
    }
    let a_bar = assemble_coarse(sys, nu, penalty);
    let chol = SparseCholesky::new(&a_bar)
        .map_err(|e| Error::Singular(format!("coarse operator is singular (is Γ_D empty?): {e}")))?;
    Ok(CoarseSolver { a_bar, chol })
}
