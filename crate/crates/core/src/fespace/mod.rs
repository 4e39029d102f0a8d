//! Reference bases, quadrature tables and dof maps for the six discrete spaces.
//!
//! All reference bases except the hierarchical scalar one are expressed as
//! coefficient rows over the orthonormal scalar basis [`OrthoBasis`] of P^k,
//! one block of columns per component. Matrix components are stored row-major:
//! (0,0), (0,1), (1,0), (1,1).
//!
//! * V (BDM^k): the dual basis of the edge normal moments
//!   `∫_E v·n P_j(2s-1) ds`, j = 0..=k, on the three edges; the interior
//!   functions span the kernel of all those moments (zero normal trace).
//!   Edge functions are L²(T̂)-orthogonal to the interior ones.
//! * Σ: trace-free matrix P^k restricted by `∫_E t·τn P_k(2s-1) ds = 0` on each
//!   edge. The basis starts with the trace-free P^{k-1} functions (which satisfy
//!   the constraint trivially), followed by degree-k functions orthogonally
//!   projected onto the constrained space.
//! * W: κ(ψ) for the first dim P^{k-1} orthonormal functions ψ.
//! * Q: the first dim P^{k-1} orthonormal functions.
//! * V̂: shifted Legendre polynomials P_j(2s-1), j < k, on each facet, times the
//!   facet tangent.

mod dofmap;
mod element;

pub use dofmap::{DofMap, VelocityLayout};
pub use element::{dot, frob, matmul, matvec, transpose, EdgeTab, ElementTab, Geometry, Mat2, Vec2};

use crate::error::{Error, Result};
use crate::polynomial::{dim_pk, shifted_legendre, HierarchicalBasis, OrthoBasis, ScalarEval, EDGE_VERTICES};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};
use nalgebra::{DMatrix, DVector};

/// Facet-coupling (∂) or element-interior (∘) basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofClass {
    Boundary,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Scalar,
    Vector,
    Matrix,
}

#[derive(Debug, Clone)]
enum Repr {
    Ortho { coef: DMatrix<f64> },
    Hierarchical(HierarchicalBasis),
}

/// Values and reference derivatives of a basis at a set of points, per component.
///
/// `val[c][(i, q)]` is component c of function i at point q.
#[derive(Debug, Clone)]
pub struct Tables {
    pub val: Vec<DMatrix<f64>>,
    pub dx: Vec<DMatrix<f64>>,
    pub dy: Vec<DMatrix<f64>>,
}

/// A reference-element basis with its dof classification.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub kind: BasisKind,
    pub degree: usize,
    pub classes: Vec<DofClass>,
    /// For ∂-class functions: (reference edge, moment degree).
    pub edge_moment: Vec<Option<(usize, usize)>>,
    repr: Repr,
}

/// Outward unit normal, unit tangent (direction of travel) and length of reference edge e.
pub fn reference_edge(e: usize) -> ([f64; 2], [f64; 2], f64) {
    let v: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let [a, b] = EDGE_VERTICES[e];
    let d = [v[b][0] - v[a][0], v[b][1] - v[a][1]];
    let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let t = [d[0] / l, d[1] / l];
    ([t[1], -t[0]], t, l)
}

/// Point on reference edge e at parameter s (s = 0 at the first edge vertex).
pub fn reference_edge_point(e: usize, s: f64) -> [f64; 2] {
    let v: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let [a, b] = EDGE_VERTICES[e];
    [v[a][0] + s * (v[b][0] - v[a][0]), v[a][1] + s * (v[b][1] - v[a][1])]
}

impl ReferenceBasis {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn ncomp(&self) -> usize {
        match self.kind {
            BasisKind::Scalar => 1,
            BasisKind::Vector => 2,
            BasisKind::Matrix => 4,
        }
    }

    /// Coefficients over the orthonormal P^k basis (rows = functions), if any.
    pub fn coefficients(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Ortho { coef } => Some(coef),
            Repr::Hierarchical(_) => None,
        }
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tables {
        let np = points.len();
        let nf = self.len();
        let nc = self.ncomp();
        let mut t = Tables {
            val: vec![DMatrix::zeros(nf, np); nc],
            dx: vec![DMatrix::zeros(nf, np); nc],
            dy: vec![DMatrix::zeros(nf, np); nc],
        };
        match &self.repr {
            Repr::Hierarchical(h) => {
                for (q, p) in points.iter().enumerate() {
                    let e = h.eval(*p);
                    for i in 0..nf {
                        t.val[0][(i, q)] = e.val[i];
                        t.dx[0][(i, q)] = e.dx[i];
                        t.dy[0][(i, q)] = e.dy[i];
                    }
                }
            }
            Repr::Ortho { coef } => {
                let ortho = OrthoBasis::new(self.degree);
                let n = ortho.dim();
                let (mut v, mut dx, mut dy) = (DMatrix::zeros(n, np), DMatrix::zeros(n, np), DMatrix::zeros(n, np));
                for (q, p) in points.iter().enumerate() {
                    let e = ortho.eval(*p);
                    for i in 0..n {
                        v[(i, q)] = e.val[i];
                        dx[(i, q)] = e.dx[i];
                        dy[(i, q)] = e.dy[i];
                    }
                }
                for c in 0..nc {
                    let block = coef.columns(c * n, n);
                    t.val[c] = block * &v;
                    t.dx[c] = block * &dx;
                    t.dy[c] = block * &dy;
                }
            }
        }
        t
    }
}

/// Hierarchical H¹ basis of P^k (vertex, edge and interior functions).
pub fn scalar_basis(k: usize) -> ReferenceBasis {
    let n = dim_pk(k);
    ReferenceBasis {
        kind: BasisKind::Scalar,
        degree: k,
        classes: (0..n)
            .map(|i| {
                if i < 3 * k.min(1) + 3 * k.saturating_sub(1) {
                    DofClass::Boundary
                } else {
                    DofClass::Interior
                }
            })
            .collect(),
        edge_moment: vec![None; n],
        repr: Repr::Hierarchical(HierarchicalBasis::new(k)),
    }
}

/// Orthonormal scalar P^m basis, expressed over the P^k orthonormal basis (m <= k).
fn ortho_prefix(k: usize, m: usize) -> DMatrix<f64> {
    let n = dim_pk(k);
    let nm = dim_pk(m);
    let mut c = DMatrix::zeros(nm, n);
    for i in 0..nm {
        c[(i, i)] = 1.0;
    }
    c
}

/// Integrates `f(point, s)` over reference edge e with arc-length measure.
fn edge_integral(rule: &EdgeRule, e: usize, mut f: impl FnMut([f64; 2], f64) -> f64) -> f64 {
    let (_, _, l) = reference_edge(e);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| w * l * f(reference_edge_point(e, *s), *s))
        .sum()
}

/// Orthonormal basis of the kernel of `d` (rows = functionals), found by
/// projecting the unit vectors in the given order and keeping new directions.
fn projected_kernel(d: &DMatrix<f64>, order: &[usize], what: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ncols = d.ncols();
    let ddt = d * d.transpose();
    let chol = ddt
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what}: constraint rows are rank deficient")))?;
    // rank check beyond Cholesky success
    let eig = ddt.symmetric_eigenvalues();
    let (mn, mx) = (eig.min(), eig.max());
    if mn <= 1e-12 * mx {
        return Err(Error::Singular(format!("{what}: constraint rows are rank deficient")));
    }
    let right_inverse = d.transpose() * chol.inverse(); // ncols × nrows
    let want = ncols - d.nrows();
    let mut kernel: Vec<DVector<f64>> = Vec::with_capacity(want);
    for &i in order {
        if kernel.len() == want {
            break;
        }
        let mut x = DVector::zeros(ncols);
        x[i] = 1.0;
        let dx = d * &x;
        x -= &right_inverse * dx;
        for _ in 0..2 {
            for b in &kernel {
                let a = b.dot(&x);
                x.axpy(-a, b, 1.0);
            }
        }
        let nrm = x.norm();
        if nrm > 1e-6 {
            kernel.push(x / nrm);
        }
    }
    if kernel.len() != want {
        return Err(Error::Singular(format!(
            "{what}: kernel has dimension {} instead of {want}",
            kernel.len()
        )));
    }
    let k = DMatrix::from_columns(&kernel);
    Ok((k, right_inverse))
}

/// BDM^k basis: 3(k+1) edge functions ordered (edge, degree), then (k+1)(k-1) interior ones.
pub fn bdm_basis(k: usize) -> Result<ReferenceBasis> {
    if k < 1 {
        return Err(Error::Degree(k));
    }
    let ortho = OrthoBasis::new(k);
    let n = ortho.dim();
    let rule = edge_rule(2 * k + 2);
    let mut d = DMatrix::zeros(3 * (k + 1), 2 * n);
    for e in 0..3 {
        let (nrm, _, _) = reference_edge(e);
        for j in 0..=k {
            for c in 0..2 {
                for i in 0..n {
                    d[(e * (k + 1) + j, c * n + i)] = edge_integral(&rule, e, |p, s| {
                        ortho.eval(p).val[i] * nrm[c] * shifted_legendre(k, s)[j]
                    });
                }
            }
        }
    }
    let order: Vec<usize> = (0..n).flat_map(|i| [i, n + i]).collect();
    let (kernel, right_inverse) = projected_kernel(&d, &order, "BDM edge moments")?;
    let nb = kernel.ncols();
    let ne = 3 * (k + 1);
    let mut coef = DMatrix::zeros(ne + nb, 2 * n);
    for r in 0..ne {
        coef.row_mut(r).copy_from(&right_inverse.column(r).transpose());
    }
    for r in 0..nb {
        coef.row_mut(ne + r).copy_from(&kernel.column(r).transpose());
    }
    let mut classes = vec![DofClass::Boundary; ne];
    classes.extend(vec![DofClass::Interior; nb]);
    let mut edge_moment: Vec<Option<(usize, usize)>> = (0..ne).map(|r| Some((r / (k + 1), r % (k + 1)))).collect();
    edge_moment.extend(vec![None; nb]);
    Ok(ReferenceBasis {
        kind: BasisKind::Vector,
        degree: k,
        classes,
        edge_moment,
        repr: Repr::Ortho { coef },
    })
}

/// Trace-free matrix P^k with normal-tangential traces in P^{k-1}.
pub fn sigma_basis(k: usize) -> Result<ReferenceBasis> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    let ortho = OrthoBasis::new(k);
    let n = ortho.dim();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    // raw trace-free components: a·[[1,0],[0,-1]]/√2, b·[[0,1],[0,0]], c·[[0,0],[1,0]]
    let comps: [[f64; 4]; 3] = [[s2, 0.0, 0.0, -s2], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
    let rule = edge_rule(2 * k + 2);
    let mut c = DMatrix::zeros(3, 3 * n);
    for e in 0..3 {
        let (nr, t, _) = reference_edge(e);
        for (m, comp) in comps.iter().enumerate() {
            // t · (τ n) for τ = comp
            let tn = t[0] * (comp[0] * nr[0] + comp[1] * nr[1]) + t[1] * (comp[2] * nr[0] + comp[3] * nr[1]);
            for i in 0..n {
                c[(e, m * n + i)] =
                    edge_integral(&rule, e, |p, s| tn * ortho.eval(p).val[i] * shifted_legendre(k, s)[k]);
            }
        }
    }
    let order: Vec<usize> = (0..n).flat_map(|i| [i, n + i, 2 * n + i]).collect();
    let (kernel, _) = projected_kernel(&c, &order, "Σ nt-moment constraints")?;
    let nf = kernel.ncols();
    let mut coef = DMatrix::zeros(nf, 4 * n);
    for f in 0..nf {
        for (m, comp) in comps.iter().enumerate() {
            for i in 0..n {
                let a = kernel[(m * n + i, f)];
                for q in 0..4 {
                    coef[(f, q * n + i)] += a * comp[q];
                }
            }
        }
    }
    Ok(ReferenceBasis {
        kind: BasisKind::Matrix,
        degree: k,
        classes: vec![DofClass::Interior; nf],
        edge_moment: vec![None; nf],
        repr: Repr::Ortho { coef },
    })
}

/// κ applied to the orthonormal P^{k-1} basis; expressed over P^k.
pub fn skew_basis(k: usize) -> Result<ReferenceBasis> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    let n = dim_pk(k);
    let p = ortho_prefix(k, k - 1);
    let nf = p.nrows();
    let mut coef = DMatrix::zeros(nf, 4 * n);
    coef.columns_mut(n, n).copy_from(&(&p * -0.5));
    coef.columns_mut(2 * n, n).copy_from(&(&p * 0.5));
    Ok(ReferenceBasis {
        kind: BasisKind::Matrix,
        degree: k,
        classes: vec![DofClass::Interior; nf],
        edge_moment: vec![None; nf],
        repr: Repr::Ortho { coef },
    })
}

/// Orthonormal P^{k-1} pressure basis, expressed over P^k.
pub fn pressure_basis(k: usize) -> Result<ReferenceBasis> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    let coef = ortho_prefix(k, k - 1);
    let nf = coef.nrows();
    Ok(ReferenceBasis {
        kind: BasisKind::Scalar,
        degree: k,
        classes: vec![DofClass::Interior; nf],
        edge_moment: vec![None; nf],
        repr: Repr::Ortho { coef },
    })
}

/// Shifted Legendre basis of P^{k-1} on a facet; the function j is P_j(2s-1) t.
#[derive(Debug, Clone, Copy)]
pub struct FacetBasis {
    pub degree: usize,
}

/// Facet basis for the tangential trace space at degree k (k functions per facet).
pub fn facet_basis(k: usize) -> Result<FacetBasis> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    Ok(FacetBasis { degree: k })
}

impl FacetBasis {
    pub fn len(&self) -> usize {
        self.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut v = shifted_legendre(self.degree - 1, s);
        v.truncate(self.degree);
        v
    }
}

/// Everything that depends only on the polynomial degree.
#[derive(Debug, Clone)]
pub struct RefElement {
    pub k: usize,
    pub vol: TriangleRule,
    pub edge: EdgeRule,
    pub bdm: ReferenceBasis,
    pub sigma: ReferenceBasis,
    pub skew: ReferenceBasis,
    pub pressure: ReferenceBasis,
    pub facet: FacetBasis,
    /// Tables at volume quadrature points.
    pub bdm_vol: Tables,
    pub sigma_vol: Tables,
    pub pressure_vol: Tables,
    /// Tables at the edge quadrature points of each reference edge.
    pub bdm_edge: [Tables; 3],
    pub sigma_edge: [Tables; 3],
    /// Orthonormal P^k values (for broken fields and projections).
    pub ortho: OrthoBasis,
    pub ortho_vol: Vec<ScalarEval>,
}

impl RefElement {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Degree(k));
        }
        let vol = triangle_rule(2 * k + 2);
        let edge = edge_rule(2 * k + 2);
        let bdm = bdm_basis(k)?;
        let sigma = sigma_basis(k)?;
        let skew = skew_basis(k)?;
        let pressure = pressure_basis(k)?;
        let facet = facet_basis(k)?;
        let edge_pts =
            |e: usize| -> Vec<[f64; 2]> { edge.points.iter().map(|s| reference_edge_point(e, *s)).collect() };
        let bdm_vol = bdm.tabulate(&vol.points);
        let sigma_vol = sigma.tabulate(&vol.points);
        let pressure_vol = pressure.tabulate(&vol.points);
        let bdm_edge = [0, 1, 2].map(|e| bdm.tabulate(&edge_pts(e)));
        let sigma_edge = [0, 1, 2].map(|e| sigma.tabulate(&edge_pts(e)));
        let ortho = OrthoBasis::new(k);
        let ortho_vol = vol.points.iter().map(|p| ortho.eval(*p)).collect();
        Ok(RefElement {
            k,
            vol,
            edge,
            bdm,
            sigma,
            skew,
            pressure,
            facet,
            bdm_vol,
            sigma_vol,
            pressure_vol,
            bdm_edge,
            sigma_edge,
            ortho,
            ortho_vol,
        })
    }

    pub fn n_v(&self) -> usize {
        self.bdm.len()
    }

    pub fn n_v_edge(&self) -> usize {
        self.k + 1
    }

    pub fn n_bubbles(&self) -> usize {
        (self.k + 1) * (self.k - 1)
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.len()
    }

    pub fn n_omega(&self) -> usize {
        self.skew.len()
    }

    pub fn n_q(&self) -> usize {
        self.pressure.len()
    }

    pub fn n_vhat_edge(&self) -> usize {
        self.k
    }
}


/// Mesh, boundary partition, reference element and dof maps at one degree.
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub mesh: crate::mesh::Mesh,
    pub regions: crate::mesh::BoundaryRegions,
    pub k: usize,
    pub reference: RefElement,
    pub dofs: DofMap,
}

impl FeSystem {
    pub fn new(mesh: crate::mesh::Mesh, regions: crate::mesh::BoundaryRegions, k: usize) -> Result<Self> {
        let reference = RefElement::new(k)?;
        let dofs = DofMap::new(&mesh, &regions, k)?;
        Ok(FeSystem {
            mesh,
            regions,
            k,
            reference,
            dofs,
        })
    }

    /// Physical tabulation of element t.
    pub fn tab(&self, t: usize) -> ElementTab {
        ElementTab::new(&self.reference, &self.mesh, t)
    }

    pub fn n_triangles(&self) -> usize {
        self.mesh.num_triangles()
    }
}

/// Global numbering of all spaces at degree k.
pub fn build_dof_maps(m: &crate::mesh::Mesh, regions: &crate::mesh::BoundaryRegions, k: usize) -> Result<DofMap> {
    DofMap::new(m, regions, k)
}
