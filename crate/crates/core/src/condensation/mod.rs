//! Element-wise elimination of (σ, ω): the velocity Schur complement S, the
//! double Schur complement S^∂ over facet-coupled unknowns, discrete harmonic
//! extension, recovery of the eliminated fields and the factorized product.
//!
//! Local element unknowns follow the assembly order (V edge functions, bubbles,
//! V̂ functions). The local saddle block `[[-M, B_ωσᵀ], [B_ωσ, 0]]` is
//! eliminated through Cholesky factors of `M` and of `B_ωσ M^{-1} B_ωσᵀ`.

use crate::assembly::{assemble_all_blocks, dirichlet_lifting, BodyForce, ElementBlocks};
use crate::error::{Error, Result};
use crate::fespace::FeSystem;
use crate::sparse::{CsrMatrix, Triplets};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

type Chol = Cholesky<f64, Dyn>;

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Chol> {
    m.cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Stored elimination data of one element.
#[derive(Debug, Clone)]
pub struct LocalFactor {
    pub triangle: usize,
    /// Global velocity indices of the local unknowns.
    pub vel_dofs: Vec<usize>,
    m_chol: Chol,
    /// M^{-1} B_ωσᵀ
    z: DMatrix<f64>,
    sw_chol: Chol,
    b_ws: DMatrix<f64>,
    /// σ = -X y_T for local velocity data y_T.
    pub x: DMatrix<f64>,
    /// ω = -Y y_T.
    pub y: DMatrix<f64>,
    /// Local Schur complement over the local velocity unknowns.
    pub s_t: DMatrix<f64>,
    pub load: DVector<f64>,
    /// (div v, q) over all local velocity unknowns (zero columns for V̂).
    pub b_pu: DMatrix<f64>,
    /// ν^{-1}(σ, τ), kept for norm evaluation.
    pub m_ss: DMatrix<f64>,
}

impl LocalFactor {
    pub fn new(eb: &ElementBlocks, n_v_local: usize) -> Result<Self> {
        let nvel = eb.b_vs.nrows();
        let m_chol = cholesky(eb.m_ss.clone(), "local stress mass")?;
        let z = m_chol.solve(&eb.b_ws.transpose());
        let sw_chol = cholesky(&eb.b_ws * &z, "local weak-symmetry block")?;
        let w = m_chol.solve(&eb.b_vs.transpose());
        let y = sw_chol.solve(&(&eb.b_ws * &w));
        let x = &z * &y - w;
        let mut a = DMatrix::zeros(nvel, nvel);
        a.view_mut((0, 0), (n_v_local, n_v_local)).copy_from(&eb.a_div);
        let s_t = a - &eb.b_vs * &x;
        let s_t = (&s_t + s_t.transpose()) * 0.5;
        let mut load = DVector::zeros(nvel);
        load.rows_mut(0, n_v_local).copy_from(&eb.load);
        let mut b_pu = DMatrix::zeros(eb.b_pu.nrows(), nvel);
        b_pu.view_mut((0, 0), (eb.b_pu.nrows(), n_v_local)).copy_from(&eb.b_pu);
        Ok(LocalFactor {
            triangle: eb.triangle,
            vel_dofs: eb.vel_dofs.clone(),
            m_chol,
            z,
            sw_chol,
            b_ws: eb.b_ws.clone(),
            x,
            y,
            s_t,
            load,
            b_pu,
            m_ss: eb.m_ss.clone(),
        })
    }

    /// Solve `-ν^{-1}(σ, τ) + (τ, ω) = g(τ)`, `(σ, η) = 0` on this element.
    pub fn local_projection_solve(&self, g: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mg = self.m_chol.solve(g);
        let om = self.sw_chol.solve(&(&self.b_ws * &mg));
        let sigma = &self.z * &om - mg;
        (sigma, om)
    }

    /// (σ, ω) of the local velocity data `y_t`.
    pub fn recover(&self, y_t: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (-(&self.x * y_t), -(&self.y * y_t))
    }
}

/// Facet-coupled part of the condensed operator and the extension blocks.
#[derive(Debug, Clone)]
pub struct DoubleSchur {
    /// S^∂ over the (∂, û) unknowns, indexed by layout index minus `n_interior`.
    pub s_bd: CsrMatrix,
    pub ext: Vec<Extension>,
}

/// Per-element harmonic extension data.
#[derive(Debug, Clone)]
pub struct Extension {
    /// Layout indices of the element bubbles.
    pub interior: Vec<usize>,
    /// Layout index of each local facet-coupled unknown (None if constrained).
    pub coupling: Vec<Option<usize>>,
    pub s_oo: DMatrix<f64>,
    s_oo_chol: Chol,
    /// S_∘∘^{-1} S_∘Γ over the local facet-coupled unknowns.
    pub e: DMatrix<f64>,
}

impl Extension {
    pub fn solve_interior(&self, r: &DVector<f64>) -> DVector<f64> {
        self.s_oo_chol.solve(r)
    }
}

/// The condensed saddle system `[[S, Bᵀ], [B, 0]]` over free velocity and pressure.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub nu: f64,
    pub k: usize,
    pub s: CsrMatrix,
    pub b: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Prescribed values of all velocity dofs.
    pub lifting: Vec<f64>,
    /// Diagonal of the ν^{-1}-scaled pressure mass matrix (orthonormal Q basis).
    pub mass_p: Vec<f64>,
    pub locals: Vec<LocalFactor>,
    pub mean_zero_pressure: bool,
    pub n_interior: usize,
    pub double: Option<DoubleSchur>,
}

/// Local Γ (facet-coupled) and ∘ (bubble) positions inside the element order.
pub fn local_split(sys: &FeSystem) -> (Vec<usize>, Vec<usize>) {
    let d = &sys.dofs;
    let ne = 3 * d.n_v_edge;
    let nv = d.n_v_local();
    let gamma: Vec<usize> = (0..ne).chain(nv..d.n_vel_local()).collect();
    let interior: Vec<usize> = (ne..nv).collect();
    (gamma, interior)
}

/// Eliminate (σ, ω) on every element and assemble S, B and the right-hand sides.
pub fn condense_sigma_omega(sys: &FeSystem, blocks: &[ElementBlocks], nu: f64) -> Result<CondensedSystem> {
    let d = &sys.dofs;
    if blocks.len() != d.n_triangles {
        return Err(Error::Dimension("element blocks do not match the dof map".into()));
    }
    let nvl = d.n_v_local();
    let locals: Vec<LocalFactor> = blocks
        .par_iter()
        .map(|eb| LocalFactor::new(eb, nvl))
        .collect::<Result<_>>()?;
    let lay = &d.layout;
    let n = lay.len();
    let np = d.n_q_local;
    let g = dirichlet_lifting(sys);
    let mut ts = Triplets::new(n, n);
    let mut tb = Triplets::new(d.n_q(), n);
    let mut rhs_u = vec![0.0; n];
    let mut rhs_p = vec![0.0; d.n_q()];
    for (t, lf) in locals.iter().enumerate() {
        for (a, &ga) in lf.vel_dofs.iter().enumerate() {
            let Some(ra) = lay.sys[ga] else { continue };
            rhs_u[ra] += lf.load[a];
            for (b, &gb) in lf.vel_dofs.iter().enumerate() {
                match lay.sys[gb] {
                    Some(rb) => ts.push(ra, rb, lf.s_t[(a, b)]),
                    None => rhs_u[ra] -= lf.s_t[(a, b)] * g[gb],
                }
            }
        }
        for p in 0..np {
            for (a, &ga) in lf.vel_dofs[..nvl].iter().enumerate() {
                let v = lf.b_pu[(p, a)];
                match lay.sys[ga] {
                    Some(ra) => tb.push(t * np + p, ra, v),
                    None => rhs_p[t * np + p] -= v * g[ga],
                }
            }
        }
    }
    let mass_p: Vec<f64> = (0..d.n_triangles)
        .flat_map(|t| {
            let det = crate::fespace::Geometry::new(&sys.mesh, t).det;
            std::iter::repeat_n(det / nu, np)
        })
        .collect();
    Ok(CondensedSystem {
        nu,
        k: sys.k,
        s: ts.to_csr(),
        b: tb.to_csr(),
        rhs_u,
        rhs_p,
        lifting: g,
        mass_p,
        locals,
        mean_zero_pressure: sys.regions.mean_zero_pressure,
        n_interior: lay.n_interior,
        double: None,
    })
}

/// Assemble and condense in one step.
pub fn build_condensed(sys: &FeSystem, nu: f64, f: Option<&BodyForce>) -> Result<CondensedSystem> {
    let blocks = assemble_all_blocks(sys, nu, f);
    condense_sigma_omega(sys, &blocks, nu)
}

/// Form S^∂ and the extension blocks of every element.
pub fn double_schur(sys: &FeSystem, cs: &mut CondensedSystem) -> Result<()> {
    let lay = &sys.dofs.layout;
    let (gamma, interior) = local_split(sys);
    let ni = lay.n_interior;
    let exts: Vec<(Extension, DMatrix<f64>)> = cs
        .locals
        .par_iter()
        .map(|lf| {
            let st = &lf.s_t;
            let s_oo = st.select_rows(&interior).select_columns(&interior);
            let s_og = st.select_rows(&interior).select_columns(&gamma);
            let s_gg = st.select_rows(&gamma).select_columns(&gamma);
            let chol = cholesky(s_oo.clone(), "bubble block of S")?;
            let e = chol.solve(&s_og);
            let sd = &s_gg - s_og.transpose() * &e;
            let sd = (&sd + sd.transpose()) * 0.5;
            let ext = Extension {
                interior: interior
                    .iter()
                    .map(|&a| lay.sys[lf.vel_dofs[a]].expect("bubbles are free"))
                    .collect(),
                coupling: gamma.iter().map(|&a| lay.sys[lf.vel_dofs[a]]).collect(),
                s_oo,
                s_oo_chol: chol,
                e,
            };
            Ok((ext, sd))
        })
        .collect::<Result<_>>()?;
    let nc = lay.n_coupling();
    let mut trip = Triplets::new(nc, nc);
    for (ext, sd) in &exts {
        for (a, ra) in ext.coupling.iter().enumerate() {
            let Some(ra) = ra else { continue };
            for (b, rb) in ext.coupling.iter().enumerate() {
                if let Some(rb) = rb {
                    trip.push(ra - ni, rb - ni, sd[(a, b)]);
                }
            }
        }
    }
    cs.double = Some(DoubleSchur {
        s_bd: trip.to_csr(),
        ext: exts.into_iter().map(|(e, _)| e).collect(),
    });
    Ok(())
}

/// Recovered stress and rotation coefficients, element by element.
#[derive(Debug, Clone)]
pub struct RecoveredFields {
    pub sigma: Vec<f64>,
    pub omega: Vec<f64>,
}

impl CondensedSystem {
    pub fn n_velocity(&self) -> usize {
        self.s.nrows
    }

    pub fn n_pressure(&self) -> usize {
        self.b.nrows
    }

    pub fn double(&self) -> Result<&DoubleSchur> {
        self.double
            .as_ref()
            .ok_or_else(|| Error::Config("double Schur complement has not been formed".into()))
    }

    /// All velocity dofs from a free vector (lifting on constrained dofs).
    pub fn expand(&self, sys: &FeSystem, free: &[f64]) -> Vec<f64> {
        crate::assembly::expand_velocity(sys, free, &self.lifting)
    }

    /// Apply the saddle operator to (u, p) stacked.
    pub fn apply_saddle(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_velocity();
        let (u, p) = x.split_at(n);
        let mut y = self.s.matvec(u);
        let btp = self.b.matvec_transpose(p);
        for (a, b) in y.iter_mut().zip(&btp) {
            *a += b;
        }
        y.extend(self.b.matvec(u));
        y
    }

    pub fn saddle_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_u.clone();
        r.extend_from_slice(&self.rhs_p);
        r
    }

    /// Element-wise back substitution for (σ, ω) from all velocity dofs.
    pub fn recover_stress(&self, y_all: &[f64]) -> RecoveredFields {
        let parts: Vec<(DVector<f64>, DVector<f64>)> = self
            .locals
            .par_iter()
            .map(|lf| {
                let yt = DVector::from_iterator(lf.vel_dofs.len(), lf.vel_dofs.iter().map(|&g| y_all[g]));
                lf.recover(&yt)
            })
            .collect();
        let mut sigma = Vec::new();
        let mut omega = Vec::new();
        for (s, o) in parts {
            sigma.extend(s.iter());
            omega.extend(o.iter());
        }
        RecoveredFields { sigma, omega }
    }

    /// `(yᵀ S y, ν^{-1}‖σ‖² + ν/2 ‖div u‖²)` for the velocity `y_all` over all dofs,
    /// with σ recovered element by element.
    pub fn schur_norm_identity(&self, y_all: &[f64]) -> (f64, f64) {
        let np = self.b.nrows / self.locals.len().max(1);
        let parts: Vec<(f64, f64)> = self
            .locals
            .par_iter()
            .enumerate()
            .map(|(t, lf)| {
                let yt = DVector::from_iterator(lf.vel_dofs.len(), lf.vel_dofs.iter().map(|&g| y_all[g]));
                let lhs = yt.dot(&(&lf.s_t * &yt));
                let (sigma, _) = lf.recover(&yt);
                // (div u, ψ_i)_T = det·c_i in the orthonormal Q basis, so ‖div u‖² = Σ b_i² / det
                let det = self.mass_p[t * np] * self.nu;
                let div2 = (&lf.b_pu * &yt).norm_squared() / det;
                (lhs, sigma.dot(&(&lf.m_ss * &sigma)) + 0.5 * self.nu * div2)
            })
            .collect();
        parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
    }
}

impl DoubleSchur {
    /// `E x_Γ` restricted per element: returns S_∘∘^{-1} S_∘Γ x_Γ over all bubbles.
    pub fn extend(&self, x_g: &[f64], n_interior: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_interior];
        for ext in &self.ext {
            let xl = DVector::from_iterator(
                ext.coupling.len(),
                ext.coupling.iter().map(|c| c.map_or(0.0, |i| x_g[i - n_interior])),
            );
            let v = &ext.e * xl;
            for (a, &i) in ext.interior.iter().enumerate() {
                out[i] = v[a];
            }
        }
        out
    }

    /// Adjoint of [`DoubleSchur::extend`]: S_Γ∘ S_∘∘^{-1} r_∘ on the coupling unknowns.
    pub fn extend_transpose(&self, r_o: &[f64], n_interior: usize, n_coupling: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_coupling];
        for ext in &self.ext {
            let rl = DVector::from_iterator(ext.interior.len(), ext.interior.iter().map(|&i| r_o[i]));
            let v = ext.e.transpose() * rl;
            for (a, c) in ext.coupling.iter().enumerate() {
                if let Some(i) = c {
                    out[i - n_interior] += v[a];
                }
            }
        }
        out
    }

    /// Block-diagonal S_∘∘^{-1} r_∘.
    pub fn solve_interior(&self, r_o: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r_o.len()];
        for ext in &self.ext {
            let rl = DVector::from_iterator(ext.interior.len(), ext.interior.iter().map(|&i| r_o[i]));
            let v = ext.solve_interior(&rl);
            for (a, &i) in ext.interior.iter().enumerate() {
                out[i] = v[a];
            }
        }
        out
    }

    /// Block-diagonal S_∘∘ x_∘.
    pub fn apply_interior(&self, x_o: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x_o.len()];
        for ext in &self.ext {
            let xl = DVector::from_iterator(ext.interior.len(), ext.interior.iter().map(|&i| x_o[i]));
            let v = &ext.s_oo * xl;
            for (a, &i) in ext.interior.iter().enumerate() {
                out[i] = v[a];
            }
        }
        out
    }
}

impl CondensedSystem {
    /// Replace the bubble part of a free velocity vector by the discrete harmonic extension
    /// of its facet-coupled part.
    pub fn harmonic_extend(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ds = self.double()?;
        let ni = self.n_interior;
        let e = ds.extend(&x[ni..], ni);
        let mut y = x.to_vec();
        for i in 0..ni {
            y[i] = -e[i];
        }
        Ok(y)
    }

    /// S x through the block factorization with S^∂ and the extension blocks.
    pub fn apply_s_factorized(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ds = self.double()?;
        let ni = self.n_interior;
        let nc = x.len() - ni;
        let (x_o, x_g) = x.split_at(ni);
        let e = ds.extend(x_g, ni);
        let z_o: Vec<f64> = x_o.iter().zip(&e).map(|(a, b)| a + b).collect();
        let w_g = ds.s_bd.matvec(x_g);
        let w_o = ds.apply_interior(&z_o);
        let et = ds.extend_transpose(&w_o, ni, nc);
        let mut y = w_o;
        y.extend(w_g.iter().zip(&et).map(|(a, b)| a + b));
        Ok(y)
    }
}

#[cfg(test)]
mod tests;
