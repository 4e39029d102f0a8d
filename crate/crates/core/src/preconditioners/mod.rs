//! Auxiliary-space preconditioners for the condensed velocity operators, the
//! pressure mass preconditioner and the block preconditioner of the saddle system.
//!
//! An ASP combines a facet-block smoother on the HDG space with an exact solve
//! in the continuous P1 space, transferred by the embedding E. The additive
//! form is `M^{-1} + E C^{-1} Eᵀ`; the multiplicative form smooths, corrects on
//! the coarse space and smooths with the adjoint smoother. For the condensed
//! target the ASP acts on S^∂ and is wrapped in the outer factors of the block
//! factorization of S, which turns it into a preconditioner for S.

mod embedding;
mod smoother;

pub use embedding::{
    assemble_coarse, build_coarse, build_embedding, vbar_from_vertex_values, CoarseSolver, EmbeddingMatrix,
};
pub use smoother::{facet_blocks, BlockLayout, FacetBlockSmoother, SmootherVariant};

use crate::condensation::{CondensedSystem, DoubleSchur};
use crate::error::{Error, Result};
use crate::fespace::FeSystem;
use crate::linalg::SparseCholesky;
use crate::sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

/// A linear, symmetric approximate inverse.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
    fn dim(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// ASP directly on S with overlapping element-facet blocks.
    FullS,
    /// ASP on S^∂ with facet blocks, extended to S by the block factorization.
    Condensed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspConfig {
    pub composition: Composition,
    pub target: Target,
    pub smoother: SmootherVariant,
    pub steps: usize,
    /// Tangential penalty constant on Γ_Ñ.
    pub penalty: f64,
    /// Power iterations used to scale Jacobi-type smoothers in multiplicative mode.
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for AspConfig {
    fn default() -> Self {
        AspConfig {
            composition: Composition::Multiplicative,
            target: Target::Condensed,
            smoother: SmootherVariant::GaussSeidel,
            steps: 1,
            penalty: 4.0,
            power_iterations: 20,
            seed: 0,
        }
    }
}

/// Safety factor on the power-iteration estimate used for smoother scaling.
pub const POWER_SAFETY: f64 = 1.05;

/// Smoother plus coarse correction on one operator.
#[derive(Debug, Clone)]
pub struct AuxiliarySpace {
    pub a: CsrMatrix,
    pub smoother: FacetBlockSmoother,
    pub e: CsrMatrix,
    pub coarse: CoarseSolver,
    pub composition: Composition,
}

impl AuxiliarySpace {
    fn coarse_correction(&self, r: &[f64]) -> Vec<f64> {
        let rc = self.e.matvec_transpose(r);
        self.e.matvec(&self.coarse.solve(&rc))
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self.composition {
            Composition::Additive => {
                let mut x = self.smoother.apply(r);
                for (a, b) in x.iter_mut().zip(self.coarse_correction(r)) {
                    *a += b;
                }
                x
            }
            Composition::Multiplicative => {
                let mut x = vec![0.0; r.len()];
                self.smoother.smooth(r, &mut x, false);
                let ax = self.a.matvec(&x);
                let res: Vec<f64> = r.iter().zip(&ax).map(|(a, b)| a - b).collect();
                for (a, b) in x.iter_mut().zip(self.coarse_correction(&res)) {
                    *a += b;
                }
                self.smoother.smooth(r, &mut x, true);
                x
            }
        }
    }
}

/// Auxiliary-space preconditioner for S.
#[derive(Debug, Clone)]
pub struct AspPreconditioner {
    pub config: AspConfig,
    pub aux: AuxiliarySpace,
    double: Option<DoubleSchur>,
    n_interior: usize,
    n: usize,
}

fn build_aux(
    a: &CsrMatrix,
    blocks: Vec<Vec<usize>>,
    e: CsrMatrix,
    coarse: CoarseSolver,
    cfg: &AspConfig,
) -> Result<AuxiliarySpace> {
    let mut smoother = FacetBlockSmoother::new(a, blocks, cfg.smoother, cfg.steps)?;
    if cfg.composition == Composition::Multiplicative && cfg.smoother != SmootherVariant::GaussSeidel {
        smoother.rescale_by_power_iteration(cfg.power_iterations, cfg.seed, POWER_SAFETY);
    }
    Ok(AuxiliarySpace {
        a: a.clone(),
        smoother,
        e,
        coarse,
        composition: cfg.composition,
    })
}

impl AspPreconditioner {
    pub fn new(sys: &FeSystem, cs: &CondensedSystem, cfg: AspConfig) -> Result<Self> {
        let nu = cs.nu;
        let penalty = (!sys.regions.tilde_neumann_facets.is_empty()).then_some(cfg.penalty);
        let coarse = build_coarse(sys, nu, penalty)?;
        let emb = build_embedding(sys);
        let n = cs.n_velocity();
        match cfg.target {
            Target::FullS => {
                let blocks = facet_blocks(sys, BlockLayout::Overlapping);
                let aux = build_aux(&cs.s, blocks, emb.e, coarse, &cfg)?;
                Ok(AspPreconditioner {
                    config: cfg,
                    aux,
                    double: None,
                    n_interior: cs.n_interior,
                    n,
                })
            }
            Target::Condensed => {
                let ds = cs.double()?.clone();
                let blocks = facet_blocks(sys, BlockLayout::Facet);
                let aux = build_aux(&ds.s_bd, blocks, emb.e_boundary, coarse, &cfg)?;
                Ok(AspPreconditioner {
                    config: cfg,
                    aux,
                    double: Some(ds),
                    n_interior: cs.n_interior,
                    n,
                })
            }
        }
    }

    /// The ASP on its own operator (S for the full target, S^∂ for the condensed one).
    pub fn apply_inner(&self, r: &[f64]) -> Vec<f64> {
        self.aux.apply(r)
    }

    /// Condensed target: extend an S^∂ preconditioner to S through the exact factorization.
    pub fn apply_extended(&self, r: &[f64]) -> Result<Vec<f64>> {
        let ds = self
            .double
            .as_ref()
            .ok_or_else(|| Error::Config("extended application needs the condensed target".into()))?;
        let ni = self.n_interior;
        let (r_o, r_g) = r.split_at(ni);
        let y_o = ds.solve_interior(r_o);
        let et = ds.extend_transpose(r_o, ni, r_g.len());
        let rg: Vec<f64> = r_g.iter().zip(&et).map(|(a, b)| a - b).collect();
        let z_g = self.aux.apply(&rg);
        let ez = ds.extend(&z_g, ni);
        let mut x: Vec<f64> = y_o.iter().zip(&ez).map(|(a, b)| a - b).collect();
        x.extend(z_g);
        Ok(x)
    }
}

impl Preconditioner for AspPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self.config.target {
            Target::FullS => self.aux.apply(r),
            Target::Condensed => self.apply_extended(r).expect("condensed target carries its extension"),
        }
    }

    fn dim(&self) -> usize {
        self.n
    }
}

/// Exact inverse through a sparse Cholesky factorization.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    chol: SparseCholesky,
}

impl DirectSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Ok(DirectSolver {
            chol: SparseCholesky::new(a)?,
        })
    }
}

impl Preconditioner for DirectSolver {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.chol.solve(r)
    }

    fn dim(&self) -> usize {
        self.chol.dim()
    }
}

/// Inverse of the ν^{-1}-scaled pressure mass matrix (diagonal in the orthonormal Q basis).
#[derive(Debug, Clone)]
pub struct PressureMass {
    pub diag: Vec<f64>,
}

impl PressureMass {
    pub fn new(cs: &CondensedSystem) -> Self {
        PressureMass {
            diag: cs.mass_p.clone(),
        }
    }
}

impl Preconditioner for PressureMass {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.diag).map(|(a, b)| a / b).collect()
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Coefficients of the constant pressure 1 and the pressure mass weights, used to
/// remove the constant mode.
#[derive(Debug, Clone)]
pub struct PressureMode {
    pub constant: Vec<f64>,
    pub weight: Vec<f64>,
}

impl PressureMode {
    pub fn new(sys: &FeSystem, cs: &CondensedSystem) -> Self {
        let np = sys.dofs.n_q_local;
        let constant: Vec<f64> = (0..sys.n_triangles())
            .flat_map(|t| crate::assembly::project_element_scalar(sys, t, np, &|_| 1.0))
            .collect();
        PressureMode {
            constant,
            weight: cs.mass_p.clone(),
        }
    }

    /// Remove the component along the constant in the mass inner product (zero mean).
    pub fn project(&self, p: &mut [f64]) {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..p.len() {
            num += self.weight[i] * p[i] * self.constant[i];
            den += self.weight[i] * self.constant[i] * self.constant[i];
        }
        let c = num / den;
        for i in 0..p.len() {
            p[i] -= c * self.constant[i];
        }
    }
}

/// Block preconditioner for `[[S, Bᵀ], [B, 0]]` with two velocity solves per application.
pub struct SaddlePreconditioner<'a> {
    pub velocity: &'a dyn Preconditioner,
    pub pressure: &'a dyn Preconditioner,
    pub b: &'a CsrMatrix,
    pub mode: Option<PressureMode>,
}

impl<'a> SaddlePreconditioner<'a> {
    /// `z = Ŝ^{-1} r_u`, `d_p = -M_p^{-1}(r_p - B z)`, `d_u = z - Ŝ^{-1} Bᵀ d_p`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.velocity.dim();
        let (ru, rp) = r.split_at(n);
        let z = self.velocity.apply(ru);
        let bz = self.b.matvec(&z);
        let rr: Vec<f64> = rp.iter().zip(&bz).map(|(a, b)| a - b).collect();
        let mut dp: Vec<f64> = self.pressure.apply(&rr).iter().map(|v| -v).collect();
        if let Some(m) = &self.mode {
            m.project(&mut dp);
        }
        let w = self.velocity.apply(&self.b.matvec_transpose(&dp));
        let mut out: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a - b).collect();
        out.extend(dp);
        out
    }
}

#[cfg(test)]
mod tests;
