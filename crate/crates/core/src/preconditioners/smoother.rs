//! Facet-block smoothers: block Jacobi (optionally ℓ1-compensated) and block
//! Gauss-Seidel over one block per facet.

use crate::error::{Error, Result};
use crate::fespace::FeSystem;
use crate::sparse::CsrMatrix;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherVariant {
    Jacobi,
    GaussSeidel,
    L1Jacobi,
}

/// Which operator the blocks are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLayout {
    /// Free facet dofs plus the bubbles of both incident elements (operator S).
    Overlapping,
    /// Free normal and tangential dofs of the facet only (operator S^∂).
    Facet,
}

/// Block index sets, one per facet with free dofs, in facet order.
///
/// For the overlapping layout, indices are layout positions; for the facet
/// layout they are positions within the coupling unknowns. Elements whose
/// bubbles are not reached by any block get a block of their own.
pub fn facet_blocks(sys: &FeSystem, layout: BlockLayout) -> Vec<Vec<usize>> {
    let d = &sys.dofs;
    let lay = &d.layout;
    let m = &sys.mesh;
    let shift = match layout {
        BlockLayout::Overlapping => 0,
        BlockLayout::Facet => lay.n_interior,
    };
    let bubbles = |t: usize| (0..d.n_bubbles).map(move |b| lay.sys[d.v_bubble_dof(t, b)].expect("bubbles are free"));
    let mut covered = vec![false; m.num_triangles()];
    let mut blocks = Vec::new();
    for f in 0..m.num_facets() {
        let mut b: Vec<usize> = (0..d.n_v_edge)
            .filter_map(|j| lay.sys[d.v_edge_dof(f, j)])
            .chain((0..d.n_vhat_edge).filter_map(|j| lay.sys[d.vhat_dof(f, j)]))
            .map(|i| i - shift)
            .collect();
        if b.is_empty() {
            continue;
        }
        if layout == BlockLayout::Overlapping {
            let adj = m.facet_adjacency[f];
            for t in std::iter::once(adj.owner).chain(adj.neighbor) {
                covered[t] = true;
                b.extend(bubbles(t));
            }
            b.sort_unstable();
        }
        blocks.push(b);
    }
    if layout == BlockLayout::Overlapping && d.n_bubbles > 0 {
        for (t, c) in covered.iter().enumerate() {
            if !c {
                blocks.push(bubbles(t).collect());
            }
        }
    }
    blocks
}

#[derive(Debug, Clone)]
struct Block {
    idx: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
}

/// Block smoother over a fixed operator.
#[derive(Debug, Clone)]
pub struct FacetBlockSmoother {
    pub variant: SmootherVariant,
    pub steps: usize,
    /// Multiplier applied to every block correction (1 unless rescaled).
    pub scale: f64,
    blocks: Vec<Block>,
    a: CsrMatrix,
}

fn dense_block(a: &CsrMatrix, idx: &[usize], l1: bool) -> DMatrix<f64> {
    let n = idx.len();
    let mut pos = std::collections::HashMap::with_capacity(n);
    for (p, &i) in idx.iter().enumerate() {
        pos.insert(i, p);
    }
    let mut m = DMatrix::zeros(n, n);
    for (p, &i) in idx.iter().enumerate() {
        for (j, v) in a.row(i) {
            match pos.get(&j) {
                Some(&q) => m[(p, q)] += v,
                None if l1 => m[(p, p)] += v.abs(),
                None => {}
            }
        }
    }
    m
}

impl FacetBlockSmoother {
    pub fn new(a: &CsrMatrix, blocks: Vec<Vec<usize>>, variant: SmootherVariant, steps: usize) -> Result<Self> {
        let l1 = variant == SmootherVariant::L1Jacobi;
        let mut cover = vec![false; a.nrows];
        for b in &blocks {
            for &i in b {
                cover[i] = true;
            }
        }
        if let Some(i) = cover.iter().position(|c| !c) {
            return Err(Error::Config(format!(
                "unknown {i} is not covered by any smoother block"
            )));
        }
        let blocks = blocks
            .into_par_iter()
            .filter(|b| !b.is_empty())
            .map(|idx| {
                let chol = dense_block(a, &idx, l1)
                    .cholesky()
                    .ok_or_else(|| Error::Singular("smoother block is not positive definite".into()))?;
                Ok(Block { idx, chol })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FacetBlockSmoother {
            variant,
            steps: steps.max(1),
            scale: 1.0,
            blocks,
            a: a.clone(),
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.idx.len()).collect()
    }

    pub fn block_indices(&self, i: usize) -> &[usize] {
        &self.blocks[i].idx
    }

    pub fn dim(&self) -> usize {
        self.a.nrows
    }

    /// One additive (Jacobi) sweep: Σ_b R_bᵀ A_b^{-1} R_b r, reduced in block order.
    fn jacobi(&self, r: &[f64]) -> Vec<f64> {
        let parts: Vec<DVector<f64>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let rb = DVector::from_iterator(b.idx.len(), b.idx.iter().map(|&i| r[i]));
                b.chol.solve(&rb)
            })
            .collect();
        let mut z = vec![0.0; r.len()];
        for (b, p) in self.blocks.iter().zip(&parts) {
            for (k, &i) in b.idx.iter().enumerate() {
                z[i] += self.scale * p[k];
            }
        }
        z
    }

    fn block_residual(&self, b: &Block, r: &[f64], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            b.idx.len(),
            b.idx
                .iter()
                .map(|&i| r[i] - self.a.row(i).map(|(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    /// One Gauss-Seidel sweep over the blocks in the given order, updating x in place.
    fn gs_sweep(&self, r: &[f64], x: &mut [f64], backward: bool) {
        let n = self.blocks.len();
        for s in 0..n {
            let b = &self.blocks[if backward { n - 1 - s } else { s }];
            let c = b.chol.solve(&self.block_residual(b, r, x));
            for (k, &i) in b.idx.iter().enumerate() {
                x[i] += self.scale * c[k];
            }
        }
    }

    fn residual(&self, r: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.a.matvec(x);
        r.iter().zip(&ax).map(|(a, b)| a - b).collect()
    }

    /// `steps` smoothing iterations from x, forward (or backward for the adjoint).
    pub fn smooth(&self, r: &[f64], x: &mut [f64], adjoint: bool) {
        for _ in 0..self.steps {
            match self.variant {
                SmootherVariant::GaussSeidel => self.gs_sweep(r, x, adjoint),
                _ => {
                    let res = self.residual(r, x);
                    let z = self.jacobi(&res);
                    for (a, b) in x.iter_mut().zip(&z) {
                        *a += b;
                    }
                }
            }
        }
    }

    /// Symmetric smoother as a preconditioner: forward then adjoint smoothing for
    /// Gauss-Seidel, plain smoothing otherwise.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; r.len()];
        self.smooth(r, &mut x, false);
        if self.variant == SmootherVariant::GaussSeidel {
            self.smooth(r, &mut x, true);
        }
        x
    }

    /// Rescale so the smoother dominates A: divide by the largest eigenvalue of
    /// M^{-1}A estimated with `iters` power iterations (times a safety factor).
    pub fn rescale_by_power_iteration(&mut self, iters: usize, seed: u64, safety: f64) -> f64 {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.a.nrows;
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let saved = self.scale;
        self.scale = 1.0;
        let mut lam = 1.0;
        for _ in 0..iters {
            let ax = self.a.matvec(&x);
            let y = self.jacobi(&ax);
            let den = crate::sparse::dot(&x, &ax);
            if den <= 0.0 {
                break;
            }
            lam = crate::sparse::dot(&ax, &y) / den;
            let ny = crate::sparse::norm(&y);
            x = y.iter().map(|v| v / ny).collect();
        }
        self.scale = saved / (lam * safety);
        lam
    }
}
