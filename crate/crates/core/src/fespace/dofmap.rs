//! Global numbering of all spaces and the ordering of the condensed velocity system.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, BoundaryRegions, Mesh};
use crate::polynomial::dim_pk;

/// Ordering of the free velocity unknowns: interior bubbles (∘), then free
/// facet-normal dofs (∂), then free tangential facet dofs (û).
#[derive(Debug, Clone)]
pub struct VelocityLayout {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_facet: usize,
    /// System index of each global velocity dof (V dofs first, then V̂ dofs).
    pub sys: Vec<Option<usize>>,
    /// Global velocity dof of each system index.
    pub global: Vec<usize>,
}

impl VelocityLayout {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// Number of (∂, û) unknowns, the size of the double Schur complement.
    pub fn n_coupling(&self) -> usize {
        self.n_boundary + self.n_facet
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub n_triangles: usize,
    pub n_facets: usize,
    pub n_vertices: usize,
    /// Per facet: k+1 normal moments; per element: (k+1)(k-1) bubbles.
    pub n_v_edge: usize,
    pub n_bubbles: usize,
    pub n_vhat_edge: usize,
    pub n_sigma_local: usize,
    pub n_omega_local: usize,
    pub n_q_local: usize,
    pub n_v: usize,
    pub n_vhat: usize,
    pub v_constrained: Vec<bool>,
    pub vhat_constrained: Vec<bool>,
    pub vbar_constrained: Vec<bool>,
    pub layout: VelocityLayout,
    /// Free V̄ index of each vertex-component dof `2 * vertex + component`.
    pub vbar_sys: Vec<Option<usize>>,
    pub n_vbar_free: usize,
}

impl DofMap {
    pub fn new(m: &Mesh, regions: &BoundaryRegions, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Degree(k));
        }
        if regions.kind.len() != m.num_facets() {
            return Err(Error::Dimension("boundary regions belong to a different mesh".into()));
        }
        let nf = m.num_facets();
        let nt = m.num_triangles();
        let n_v_edge = k + 1;
        let n_bubbles = (k + 1) * (k - 1);
        let n_vhat_edge = k;
        let n_v = nf * n_v_edge + nt * n_bubbles;
        let n_vhat = nf * n_vhat_edge;
        let mut v_constrained = vec![false; n_v];
        let mut vhat_constrained = vec![false; n_vhat];
        let mut vbar_constrained = vec![false; 2 * m.num_vertices()];
        for f in 0..nf {
            match regions.kind[f] {
                Some(BoundaryKind::Dirichlet) => {
                    for j in 0..n_v_edge {
                        v_constrained[f * n_v_edge + j] = true;
                    }
                    for j in 0..n_vhat_edge {
                        vhat_constrained[f * n_vhat_edge + j] = true;
                    }
                    for v in m.facets[f] {
                        vbar_constrained[2 * v] = true;
                        vbar_constrained[2 * v + 1] = true;
                    }
                }
                Some(BoundaryKind::TildeNeumann) => {
                    for j in 0..n_vhat_edge {
                        vhat_constrained[f * n_vhat_edge + j] = true;
                    }
                }
                _ => {}
            }
        }
        let mut sys = vec![None; n_v + n_vhat];
        let mut global = Vec::new();
        for g in nf * n_v_edge..n_v {
            sys[g] = Some(global.len());
            global.push(g);
        }
        let n_interior = global.len();
        for g in 0..nf * n_v_edge {
            if !v_constrained[g] {
                sys[g] = Some(global.len());
                global.push(g);
            }
        }
        let n_boundary = global.len() - n_interior;
        for j in 0..n_vhat {
            if !vhat_constrained[j] {
                sys[n_v + j] = Some(global.len());
                global.push(n_v + j);
            }
        }
        let n_facet = global.len() - n_interior - n_boundary;
        let mut vbar_sys = vec![None; vbar_constrained.len()];
        let mut n_vbar_free = 0;
        for (i, c) in vbar_constrained.iter().enumerate() {
            if !c {
                vbar_sys[i] = Some(n_vbar_free);
                n_vbar_free += 1;
            }
        }
        Ok(DofMap {
            k,
            n_triangles: nt,
            n_facets: nf,
            n_vertices: m.num_vertices(),
            n_v_edge,
            n_bubbles,
            n_vhat_edge,
            n_sigma_local: 3 * dim_pk(k) - 3,
            n_omega_local: dim_pk(k - 1),
            n_q_local: dim_pk(k - 1),
            n_v,
            n_vhat,
            v_constrained,
            vhat_constrained,
            vbar_constrained,
            layout: VelocityLayout {
                n_interior,
                n_boundary,
                n_facet,
                sys,
                global,
            },
            vbar_sys,
            n_vbar_free,
        })
    }

    pub fn v_edge_dof(&self, f: usize, j: usize) -> usize {
        f * self.n_v_edge + j
    }

    pub fn v_bubble_dof(&self, t: usize, m: usize) -> usize {
        self.n_facets * self.n_v_edge + t * self.n_bubbles + m
    }

    /// Global velocity index (offset past the V dofs) of facet dof j of facet f.
    pub fn vhat_dof(&self, f: usize, j: usize) -> usize {
        self.n_v + f * self.n_vhat_edge + j
    }

    pub fn n_velocity(&self) -> usize {
        self.n_v + self.n_vhat
    }

    pub fn n_sigma(&self) -> usize {
        self.n_triangles * self.n_sigma_local
    }

    pub fn n_omega(&self) -> usize {
        self.n_triangles * self.n_omega_local
    }

    pub fn n_q(&self) -> usize {
        self.n_triangles * self.n_q_local
    }

    /// Local V functions per element: 3(k+1) edge functions, then the bubbles.
    pub fn n_v_local(&self) -> usize {
        3 * self.n_v_edge + self.n_bubbles
    }

    /// Local velocity unknowns per element: V functions followed by 3k facet functions.
    pub fn n_vel_local(&self) -> usize {
        self.n_v_local() + 3 * self.n_vhat_edge
    }

    /// Global velocity indices of the local velocity unknowns of element t.
    pub fn element_velocity_dofs(&self, m: &Mesh, t: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.n_vel_local());
        for e in 0..3 {
            let f = m.triangle_facets[t][e];
            for j in 0..self.n_v_edge {
                d.push(self.v_edge_dof(f, j));
            }
        }
        for b in 0..self.n_bubbles {
            d.push(self.v_bubble_dof(t, b));
        }
        for e in 0..3 {
            let f = m.triangle_facets[t][e];
            for j in 0..self.n_vhat_edge {
                d.push(self.vhat_dof(f, j));
            }
        }
        d
    }

    pub fn is_velocity_constrained(&self, g: usize) -> bool {
        if g < self.n_v {
            self.v_constrained[g]
        } else {
            self.vhat_constrained[g - self.n_v]
        }
    }

    /// Free unknowns of the condensed saddle system (velocity plus pressure).
    pub fn n_free_condensed(&self) -> usize {
        self.layout.len() + self.n_q()
    }

    /// Free unknowns of the full system (σ, ω, u, û, p).
    pub fn n_free_full(&self) -> usize {
        self.n_sigma() + self.n_omega() + self.n_free_condensed()
    }
}
