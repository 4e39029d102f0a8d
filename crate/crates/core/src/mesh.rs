//! Structured triangulations of rectangles, uniform refinement and boundary
//! classification.
//!
//! Facets are stored with a canonical orientation: the vertex pair runs
//! counter-clockwise around the lower-indexed incident triangle, so the facet
//! normal (the tangent rotated clockwise) points from the lower- to the
//! higher-indexed triangle and outward on the boundary. The facet tangent is
//! the normal rotated by 90° counter-clockwise, i.e. the direction of travel.

use crate::error::{Error, Result};
use crate::polynomial::EDGE_VERTICES;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// Labels given to the sides of a rectangle by [`build_structured`].
pub mod side {
    pub const BOTTOM: u32 = 0;
    pub const RIGHT: u32 = 1;
    pub const TOP: u32 = 2;
    pub const LEFT: u32 = 3;
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }
}

/// Incident triangles of a facet: the owner (lower index) and the optional neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetAdjacency {
    pub owner: usize,
    pub neighbor: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Oriented vertex pairs (start, end).
    pub facets: Vec<[usize; 2]>,
    pub facet_adjacency: Vec<FacetAdjacency>,
    /// Facet index of local edge e (opposite local vertex e) of each triangle.
    pub triangle_facets: Vec<[usize; 3]>,
    /// Whether the triangle is the owner of its local edge e.
    pub triangle_owns: Vec<[bool; 3]>,
    /// Side label of each boundary facet, `None` for interior facets.
    pub boundary_labels: Vec<Option<u32>>,
    pub h_max: f64,
}

impl Mesh {
    /// Builds facets and adjacency from vertices and counter-clockwise triangles.
    pub fn from_triangles(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        label_of: impl Fn(&[f64; 2], &[f64; 2]) -> Option<u32>,
    ) -> Result<Mesh> {
        let mut facets = Vec::new();
        let mut adjacency: Vec<FacetAdjacency> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangle_facets = Vec::with_capacity(triangles.len());
        let mut triangle_owns = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut tf = [0; 3];
            let mut own = [false; 3];
            for (e, [a, b]) in EDGE_VERTICES.iter().enumerate() {
                let (va, vb) = (tri[*a], tri[*b]);
                let key = (va.min(vb), va.max(vb));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, facets.len());
                        tf[e] = facets.len();
                        own[e] = true;
                        facets.push([va, vb]);
                        adjacency.push(FacetAdjacency {
                            owner: t,
                            neighbor: None,
                        });
                    }
                    Some(&f) => {
                        if adjacency[f].neighbor.is_some() || facets[f] != [vb, va] {
                            return Err(Error::Mesh(format!("edge ({va},{vb}) is shared inconsistently")));
                        }
                        adjacency[f].neighbor = Some(t);
                        tf[e] = f;
                    }
                }
            }
            triangle_facets.push(tf);
            triangle_owns.push(own);
        }
        let boundary_labels = facets
            .iter()
            .zip(&adjacency)
            .map(|(f, adj)| {
                if adj.neighbor.is_none() {
                    label_of(&vertices[f[0]], &vertices[f[1]])
                } else {
                    None
                }
            })
            .collect();
        let mut m = Mesh {
            vertices,
            triangles,
            facets,
            facet_adjacency: adjacency,
            triangle_facets,
            triangle_owns,
            boundary_labels,
            h_max: 0.0,
        };
        m.h_max = (0..m.num_triangles()).map(|t| m.diameter(t)).fold(0.0, f64::max);
        m.check()?;
        Ok(m)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_adjacency[f].neighbor.is_none()
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_facets()).filter(|&f| self.is_boundary_facet(f))
    }

    pub fn interior_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_facets()).filter(|&f| !self.is_boundary_facet(f))
    }

    pub fn coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t`.
    pub fn area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.coords(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.coords(t);
        EDGE_VERTICES
            .iter()
            .map(|[a, b]| dist(p[*a], p[*b]))
            .fold(0.0, f64::max)
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn facet_midpoint(&self, f: usize) -> [f64; 2] {
        let [a, b] = self.facets[f];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Unit tangent (direction of the stored vertex pair) and unit normal of facet `f`.
    pub fn facet_frame(&self, f: usize) -> ([f64; 2], [f64; 2]) {
        let [a, b] = self.facets[f];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let l = dist(pa, pb);
        let t = [(pb[0] - pa[0]) / l, (pb[1] - pa[1]) / l];
        (t, [t[1], -t[0]])
    }

    /// Ratio of circumradius to inradius of triangle `t`.
    pub fn shape_ratio(&self, t: usize) -> f64 {
        let p = self.coords(t);
        let l: Vec<f64> = EDGE_VERTICES.iter().map(|[a, b]| dist(p[*a], p[*b])).collect();
        let area = self.area(t);
        let s = 0.5 * (l[0] + l[1] + l[2]);
        let r_in = area / s;
        let r_circ = l[0] * l[1] * l[2] / (4.0 * area);
        r_circ / r_in
    }

    /// Checks every structural invariant of the mesh.
    pub fn check(&self) -> Result<()> {
        for t in 0..self.num_triangles() {
            if self.area(t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is not positively oriented")));
            }
        }
        for (f, adj) in self.facet_adjacency.iter().enumerate() {
            if let Some(n) = adj.neighbor {
                if n <= adj.owner {
                    return Err(Error::Mesh(format!("facet {f} has a non-canonical owner")));
                }
            }
        }
        let euler = self.num_vertices() as i64 - self.num_facets() as i64 + self.num_triangles() as i64;
        if euler != 1 {
            return Err(Error::Mesh(format!("Euler characteristic {euler} != 1")));
        }
        Ok(())
    }

    /// Writes the plain-text node/triangle/facet listing.
    ///
    /// ```text
    /// vertices N
    /// x y                (N lines)
    /// triangles M
    /// a b c              (M lines, counter-clockwise)
    /// facets K
    /// a b owner neighbor label   (neighbor and label are -1 when absent)
    /// ```
    pub fn write_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.num_vertices())?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v[0], v[1])?;
        }
        writeln!(w, "triangles {}", self.num_triangles())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "facets {}", self.num_facets())?;
        for (f, [a, b]) in self.facets.iter().enumerate() {
            let adj = self.facet_adjacency[f];
            let n = adj.neighbor.map_or(-1, |n| n as i64);
            let l = self.boundary_labels[f].map_or(-1, |l| l as i64);
            writeln!(w, "{a} {b} {} {n} {l}", adj.owner)?;
        }
        Ok(())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Splits each of the `nx × ny` cells of `rect` along its lower-left to upper-right diagonal.
pub fn build_structured(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh("nx and ny must be positive".into()));
    }
    if !(rect.x1 > rect.x0 && rect.y1 > rect.y0) {
        return Err(Error::Mesh(format!("degenerate rectangle {rect:?}")));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                rect.x0 + (rect.x1 - rect.x0) * i as f64 / nx as f64,
                rect.y0 + (rect.y1 - rect.y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let tol = 1e-12 * ((rect.x1 - rect.x0) + (rect.y1 - rect.y0));
    Mesh::from_triangles(vertices, triangles, |a, b| {
        let on = |c: f64, v: f64| (c - v).abs() <= tol;
        if on(a[1], rect.y0) && on(b[1], rect.y0) {
            Some(side::BOTTOM)
        } else if on(a[0], rect.x1) && on(b[0], rect.x1) {
            Some(side::RIGHT)
        } else if on(a[1], rect.y1) && on(b[1], rect.y1) {
            Some(side::TOP)
        } else if on(a[0], rect.x0) && on(b[0], rect.x0) {
            Some(side::LEFT)
        } else {
            None
        }
    })
}

/// Red refinement: every triangle is split into four congruent children.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let nv = m.num_vertices();
    let mut vertices = m.vertices.clone();
    for f in 0..m.num_facets() {
        vertices.push(m.facet_midpoint(f));
    }
    let mut triangles = Vec::with_capacity(4 * m.num_triangles());
    for (t, tri) in m.triangles.iter().enumerate() {
        // midpoint of the edge opposite local vertex e
        let mid = |e: usize| nv + m.triangle_facets[t][e];
        let (m0, m1, m2) = (mid(0), mid(1), mid(2));
        triangles.push([tri[0], m2, m1]);
        triangles.push([m2, tri[1], m0]);
        triangles.push([m1, m0, tri[2]]);
        triangles.push([m0, m1, m2]);
    }
    // A child boundary edge joins a parent vertex to the midpoint of its parent facet.
    let parent_labels = m.boundary_labels.clone();
    let vertex_count = nv;
    let mut fine = Mesh::from_triangles(vertices, triangles, |_, _| None).expect("refinement of a valid mesh is valid");
    for f in 0..fine.num_facets() {
        if fine.is_boundary_facet(f) {
            let [a, b] = fine.facets[f];
            let midpoint = a.max(b);
            debug_assert!(midpoint >= vertex_count);
            fine.boundary_labels[f] = parent_labels[midpoint - vertex_count];
        }
    }
    fine
}

/// Boundary condition type of a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Velocity prescribed.
    Dirichlet,
    /// Natural outflow: zero normal and tangential traction.
    Neumann,
    /// Zero normal traction, zero tangential velocity.
    TildeNeumann,
}

/// Prescribed vector field, evaluated pointwise.
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Partition of the boundary facets into Γ_D, Γ_N and Γ_Ñ.
#[derive(Clone)]
pub struct BoundaryRegions {
    /// Kind of every facet, `None` for interior facets.
    pub kind: Vec<Option<BoundaryKind>>,
    pub dirichlet_facets: Vec<usize>,
    pub neumann_facets: Vec<usize>,
    pub tilde_neumann_facets: Vec<usize>,
    /// Velocity on Γ_D; `None` means homogeneous data.
    pub dirichlet_value: Option<VectorField>,
    /// Set when the pressure is only determined up to a constant.
    pub mean_zero_pressure: bool,
}

impl fmt::Debug for BoundaryRegions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryRegions")
            .field("dirichlet_facets", &self.dirichlet_facets)
            .field("neumann_facets", &self.neumann_facets)
            .field("tilde_neumann_facets", &self.tilde_neumann_facets)
            .field("dirichlet_value", &self.dirichlet_value.as_ref().map(|_| "<field>"))
            .field("mean_zero_pressure", &self.mean_zero_pressure)
            .finish()
    }
}

/// What a boundary predicate sees of a facet.
#[derive(Debug, Clone, Copy)]
pub struct FacetInfo {
    pub index: usize,
    pub label: Option<u32>,
    pub midpoint: [f64; 2],
}

/// A predicate selecting boundary facets for one boundary kind.
pub struct RegionRule {
    pub kind: BoundaryKind,
    pub select: Box<dyn Fn(&FacetInfo) -> bool>,
}

impl RegionRule {
    pub fn new(kind: BoundaryKind, select: impl Fn(&FacetInfo) -> bool + 'static) -> Self {
        RegionRule {
            kind,
            select: Box::new(select),
        }
    }

    /// Selects the facets carrying one of the given side labels.
    pub fn sides(kind: BoundaryKind, labels: &[u32]) -> Self {
        let labels = labels.to_vec();
        RegionRule::new(kind, move |f| f.label.is_some_and(|l| labels.contains(&l)))
    }
}

/// Assigns every boundary facet to exactly one region.
pub fn classify_boundary(
    m: &Mesh,
    rules: &[RegionRule],
    dirichlet_value: Option<VectorField>,
) -> Result<BoundaryRegions> {
    let mut kind = vec![None; m.num_facets()];
    let (mut d, mut n, mut tn) = (Vec::new(), Vec::new(), Vec::new());
    for f in m.boundary_facets() {
        let info = FacetInfo {
            index: f,
            label: m.boundary_labels[f],
            midpoint: m.facet_midpoint(f),
        };
        let hits: Vec<BoundaryKind> = rules.iter().filter(|r| (r.select)(&info)).map(|r| r.kind).collect();
        if hits.len() != 1 {
            return Err(Error::Boundary(format!(
                "boundary facet {f} at {:?} matches {} region predicates (expected exactly one)",
                info.midpoint,
                hits.len()
            )));
        }
        kind[f] = Some(hits[0]);
        match hits[0] {
            BoundaryKind::Dirichlet => d.push(f),
            BoundaryKind::Neumann => n.push(f),
            BoundaryKind::TildeNeumann => tn.push(f),
        }
    }
    let mean_zero_pressure = n.is_empty() && tn.is_empty();
    Ok(BoundaryRegions {
        kind,
        dirichlet_facets: d,
        neumann_facets: n,
        tilde_neumann_facets: tn,
        dirichlet_value,
        mean_zero_pressure,
    })
}

impl BoundaryRegions {
    /// Every boundary facet of `m` gets the same kind.
    pub fn uniform(m: &Mesh, kind: BoundaryKind) -> BoundaryRegions {
        classify_boundary(m, &[RegionRule::new(kind, |_| true)], None)
            .expect("a single catch-all rule always partitions")
    }

    /// Rejects region sets for which the Stokes problem is not well posed.
    pub fn validate_for_solve(&self) -> Result<()> {
        if self.dirichlet_facets.is_empty() {
            return Err(Error::Boundary("Γ_D must be nonempty".into()));
        }
        Ok(())
    }

    pub fn is(&self, f: usize, k: BoundaryKind) -> bool {
        self.kind[f] == Some(k)
    }
}
