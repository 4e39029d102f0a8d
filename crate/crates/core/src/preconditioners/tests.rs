use super::*;
use crate::assembly::interpolate_velocity;
use crate::condensation::{build_condensed, double_schur};
use crate::fespace::Vec2;
use crate::krylov::{gmres, lanczos_spectrum};
use crate::mesh::side::{BOTTOM, LEFT, RIGHT, TOP};
use crate::mesh::{build_structured, classify_boundary, BoundaryKind, BoundaryRegions, Rect, RegionRule};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use std::sync::atomic::{AtomicUsize, Ordering};

fn channel(nx: usize, ny: usize, k: usize, tilde: bool) -> FeSystem {
    let m = build_structured(nx, ny, Rect::new(0.0, 2.0, 0.0, 1.0)).unwrap();
    let out = if tilde {
        BoundaryKind::TildeNeumann
    } else {
        BoundaryKind::Neumann
    };
    let rules = vec![
        RegionRule::sides(BoundaryKind::Dirichlet, &[BOTTOM, LEFT, TOP]),
        RegionRule::sides(out, &[RIGHT]),
    ];
    let r = classify_boundary(&m, &rules, None).unwrap();
    FeSystem::new(m, r, k).unwrap()
}

fn condensed(sys: &FeSystem, nu: f64) -> CondensedSystem {
    let mut cs = build_condensed(sys, nu, None).unwrap();
    double_schur(sys, &mut cs).unwrap();
    cs
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::sparse::dot(a, b)
}

#[test]
fn embedding_energy_equals_conforming_energy() {
    let sys = channel(2, 2, 2, false);
    let nu = 0.3;
    let cs = condensed(&sys, nu);
    let emb = build_embedding(&sys);
    let abar = assemble_coarse(&sys, nu, None);
    for s in 0..5 {
        let ub = random(sys.dofs.n_vbar_free, s);
        let eu = emb.e.matvec(&ub);
        let lhs = dot(&eu, &cs.s.matvec(&eu));
        let rhs = dot(&ub, &abar.matvec(&ub));
        assert!((lhs - rhs).abs() < 1e-10 * rhs, "{lhs} {rhs}");
    }
    let ni = sys.dofs.layout.n_interior;
    let ed = emb.e.to_dense();
    let eb = emb.e_boundary.to_dense();
    assert_eq!(ed.rows(ni, ed.nrows() - ni).into_owned(), eb);
}

#[test]
fn embedding_reproduces_p1_fields() {
    let m = build_structured(2, 2, Rect::unit_square()).unwrap();
    let r = BoundaryRegions::uniform(&m, BoundaryKind::Neumann);
    let sys = FeSystem::new(m, r, 3).unwrap();
    let u = |x: Vec2| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[1] + 3.0 * x[0]];
    let ub = vbar_from_vertex_values(&sys, &u);
    let eu = build_embedding(&sys).e.matvec(&ub);
    let y = interpolate_velocity(&sys, &u);
    let yf = crate::assembly::restrict_velocity(&sys, &y);
    for i in 0..eu.len() {
        assert!((eu[i] - yf[i]).abs() < 1e-12);
    }
    // rigid mode has zero energy
    let cs = build_condensed(&sys, 1.0, None).unwrap();
    let rb = vbar_from_vertex_values(&sys, &|x| [0.2 - x[1], 1.0 + x[0]]);
    let er = build_embedding(&sys).e.matvec(&rb);
    assert!(dot(&er, &cs.s.matvec(&er)) < 1e-12);
}

#[test]
fn coarse_penalty_is_local_to_tilde_facets() {
    let sys = channel(4, 4, 2, true);
    let a0 = assemble_coarse(&sys, 1.0, None);
    let a1 = assemble_coarse(&sys, 1.0, Some(4.0));
    assert!(a1.asymmetry() < 1e-12);
    let diff = a1.to_dense() - a0.to_dense();
    let mut on_tilde = vec![false; sys.dofs.n_vbar_free];
    for &f in &sys.regions.tilde_neumann_facets {
        for v in sys.mesh.facets[f] {
            for c in 0..2 {
                if let Some(i) = sys.dofs.vbar_sys[2 * v + c] {
                    on_tilde[i] = true;
                }
            }
        }
    }
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            if !on_tilde[i] || !on_tilde[j] {
                assert_eq!(diff[(i, j)], 0.0);
            }
        }
    }
    // weight ν C k²/h per unit facet mass: for k = 2, C = 4, h = 1/4 this is 64
    let wgt = 1.0 * 4.0 * 4.0 / 0.25;
    assert_eq!(wgt, 64.0);
    assert!(build_coarse(&sys, 1.0, None).is_err());
}

#[test]
fn block_layouts() {
    let sys = channel(2, 2, 2, false);
    let fb = facet_blocks(&sys, BlockLayout::Facet);
    let f = sys.mesh.interior_facets().next().unwrap();
    let pos = fb
        .iter()
        .position(|b| {
            b.contains(&(sys.dofs.layout.sys[sys.dofs.v_edge_dof(f, 0)].unwrap() - sys.dofs.layout.n_interior))
        })
        .unwrap();
    assert_eq!(fb[pos].len(), 5);
    let ob = facet_blocks(&sys, BlockLayout::Overlapping);
    let adj = sys.mesh.facet_adjacency[f];
    let b = &ob[pos];
    for t in [adj.owner, adj.neighbor.unwrap()] {
        for m in 0..sys.dofs.n_bubbles {
            assert!(b.contains(&sys.dofs.layout.sys[sys.dofs.v_bubble_dof(t, m)].unwrap()));
        }
    }
    assert_eq!(b.len(), 5 + 2 * sys.dofs.n_bubbles);
}

#[test]
fn singleton_jacobi_on_diagonal_is_exact() {
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 5.0]));
    let a = CsrMatrix::from_dense(&d, 0.0);
    let sm = FacetBlockSmoother::new(&a, vec![vec![0], vec![1], vec![2]], SmootherVariant::Jacobi, 1).unwrap();
    let x = sm.apply(&[2.0, 3.0, 5.0]);
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
}

fn all_configs() -> Vec<AspConfig> {
    let mut out = Vec::new();
    for composition in [Composition::Additive, Composition::Multiplicative] {
        for target in [Target::FullS, Target::Condensed] {
            for smoother in [
                SmootherVariant::Jacobi,
                SmootherVariant::GaussSeidel,
                SmootherVariant::L1Jacobi,
            ] {
                out.push(AspConfig {
                    composition,
                    target,
                    smoother,
                    ..Default::default()
                });
            }
        }
    }
    out
}

#[test]
fn every_asp_variant_is_symmetric() {
    let sys = channel(2, 2, 2, true);
    let cs = condensed(&sys, 1e-3);
    let n = cs.n_velocity();
    let x = random(n, 1);
    let y = random(n, 2);
    for cfg in all_configs() {
        let p = AspPreconditioner::new(&sys, &cs, cfg).unwrap();
        let a = dot(&p.apply(&x), &y);
        let b = dot(&x, &p.apply(&y));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{cfg:?}: {a} {b}");
        assert!(p.apply(&vec![0.0; n]).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn multiplicative_gauss_seidel_dominates_s_boundary() {
    let sys = channel(4, 2, 2, true);
    let cs = condensed(&sys, 1.0);
    let p = AspPreconditioner::new(&sys, &cs, AspConfig::default()).unwrap();
    let sd = &cs.double().unwrap().s_bd;
    let a = |x: &[f64]| sd.matvec(x);
    let m = |x: &[f64]| p.apply_inner(x);
    let (rep, _) = lanczos_spectrum(&a, &m, sd.nrows, 80, 3).unwrap();
    assert!(rep.lambda_max.unwrap() <= 1.0 + 1e-8, "{:?}", rep.lambda_max);
    assert!(rep.lambda_min.unwrap() > 0.0);
}

#[test]
fn extended_preconditioner_inherits_the_spectrum() {
    let sys = channel(4, 2, 2, false);
    let cs = condensed(&sys, 1.0);
    let cfg = AspConfig {
        composition: Composition::Additive,
        smoother: SmootherVariant::Jacobi,
        ..Default::default()
    };
    let p = AspPreconditioner::new(&sys, &cs, cfg).unwrap();
    let sd = &cs.double().unwrap().s_bd;
    let n = sd.nrows;
    let (r1, _) = lanczos_spectrum(&|x: &[f64]| sd.matvec(x), &|x: &[f64]| p.apply_inner(x), n, n, 5).unwrap();
    let nf = cs.n_velocity();
    let (r2, ritz) = lanczos_spectrum(&|x: &[f64]| cs.s.matvec(x), &|x: &[f64]| p.apply(x), nf, nf, 5).unwrap();
    // the bubble part is solved exactly, adding the eigenvalue 1
    assert!(ritz.iter().any(|v| (v - 1.0).abs() < 1e-8));
    let lo = r1.lambda_min.unwrap().min(1.0);
    let hi = r1.lambda_max.unwrap().max(1.0);
    assert!((r2.lambda_min.unwrap() - lo).abs() < 1e-6 * lo);
    assert!((r2.lambda_max.unwrap() - hi).abs() < 1e-6 * hi);
    // bubble rows of S x reproduce the residual exactly
    let r = random(nf, 8);
    let x = p.apply(&r);
    let sx = cs.s.matvec(&x);
    for i in 0..cs.n_interior {
        assert!((sx[i] - r[i]).abs() < 1e-10);
    }
}

#[test]
fn exact_smoother_gives_one_step_convergence() {
    let sys = channel(2, 1, 2, false);
    let cs = condensed(&sys, 1.0);
    let n = cs.n_velocity();
    let smoother = FacetBlockSmoother::new(&cs.s, vec![(0..n).collect()], SmootherVariant::GaussSeidel, 1).unwrap();
    let aux = AuxiliarySpace {
        a: cs.s.clone(),
        smoother,
        e: build_embedding(&sys).e,
        coarse: build_coarse(&sys, 1.0, None).unwrap(),
        composition: Composition::Multiplicative,
    };
    let b = random(n, 3);
    let x = aux.apply(&b);
    let r = cs.s.matvec(&x);
    assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    // with E = 0 the additive ASP is the smoother itself
    let zero = CsrMatrix::zeros(n, aux.coarse.dim());
    let add = AuxiliarySpace {
        e: zero,
        composition: Composition::Additive,
        ..aux.clone()
    };
    assert_eq!(add.apply(&b), aux.smoother.apply(&b));
}

#[test]
fn pressure_mass_inverse() {
    let sys = channel(2, 1, 2, false);
    let nu = 1e-3;
    let cs = condensed(&sys, nu);
    let pm = PressureMass::new(&cs);
    let m: Vec<f64> = cs.mass_p.clone();
    let x = pm.apply(&m);
    assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let area = sys.mesh.area(0);
    let np = sys.dofs.n_q_local;
    let mut r = vec![0.0; pm.dim()];
    r[0] = 1.0;
    // orthonormal reference basis: mass of the first function is det(J)/ν = 2|T|/ν
    assert!((pm.apply(&r)[0] - nu / (2.0 * area)).abs() < 1e-12);
    assert!(np >= 1);
}

struct Counting<'a> {
    inner: &'a dyn Preconditioner,
    calls: AtomicUsize,
}

impl Preconditioner for Counting<'_> {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.apply(r)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

struct Dense(DMatrix<f64>);

impl Preconditioner for Dense {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(r)).as_slice().to_vec()
    }

    fn dim(&self) -> usize {
        self.0.nrows()
    }
}

#[test]
fn saddle_preconditioner_with_exact_blocks() {
    let sys = channel(2, 2, 2, false);
    let cs = condensed(&sys, 1.0);
    let direct = DirectSolver::new(&cs.s).unwrap();
    let sinv = cs.s.to_dense().try_inverse().unwrap();
    let b = cs.b.to_dense();
    let schur = &b * &sinv * b.transpose();
    let exact_p = Dense(schur.try_inverse().unwrap());
    let counting = Counting {
        inner: &direct,
        calls: AtomicUsize::new(0),
    };
    let pc = SaddlePreconditioner {
        velocity: &counting,
        pressure: &exact_p,
        b: &cs.b,
        mode: None,
    };
    let rhs = random(cs.n_velocity() + cs.n_pressure(), 4);
    let (_, rep) = gmres(
        &|x: &[f64]| cs.apply_saddle(x),
        &|r: &[f64]| pc.apply(r),
        &rhs,
        1e-12,
        20,
    )
    .unwrap();
    assert!(rep.iterations <= 3, "{}", rep.iterations);
    counting.calls.store(0, Ordering::SeqCst);
    let z = pc.apply(&vec![0.0; rhs.len()]);
    assert!(z.iter().all(|v| *v == 0.0));
    assert_eq!(counting.calls.load(Ordering::SeqCst), 2);
}
