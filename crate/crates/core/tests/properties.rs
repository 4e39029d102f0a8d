//! Property-based checks of mesh, quadrature, sparse, Krylov and condensation invariants.

use mcs_core::condensation::build_condensed;
use mcs_core::experiment::RunConfig;
use mcs_core::fespace::FeSystem;
use mcs_core::krylov::{cg, gmres, lanczos_spectrum};
use mcs_core::mesh::{build_structured, refine_uniform, BoundaryKind, BoundaryRegions, Rect};
use mcs_core::quadrature::triangle_rule;
use mcs_core::sparse::{CsrMatrix, Triplets};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn spd_matrix(n: usize, entries: &[(usize, usize, f64)]) -> CsrMatrix {
    let mut t = Triplets::new(n, n);
    let mut diag = vec![1.0; n];
    for &(i, j, v) in entries {
        let (i, j) = (i % n, j % n);
        if i != j {
            t.push(i, j, v);
            t.push(j, i, v);
            diag[i] += v.abs();
            diag[j] += v.abs();
        }
    }
    for (i, d) in diag.iter().enumerate() {
        t.push(i, i, *d);
    }
    t.to_csr()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_preserves_area_and_orientation(nx in 1usize..4, ny in 1usize..4, w in 0.5f64..3.0, h in 0.5f64..3.0) {
        let m = build_structured(nx, ny, Rect::new(0.0, w, 0.0, h)).unwrap();
        let r = refine_uniform(&m);
        r.check().unwrap();
        prop_assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        let area = |m: &mcs_core::mesh::Mesh| (0..m.num_triangles()).map(|t| m.area(t)).sum::<f64>();
        prop_assert!((area(&r) - w * h).abs() < 1e-12 * w * h);
        prop_assert!((0..r.num_triangles()).all(|t| r.area(t) > 0.0));
        prop_assert!((r.h_max - 0.5 * m.h_max).abs() < 1e-12);
        for f in r.interior_facets() {
            let adj = r.facet_adjacency[f];
            let nb = adj.neighbor.unwrap();
            prop_assert!(adj.owner < nb);
            let (_, n) = r.facet_frame(f);
            let c = |t: usize| {
                let p = r.coords(t);
                [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
            };
            let (a, b) = (c(adj.owner), c(nb));
            prop_assert!(n[0] * (b[0] - a[0]) + n[1] * (b[1] - a[1]) > 0.0);
        }
    }

    #[test]
    fn triangle_rule_is_exact_for_its_degree(deg in 0usize..12, a in 0u32..12) {
        let rule = triangle_rule(deg);
        let a = a.min(deg as u32);
        let b = deg as u32 - a;
        let q: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
            .sum();
        let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        prop_assert!((q - exact).abs() < 1e-13);
    }

    #[test]
    fn csr_agrees_with_dense_and_round_trips(n in 1usize..12, m in 1usize..12, entries in prop::collection::vec((0usize..12, 0usize..12, -5.0f64..5.0), 0..40), x in prop::collection::vec(-1.0f64..1.0, 12)) {
        let mut t = Triplets::new(n, m);
        let mut d = DMatrix::zeros(n, m);
        for &(i, j, v) in &entries {
            t.push(i % n, j % m, v);
            d[(i % n, j % m)] += v;
        }
        let a = t.to_csr();
        prop_assert!((a.to_dense() - &d).amax() < 1e-14);
        let y = a.matvec(&x[..m]);
        let yd = &d * nalgebra::DVector::from_column_slice(&x[..m]);
        prop_assert!(y.iter().zip(yd.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
        prop_assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let b = CsrMatrix::read_matrix_market(buf.as_slice()).unwrap();
        prop_assert_eq!(b.to_dense(), a.to_dense());
    }

    #[test]
    fn krylov_solvers_agree_on_spd_systems(n in 2usize..30, entries in prop::collection::vec((0usize..30, 0usize..30, -1.0f64..1.0), 0..60), rhs in prop::collection::vec(-1.0f64..1.0, 30)) {
        let a = spd_matrix(n, &entries);
        let b = &rhs[..n];
        prop_assume!(b.iter().any(|v| v.abs() > 1e-3));
        let op = |x: &[f64]| a.matvec(x);
        let id = |x: &[f64]| x.to_vec();
        let (x1, r1) = cg(&op, &id, b, 1e-10, 200).unwrap();
        let (x2, r2) = gmres(&op, &id, b, 1e-10, 200).unwrap();
        prop_assert!(r1.converged && r2.converged);
        prop_assert!(r2.is_monotone());
        let err = x1.iter().zip(&x2).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err <= 1e-7 * scale.max(1.0));
        let ev = a.to_dense().symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        let (rep, _) = lanczos_spectrum(&op, &id, n, n, 3).unwrap();
        let (l, h) = (rep.lambda_min.unwrap(), rep.lambda_max.unwrap());
        prop_assert!(l >= lo * (1.0 - 1e-8) && h <= hi * (1.0 + 1e-8));
        prop_assert!((l - lo).abs() < 1e-6 * hi && (h - hi).abs() < 1e-6 * hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn schur_norm_identity_for_random_fields(k in 2usize..4, log_nu in -3.0f64..1.0, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let m = build_structured(2, 1, Rect::unit_square()).unwrap();
        let regions = BoundaryRegions::uniform(&m, BoundaryKind::Neumann);
        let sys = FeSystem::new(m, regions, k).unwrap();
        let cs = build_condensed(&sys, 10f64.powf(log_nu), None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..sys.dofs.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = cs.schur_norm_identity(&y);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn configs_round_trip_through_toml(k in 2usize..8, level in 0usize..4, rtol in 1e-12f64..0.5, nu in 1e-6f64..10.0, steps in 1usize..4, seed in any::<u64>()) {
        let c = RunConfig { k, level, rtol, nu, steps, seed, ..RunConfig::default() };
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
