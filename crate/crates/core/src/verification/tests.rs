use super::*;
use crate::fespace::FeSystem;
use crate::mesh::side::LEFT;
use crate::mesh::{build_structured, classify_boundary, BoundaryKind, Rect, RegionRule};

fn square(n: usize) -> crate::mesh::Mesh {
    build_structured(n, n, Rect::unit_square()).unwrap()
}

#[test]
fn interpolant_reproduces_continuous_p1_and_kills_bubbles() {
    let m = square(2);
    let space = BrokenSpace::new(&m, 2);
    let f = |x: [f64; 2]| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[0] + 3.0 * x[1]];
    let u = space.project(&f);
    let vals = interp_nodal_average(&space, &u, None);
    for (v, x) in vals.iter().zip(&m.vertices) {
        let e = f(*x);
        assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
    }
    let regions = crate::mesh::BoundaryRegions::uniform(&m, BoundaryKind::Neumann);
    let sys = FeSystem::new(m.clone(), regions, 2).unwrap();
    let mut y = vec![0.0; sys.dofs.n_velocity()];
    for b in 0..sys.dofs.n_bubbles {
        y[sys.dofs.v_bubble_dof(3, b)] = 1.0 + b as f64;
    }
    let ub = broken_from_velocity(&sys, &space, &y);
    for v in interp_nodal_average(&space, &ub, None) {
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
    }
    let zero: Vec<bool> = (0..m.num_vertices()).map(|_| true).collect();
    assert!(interp_nodal_average(&space, &u, Some(&zero))
        .iter()
        .all(|v| *v == [0.0, 0.0]));
}

#[test]
fn rigid_modes_have_zero_interpolation_error() {
    let m = square(2);
    let space = BrokenSpace::new(&m, 2);
    let (lhs, rhs) = interp_forms(&space, None);
    let u = nalgebra::DVector::from_vec(space.project(&|x| [0.3 - x[1], 1.2 + x[0]]));
    let l = u.dot(&(&lhs * &u));
    eprintln!("rigid lhs {l:e} scale {:e}", lhs.amax() * u.norm_squared());
    assert!(l.abs() < 1e-12 * lhs.amax() * u.norm_squared());
    assert!(u.dot(&(&rhs * &u)).abs() < 1e-12);
}

#[test]
fn interpolation_sup_is_level_stable() {
    let rep = check_interp_bound(200, &square(2), 2, 2, 7, 0.25).unwrap();
    eprintln!("{rep}");
    let sup = rep.column("sup_ratio").unwrap();
    assert!(sup.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(relative_spread(&sup) < 0.1);
    let sampled = rep.column("sampled_max_ratio").unwrap();
    assert!(sampled.iter().zip(&sup).all(|(a, b)| a <= b));
}

#[test]
fn trace_norms_are_ordered_and_vanish_at_zero() {
    for k in 2..=4 {
        let f = trace_forms(k).unwrap();
        assert_eq!(trace_norms(&f, &vec![0.0; k + 1], &vec![0.0; k]).unwrap(), (0.0, 0.0));
        let d = f.g0.clone() - f.g.clone();
        assert!(d.symmetric_eigenvalues().min() > -1e-10 * f.g0.amax());
    }
    let r: Vec<f64> = (2..=6)
        .map(|k| trace_ratio(&trace_forms(k).unwrap()).unwrap())
        .collect();
    eprintln!("trace ratios {r:?}");
}

#[test]
fn gamma_is_order_one_and_nu_independent() {
    let rep = estimate_gamma(&[2, 3, 4], 1e-3, 10.0).unwrap();
    eprintln!("{rep}");
    assert!(rep.passed);
    let lmin = rep.column("lambda_min").unwrap();
    assert!(lmin.iter().all(|v| *v > 0.5 && *v < 1.0));
}

#[test]
fn infsup_spectrum_on_two_levels() {
    let rep = estimate_infsup(&square(4), 2, 2, 1.0, 0.2).unwrap();
    eprintln!("{rep}");
    assert!(rep.passed);
}

#[test]
fn norm_identities_hold() {
    let m = square(2);
    for k in [2, 3] {
        let regions = classify_boundary(
            &m,
            &[
                RegionRule::sides(BoundaryKind::Dirichlet, &[LEFT]),
                RegionRule::new(BoundaryKind::Neumann, |f| f.label != Some(LEFT)),
            ],
            None,
        )
        .unwrap();
        let sys = FeSystem::new(m.clone(), regions, k).unwrap();
        let rep = check_norm_equivalences(&sys, 0.01, 50, 3).unwrap();
        eprintln!("{rep}");
        assert!(rep.passed);
    }
}
