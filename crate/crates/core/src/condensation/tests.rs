use super::*;
use crate::assembly::{assemble_full_from_blocks, interpolate_velocity, project_element_scalar};
use crate::fespace::{matvec, Vec2};
use crate::mesh::side::{BOTTOM, LEFT, RIGHT, TOP};
use crate::mesh::{build_structured, classify_boundary, BoundaryKind, BoundaryRegions, Rect, RegionRule};
use nalgebra::DMatrix;
use std::sync::Arc;

fn mixed_system(nx: usize, ny: usize, k: usize) -> FeSystem {
    let m = build_structured(nx, ny, Rect::unit_square()).unwrap();
    let rules = vec![
        RegionRule::sides(BoundaryKind::Dirichlet, &[BOTTOM, LEFT, TOP]),
        RegionRule::sides(BoundaryKind::Neumann, &[RIGHT]),
    ];
    let g: crate::mesh::VectorField = Arc::new(|x: Vec2| [x[1] * (1.0 - x[1]), 0.3 * x[0]]);
    let r = classify_boundary(&m, &rules, Some(g)).unwrap();
    FeSystem::new(m, r, k).unwrap()
}

fn force() -> crate::assembly::BodyForce {
    Arc::new(|x: Vec2| [(3.0 * x[0]).sin() + x[1], x[0] * x[1] - 1.0])
}

fn neumann_system(nx: usize, k: usize) -> FeSystem {
    let m = build_structured(nx, nx, Rect::unit_square()).unwrap();
    let r = BoundaryRegions::uniform(&m, BoundaryKind::Neumann);
    FeSystem::new(m, r, k).unwrap()
}

fn dense_schur(k: &DMatrix<f64>, keep: std::ops::Range<usize>, elim: std::ops::Range<usize>) -> DMatrix<f64> {
    let kk: Vec<usize> = keep.collect();
    let ee: Vec<usize> = elim.collect();
    let a = k.select_rows(&kk).select_columns(&kk);
    let b = k.select_rows(&kk).select_columns(&ee);
    let c = k.select_rows(&ee).select_columns(&ee);
    let x = c.lu().solve(&b.transpose()).unwrap();
    a - b * x
}

#[test]
fn condensed_operator_matches_dense_schur_complement() {
    let s = mixed_system(1, 1, 2);
    let nu = 0.7;
    let blocks = assemble_all_blocks(&s, nu, None);
    let full = assemble_full_from_blocks(&s, &blocks).unwrap();
    let cs = condense_sigma_omega(&s, &blocks, nu).unwrap();
    let o = full.offsets;
    let dense = dense_schur(&full.matrix.to_dense(), o.velocity..o.pressure, 0..o.velocity);
    assert!((dense - cs.s.to_dense()).amax() < 1e-10);
    assert!(cs.s.asymmetry() < 1e-12);
    let ev = cs.s.to_dense().symmetric_eigenvalues();
    assert!(ev.min() > 0.0);
}

#[test]
fn double_schur_matches_dense_schur_of_s() {
    let s = mixed_system(1, 1, 2);
    let mut cs = build_condensed(&s, 1.0, None).unwrap();
    double_schur(&s, &mut cs).unwrap();
    let ni = cs.n_interior;
    let n = cs.n_velocity();
    let dense = dense_schur(&cs.s.to_dense(), ni..n, 0..ni);
    let sd = cs.double().unwrap().s_bd.to_dense();
    assert!((dense - &sd).amax() < 1e-10);
    assert!(sd.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn full_and_condensed_solutions_agree() {
    let s = mixed_system(1, 1, 2);
    let nu = 0.5;
    let f = force();
    let blocks = assemble_all_blocks(&s, nu, Some(&f));
    let full = assemble_full_from_blocks(&s, &blocks).unwrap();
    let xf = full
        .matrix
        .to_dense()
        .lu()
        .solve(&DVector::from_vec(full.rhs.clone()))
        .unwrap();
    let cs = condense_sigma_omega(&s, &blocks, nu).unwrap();
    let n = cs.n_velocity();
    let np = cs.n_pressure();
    let mut k = DMatrix::zeros(n + np, n + np);
    k.view_mut((0, 0), (n, n)).copy_from(&cs.s.to_dense());
    let b = cs.b.to_dense();
    k.view_mut((n, 0), (np, n)).copy_from(&b);
    k.view_mut((0, n), (n, np)).copy_from(&b.transpose());
    let xc = k.lu().solve(&DVector::from_vec(cs.saddle_rhs())).unwrap();
    let o = full.offsets;
    let scale = xf.amax();
    for i in 0..n {
        assert!((xf[o.velocity + i] - xc[i]).abs() < 1e-9 * scale);
    }
    for i in 0..np {
        assert!((xf[o.pressure + i] - xc[n + i]).abs() < 1e-9 * scale);
    }
    let y = cs.expand(&s, &xc.as_slice()[..n]);
    let rec = cs.recover_stress(&y);
    for i in 0..rec.sigma.len() {
        assert!((xf[o.sigma + i] - rec.sigma[i]).abs() < 1e-9 * scale);
    }
    for i in 0..rec.omega.len() {
        assert!((xf[o.omega + i] - rec.omega[i]).abs() < 1e-9 * scale);
    }
}

#[test]
fn schur_norm_identity_on_random_fields() {
    use rand::{Rng, SeedableRng};
    let s = neumann_system(2, 3);
    let cs = build_condensed(&s, 0.3, None).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let y: Vec<f64> = (0..s.dofs.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = cs.schur_norm_identity(&y);
        assert!((a - b).abs() < 1e-10 * a, "{a} {b}");
    }
}

fn sigma_at(s: &FeSystem, t: usize, coef: &[f64], q: usize) -> [[f64; 2]; 2] {
    let tab = s.tab(t);
    let ns = s.dofs.n_sigma_local;
    let nq = tab.nq();
    let mut out = [[0.0; 2]; 2];
    for i in 0..ns {
        let si = tab.sig[i * nq + q];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] += coef[t * ns + i] * si[a][b];
            }
        }
    }
    out
}

#[test]
fn local_projection_of_rigid_and_quadratic_fields() {
    let s = neumann_system(2, 2);
    let nu = 0.25;
    let cs = build_condensed(&s, nu, None).unwrap();
    let rigid = |x: Vec2| [1.0 + 0.5 * x[1], 2.0 - 0.5 * x[0]];
    let y = interpolate_velocity(&s, &rigid);
    let rec = cs.recover_stress(&y);
    assert!(rec.sigma.iter().all(|v| v.abs() < 1e-11));
    let nw = s.dofs.n_omega_local;
    for t in 0..s.n_triangles() {
        // curl = ∂₁u₂ − ∂₂u₁ = −1
        let om = project_element_scalar(&s, t, nw, &|_| -1.0);
        for i in 0..nw {
            assert!((rec.omega[t * nw + i] - om[i]).abs() < 1e-11);
        }
    }
    // quadratic field: σ = −ν dev ε(u)
    let u = |x: Vec2| [x[0] * x[0] - x[1] * x[0], x[1] * x[1] + 2.0 * x[0] * x[1]];
    let y = interpolate_velocity(&s, &u);
    let rec = cs.recover_stress(&y);
    for t in 0..s.n_triangles() {
        let tab = s.tab(t);
        for q in 0..tab.nq() {
            let x = tab.x[q];
            let g = [[2.0 * x[0] - x[1], -x[0]], [2.0 * x[1], 2.0 * x[1] + 2.0 * x[0]]];
            let mut e = [
                [g[0][0], 0.5 * (g[0][1] + g[1][0])],
                [0.5 * (g[0][1] + g[1][0]), g[1][1]],
            ];
            let tr = 0.5 * (e[0][0] + e[1][1]);
            e[0][0] -= tr;
            e[1][1] -= tr;
            let sg = sigma_at(&s, t, &rec.sigma, q);
            for a in 0..2 {
                for b in 0..2 {
                    assert!((sg[a][b] + nu * e[a][b]).abs() < 1e-11);
                }
            }
        }
    }
    let lf = &cs.locals[0];
    let (s0, w0) = lf.local_projection_solve(&DVector::zeros(lf.x.nrows()));
    assert!(s0.amax() == 0.0 && w0.amax() == 0.0);
}

#[test]
fn conforming_fields_have_energy_nu_eps() {
    let s = neumann_system(2, 3);
    let nu = 0.4;
    let cs = build_condensed(&s, nu, None).unwrap();
    let u = |x: Vec2| [x[0].powi(3) - x[1] * x[0], x[1] * x[1] * x[0] + 2.0 * x[1]];
    let y = interpolate_velocity(&s, &u);
    let (a, _) = cs.schur_norm_identity(&y);
    let mut eps2 = 0.0;
    for t in 0..s.n_triangles() {
        let tab = s.tab(t);
        for q in 0..tab.nq() {
            let x = tab.x[q];
            let g = [
                [3.0 * x[0] * x[0] - x[1], -x[0]],
                [x[1] * x[1], 2.0 * x[1] * x[0] + 2.0],
            ];
            let o = 0.5 * (g[0][1] + g[1][0]);
            eps2 += tab.w[q] * (g[0][0].powi(2) + 2.0 * o * o + g[1][1].powi(2));
        }
    }
    assert!((a - nu * eps2).abs() < 1e-10 * a, "{a} {}", nu * eps2);
}

#[test]
fn harmonic_extension_and_factorized_product() {
    use rand::{Rng, SeedableRng};
    let s = mixed_system(2, 2, 3);
    let mut cs = build_condensed(&s, 1.0, None).unwrap();
    double_schur(&s, &mut cs).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n = cs.n_velocity();
    let ni = cs.n_interior;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let direct = cs.s.matvec(&x);
    let fact = cs.apply_s_factorized(&x).unwrap();
    let nrm = crate::sparse::norm(&direct);
    for i in 0..n {
        assert!((direct[i] - fact[i]).abs() < 1e-12 * nrm);
    }
    let h = cs.harmonic_extend(&x).unwrap();
    let hh = cs.harmonic_extend(&h).unwrap();
    assert_eq!(h, hh);
    let en = |v: &[f64]| crate::sparse::dot(v, &cs.s.matvec(v));
    assert!(en(&h) <= en(&x));
    let sd = &cs.double().unwrap().s_bd;
    let ed = crate::sparse::dot(&h[ni..], &sd.matvec(&h[ni..]));
    assert!((en(&h) - ed).abs() < 1e-10 * ed);
    // S applied to a harmonic extension vanishes on the bubble rows
    let sh = cs.s.matvec(&h);
    assert!(sh[..ni].iter().all(|v| v.abs() < 1e-10 * nrm));
    let _ = matvec(&[[1.0, 0.0], [0.0, 1.0]], &[0.0, 0.0]);
}
