//! The γ constant of the double Schur complement, the pressure inf-sup
//! spectrum and the norm identities and equivalences of the condensed operator.

use super::{relative_spread, ConstantReport};
use crate::assembly::{assemble_all_blocks, element_eps_gram, expand_velocity, hdg_eps_norm, uh_norms};
use crate::condensation::{build_condensed, double_schur, local_split, LocalFactor};
use crate::error::{Error, Result};
use crate::fespace::FeSystem;
use crate::linalg::{generalized_eigenvalues, orthogonal_complement, psd_kernel, schur_complement, SparseCholesky};
use crate::mesh::{refine_uniform, BoundaryKind, BoundaryRegions, Mesh};
use crate::preconditioners::{assemble_coarse, build_embedding};
use crate::sparse::dot;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// The reference triangle as a one-element system without constrained dofs.
pub fn reference_system(k: usize) -> Result<FeSystem> {
    let m = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], |_, _| {
        Some(0)
    })?;
    let regions = BoundaryRegions::uniform(&m, BoundaryKind::Neumann);
    FeSystem::new(m, regions, k)
}

/// `(γ, smallest eigenvalue)` of the pencil (ν‖·‖²_{ε,h,∂}, ‖·‖²_{S^∂}) on the
/// reference triangle, restricted to the complement of the common kernel (rigid modes).
pub fn gamma_reference(k: usize, nu: f64) -> Result<(f64, f64)> {
    let sys = reference_system(k)?;
    let blocks = assemble_all_blocks(&sys, nu, None);
    let lf = LocalFactor::new(&blocks[0], sys.dofs.n_v_local())?;
    let (gamma, interior) = local_split(&sys);
    let s_bd = schur_complement(&lf.s_t, &gamma, &interior)?;
    let g = element_eps_gram(&sys, &sys.tab(0)) * nu;
    let g_bd = schur_complement(&g, &gamma, &interior)?;
    let z = psd_kernel(&s_bd, 1e-10);
    if z.ncols() != 3 {
        return Err(Error::Verification(format!(
            "S^∂ kernel on the free reference element has dimension {} (expected 3 rigid modes)",
            z.ncols()
        )));
    }
    let gz = (z.transpose() * &g_bd * &z).symmetric_eigenvalues().amax() / g_bd.amax();
    if gz > 1e-8 {
        return Err(Error::Verification(
            "ε,h,∂ norm does not vanish on the rigid modes".into(),
        ));
    }
    let q = orthogonal_complement(&z, s_bd.nrows());
    let ev = generalized_eigenvalues(&(q.transpose() * &g_bd * &q), &(q.transpose() * &s_bd * &q))?;
    Ok((*ev.last().expect("nonempty"), ev[0]))
}

/// γ(k) for the given degrees at ν = 1 and ν = `nu_alt`.
pub fn estimate_gamma(ks: &[usize], nu_alt: f64, bound: f64) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new("gamma", &["k", "gamma", "lambda_min", "gamma_alt_nu", "nu_rel_diff"]);
    rep.notes.push(format!(
        "unit triangle; largest eigenvalue of (ν‖·‖²_ε,h,∂ , ‖·‖²_S∂) off the rigid modes; ν ∈ {{1, {nu_alt:e}}}"
    ));
    for &k in ks {
        let (g1, l1) = gamma_reference(k, 1.0)?;
        let (g2, _) = gamma_reference(k, nu_alt)?;
        rep.push(vec![k as f64, g1, l1, g2, (g1 - g2).abs() / g1]);
    }
    let g = rep.column("gamma").unwrap_or_default();
    let lmin = rep.column("lambda_min").unwrap_or_default();
    let diff = rep.column("nu_rel_diff").unwrap_or_default();
    rep.check(g.iter().all(|v| v.is_finite()), "γ finite");
    rep.check(g.iter().all(|v| *v >= 1.0 - 1e-8), "γ >= 1 - 1e-8");
    let lo = lmin.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.notes.push(format!(
        "smallest eigenvalue {lo:.4}: ‖·‖²_S∂ <= ν‖·‖²_ε,h,∂ holds only up to a factor {:.4} here",
        1.0 / lo
    ));
    rep.check(diff.iter().all(|v| *v <= 1e-8), "ν-independent to 1e-8");
    rep.check(g.iter().all(|v| *v <= bound), format!("γ <= {bound}"));
    if ks.len() >= 2 {
        let kk: Vec<f64> = ks.iter().map(|k| *k as f64).collect();
        rep.fit_exponent = Some(super::loglog_slope(&kk, &g));
    }
    Ok(rep)
}

/// Eigenvalues of M_p^{-1} B S^{-1} Bᵀ, ascending, with the numerically zero ones counted.
#[derive(Debug, Clone)]
pub struct InfSupSpectrum {
    pub eigenvalues: Vec<f64>,
    pub zero_count: usize,
    pub min_nonzero: f64,
    pub max: f64,
}

pub fn infsup_eigenvalues(sys: &FeSystem, nu: f64) -> Result<InfSupSpectrum> {
    let cs = build_condensed(sys, nu, None)?;
    let chol = SparseCholesky::new(&cs.s)?;
    let np = cs.n_pressure();
    let bt = cs.b.transpose();
    let mut p = DMatrix::zeros(np, np);
    for j in 0..np {
        let mut e = vec![0.0; np];
        e[j] = 1.0;
        let col = cs.b.matvec(&chol.solve(&bt.matvec(&e)));
        for i in 0..np {
            p[(i, j)] = col[i] / (cs.mass_p[i] * cs.mass_p[j]).sqrt();
        }
    }
    let p = (&p + p.transpose()) * 0.5;
    let mut ev: Vec<f64> = p.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let max = *ev
        .last()
        .ok_or_else(|| Error::Verification("no pressure dofs".into()))?;
    let zero_count = ev.iter().filter(|v| v.abs() <= 1e-10 * max).count();
    let min_nonzero = ev[zero_count];
    Ok(InfSupSpectrum {
        eigenvalues: ev,
        zero_count,
        min_nonzero,
        max,
    })
}

/// Inf-sup spectrum on `base` (pure Dirichlet) and its refinements.
pub fn estimate_infsup(base: &Mesh, levels: usize, k: usize, nu: f64, tolerance: f64) -> Result<ConstantReport> {
    let mut rep = ConstantReport::new(
        "inf-sup",
        &["level", "triangles", "zero_eigenvalues", "lambda_min", "lambda_max"],
    );
    rep.notes
        .push("dense eigenvalues of M_p^{-1} B S^{-1} Bᵀ with the ν^{-1}-scaled pressure mass".into());
    let mut m = base.clone();
    for level in 0..levels {
        if level > 0 {
            m = refine_uniform(&m);
        }
        let regions = BoundaryRegions::uniform(&m, BoundaryKind::Dirichlet);
        let sys = FeSystem::new(m.clone(), regions, k)?;
        let s = infsup_eigenvalues(&sys, nu)?;
        rep.push(vec![
            level as f64,
            m.num_triangles() as f64,
            s.zero_count as f64,
            s.min_nonzero,
            s.max,
        ]);
    }
    let zeros = rep.column("zero_eigenvalues").unwrap_or_default();
    rep.check(
        zeros.iter().all(|z| *z == 1.0),
        "exactly one zero eigenvalue (constant pressure)",
    );
    let lo = relative_spread(&rep.column("lambda_min").unwrap_or_default());
    let hi = relative_spread(&rep.column("lambda_max").unwrap_or_default());
    rep.check(lo <= tolerance, format!("λ_min level spread {lo:.4} <= {tolerance}"));
    rep.check(hi <= tolerance, format!("λ_max level spread {hi:.4} <= {tolerance}"));
    Ok(rep)
}

fn random(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Identities and equivalences of the condensed operator over random fields.
///
/// Rows (by `check` id):
/// 1. ‖y‖²_S against ν^{-1}‖σ‖² + ν/2 ‖div u‖² (relative difference),
/// 2. ‖y‖²_S / (ν‖y‖²_ε,h) (asserted ≤ 1 + 1e-10),
/// 3. ‖Eū‖²_S against ν‖ε(ū)‖² for random continuous P1 ū (relative difference),
/// 4. ‖x‖²_S∂ against ‖ℋx‖²_S (relative difference),
/// 5. ‖·‖²_U_h / (|·|²_U_h,* + ½‖div u‖²) with random ω.
///
/// The system must have homogeneous Dirichlet data and no Γ_Ñ part.
pub fn check_norm_equivalences(sys: &FeSystem, nu: f64, samples: usize, seed: u64) -> Result<ConstantReport> {
    if !sys.regions.tilde_neumann_facets.is_empty() {
        return Err(Error::Config("norm checks need a system without Γ_Ñ".into()));
    }
    let mut cs = build_condensed(sys, nu, None)?;
    double_schur(sys, &mut cs)?;
    let emb = build_embedding(sys);
    let a_bar = assemble_coarse(sys, nu, None);
    let zero = vec![0.0; sys.dofs.n_velocity()];
    let n = cs.n_velocity();
    let ni = cs.n_interior;
    let nw = sys.dofs.n_omega();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut stats = [(f64::MAX, 0.0f64); 5];
    let mut upd = |i: usize, v: f64| {
        stats[i].0 = stats[i].0.min(v);
        stats[i].1 = stats[i].1.max(v);
    };
    for _ in 0..samples {
        let x = random(&mut rng, n);
        let y = expand_velocity(sys, &x, &zero);
        let sx = dot(&x, &cs.s.matvec(&x));
        let (lhs, rhs) = cs.schur_norm_identity(&y);
        upd(0, rel(lhs, rhs).max(rel(lhs, sx)));
        let e = hdg_eps_norm(sys, &y);
        upd(1, sx / (nu * e * e));
        let ub = random(&mut rng, sys.dofs.n_vbar_free);
        let ex = emb.e.matvec(&ub);
        upd(2, rel(dot(&ex, &cs.s.matvec(&ex)), dot(&ub, &a_bar.matvec(&ub))));
        let xh = cs.harmonic_extend(&x)?;
        let ds = cs.double()?;
        let sbd = dot(&x[ni..], &ds.s_bd.matvec(&x[ni..]));
        upd(3, rel(sbd, dot(&xh, &cs.s.matvec(&xh))));
        let om = random(&mut rng, nw);
        let u = uh_norms(sys, &y, &om);
        upd(4, u.uh * u.uh / (u.star * u.star + 0.5 * u.div * u.div));
    }
    let mut rep = ConstantReport::new("norm identities", &["check", "min", "max"]);
    rep.notes.push(format!(
        "{samples} standard-normal fields (seed {seed}), k = {}, {} triangles",
        sys.k,
        sys.n_triangles()
    ));
    for (i, (lo, hi)) in stats.iter().enumerate() {
        rep.push(vec![(i + 1) as f64, *lo, *hi]);
    }
    rep.check(
        stats[0].1 <= 1e-10,
        format!("‖·‖_S² = ν⁻¹‖σ‖² + ν/2‖div u‖² (max rel {:.2e})", stats[0].1),
    );
    rep.check(
        stats[1].1 <= 1.0 + 1e-10,
        format!("‖·‖_S² <= ν‖·‖²_ε,h (max ratio {:.12})", stats[1].1),
    );
    rep.check(
        stats[2].1 <= 1e-10,
        format!("‖Eū‖_S² = ν‖ε(ū)‖² (max rel {:.2e})", stats[2].1),
    );
    rep.check(
        stats[3].1 <= 1e-10,
        format!("‖x‖²_S∂ = ‖ℋx‖²_S (max rel {:.2e})", stats[3].1),
    );
    rep.check(
        stats[4].0 > 0.0 && stats[4].1.is_finite(),
        format!("U_h norm equivalence ratios in [{:.4}, {:.4}]", stats[4].0, stats[4].1),
    );
    let z = DVector::<f64>::zeros(n);
    let yz = expand_velocity(sys, z.as_slice(), &zero);
    let (a, b) = cs.schur_norm_identity(&yz);
    rep.check(
        a == 0.0 && b == 0.0 && hdg_eps_norm(sys, &yz) == 0.0,
        "zero field gives zero norms",
    );
    Ok(rep)
}
