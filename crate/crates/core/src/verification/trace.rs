//! Discrete trace norms of facet data on the reference triangle, defined by
//! constrained ε-energy minimization, and their inverse-estimate ratio.

use crate::error::{Error, Result};
use crate::fespace::reference_edge;
use crate::fespace::reference_edge_point;
use crate::linalg::generalized_eigenvalues;
use crate::polynomial::{shifted_legendre, OrthoBasis};
use crate::quadrature::{edge_rule, triangle_rule};
use nalgebra::{DMatrix, DVector};

/// Gram matrices of the two squared trace norms over the facet data
/// `(a_0..a_k, b_0..b_{k−1})`: the normal trace `u_n = Σ a_j P_j(2s−1)` and the
/// tangential facet value `û_t = Σ b_j P_j(2s−1)` on reference edge 0.
#[derive(Debug, Clone)]
pub struct TraceForms {
    pub k: usize,
    /// ‖·‖²_{ε,F}: free normal trace on the other edges, no extra jump terms.
    pub g: DMatrix<f64>,
    /// ‖·‖²_{ε,F,0}: zero normal trace and tangential jump terms on the other edges.
    pub g0: DMatrix<f64>,
}

/// Facet moments of the reference triangle: `(normal, tangential)` with rows
/// `∫ (w·n) P_m` for m ≤ k and `∫ (w·t) P_m` for m < k over the 2n coefficients of w.
fn edge_moments(ortho: &OrthoBasis, k: usize, e: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ortho.dim();
    let (nrm, tng, len) = reference_edge(e);
    let rule = edge_rule(2 * k + 2);
    let mut mn = DMatrix::zeros(k + 1, 2 * n);
    let mut mt = DMatrix::zeros(k, 2 * n);
    for (s, w) in rule.points.iter().zip(&rule.weights) {
        let psi = ortho.eval(reference_edge_point(e, *s));
        let leg = shifted_legendre(k, *s);
        let w = w * len;
        for i in 0..n {
            for c in 0..2 {
                for m in 0..=k {
                    mn[(m, c * n + i)] += w * psi.val[i] * nrm[c] * leg[m];
                }
                for m in 0..k {
                    mt[(m, c * n + i)] += w * psi.val[i] * tng[c] * leg[m];
                }
            }
        }
    }
    (mn, mt)
}

/// Legendre-formula weight of moment m in the squared jump norm of Π^{k−1}(·).
fn jump_weight(k: usize, m: usize, len: f64, h: f64) -> f64 {
    (k * (k - m + 1) * (2 * m + 1)) as f64 / (len * h)
}

/// ε-Gram matrix over the 2n coefficients of a vector polynomial on the reference triangle.
fn eps_gram(ortho: &OrthoBasis, k: usize) -> DMatrix<f64> {
    let n = ortho.dim();
    let rule = triangle_rule(2 * k);
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let e = ortho.eval(*p);
        let mut e11 = DVector::zeros(2 * n);
        let mut e22 = DVector::zeros(2 * n);
        let mut e12 = DVector::zeros(2 * n);
        for i in 0..n {
            e11[i] = e.dx[i];
            e22[n + i] = e.dy[i];
            e12[i] = 0.5 * e.dy[i];
            e12[n + i] = 0.5 * e.dx[i];
        }
        g.ger(*w, &e11, &e11, 1.0);
        g.ger(*w, &e22, &e22, 1.0);
        g.ger(2.0 * w, &e12, &e12, 1.0);
    }
    g
}

/// Minimize `[w; d]ᵀ H [w; d]` over w subject to `C_w w = C_d d` for every d,
/// returning the resulting quadratic form in d (dense KKT solve).
fn constrained_minimum(h: &DMatrix<f64>, cw: &DMatrix<f64>, cd: &DMatrix<f64>, nw: usize) -> Result<DMatrix<f64>> {
    let nd = h.nrows() - nw;
    let nc = cw.nrows();
    let mut kkt = DMatrix::zeros(nw + nc, nw + nc);
    kkt.view_mut((0, 0), (nw, nw)).copy_from(&h.view((0, 0), (nw, nw)));
    kkt.view_mut((0, nw), (nw, nc)).copy_from(&cw.transpose());
    kkt.view_mut((nw, 0), (nc, nw)).copy_from(cw);
    let mut rhs = DMatrix::zeros(nw + nc, nd);
    rhs.view_mut((0, 0), (nw, nd)).copy_from(&(-h.view((0, nw), (nw, nd))));
    rhs.view_mut((nw, 0), (nc, nd)).copy_from(cd);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("trace-norm KKT system is singular (inconsistent constraints)".into()))?;
    let mut t = DMatrix::zeros(nw + nd, nd);
    t.view_mut((0, 0), (nw, nd)).copy_from(&sol.view((0, 0), (nw, nd)));
    t.view_mut((nw, 0), (nd, nd)).copy_from(&DMatrix::identity(nd, nd));
    let g = t.transpose() * h * &t;
    Ok((&g + g.transpose()) * 0.5)
}

/// Both trace-norm Gram matrices at degree k ≥ 2.
pub fn trace_forms(k: usize) -> Result<TraceForms> {
    if k < 2 {
        return Err(Error::Degree(k));
    }
    let ortho = OrthoBasis::new(k);
    let n = ortho.dim();
    let nw = 2 * n;
    let nd = 2 * k + 1;
    let h = 2f64.sqrt();
    let moments: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..3).map(|e| edge_moments(&ortho, k, e)).collect();
    let lens: Vec<f64> = (0..3).map(|e| reference_edge(e).2).collect();
    let mass = |m: usize, len: f64| len / (2 * m + 1) as f64;

    let mut hf = DMatrix::zeros(nw + nd, nw + nd);
    hf.view_mut((0, 0), (nw, nw)).copy_from(&eps_gram(&ortho, k));
    // tangential jump on F: ∫(w·t − û_t) P_m
    for m in 0..k {
        let mut r = DVector::zeros(nw + nd);
        for j in 0..nw {
            r[j] = moments[0].1[(m, j)];
        }
        r[nw + k + 1 + m] = -mass(m, lens[0]);
        hf.ger(jump_weight(k, m, lens[0], h), &r, &r, 1.0);
    }
    let mut cw = moments[0].0.clone();
    let mut cd = DMatrix::zeros(k + 1, nd);
    for m in 0..=k {
        cd[(m, m)] = mass(m, lens[0]);
    }
    let g = constrained_minimum(&hf, &cw, &cd, nw)?;

    let mut h0 = hf.clone();
    for e in 1..3 {
        for m in 0..k {
            let mut r = DVector::zeros(nw + nd);
            for j in 0..nw {
                r[j] = moments[e].1[(m, j)];
            }
            h0.ger(jump_weight(k, m, lens[e], h), &r, &r, 1.0);
        }
    }
    for e in 1..3 {
        cw = DMatrix::from_rows(
            &cw.row_iter()
                .chain(moments[e].0.row_iter())
                .map(|r| r.into_owned())
                .collect::<Vec<_>>(),
        );
        let r = cd.nrows();
        cd = cd.insert_rows(r, k + 1, 0.0);
    }
    let g0 = constrained_minimum(&h0, &cw, &cd, nw)?;
    Ok(TraceForms { k, g, g0 })
}

/// `(‖(u, û)‖_{ε,F}, ‖(u, û)‖_{ε,F,0})` for Legendre coefficients of u_n (k+1) and û_t (k).
pub fn trace_norms(forms: &TraceForms, un: &[f64], ut: &[f64]) -> Result<(f64, f64)> {
    let k = forms.k;
    if un.len() != k + 1 || ut.len() != k {
        return Err(Error::Dimension(
            "trace data must have k+1 normal and k tangential coefficients".into(),
        ));
    }
    let d = DVector::from_iterator(2 * k + 1, un.iter().chain(ut).copied());
    Ok((
        d.dot(&(&forms.g * &d)).max(0.0).sqrt(),
        d.dot(&(&forms.g0 * &d)).max(0.0).sqrt(),
    ))
}

/// Largest ratio ‖·‖²_{ε,F,0} / ‖·‖²_{ε,F} on data with vanishing rigid-mode
/// projection (a_0 = a_1 = b_0 = 0), by generalized eigensolve.
pub fn trace_ratio(forms: &TraceForms) -> Result<f64> {
    let k = forms.k;
    let keep: Vec<usize> = (2..=k).chain(k + 2..2 * k + 1).collect();
    let g = forms.g.select_rows(&keep).select_columns(&keep);
    let g0 = forms.g0.select_rows(&keep).select_columns(&keep);
    let ev = generalized_eigenvalues(&g0, &g)?;
    ev.last()
        .copied()
        .ok_or_else(|| Error::Verification("empty trace subspace".into()))
}

/// Trace ratios for each k against c (log k)³, with c calibrated at the first k.
pub fn estimate_trace(ks: &[usize]) -> Result<super::ConstantReport> {
    let mut rep = super::ConstantReport::new("trace inverse estimate", &["k", "ratio", "bound"]);
    let mut ratios = Vec::new();
    for &k in ks {
        ratios.push((k, trace_ratio(&trace_forms(k)?)?));
    }
    let logk3 = |k: usize| (k as f64).ln().powi(3);
    let c = ratios.first().map_or(0.0, |r| r.1 / logk3(r.0));
    for (k, r) in &ratios {
        rep.push(vec![*k as f64, *r, c * logk3(*k)]);
    }
    rep.notes.push(format!(
        "reference triangle, facet 0; max ratio on a_0 = a_1 = b_0 = 0 by generalized eigensolve; c = {c:.4}"
    ));
    let ok = rep
        .rows
        .iter()
        .all(|r| r[1].is_finite() && r[1] >= 1.0 - 1e-10 && r[1] <= r[2] * (1.0 + 1e-12));
    rep.check(ok, "1 <= ratio(k) <= c (log k)³");
    let kk = rep.column("k").unwrap_or_default();
    rep.fit_exponent = Some(super::loglog_slope(&kk, &rep.column("ratio").unwrap_or_default()));
    Ok(rep)
}
