//! Krylov solvers: right-preconditioned full GMRES, preconditioned CG with a
//! curvature check, and Lanczos estimates of extreme generalized eigenvalues.

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::io::Write;

/// Linear operator given by its action.
pub type Operator<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

#[derive(Debug, Clone, Default, Serialize)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Relative residual after each iteration, starting with the initial one.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub cond: Option<f64>,
    pub lanczos_steps: Option<usize>,
}

impl KrylovReport {
    /// Residual history as CSV with columns `iteration,relative_residual`.
    pub fn write_residuals_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "relative_residual"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for (i, r) in self.residuals.iter().enumerate() {
            wr.write_record([i.to_string(), format!("{r:e}")])
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// True if the residual history never increases.
    pub fn is_monotone(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

fn check_finite(v: &[f64], it: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NotFinite(it))
    }
}

/// Full (unrestarted) GMRES with right preconditioning, modified Gram-Schmidt
/// and Givens rotations. Starts from zero.
pub fn gmres(a: Operator, m: Operator, b: &[f64], rtol: f64, maxit: usize) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    let bn = norm(b);
    let mut rep = KrylovReport {
        residuals: vec![1.0],
        ..Default::default()
    };
    if bn == 0.0 {
        rep.converged = true;
        rep.residuals = vec![0.0];
        return Ok((vec![0.0; n], rep));
    }
    let mut v: Vec<Vec<f64>> = vec![b.iter().map(|x| x / bn).collect()];
    let mut z: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let (mut cs, mut sn) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut g = vec![bn];
    let mut j = 0;
    while j < maxit {
        let zj = m(&v[j]);
        check_finite(&zj, j)?;
        let mut w = a(&zj);
        check_finite(&w, j)?;
        z.push(zj);
        let mut col = vec![0.0; j + 2];
        for i in 0..=j {
            col[i] = dot(&w, &v[i]);
            axpy(-col[i], &v[i], &mut w);
        }
        let hn = norm(&w);
        col[j + 1] = hn;
        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let r = col[j].hypot(col[j + 1]);
        let (c, s) = if r == 0.0 {
            (1.0, 0.0)
        } else {
            (col[j] / r, col[j + 1] / r)
        };
        cs.push(c);
        sn.push(s);
        col[j] = r;
        col[j + 1] = 0.0;
        g.push(-s * g[j]);
        g[j] *= c;
        h.push(col);
        j += 1;
        let rel = g[j].abs() / bn;
        if !rel.is_finite() {
            return Err(Error::NotFinite(j));
        }
        rep.residuals.push(rel);
        if rel <= rtol || hn <= 1e-14 * bn {
            rep.converged = rel <= rtol || hn <= 1e-14 * bn;
            break;
        }
        v.push(w.iter().map(|x| x / hn).collect());
    }
    // back substitution for the least-squares coefficients
    let mut y = vec![0.0; j];
    for i in (0..j).rev() {
        let mut s = g[i];
        for l in i + 1..j {
            s -= h[l][i] * y[l];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![0.0; n];
    for (i, zi) in z.iter().enumerate().take(j) {
        axpy(y[i], zi, &mut x);
    }
    rep.iterations = j;
    Ok((x, rep))
}

/// Preconditioned conjugate gradients. Fails with [`Error::NegativeCurvature`]
/// if `pᵀAp ≤ 0` is ever observed.
pub fn cg(a: Operator, m: Operator, b: &[f64], rtol: f64, maxit: usize) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    let bn = norm(b);
    let mut rep = KrylovReport {
        residuals: vec![1.0],
        ..Default::default()
    };
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        rep.converged = true;
        return Ok((x, rep));
    }
    let mut r = b.to_vec();
    let mut z = m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        let ap = a(&p);
        check_finite(&ap, it)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NegativeCurvature(pap));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm(&r) / bn;
        rep.residuals.push(rel);
        rep.iterations = it;
        if rel <= rtol {
            rep.converged = true;
            break;
        }
        z = m(&r);
        let rz_new = dot(&r, &z);
        if rz_new <= 0.0 {
            return Err(Error::NegativeCurvature(rz_new));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((x, rep))
}

/// Extreme eigenvalues of `B^{-1}A` for SPD `A` and `B`, by Lanczos in the
/// A-inner product with full reorthogonalization.
///
/// Returns the report with `lambda_min`, `lambda_max` and `cond` filled in, and
/// all Ritz values in ascending order. A breakdown (invariant subspace) restarts
/// with a fresh random vector orthogonal to the current basis, at most 3 times.
pub fn lanczos_spectrum(
    a: Operator,
    binv: Operator,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<(KrylovReport, Vec<f64>)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let random =
        |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let steps = steps.min(n);
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut avs: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut restarts = 0;

    // A-orthonormalize a vector against the basis; returns (v, Av) or None if it vanishes
    let orth = |mut w: Vec<f64>, vs: &[Vec<f64>], avs: &[Vec<f64>]| -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
        let w0 = dot(&w, &a(&w)).max(0.0).sqrt();
        for _ in 0..2 {
            for (v, av) in vs.iter().zip(avs) {
                let c = dot(&w, av);
                axpy(-c, v, &mut w);
            }
        }
        let aw = a(&w);
        check_finite(&aw, vs.len())?;
        let nw2 = dot(&w, &aw);
        if nw2 < 0.0 {
            return Err(Error::NegativeCurvature(nw2));
        }
        let nw = nw2.sqrt();
        if nw <= 1e-10 * w0 || nw == 0.0 {
            return Ok(None);
        }
        Ok(Some((
            w.iter().map(|x| x / nw).collect(),
            aw.iter().map(|x| x / nw).collect(),
            nw,
        )))
    };

    let mut start = random(&mut rng);
    loop {
        match orth(start.clone(), &vs, &avs)? {
            Some((v, av, _)) => {
                vs.push(v);
                avs.push(av);
                break;
            }
            None => {
                restarts += 1;
                if restarts > 3 {
                    return Err(Error::Singular("Lanczos could not find a start vector".into()));
                }
                start = random(&mut rng);
            }
        }
    }
    while vs.len() <= steps {
        let j = vs.len() - 1;
        let w = binv(&avs[j]);
        check_finite(&w, j)?;
        let aj = dot(&w, &avs[j]);
        alpha.push(aj);
        if vs.len() == steps {
            break;
        }
        match orth(w, &vs, &avs)? {
            Some((v, av, nw)) => {
                beta.push(nw);
                vs.push(v);
                avs.push(av);
            }
            None => {
                if restarts >= 3 || vs.len() >= n {
                    break;
                }
                restarts += 1;
                let mut found = false;
                while restarts <= 3 {
                    if let Some((v, av, _)) = orth(random(&mut rng), &vs, &avs)? {
                        beta.push(0.0);
                        vs.push(v);
                        avs.push(av);
                        found = true;
                        break;
                    }
                    restarts += 1;
                }
                if !found {
                    break;
                }
            }
        }
    }
    let m = alpha.len();
    let mut t = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let mut ritz: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
    ritz.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (lo, hi) = (ritz[0], ritz[m - 1]);
    let rep = KrylovReport {
        iterations: m,
        residuals: Vec::new(),
        converged: true,
        lambda_min: Some(lo),
        lambda_max: Some(hi),
        cond: Some(hi / lo),
        lanczos_steps: Some(m),
    };
    Ok((rep, ritz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{CsrMatrix, Triplets};

    fn diag(d: &[f64]) -> CsrMatrix {
        let mut t = Triplets::new(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            t.push(i, i, *v);
        }
        t.to_csr()
    }

    #[test]
    fn gmres_identity_converges_in_one_step() {
        let id = |x: &[f64]| x.to_vec();
        let b = vec![1.0, -2.0, 3.0];
        let (x, r) = gmres(&id, &id, &b, 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn gmres_terminates_at_the_minimal_polynomial_degree() {
        let d = diag(&[1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 5.0]);
        let a = |x: &[f64]| d.matvec(x);
        let id = |x: &[f64]| x.to_vec();
        let b = vec![1.0; 7];
        let (x, r) = gmres(&a, &id, &b, 1e-12, 20).unwrap();
        assert!(r.iterations <= 4);
        assert!(r.is_monotone());
        let res = d.matvec(&x);
        assert!(res.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn gmres_with_exact_inverse() {
        let d = diag(&[1.0, 10.0, 100.0]);
        let a = |x: &[f64]| d.matvec(x);
        let inv = |x: &[f64]| vec![x[0], x[1] / 10.0, x[2] / 100.0];
        let (_, r) = gmres(&a, &inv, &[1.0, 1.0, 1.0], 1e-12, 10).unwrap();
        assert!(r.iterations <= 2);
    }

    #[test]
    fn cg_solves_small_spd_and_detects_indefiniteness() {
        let m = CsrMatrix::from_dense(&nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]), 0.0);
        let a = |x: &[f64]| m.matvec(x);
        let id = |x: &[f64]| x.to_vec();
        let (x, r) = cg(&a, &id, &[1.0, 2.0], 1e-14, 10).unwrap();
        assert!(r.iterations <= 2);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-13);
        let bad = diag(&[1.0, -1.0]);
        let ab = |x: &[f64]| bad.matvec(x);
        assert!(matches!(
            cg(&ab, &id, &[1.0, 1.0], 1e-12, 10),
            Err(Error::NegativeCurvature(_))
        ));
    }

    #[test]
    fn lanczos_on_diagonal_and_identity_pencils() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let m = diag(&d);
        let a = |x: &[f64]| m.matvec(x);
        let id = |x: &[f64]| x.to_vec();
        let (r, _) = lanczos_spectrum(&a, &id, 10, 10, 1).unwrap();
        assert!((r.lambda_min.unwrap() - 1.0).abs() < 1e-10);
        assert!((r.lambda_max.unwrap() - 10.0).abs() < 1e-10);
        let inv = |x: &[f64]| x.iter().zip(&d).map(|(a, b)| a / b).collect();
        let (r, _) = lanczos_spectrum(&a, &inv, 10, 10, 1).unwrap();
        assert!((r.lambda_min.unwrap() - 1.0).abs() < 1e-10 && (r.cond.unwrap() - 1.0).abs() < 1e-10);
    }
}
