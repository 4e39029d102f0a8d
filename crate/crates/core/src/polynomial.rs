//! Polynomial building blocks on the reference triangle.
//!
//! [`OrthoBasis`] is an L²-orthonormal basis of P^k ordered by total degree, so
//! the first dim P^m functions span P^m for every m <= k. Every vector and
//! matrix valued reference basis in [`crate::fespace`] is expressed through it.

use crate::quadrature::triangle_rule;
use nalgebra::{DMatrix, DVector};

/// Legendre polynomials P_0..=P_n and their derivatives at `x` in [-1, 1].
pub fn legendre(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for j in 2..=n {
        let jf = j as f64;
        p[j] = ((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
        dp[j] = dp[j - 2] + (2.0 * jf - 1.0) * p[j - 1];
    }
    (p, dp)
}

/// Legendre polynomials shifted to [0, 1]: P_j(2s - 1).
pub fn shifted_legendre(n: usize, s: f64) -> Vec<f64> {
    legendre(n, 2.0 * s - 1.0).0
}

/// Number of polynomials of total degree at most `k` in two variables.
pub fn dim_pk(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponent pairs (a, b) of the raw products P_a(2x-1) P_b(2y-1), by total degree.
fn raw_exponents(k: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(dim_pk(k));
    for d in 0..=k {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

/// L²(T̂)-orthonormal, degree-ordered basis of P^k on the reference triangle.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub degree: usize,
    exps: Vec<(usize, usize)>,
    /// Row i holds the raw-product coefficients of basis function i (lower triangular).
    coef: DMatrix<f64>,
}

/// Values and reference gradients of a scalar basis at one point.
#[derive(Debug, Clone)]
pub struct ScalarEval {
    pub val: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl OrthoBasis {
    pub fn new(k: usize) -> Self {
        let exps = raw_exponents(k);
        let n = exps.len();
        let rule = triangle_rule(2 * k);
        let raw: Vec<ScalarEval> = rule.points.iter().map(|p| raw_eval(&exps, k, *p)).collect();
        // Two Cholesky-QR passes: the second removes the loss of orthogonality
        // caused by the conditioning of the raw Gram matrix.
        let mut coef = DMatrix::<f64>::identity(n, n);
        for _ in 0..2 {
            let mut gram = DMatrix::zeros(n, n);
            for (r, w) in raw.iter().zip(&rule.weights) {
                let v = &coef * DVector::from_column_slice(&r.val);
                gram.ger(*w, &v, &v, 1.0);
            }
            let l = gram
                .cholesky()
                .expect("raw Legendre products are linearly independent")
                .l();
            let linv = l
                .solve_lower_triangular(&DMatrix::identity(n, n))
                .expect("triangular factor is nonsingular");
            coef = linv * coef;
        }
        OrthoBasis { degree: k, exps, coef }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn eval(&self, p: [f64; 2]) -> ScalarEval {
        let r = raw_eval(&self.exps, self.degree, p);
        let n = self.dim();
        let mut out = ScalarEval {
            val: vec![0.0; n],
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        };
        for i in 0..n {
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for j in 0..=i {
                let c = self.coef[(i, j)];
                v += c * r.val[j];
                gx += c * r.dx[j];
                gy += c * r.dy[j];
            }
            out.val[i] = v;
            out.dx[i] = gx;
            out.dy[i] = gy;
        }
        out
    }
}

fn raw_eval(exps: &[(usize, usize)], k: usize, p: [f64; 2]) -> ScalarEval {
    let (lx, dlx) = legendre(k, 2.0 * p[0] - 1.0);
    let (ly, dly) = legendre(k, 2.0 * p[1] - 1.0);
    let n = exps.len();
    let mut out = ScalarEval {
        val: vec![0.0; n],
        dx: vec![0.0; n],
        dy: vec![0.0; n],
    };
    for (i, &(a, b)) in exps.iter().enumerate() {
        out.val[i] = lx[a] * ly[b];
        out.dx[i] = 2.0 * dlx[a] * ly[b];
        out.dy[i] = 2.0 * lx[a] * dly[b];
    }
    out
}

/// Hierarchical H¹ basis of P^k: vertex functions, edge functions, interior bubbles.
///
/// Vertex functions are the barycentric coordinates; edge functions on the edge
/// (a, b) are λ_a λ_b P_j(λ_b - λ_a), j < k - 1; interior functions are the
/// cubic bubble λ_0 λ_1 λ_2 times products P_i(2x - 1) P_j(2y - 1), i + j <= k - 3.
#[derive(Debug, Clone)]
pub struct HierarchicalBasis {
    pub degree: usize,
}

/// Local vertex pairs of the three reference edges, edge e opposite vertex e.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

impl HierarchicalBasis {
    pub fn new(k: usize) -> Self {
        HierarchicalBasis { degree: k }
    }

    pub fn dim(&self) -> usize {
        dim_pk(self.degree)
    }

    pub fn eval(&self, p: [f64; 2]) -> ScalarEval {
        let k = self.degree;
        let lam = [1.0 - p[0] - p[1], p[0], p[1]];
        let dlam = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut out = ScalarEval {
            val: Vec::with_capacity(self.dim()),
            dx: Vec::with_capacity(self.dim()),
            dy: Vec::with_capacity(self.dim()),
        };
        let mut push = |v: f64, g: [f64; 2]| {
            out.val.push(v);
            out.dx.push(g[0]);
            out.dy.push(g[1]);
        };
        if k == 0 {
            push(1.0, [0.0, 0.0]);
            return out;
        }
        for i in 0..3 {
            push(lam[i], dlam[i]);
        }
        if k >= 2 {
            for [a, b] in EDGE_VERTICES {
                let t = lam[b] - lam[a];
                let dt = [dlam[b][0] - dlam[a][0], dlam[b][1] - dlam[a][1]];
                let (l, dl) = legendre(k - 2, t);
                let q = lam[a] * lam[b];
                let dq = [
                    dlam[a][0] * lam[b] + lam[a] * dlam[b][0],
                    dlam[a][1] * lam[b] + lam[a] * dlam[b][1],
                ];
                for j in 0..=k - 2 {
                    push(
                        q * l[j],
                        [dq[0] * l[j] + q * dl[j] * dt[0], dq[1] * l[j] + q * dl[j] * dt[1]],
                    );
                }
            }
        }
        if k >= 3 {
            let b = lam[0] * lam[1] * lam[2];
            let db = [
                dlam[0][0] * lam[1] * lam[2] + lam[0] * dlam[1][0] * lam[2] + lam[0] * lam[1] * dlam[2][0],
                dlam[0][1] * lam[1] * lam[2] + lam[0] * dlam[1][1] * lam[2] + lam[0] * lam[1] * dlam[2][1],
            ];
            let (lx, dlx) = legendre(k - 3, 2.0 * p[0] - 1.0);
            let (ly, dly) = legendre(k - 3, 2.0 * p[1] - 1.0);
            for d in 0..=k - 3 {
                for j in 0..=d {
                    let i = d - j;
                    let f = lx[i] * ly[j];
                    let df = [2.0 * dlx[i] * ly[j], 2.0 * lx[i] * dly[j]];
                    push(b * f, [db[0] * f + b * df[0], db[1] * f + b * df[1]]);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_orthogonality_on_unit_interval() {
        let r = crate::quadrature::gauss_legendre(8);
        for i in 0..6 {
            for j in 0..6 {
                let s: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * shifted_legendre(5, *x)[i] * shifted_legendre(5, *x)[j])
                    .sum();
                let exact = if i == j { 1.0 / (2 * i + 1) as f64 } else { 0.0 };
                assert!((s - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn legendre_derivative_matches_difference_quotient() {
        let x = 0.3;
        let h = 1e-6;
        let (_, d) = legendre(6, x);
        let (pp, _) = legendre(6, x + h);
        let (pm, _) = legendre(6, x - h);
        for j in 0..=6 {
            assert!((d[j] - (pp[j] - pm[j]) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn ortho_basis_is_orthonormal_and_hierarchical() {
        for k in 0..=7 {
            let b = OrthoBasis::new(k);
            let r = triangle_rule(2 * k);
            let n = b.dim();
            let mut g = DMatrix::<f64>::zeros(n, n);
            for (p, w) in r.points.iter().zip(&r.weights) {
                let e = b.eval(*p);
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] += w * e.val[i] * e.val[j];
                    }
                }
            }
            assert!((g - DMatrix::identity(n, n)).amax() < 1e-11, "k={k}");
            if k >= 1 {
                let lower = OrthoBasis::new(k - 1);
                let e1 = lower.eval([0.2, 0.3]);
                let e2 = b.eval([0.2, 0.3]);
                for i in 0..lower.dim() {
                    assert!((e1.val[i] - e2.val[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hierarchical_gradients_match_difference_quotients() {
        let b = HierarchicalBasis::new(5);
        let p = [0.21, 0.37];
        let h = 1e-6;
        let e = b.eval(p);
        let ex = (b.eval([p[0] + h, p[1]]), b.eval([p[0] - h, p[1]]));
        let ey = (b.eval([p[0], p[1] + h]), b.eval([p[0], p[1] - h]));
        assert_eq!(e.val.len(), dim_pk(5));
        for i in 0..e.val.len() {
            assert!((e.dx[i] - (ex.0.val[i] - ex.1.val[i]) / (2.0 * h)).abs() < 1e-7);
            assert!((e.dy[i] - (ey.0.val[i] - ey.1.val[i]) / (2.0 * h)).abs() < 1e-7);
        }
    }
}
