//! Gauss rules on the unit interval and collapsed (Duffy) rules on the
//! reference triangle with vertices (0,0), (1,0), (0,1).

/// Points and weights together with the polynomial degree integrated exactly.
#[derive(Debug, Clone)]
pub struct Quadrature<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub type EdgeRule = Quadrature<f64>;
pub type TriangleRule = Quadrature<[f64; 2]>;

impl<P> Quadrature<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre rule with `n` points on [0, 1]; exact up to degree 2n-1.
pub fn gauss_legendre(n: usize) -> EdgeRule {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    EdgeRule {
        points,
        weights,
        degree: 2 * n - 1,
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on [0, 1] exact for polynomials of degree `degree`.
pub fn edge_rule(degree: usize) -> EdgeRule {
    let mut r = gauss_legendre(degree / 2 + 1);
    r.degree = degree.max(1);
    r
}

/// Collapsed tensor rule on the reference triangle exact for degree `degree`.
///
/// The map (a, b) -> (a (1 - b), b) carries the unit square onto the triangle
/// with Jacobian (1 - b), which raises the degree in b by one.
pub fn triangle_rule(degree: usize) -> TriangleRule {
    let n = (degree + 2).div_ceil(2);
    let g = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (b, wb) in g.points.iter().zip(&g.weights) {
        for (a, wa) in g.points.iter().zip(&g.weights) {
            points.push([a * (1.0 - b), *b]);
            weights.push(wa * wb * (1.0 - b));
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}
