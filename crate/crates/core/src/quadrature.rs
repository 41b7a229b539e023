//! Gauss–Legendre rules on the unit interval and orthonormal Legendre
//! polynomials.

use crate::error::{Error, Result};

/// Gauss–Legendre rule mapped to `[0, 1]`. Nodes are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(a + h * x))
            .sum::<f64>()
            * h
    }
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`, `1 <= n <= 20`.
pub fn gauss_quadrature(n: usize) -> Result<Quadrature> {
    if !(1..=20).contains(&n) {
        return Err(Error::UnsupportedQuadrature(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on P_n from the Tricomi initial guess.
    for i in 0..(n + 1) / 2 {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, t);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // map [-1, 1] -> [0, 1]; t is decreasing in i
        nodes[i] = 0.5 * (1.0 - t);
        nodes[n - 1 - i] = 0.5 * (1.0 + t);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Ok(Quadrature { nodes, weights })
}

/// Legendre polynomial `P_n(t)` and its derivative on `[-1, 1]`.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = t;
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Values of the orthonormal shifted Legendre polynomials
/// `sqrt(2p+1) P_p(2x - 1)` for `p = 0..out.len()` at `x`.
pub fn legendre_values(x: f64, out: &mut [f64]) {
    let t = 2.0 * x - 1.0;
    let mut p0 = 1.0;
    let mut p1 = t;
    for (p, slot) in out.iter_mut().enumerate() {
        let v = match p {
            0 => 1.0,
            1 => t,
            _ => {
                let m = p as f64;
                let p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *slot = v * ((2 * p + 1) as f64).sqrt();
    }
}

/// Derivatives (with respect to `x`) of the orthonormal shifted Legendre
/// polynomials on `[0, 1]`.
pub fn legendre_derivatives(x: f64, out: &mut [f64]) {
    // P_p' from the recurrence P'_{p+1} = P'_{p-1} + (2p+1) P_p
    let t = 2.0 * x - 1.0;
    let n = out.len();
    let mut p = vec![0.0; n.max(2)];
    p[0] = 1.0;
    if n > 1 {
        p[1] = t;
    }
    for m in 2..n {
        let mf = m as f64;
        p[m] = ((2.0 * mf - 1.0) * t * p[m - 1] - (mf - 1.0) * p[m - 2]) / mf;
    }
    let mut d = vec![0.0; n.max(2)];
    for m in 1..n {
        d[m] = (2 * m - 1) as f64 * p[m - 1] + if m >= 2 { d[m - 2] } else { 0.0 };
    }
    for (m, slot) in out.iter_mut().enumerate() {
        *slot = 2.0 * d[m] * ((2 * m + 1) as f64).sqrt();
    }
}
