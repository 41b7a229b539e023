//! One-dimensional field solves: periodic LDG Poisson and the radial
//! Gauss law `d/dr (r E) = r rho` with `E(0) = 0`.

use nalgebra::{DMatrix, DVector};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_quadrature, legendre_derivatives, legendre_values, Quadrature};

/// Piecewise polynomial on a uniform 1D mesh, in cell-orthonormal Legendre
/// modes (`psi_p(xi) / sqrt(h)` on each cell).
#[derive(Debug, Clone, PartialEq)]
pub struct Dg1d {
    pub lower: f64,
    pub upper: f64,
    pub degree: usize,
    pub cells: usize,
    pub coeffs: Vec<f64>,
}

impl Dg1d {
    pub fn zeros(lower: f64, upper: f64, degree: usize, cells: usize) -> Self {
        Self { lower, upper, degree, cells, coeffs: vec![0.0; cells * (degree + 1)] }
    }

    /// L2 projection of `f` using `(k+2)`-point Gauss per cell.
    pub fn project(f: impl Fn(f64) -> f64, lower: f64, upper: f64, degree: usize, cells: usize) -> Result<Self> {
        let np = degree + 1;
        let q = gauss_quadrature(degree + 2)?;
        let mut out = Self::zeros(lower, upper, degree, cells);
        let h = out.h();
        let mut psi = vec![0.0; np];
        for i in 0..cells {
            for (&t, &w) in q.nodes.iter().zip(&q.weights) {
                legendre_values(t, &mut psi);
                let fx = f(lower + h * (i as f64 + t));
                for p in 0..np {
                    out.coeffs[i * np + p] += w * fx * psi[p] * h.sqrt();
                }
            }
        }
        Ok(out)
    }

    pub fn h(&self) -> f64 {
        (self.upper - self.lower) / self.cells as f64
    }

    pub fn np(&self) -> usize {
        self.degree + 1
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let np = self.np();
        &self.coeffs[i * np..(i + 1) * np]
    }

    /// Value at `x`; cells are half open on the right except the last.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.h();
        let s = (x - self.lower) / h;
        let i = (s.floor().max(0.0) as usize).min(self.cells - 1);
        self.eval_in_cell(i, (s - i as f64).clamp(0.0, 1.0))
    }

    /// Value at local coordinate `xi` of cell `i`.
    pub fn eval_in_cell(&self, i: usize, xi: f64) -> f64 {
        let mut psi: SmallVec<[f64; 8]> = smallvec![0.0; self.np()];
        legendre_values(xi, &mut psi);
        psi.iter().zip(self.cell(i)).map(|(a, b)| a * b).sum::<f64>() / self.h().sqrt()
    }

    pub fn integral(&self) -> f64 {
        let sh = self.h().sqrt();
        (0..self.cells).map(|i| self.cell(i)[0] * sh).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / (self.upper - self.lower)
    }

    /// `int f^2 dx`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Largest `|f|` over the `(k+2)`-point Gauss nodes and cell ends.
    pub fn max_abs(&self) -> f64 {
        let q = gauss_quadrature(self.degree + 2).expect("supported order");
        let mut m: f64 = 0.0;
        for i in 0..self.cells {
            for xi in q.nodes.iter().copied().chain([0.0, 1.0]) {
                m = m.max(self.eval_in_cell(i, xi).abs());
            }
        }
        m
    }
}

/// LDG discretization of `-phi'' = s`, `q = phi'` on a periodic mesh with
/// fluxes `phi^ = phi^-`, `q^ = q^+` and gauge `int phi = 0`.
#[derive(Debug)]
pub struct PeriodicPoisson {
    lower: f64,
    upper: f64,
    degree: usize,
    cells: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<f64>,
}

/// Relative tolerance on the mean of the source.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

impl PeriodicPoisson {
    pub fn new(lower: f64, upper: f64, degree: usize, cells: usize) -> Result<Self> {
        if cells == 0 || !(upper > lower) {
            return Err(Error::Config("Poisson mesh needs a positive extent and at least one cell".into()));
        }
        let np = degree + 1;
        let h = (upper - lower) / cells as f64;
        let q = gauss_quadrature(degree + 2)?;
        let dmat = stiffness(&q, np);
        let mut e0 = vec![0.0; np];
        let mut e1 = vec![0.0; np];
        legendre_values(0.0, &mut e0);
        legendre_values(1.0, &mut e1);

        let n = 2 * np * cells + 1;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let phi = |i: usize, p: usize| 2 * np * i + p;
        let qv = |i: usize, p: usize| 2 * np * i + np + p;
        for i in 0..cells {
            let prev = (i + cells - 1) % cells;
            let next = (i + 1) % cells;
            for r in 0..np {
                // q = phi'
                let row = qv(i, r);
                a[(row, qv(i, r))] += 1.0;
                for p in 0..np {
                    a[(row, phi(i, p))] += dmat[p][r] / h;
                    a[(row, phi(i, p))] -= e1[p] * e1[r] / h;
                    a[(row, phi(prev, p))] += e1[p] * e0[r] / h;
                }
                // -q' = s
                let row = phi(i, r);
                for p in 0..np {
                    a[(row, qv(i, p))] += dmat[p][r] / h;
                    a[(row, qv(next, p))] -= e0[p] * e1[r] / h;
                    a[(row, qv(i, p))] += e0[p] * e0[r] / h;
                }
            }
            a[(phi(i, 0), n - 1)] = h.sqrt();
            a[(n - 1, phi(i, 0))] = h.sqrt();
        }
        let lu = a.clone().lu();
        Ok(Self { lower, upper, degree, cells, lu, matrix: a })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Assembled bordered matrix (rows: per cell `np` source equations then
    /// `np` gradient equations; last row is the gauge).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Right-hand side vector of the bordered system for `source`.
    pub fn rhs(&self, source: &Dg1d) -> DVector<f64> {
        let np = self.degree + 1;
        let mut b = DVector::zeros(2 * np * self.cells + 1);
        for i in 0..self.cells {
            for r in 0..np {
                b[2 * np * i + r] = source.cell(i)[r];
            }
        }
        b
    }

    /// Solve for `(phi, E = -phi')`. The source must have zero mean.
    pub fn solve(&self, source: &Dg1d) -> Result<(Dg1d, Dg1d)> {
        if source.cells != self.cells || source.degree != self.degree {
            return Err(Error::DimensionMismatch { expected: self.cells, got: source.cells });
        }
        let scale = source.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0) / source.h().sqrt();
        let mean = source.mean();
        if mean.abs() > COMPATIBILITY_TOL * scale {
            return Err(Error::PoissonCompatibility(mean));
        }
        let x = self
            .lu
            .solve(&self.rhs(source))
            .ok_or_else(|| Error::Config("singular Poisson system".into()))?;
        let np = self.degree + 1;
        let mut phi = Dg1d::zeros(self.lower, self.upper, self.degree, self.cells);
        let mut e = Dg1d::zeros(self.lower, self.upper, self.degree, self.cells);
        for i in 0..self.cells {
            for p in 0..np {
                phi.coeffs[i * np + p] = x[2 * np * i + p];
                e.coeffs[i * np + p] = -x[2 * np * i + np + p];
            }
        }
        Ok((phi, e))
    }
}

/// `D[p][r] = int_0^1 psi_p psi_r'`.
fn stiffness(q: &Quadrature, np: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; np]; np];
    let mut v = vec![0.0; np];
    let mut dv = vec![0.0; np];
    for (&t, &w) in q.nodes.iter().zip(&q.weights) {
        legendre_values(t, &mut v);
        legendre_derivatives(t, &mut dv);
        for p in 0..np {
            for r in 0..np {
                d[p][r] += w * v[p] * dv[r];
            }
        }
    }
    d
}

/// `E(r) = (1/r) int_0^r s rho(s) ds`, evaluated exactly for a piecewise
/// polynomial `rho` whose mesh has a face at `r = 0`.
#[derive(Debug, Clone)]
pub struct RadialField {
    rho: Dg1d,
    /// `int_0^{face_i} s rho(s) ds` at every cell face.
    faces: Vec<f64>,
    quad: Quadrature,
}

pub fn solve_poisson_radial(rho: &Dg1d) -> Result<RadialField> {
    let h = rho.h();
    let z = -rho.lower / h;
    let zero = z.round() as usize;
    if (z - zero as f64).abs() > 1e-9 || zero > rho.cells {
        return Err(Error::Config("radial mesh must have a face at r = 0".into()));
    }
    let quad = gauss_quadrature(rho.degree + 2)?;
    let mut field = RadialField { rho: rho.clone(), faces: vec![0.0; rho.cells + 1], quad };
    for i in zero..rho.cells {
        field.faces[i + 1] = field.faces[i] + field.moment(i, 0.0, 1.0);
    }
    for i in (0..zero).rev() {
        field.faces[i] = field.faces[i + 1] - field.moment(i, 0.0, 1.0);
    }
    Ok(field)
}

impl RadialField {
    /// `int s rho(s) ds` over local coordinates `[a, b]` of cell `i`.
    fn moment(&self, i: usize, a: f64, b: f64) -> f64 {
        let h = self.rho.h();
        let mut s = 0.0;
        for (&t, &w) in self.quad.nodes.iter().zip(&self.quad.weights) {
            let xi = a + (b - a) * t;
            let r = self.rho.lower + h * (i as f64 + xi);
            s += w * r * self.rho.eval_in_cell(i, xi);
        }
        s * (b - a) * h
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let h = self.rho.h();
        let s = (r - self.rho.lower) / h;
        let i = (s.floor().max(0.0) as usize).min(self.rho.cells - 1);
        let xi = (s - i as f64).clamp(0.0, 1.0);
        let g = if r > 0.0 {
            self.faces[i] + self.moment(i, 0.0, xi)
        } else {
            self.faces[i + 1] - self.moment(i, xi, 1.0)
        };
        g / r
    }

    pub fn rho(&self) -> &Dg1d {
        &self.rho
    }

    /// Largest `|E|` over Gauss nodes and faces.
    pub fn max_abs(&self) -> f64 {
        let h = self.rho.h();
        let mut m: f64 = 0.0;
        for i in 0..self.rho.cells {
            for xi in self.quad.nodes.iter().copied().chain([0.0, 1.0]) {
                m = m.max(self.eval(self.rho.lower + h * (i as f64 + xi)).abs());
            }
        }
        m
    }

    /// `int E^2 dr` by 8-point Gauss per cell.
    pub fn norm_sq(&self) -> f64 {
        let q = gauss_quadrature(8).expect("supported order");
        let h = self.rho.h();
        (0..self.rho.cells)
            .map(|i| {
                let a = self.rho.lower + h * i as f64;
                q.integrate(a, a + h, |r| self.eval(r).powi(2))
            })
            .sum()
    }
}
