//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use mrdg_core::basis::build_basis;
use mrdg_core::domain::Domain;
use mrdg_core::element::{all_level_vectors, keys_at_level};
use mrdg_core::operator::{Discretization, FluxKind, VelocityField};
use mrdg_core::projection::{project_onto_keys, NormChoice, ThresholdConfig};
use mrdg_core::runner::fine_grid;
use mrdg_core::stepper::{evolve_step, StepConfig, TransportRhs};

/// Gauss-Legendre rule on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Orthonormal Legendre values and derivatives on `[0, 1]`.
pub fn legendre(xi: f64, np: usize) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * xi - 1.0;
    let mut p = vec![0.0; np.max(2)];
    let mut dp = vec![0.0; np.max(2)];
    p[0] = 1.0;
    p[1] = x;
    dp[1] = 1.0;
    for n in 1..np.max(2) - 1 {
        p[n + 1] = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
        dp[n + 1] = dp[n - 1] + (2 * n + 1) as f64 * p[n];
    }
    let v = (0..np).map(|i| ((2 * i + 1) as f64).sqrt() * p[i]).collect();
    let d = (0..np).map(|i| 2.0 * ((2 * i + 1) as f64).sqrt() * dp[i]).collect();
    (v, d)
}

fn unflatten(mut r: usize, n: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for m in (0..d).rev() {
        out[m] = r % n;
        r /= n;
    }
    out
}

fn flux(kind: FluxKind, a: f64, l: f64, r: f64, alpha: f64) -> f64 {
    match kind {
        FluxKind::Upwind => {
            if a >= 0.0 {
                a * l
            } else {
                a * r
            }
        }
        FluxKind::LaxFriedrichs => 0.5 * a * (l + r) - 0.5 * alpha * (r - l),
    }
}

/// Plain modal RKDG on a uniform periodic grid over the unit box, with
/// the cell-major / row-major mode layout of the library cell grids.
pub struct DenseDg<'a> {
    pub d: usize,
    pub np: usize,
    pub cells: usize,
    pub flux: FluxKind,
    pub field: &'a dyn VelocityField,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> DenseDg<'a> {
    pub fn new(d: usize, degree: usize, cells: usize, flux: FluxKind, field: &'a dyn VelocityField) -> Self {
        let (nodes, weights) = gauss(degree + 3);
        Self { d, np: degree + 1, cells, flux, field, nodes, weights }
    }

    fn b(&self) -> usize {
        self.np.pow(self.d as u32)
    }

    fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// `phi_p` at local coordinates `xi` (unscaled tensor Legendre).
    fn modes(&self, xi: &[f64]) -> Vec<f64> {
        let per: Vec<Vec<f64>> = xi.iter().map(|&s| legendre(s, self.np).0).collect();
        (0..self.b())
            .map(|p| {
                let pi = unflatten(p, self.np, self.d);
                (0..self.d).map(|m| per[m][pi[m]]).product()
            })
            .collect()
    }

    fn value(&self, u: &[f64], c: usize, xi: &[f64]) -> f64 {
        let b = self.b();
        let s = self.h().powi(self.d as i32).sqrt();
        self.modes(xi).iter().zip(&u[c * b..(c + 1) * b]).map(|(a, v)| a * v).sum::<f64>() / s
    }

    pub fn project(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let (d, b, h, nq) = (self.d, self.b(), self.h(), self.nodes.len());
        let nc = self.cells.pow(d as u32);
        let s = h.powi(d as i32).sqrt();
        let mut u = vec![0.0; nc * b];
        for c in 0..nc {
            let ci = unflatten(c, self.cells, d);
            for q in 0..nq.pow(d as u32) {
                let qi = unflatten(q, nq, d);
                let xi: Vec<f64> = qi.iter().map(|&i| self.nodes[i]).collect();
                let x: Vec<f64> = (0..d).map(|m| (ci[m] as f64 + xi[m]) * h).collect();
                let w: f64 = qi.iter().map(|&i| self.weights[i]).product::<f64>() * s;
                let fx = f(&x);
                for (p, phi) in self.modes(&xi).iter().enumerate() {
                    u[c * b + p] += w * fx * phi;
                }
            }
        }
        u
    }

    pub fn rhs(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let (d, np, b, h, nq) = (self.d, self.np, self.b(), self.h(), self.nodes.len());
        let nc = self.cells.pow(d as u32);
        let s = h.powi(d as i32).sqrt();
        let alpha = self.field.speed_bounds(t);
        let mut r = vec![0.0; nc * b];
        let mut a = vec![0.0; d];
        for c in 0..nc {
            let ci = unflatten(c, self.cells, d);
            for q in 0..nq.pow(d as u32) {
                let qi = unflatten(q, nq, d);
                let xi: Vec<f64> = qi.iter().map(|&i| self.nodes[i]).collect();
                let x: Vec<f64> = (0..d).map(|m| (ci[m] as f64 + xi[m]) * h).collect();
                let w: f64 = qi.iter().map(|&i| self.weights[i]).product::<f64>() * h.powi(d as i32);
                self.field.eval(t, &x, &mut a);
                let uq = self.value(u, c, &xi);
                let per: Vec<(Vec<f64>, Vec<f64>)> = xi.iter().map(|&v| legendre(v, np)).collect();
                for p in 0..b {
                    let pi = unflatten(p, np, d);
                    let mut grad = 0.0;
                    for m in 0..d {
                        let mut g = per[m].1[pi[m]] / h;
                        for n in 0..d {
                            if n != m {
                                g *= per[n].0[pi[n]];
                            }
                        }
                        grad += a[m] * g;
                    }
                    r[c * b + p] += w * uq * grad / s;
                }
            }
            // upper faces, shared with the neighbour
            for m in 0..d {
                let mut nj = ci.clone();
                nj[m] = (ci[m] + 1) % self.cells;
                let nb = nj.iter().fold(0, |acc, &i| acc * self.cells + i);
                for qf in 0..nq.pow(d as u32 - 1) {
                    let fi = unflatten(qf, nq, d - 1);
                    let mut xi_own = vec![0.0; d];
                    let mut w = h.powi(d as i32 - 1);
                    let mut o = 0;
                    for n in 0..d {
                        if n == m {
                            xi_own[n] = 1.0;
                        } else {
                            xi_own[n] = self.nodes[fi[o]];
                            w *= self.weights[fi[o]];
                            o += 1;
                        }
                    }
                    let mut xi_nb = xi_own.clone();
                    xi_nb[m] = 0.0;
                    let x: Vec<f64> = (0..d).map(|n| (ci[n] as f64 + xi_own[n]) * h).collect();
                    self.field.eval(t, &x, &mut a);
                    let f = flux(self.flux, a[m], self.value(u, c, &xi_own), self.value(u, nb, &xi_nb), alpha[m]);
                    let own = self.modes(&xi_own);
                    let other = self.modes(&xi_nb);
                    for p in 0..b {
                        r[c * b + p] -= w * f * own[p] / s;
                        r[nb * b + p] += w * f * other[p] / s;
                    }
                }
            }
        }
        r
    }

    /// Third-order SSP Runge-Kutta step.
    pub fn step(&self, t: f64, dt: f64, u: &[f64]) -> Vec<f64> {
        let l0 = self.rhs(t, u);
        let u1: Vec<f64> = u.iter().zip(&l0).map(|(a, l)| a + dt * l).collect();
        let l1 = self.rhs(t + dt, &u1);
        let u2: Vec<f64> = (0..u.len()).map(|i| 0.75 * u[i] + 0.25 * (u1[i] + dt * l1[i])).collect();
        let l2 = self.rhs(t + 0.5 * dt, &u2);
        (0..u.len()).map(|i| u[i] / 3.0 + 2.0 / 3.0 * (u2[i] + dt * l2[i])).collect()
    }
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Relative L2 gap between the fixed full-grid library trajectory at level
/// `n` and the dense RKDG oracle after `steps` steps (both started from the
/// oracle projection's library counterpart).
pub fn oracle_deviation(
    d: usize,
    k: usize,
    n: u32,
    flux_kind: FluxKind,
    field: &dyn VelocityField,
    ic: &(dyn Fn(&[f64]) -> f64 + Sync),
    steps: usize,
) -> f64 {
    let basis = build_basis(k).unwrap();
    let domain = Domain::unit_periodic(d);
    let keys: Vec<_> = all_level_vectors(d, n).iter().flat_map(|l| keys_at_level(l)).collect();
    let mut table = project_onto_keys(ic, &keys, &basis, &domain, n).unwrap();
    let disc = Discretization::new(basis.clone(), domain, n, flux_kind).unwrap();
    let mut cfg = StepConfig::new(0.2, ThresholdConfig::new(1e-4, NormChoice::L2, n, k).unwrap()).unwrap();
    cfg.adaptive = false;
    let rhs = TransportRhs { disc: &disc, field };

    let oracle = DenseDg::new(d, k, 1 << n, flux_kind, field);
    let start = fine_grid(&table, &basis).unwrap().data;
    let gap = rel_l2(&start, &oracle.project(ic));
    assert!(gap < 1e-2, "initial projections disagree: {gap:e}");
    let mut u = start;
    let mut t = 0.0;
    for _ in 0..steps {
        let rep = evolve_step(&rhs, &disc, &mut table, t, &cfg, None).unwrap();
        u = oracle.step(t, rep.dt, &u);
        t += rep.dt;
    }
    rel_l2(&fine_grid(&table, &basis).unwrap().data, &u)
}

/// Max deviation from the identity of the 1D Gram matrix of every basis
/// function through `max_level`, by composite Gauss on the finest cells.
pub fn gram_deviation(k: usize, max_level: u32) -> f64 {
    use mrdg_core::basis::{max_translation, Side};
    let basis = build_basis(k).unwrap();
    let mut funcs = Vec::new();
    for l in 0..=max_level {
        for j in 0..=max_translation(l) {
            for i in 0..=k {
                funcs.push((i, l, j));
            }
        }
    }
    let cells = 1usize << max_level;
    let (nodes, weights) = gauss(k + 2);
    let mut samples = Vec::new();
    for c in 0..cells {
        for (x, w) in nodes.iter().zip(&weights) {
            let pt = (c as f64 + x) / cells as f64;
            let vals: Vec<f64> =
                funcs.iter().map(|&(i, l, j)| basis.eval_1d(i, l, j, pt, Side::Right).unwrap()).collect();
            samples.push((w / cells as f64, vals));
        }
    }
    let n = funcs.len();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let g: f64 = samples.iter().map(|(w, v)| w * v[a] * v[b]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// Observed order of the library RK3 step on `u' = u cos t`, `u(0) = 1`,
/// integrated to `t = 1` with halving step sizes.
pub fn rk3_observed_order() -> f64 {
    use mrdg_core::stepper::rk3_step;
    let steps = [10usize, 20, 40, 80];
    let exact = 1f64.sin().exp();
    let mut errs = Vec::new();
    for &n in &steps {
        let dt = 1.0 / n as f64;
        let mut u = vec![1.0];
        for s in 0..n {
            u = rk3_step(&u, s as f64 * dt, dt, |t, v| Ok(vec![v[0] * t.cos()]), None).unwrap();
        }
        errs.push((u[0] - exact).abs());
    }
    let dts: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
    fitted_slope(&dts, &errs)
}

/// Largest relative drift of the total mass over `steps` adaptive steps.
pub fn mass_drift(problem: &str, k: usize, n: u32, eps: f64, steps: usize) -> f64 {
    use mrdg_core::element::ElementKey;
    use mrdg_core::problems::transport_problem;
    use mrdg_core::projection::adaptive_project;
    let p = transport_problem(problem, 2).unwrap();
    let basis = build_basis(k).unwrap();
    let th = ThresholdConfig::new(eps, NormChoice::L2, n, k).unwrap();
    let mut table = adaptive_project(&*p.initial, &th, &basis, &p.domain).unwrap();
    let disc = Discretization::new(basis, p.domain.clone(), n, p.default_flux).unwrap();
    let cfg = StepConfig::new(0.1, th).unwrap();
    let rhs = TransportRhs { disc: &disc, field: &*p.field };
    let root = ElementKey::root(2);
    let mass = |t: &mrdg_core::element::ElementTable| t.get(&root).unwrap().coeffs[0];
    let m0 = mass(&table);
    let mut t = 0.0;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        t += evolve_step(&rhs, &disc, &mut table, t, &cfg, None).unwrap().dt;
        worst = worst.max(((mass(&table) - m0) / m0).abs());
    }
    worst
}

/// Observed L2 order of the periodic LDG field for `rho = A cos(w x)` on
/// `[0, 4 pi]` over meshes of `2^n` cells, `n` in `levels`.
pub fn poisson_order(degree: usize, levels: &[u32]) -> (f64, Vec<f64>) {
    use mrdg_core::poisson::{Dg1d, PeriodicPoisson};
    let (amp, w) = (0.5, 0.5);
    let upper = 4.0 * std::f64::consts::PI;
    let (nodes, weights) = gauss(degree + 4);
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for &n in levels {
        let cells = 1usize << n;
        let rho = Dg1d::project(|x| amp * (w * x).cos(), 0.0, upper, degree, cells).unwrap();
        let (_, e) = PeriodicPoisson::new(0.0, upper, degree, cells).unwrap().solve(&rho).unwrap();
        let h = upper / cells as f64;
        let mut err = 0.0;
        for i in 0..cells {
            for (xi, wt) in nodes.iter().zip(&weights) {
                let x = h * (i as f64 + xi);
                err += wt * h * (e.eval_in_cell(i, *xi) - amp / w * (w * x).sin()).powi(2);
            }
        }
        errs.push(err.sqrt());
        hs.push(h);
    }
    (fitted_slope(&hs, &errs), errs)
}

/// Largest deviation of the radial field from `rho r / 2` for constant
/// `rho` on `[-3, 3]`.
pub fn radial_constant_deviation(degree: usize) -> f64 {
    use mrdg_core::poisson::{solve_poisson_radial, Dg1d};
    let rho0 = 2.5;
    let rho = Dg1d::project(|_| rho0, -3.0, 3.0, degree, 32).unwrap();
    let field = solve_poisson_radial(&rho).unwrap();
    (0..=600)
        .map(|i| -3.0 + 0.01 * i as f64)
        .map(|r| (field.eval(r) - 0.5 * rho0 * r).abs())
        .fold(0.0, f64::max)
}
