//! Vlasov-Poisson in one space and one velocity dimension: benchmark data,
//! density reduction, self-consistent fields, diagnostics and the driver.
//!
//! Phase space is ordered `(x, v)`: dimension 0 is space (or radius),
//! dimension 1 is velocity.

use std::f64::consts::PI;

use log::info;
use rayon::prelude::*;

use crate::basis::{build_basis, Basis1d};
use crate::domain::{Boundary, Domain};
use crate::element::{ElementKey, ElementTable};
use crate::error::{Error, Result};
use crate::operator::{Discretization, FluxKind, VelocityField};
use crate::poisson::{solve_poisson_radial, Dg1d, PeriodicPoisson, RadialField};
use crate::quadrature::{gauss_quadrature, legendre_values};
use crate::runner::{initial_table, Output, RunConfig, RunSummary};
use crate::stepper::{evolve_step, Rhs};
use crate::transform::{to_cells, ActiveSet, HierarchicalArray};

pub const VP_PROBLEMS: &[&str] = &["landau", "bump_on_tail", "two_stream_1", "two_stream_2", "oscillatory_beam"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `f_t + v f_x + E f_v = 0`, periodic in `x`, `-phi'' = rho - rho_bar`.
    Standard,
    /// `f_t + (v / eps) f_r + (E + E_ext) f_v = 0`, `(r E)_r = r rho`.
    OscillatoryPolar { eps_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    Landau,
    BumpOnTail,
    TwoStream1,
    TwoStream2,
    Beam,
}

#[derive(Debug, Clone)]
pub struct VpProblem {
    pub name: String,
    pub variant: Variant,
    pub kind: InitialKind,
    pub domain: Domain,
    /// Perturbation amplitude and wave number (standard variant).
    pub amplitude: f64,
    pub wave: f64,
}

fn maxwellian(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
}

impl VpProblem {
    pub fn v_cut(&self) -> f64 {
        self.domain.upper[1]
    }

    /// `f(0, x, v)` with `x = [x, v]`.
    pub fn initial(&self, x: &[f64]) -> f64 {
        let (s, v) = (x[0], x[1]);
        let pert = 1.0 + self.amplitude * (self.wave * s).cos();
        match self.kind {
            InitialKind::Landau => maxwellian(v) * pert,
            InitialKind::BumpOnTail => {
                let c = 10.0 * (10.0 * PI).sqrt();
                let (np_, nb, u, vt) = (9.0 / c, 2.0 / c, 4.5, 0.5);
                (np_ * (-0.5 * v * v).exp() + nb * (-(v - u) * (v - u) / (2.0 * vt * vt)).exp()) * pert
            }
            InitialKind::TwoStream1 => v * v * maxwellian(v) * pert,
            InitialKind::TwoStream2 => {
                let (u, vt) = (0.99, 0.3);
                let g = |w: f64| (-w * w / (2.0 * vt * vt)).exp();
                (g(u + v) + g(u - v)) / (2.0 * vt * (2.0 * PI).sqrt()) * pert
            }
            InitialKind::Beam => {
                let (n0, vt, rm) = (4.0, 0.1, 1.85);
                if s.abs() <= rm {
                    n0 / (vt * (2.0 * PI).sqrt()) * (-v * v / (2.0 * vt * vt)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn vp_problem(name: &str) -> Result<VpProblem> {
    let standard = |kind, a: f64, k: f64, l: f64, vc: f64| -> Result<VpProblem> {
        Ok(VpProblem {
            name: name.into(),
            variant: Variant::Standard,
            kind,
            domain: Domain::new(vec![0.0, -vc], vec![l, vc], vec![Boundary::Periodic, Boundary::ZeroInflow])?,
            amplitude: a,
            wave: k,
        })
    };
    match name {
        "landau" => standard(InitialKind::Landau, 0.5, 0.5, 4.0 * PI, 2.0 * PI),
        "bump_on_tail" => standard(InitialKind::BumpOnTail, 0.04, 0.3, 20.0 * PI / 3.0, 13.0),
        "two_stream_1" => standard(InitialKind::TwoStream1, 0.05, 0.5, 4.0 * PI, 2.0 * PI),
        "two_stream_2" => standard(InitialKind::TwoStream2, 0.05, 2.0 / 13.0, 13.0 * PI, 5.0),
        "oscillatory_beam" => Ok(VpProblem {
            name: name.into(),
            variant: Variant::OscillatoryPolar { eps_scale: 0.05 },
            kind: InitialKind::Beam,
            domain: Domain::new(vec![-3.0, -3.0], vec![3.0, 3.0], vec![Boundary::ZeroInflow; 2])?,
            amplitude: 0.0,
            wave: 0.0,
        }),
        _ => Err(Error::UnknownProblem(name.into())),
    }
}

/// `rho(x) = int f dv` on the uniform level-`level` mesh in `x`.
///
/// Only elements of velocity level 0 and constant velocity mode survive
/// the integration, which makes the reduction exact.
pub fn compute_density(basis: &Basis1d, domain: &Domain, set: &ActiveSet, coeffs: &[f64], level: u32) -> Result<Dg1d> {
    let np = basis.len();
    let b = set.block_len();
    let mut keys = Vec::new();
    let mut blocks = Vec::new();
    for (e, key) in set.keys().iter().enumerate() {
        if key.level(1) != 0 {
            continue;
        }
        if key.level(0) > level {
            return Err(Error::Structural { key: key.clone(), reason: "space level above density mesh".into() });
        }
        keys.push(ElementKey::new(&[key.level(0)], &[key.cell(0)])?);
        // mode (i_x, 0) sits at flat index i_x * np
        let scale = domain.extent(1).sqrt();
        blocks.push((0..np).map(|i| coeffs[e * b + i * np] * scale).collect::<Vec<_>>());
    }
    let set1 = ActiveSet::new(keys.clone(), 1, basis.degree());
    let mut flat = vec![0.0; set1.len() * np];
    for (k, blk) in keys.iter().zip(blocks) {
        let pos = set1.position(k).expect("key present");
        flat[pos * np..(pos + 1) * np].copy_from_slice(&blk);
    }
    let grid = to_cells(basis, &set1, &flat, &[level])?;
    Ok(Dg1d { lower: domain.lower[0], upper: domain.upper[0], degree: basis.degree(), cells: 1 << level, coeffs: grid.data })
}

/// Self-consistent electric field.
#[derive(Debug, Clone)]
pub enum ElectricField {
    Periodic(Dg1d),
    Radial(RadialField),
}

impl ElectricField {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Periodic(e) => e.eval(x),
            Self::Radial(e) => e.eval(x),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Periodic(e) => e.max_abs(),
            Self::Radial(e) => e.max_abs(),
        }
    }

    /// `int E^2 dx`.
    pub fn norm_sq(&self) -> f64 {
        match self {
            Self::Periodic(e) => e.norm_sq(),
            Self::Radial(e) => e.norm_sq(),
        }
    }
}

/// External field of the oscillatory variant, `-r/eps + r cos^2(t/eps)`.
pub fn external_field(t: f64, r: f64, eps_scale: f64) -> f64 {
    -r / eps_scale + r * (t / eps_scale).cos().powi(2)
}

/// Phase-space velocity `(v, E(x))` or `(v/eps, E(r) + E_ext(t, r))`.
pub struct VpField<'a> {
    pub variant: Variant,
    pub field: &'a ElectricField,
    pub v_cut: f64,
    pub r_cut: f64,
}

impl VelocityField for VpField<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self.variant {
            Variant::Standard => {
                out[0] = x[1];
                out[1] = self.field.eval(x[0]);
            }
            Variant::OscillatoryPolar { eps_scale } => {
                out[0] = x[1] / eps_scale;
                out[1] = self.field.eval(x[0]) + external_field(t, x[0], eps_scale);
            }
        }
    }

    fn speed_bounds(&self, t: f64) -> Vec<f64> {
        match self.variant {
            Variant::Standard => vec![self.v_cut, self.field.max_abs()],
            Variant::OscillatoryPolar { eps_scale } => {
                let ext = external_field(t, self.r_cut, eps_scale).abs();
                vec![self.v_cut / eps_scale, self.field.max_abs() + ext]
            }
        }
    }
}

/// Field solver bound to one problem and mesh.
pub struct VpSolver {
    pub problem: VpProblem,
    pub disc: Discretization,
    poisson: Option<PeriodicPoisson>,
}

impl VpSolver {
    pub fn new(problem: VpProblem, degree: usize, max_level: u32, flux: FluxKind) -> Result<Self> {
        let basis = build_basis(degree)?;
        let disc = Discretization::new(basis, problem.domain.clone(), max_level, flux)?;
        let poisson = match problem.variant {
            Variant::Standard => Some(PeriodicPoisson::new(
                problem.domain.lower[0],
                problem.domain.upper[0],
                degree,
                1 << max_level,
            )?),
            Variant::OscillatoryPolar { .. } => None,
        };
        Ok(Self { problem, disc, poisson })
    }

    /// Density, then the field from the appropriate Poisson problem. The
    /// periodic solve uses the mean density as neutralizing background.
    pub fn field(&self, set: &ActiveSet, coeffs: &[f64]) -> Result<ElectricField> {
        let rho = compute_density(&self.disc.basis, &self.disc.domain, set, coeffs, self.disc.max_level)?;
        match &self.poisson {
            Some(p) => {
                let mut s = rho;
                let shift = s.mean() * s.h().sqrt();
                let np = s.np();
                for i in 0..s.cells {
                    s.coeffs[i * np] -= shift;
                }
                Ok(ElectricField::Periodic(p.solve(&s)?.1))
            }
            None => Ok(ElectricField::Radial(solve_poisson_radial(&rho)?)),
        }
    }

    fn velocity<'a>(&self, e: &'a ElectricField) -> VpField<'a> {
        VpField { variant: self.problem.variant, field: e, v_cut: self.problem.v_cut(), r_cut: self.problem.domain.upper[0] }
    }
}

impl Rhs for VpSolver {
    fn dense_residual(&self, t: f64, set: &ActiveSet, coeffs: &[f64], levels: &[u32]) -> Result<HierarchicalArray> {
        let e = self.field(set, coeffs)?;
        // the field is piecewise polynomial on the finest space mesh
        let lv = [self.disc.max_level, levels[1]];
        self.disc.dense_residual(&self.velocity(&e), t, set, coeffs, &lv)
    }

    fn speed_bounds(&self, t: f64, set: &ActiveSet, coeffs: &[f64]) -> Result<Vec<f64>> {
        let e = self.field(set, coeffs)?;
        Ok(self.velocity(&e).speed_bounds(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub time: f64,
    pub dof: usize,
    pub particle_number: f64,
    pub momentum: f64,
    pub enstrophy: f64,
    /// `sum c^2`, equal to the enstrophy by orthonormality.
    pub enstrophy_coeffs: f64,
    pub energy: f64,
}

/// Invariants by `(k+2)`-point Gauss quadrature on the grid at the active
/// maximum levels.
pub fn compute_diagnostics(
    basis: &Basis1d,
    domain: &Domain,
    table: &ElementTable,
    field: &ElectricField,
    t: f64,
) -> Result<Diagnostics> {
    let set = ActiveSet::from_table(table);
    let coeffs = set.gather(table);
    let grid = to_cells(basis, &set, &coeffs, &set.max_levels())?;
    let np = basis.len();
    let quad = gauss_quadrature(basis.degree() + 2)?;
    let nq = quad.order();
    let cells = grid.cells_per_dim();
    let h = [domain.extent(0) / cells[0] as f64, domain.extent(1) / cells[1] as f64];
    let area = h[0] * h[1];
    let mut psi = vec![vec![0.0; np]; nq];
    for q in 0..nq {
        legendre_values(quad.nodes[q], &mut psi[q]);
    }
    let sums: Vec<[f64; 4]> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let iv = c % cells[1];
            let blk = grid.cell(c);
            let mut acc = [0.0; 4];
            for a in 0..nq {
                for b in 0..nq {
                    let v = domain.lower[1] + h[1] * (iv as f64 + quad.nodes[b]);
                    let w = quad.weights[a] * quad.weights[b] * area;
                    let mut f = 0.0;
                    for p in 0..np {
                        for r in 0..np {
                            f += blk[p * np + r] * psi[a][p] * psi[b][r];
                        }
                    }
                    f /= area.sqrt();
                    acc[0] += w * f;
                    acc[1] += w * f * v;
                    acc[2] += w * f * f;
                    acc[3] += w * f * v * v;
                }
            }
            acc
        })
        .collect();
    let s = sums.iter().fold([0.0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(Diagnostics {
        time: t,
        dof: table.dof(),
        particle_number: s[0],
        momentum: s[1],
        enstrophy: s[2],
        enstrophy_coeffs: table.coefficient_norm_sq(),
        energy: 0.5 * s[3] + 0.5 * field.norm_sq(),
    })
}

fn diag_row(d: &Diagnostics) -> String {
    format!(
        "{:e},{},{:e},{:e},{:e},{:e}\n",
        d.time, d.dof, d.particle_number, d.momentum, d.enstrophy, d.energy
    )
}

/// Run a Vlasov-Poisson benchmark and collect diagnostics after every step.
pub fn run_vp_with_history(cfg: &RunConfig) -> Result<(RunSummary, Vec<Diagnostics>)> {
    let problem = vp_problem(&cfg.problem)?;
    if cfg.dim != 2 {
        return Err(Error::Config(format!("Vlasov-Poisson runs are 1D1V (dim = 2), got dim = {}", cfg.dim)));
    }
    let flux = cfg.flux.unwrap_or(FluxKind::Upwind);
    let solver = VpSolver::new(problem.clone(), cfg.degree, cfg.max_level, flux)?;
    let basis = solver.disc.basis.clone();
    let domain = problem.domain.clone();
    let step_cfg = cfg.step_config()?;
    let mut table = initial_table(cfg, &|x: &[f64]| problem.initial(x), &basis, &domain)?;

    let mut out = Output::new(cfg.output_dir.as_deref(), "t,dof,mass,momentum,enstrophy,energy")?;
    let mut history = Vec::new();
    let diag = |table: &ElementTable, t: f64| -> Result<Diagnostics> {
        let set = ActiveSet::from_table(table);
        let e = solver.field(&set, &set.gather(table))?;
        compute_diagnostics(&basis, &domain, table, &e, t)
    };
    let d0 = diag(&table, 0.0)?;
    out.diagnostics.push_str(&diag_row(&d0));
    history.push(d0);
    out.snapshot(0, &table, &basis, &domain)?;

    let mut t = 0.0;
    let mut steps = 0;
    while t < cfg.final_time {
        let remaining = cfg.final_time - t;
        let rep = evolve_step(&solver, &solver.disc, &mut table, t, &step_cfg, Some(remaining))?;
        t = if rep.dt >= remaining { cfg.final_time } else { t + rep.dt };
        steps += 1;
        let d = diag(&table, t)?;
        out.diagnostics.push_str(&diag_row(&d));
        history.push(d);
        if cfg.output_stride > 0 && steps % cfg.output_stride == 0 && t < cfg.final_time {
            out.snapshot(steps, &table, &basis, &domain)?;
        }
        if steps % 50 == 0 {
            info!("step {steps} t={t:.4} dof={} mass={:e}", table.dof(), d.particle_number);
        }
    }
    out.snapshot(steps, &table, &basis, &domain)?;
    out.finish()?;
    let summary = RunSummary { final_time: t, steps, dof_coeffs: table.dof(), dof_elems: table.len(), errors: None, table };
    Ok((summary, history))
}

pub fn run_vp(cfg: &RunConfig) -> Result<RunSummary> {
    run_vp_with_history(cfg).map(|r| r.0)
}
