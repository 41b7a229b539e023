//! Run configuration, benchmark driver, convergence studies and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, Basis1d};
use crate::domain::Domain;
use crate::element::{all_level_vectors, keys_at_level, ElementKey, ElementTable};
use crate::error::{Error, Result};
use crate::operator::{eval_grid, Discretization, FluxKind};
use crate::problems::transport_problem;
use crate::projection::{adaptive_project, project_onto_keys, NormChoice, ScalarFn, ThresholdConfig};
use crate::quadrature::{gauss_quadrature, legendre_values};
use crate::stepper::{evolve_step, StepConfig, TransportRhs};
use crate::transform::{to_cells, ActiveSet, CellGrid};
use crate::vlasov;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Adaptive,
    /// All keys with `|l|_1 <= N`, no refinement or coarsening.
    FixedSparse,
    /// All keys with `|l|_inf <= N`, no refinement or coarsening.
    FixedFull,
}

fn default_dim() -> usize {
    2
}

fn default_norm() -> NormChoice {
    NormChoice::L2
}

fn default_cfl() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub degree: usize,
    pub max_level: u32,
    pub epsilon: f64,
    /// Coarsening threshold; `epsilon / 10` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_norm")]
    pub norm: NormChoice,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Numerical flux; the problem's default when absent.
    #[serde(default)]
    pub flux: Option<FluxKind>,
    pub final_time: f64,
    /// Write snapshots every this many steps (0: initial and final only).
    #[serde(default)]
    pub output_stride: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mode: Mode,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Apply `key=value`; the value is parsed as JSON, falling back to a
    /// plain string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
        let mut json = serde_json::to_value(&*self)?;
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let obj = json.as_object_mut().expect("config serializes to an object");
        if !obj.contains_key(key.trim()) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        obj.insert(key.trim().to_string(), parsed);
        *self = serde_json::from_value(json)?;
        Ok(())
    }

    pub fn thresholds(&self) -> Result<ThresholdConfig> {
        let eta = self.eta.unwrap_or(self.epsilon / 10.0);
        ThresholdConfig::with_eta(self.epsilon, eta, self.norm, self.max_level, self.degree)
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let mut s = StepConfig::new(self.cfl, self.thresholds()?)?;
        s.adaptive = self.mode == Mode::Adaptive;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time >= 0.0) {
            return Err(Error::Config(format!("final time must be non-negative, got {}", self.final_time)));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        self.step_config().map(|_| ())
    }
}

/// Discrete `L1`, `L2` and `Linf` errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Errors {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_time: f64,
    pub steps: usize,
    pub dof_coeffs: usize,
    pub dof_elems: usize,
    pub errors: Option<Errors>,
    pub table: ElementTable,
}

/// Initial table for the configured mode.
pub fn initial_table(cfg: &RunConfig, u: &ScalarFn, basis: &Basis1d, domain: &Domain) -> Result<ElementTable> {
    let n = cfg.max_level;
    match cfg.mode {
        Mode::Adaptive => adaptive_project(u, &cfg.thresholds()?, basis, domain),
        Mode::FixedSparse | Mode::FixedFull => {
            let keys: Vec<ElementKey> = all_level_vectors(domain.dim(), n)
                .iter()
                .filter(|l| cfg.mode == Mode::FixedFull || l.iter().sum::<u32>() <= n)
                .flat_map(|l| keys_at_level(l))
                .collect();
            project_onto_keys(u, &keys, basis, domain, n)
        }
    }
}

/// Cell grid of the table at level `N` in every dimension.
pub fn fine_grid(table: &ElementTable, basis: &Basis1d) -> Result<CellGrid> {
    let set = ActiveSet::from_table(table);
    let coeffs = set.gather(table);
    to_cells(basis, &set, &coeffs, &vec![table.max_level(); table.dim()])
}

/// Errors against `exact` by `(k+2)`-point Gauss quadrature on every
/// level-`N` cell.
pub fn solution_errors(grid: &CellGrid, domain: &Domain, exact: &ScalarFn) -> Result<Errors> {
    let d = grid.dim();
    let np = grid.degree + 1;
    let quad = gauss_quadrature(grid.degree + 2)?;
    let nq = quad.order();
    let cells = grid.cells_per_dim();
    let h: Vec<f64> = (0..d).map(|m| domain.extent(m) / cells[m] as f64).collect();
    let vol: f64 = h.iter().product();
    let scale = 1.0 / vol.sqrt();
    let mut psi = vec![vec![0.0; np]; nq];
    for q in 0..nq {
        legendre_values(quad.nodes[q], &mut psi[q]);
    }
    let nv = nq.pow(d as u32);
    let b = grid.block_len();
    let parts: Vec<(f64, f64, f64)> = (0..grid.num_cells())
        .into_par_iter()
        .map(|c| {
            let mut ci = vec![0usize; d];
            let mut r = c;
            for m in (0..d).rev() {
                ci[m] = r % cells[m];
                r /= cells[m];
            }
            let block = grid.cell(c);
            let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
            let mut qi = vec![0usize; d];
            let mut pi = vec![0usize; d];
            let mut x = vec![0.0; d];
            for q in 0..nv {
                let mut rq = q;
                for m in (0..d).rev() {
                    qi[m] = rq % nq;
                    rq /= nq;
                }
                let mut w = vol;
                for m in 0..d {
                    x[m] = domain.lower[m] + h[m] * (ci[m] as f64 + quad.nodes[qi[m]]);
                    w *= quad.weights[qi[m]];
                }
                let mut v = 0.0;
                for (p, a) in block.iter().enumerate().take(b) {
                    let mut rp = p;
                    for m in (0..d).rev() {
                        pi[m] = rp % np;
                        rp /= np;
                    }
                    v += a * (0..d).map(|m| psi[qi[m]][pi[m]]).product::<f64>();
                }
                let e = (v * scale - exact(&x)).abs();
                l1 += w * e;
                l2 += w * e * e;
                linf = linf.max(e);
            }
            (l1, l2, linf)
        })
        .collect();
    let (l1, l2, linf) = parts.iter().fold((0.0, 0.0, 0.0f64), |a, p| (a.0 + p.0, a.1 + p.1, a.2.max(p.2)));
    Ok(Errors { l1, l2: l2.sqrt(), linf })
}

/// For every level vector with `|l|_inf <= N`, the fraction of its
/// elements that are active.
pub fn active_percentage(table: &ElementTable) -> Vec<(Vec<u32>, f64)> {
    let d = table.dim();
    let levels = all_level_vectors(d, table.max_level());
    let mut counts = std::collections::HashMap::new();
    for e in table.elements() {
        *counts.entry(e.key.level_vec()).or_insert(0usize) += 1;
    }
    levels
        .into_iter()
        .map(|l| {
            let total: f64 = l.iter().map(|&lm| if lm == 0 { 1.0 } else { (1u64 << (lm - 1)) as f64 }).product();
            let c = counts.get(&l).copied().unwrap_or(0) as f64;
            (l, c / total)
        })
        .collect()
}

pub fn percentage_csv(rows: &[(Vec<u32>, f64)], d: usize) -> String {
    let mut out: Vec<String> = (1..=d).map(|m| format!("l{m}")).collect();
    out.push("fraction".into());
    let mut s = out.join(",") + "\n";
    for (l, f) in rows {
        let cols: Vec<String> = l.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{f:e}", cols.join(","));
    }
    s
}

/// Values at the `2^N` cell centres per dimension (only for `d <= 2`).
pub fn snapshot_csv(grid: &CellGrid, domain: &Domain) -> String {
    let d = grid.dim();
    let cells = grid.cells_per_dim();
    let mut header: Vec<String> = (1..=d).map(|m| format!("x{m}")).collect();
    header.push("value".into());
    let mut s = header.join(",") + "\n";
    let mut x = vec![0.0; d];
    for c in 0..grid.num_cells() {
        let mut r = c;
        for m in (0..d).rev() {
            let i = r % cells[m];
            r /= cells[m];
            x[m] = domain.lower[m] + domain.extent(m) * (i as f64 + 0.5) / cells[m] as f64;
        }
        let v = eval_grid(grid, domain, &x);
        let cols: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{},{v:e}", cols.join(","));
    }
    s
}

pub fn errors_csv(e: &Errors) -> String {
    format!("l1,l2,linf\n{:e},{:e},{:e}\n", e.l1, e.l2, e.linf)
}

/// Writes step artifacts into the output directory, if any.
pub(crate) struct Output {
    dir: Option<PathBuf>,
    pub(crate) diagnostics: String,
}

impl Output {
    pub(crate) fn new(dir: Option<&Path>, header: &str) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), diagnostics: format!("{header}\n") })
    }

    pub(crate) fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub(crate) fn write(&self, name: &str, body: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            fs::write(d.join(name), body)?;
        }
        Ok(())
    }

    pub(crate) fn snapshot(&self, step: usize, table: &ElementTable, basis: &Basis1d, domain: &Domain) -> Result<()> {
        if !self.enabled() {
            return Ok(());
        }
        self.write(&format!("elements_{step}.csv"), &table.to_csv())?;
        self.write(&format!("percentage_{step}.csv"), &percentage_csv(&active_percentage(table), table.dim()))?;
        if table.dim() <= 2 {
            let grid = fine_grid(table, basis)?;
            self.write(&format!("snapshot_{step}.csv"), &snapshot_csv(&grid, domain))?;
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        self.write("diagnostics.csv", &self.diagnostics)
    }
}

fn transport_diag_row(t: f64, table: &ElementTable, domain: &Domain) -> String {
    let root = table.get(&ElementKey::root(table.dim())).expect("root present");
    let mass = root.coeffs[0] * domain.volume().sqrt();
    format!("{t:e},{},{},{mass:e},{:e}\n", table.dof(), table.len(), table.coefficient_norm_sq().sqrt())
}

/// Run a benchmark to its final time.
pub fn run_problem(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    if vlasov::VP_PROBLEMS.contains(&cfg.problem.as_str()) {
        return vlasov::run_vp(cfg);
    }
    let problem = transport_problem(&cfg.problem, cfg.dim)?;
    let basis = build_basis(cfg.degree)?;
    let domain = problem.domain.clone();
    let flux = cfg.flux.unwrap_or(problem.default_flux);
    let disc = Discretization::new(basis.clone(), domain.clone(), cfg.max_level, flux)?;
    let step_cfg = cfg.step_config()?;
    let mut table = initial_table(cfg, &*problem.initial, &basis, &domain)?;

    let mut out = Output::new(cfg.output_dir.as_deref(), "t,dof_coeffs,dof_elems,mass,l2_norm")?;
    out.diagnostics.push_str(&transport_diag_row(0.0, &table, &domain));
    out.snapshot(0, &table, &basis, &domain)?;

    let rhs = TransportRhs { disc: &disc, field: &*problem.field };
    let mut t = 0.0;
    let mut steps = 0;
    while t < cfg.final_time {
        let remaining = cfg.final_time - t;
        let rep = evolve_step(&rhs, &disc, &mut table, t, &step_cfg, Some(remaining))?;
        t = if rep.dt >= remaining { cfg.final_time } else { t + rep.dt };
        steps += 1;
        out.diagnostics.push_str(&transport_diag_row(t, &table, &domain));
        if cfg.output_stride > 0 && steps % cfg.output_stride == 0 && t < cfg.final_time {
            out.snapshot(steps, &table, &basis, &domain)?;
        }
        if steps % 100 == 0 {
            info!("step {steps} t={t:.5} dof={}", table.dof());
        }
    }
    out.snapshot(steps, &table, &basis, &domain)?;

    let errors = if problem.has_exact(t) {
        let grid = fine_grid(&table, &basis)?;
        let exact = |x: &[f64]| problem.exact_value(t, x).expect("exact available");
        Some(solution_errors(&grid, &domain, &exact)?)
    } else {
        None
    };
    if let Some(e) = &errors {
        out.write("errors.csv", &errors_csv(e))?;
    }
    out.finish()?;
    Ok(RunSummary { final_time: t, steps, dof_coeffs: table.dof(), dof_elems: table.len(), errors, table })
}

/// Project the initial data only (no time stepping) and emit the
/// snapshot artifacts.
pub fn run_projection(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let (initial, domain): (Box<dyn Fn(&[f64]) -> f64 + Send + Sync>, Domain) =
        if vlasov::VP_PROBLEMS.contains(&cfg.problem.as_str()) {
            let p = vlasov::vp_problem(&cfg.problem)?;
            let dom = p.domain.clone();
            (Box::new(move |x: &[f64]| p.initial(x)), dom)
        } else {
            let p = transport_problem(&cfg.problem, cfg.dim)?;
            (p.initial, p.domain)
        };
    let basis = build_basis(cfg.degree)?;
    let table = initial_table(cfg, &*initial, &basis, &domain)?;
    let out = Output::new(cfg.output_dir.as_deref(), "")?;
    out.snapshot(0, &table, &basis, &domain)?;
    let grid = fine_grid(&table, &basis)?;
    let errors = solution_errors(&grid, &domain, &*initial)?;
    out.write("errors.csv", &errors_csv(&errors))?;
    Ok(RunSummary {
        final_time: 0.0,
        steps: 0,
        dof_coeffs: table.dof(),
        dof_elems: table.len(),
        errors: Some(errors),
        table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub dof_coeffs: usize,
    pub dof_elems: usize,
    pub l2_error: f64,
    pub r_dof: Option<f64>,
    pub r_eps: Option<f64>,
}

/// `log(a / b) / log(c / d)`, zero when both logs vanish.
fn rate(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Fill in the rates of consecutive rows.
pub fn convergence_rates(rows: &mut [ConvergenceRow]) {
    for i in 1..rows.len() {
        let (p, c) = (rows[i - 1], rows[i]);
        let le = (p.l2_error / c.l2_error).ln();
        rows[i].r_eps = Some(rate(le, (p.epsilon / c.epsilon).ln()));
        rows[i].r_dof = Some(rate(le, (c.dof_coeffs as f64 / p.dof_coeffs as f64).ln()));
    }
}

/// One run per threshold, in order; `epsilons` must be strictly decreasing.
pub fn run_convergence_study(base: &RunConfig, epsilons: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilon list must be strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.epsilon = eps;
        if base.eta.is_some() {
            cfg.eta = Some(eps / 10.0);
        }
        cfg.output_dir = base.output_dir.as_ref().map(|d| d.join(format!("eps_{i}")));
        let s = run_problem(&cfg)?;
        let e = s
            .errors
            .ok_or_else(|| Error::Config(format!("problem `{}` has no exact solution at T", cfg.problem)))?;
        info!("epsilon={eps:e} dof={} l2={:e}", s.dof_coeffs, e.l2);
        rows.push(ConvergenceRow {
            epsilon: eps,
            dof_coeffs: s.dof_coeffs,
            dof_elems: s.dof_elems,
            l2_error: e.l2,
            r_dof: None,
            r_eps: None,
        });
    }
    convergence_rates(&mut rows);
    if let Some(d) = &base.output_dir {
        fs::create_dir_all(d)?;
        fs::write(d.join("convergence.csv"), convergence_csv(&rows))?;
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("epsilon,dof_coeffs,dof_elems,l2_error,r_dof,r_eps\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{:e},{},{},{:e},{},{}",
            r.epsilon,
            r.dof_coeffs,
            r.dof_elems,
            r.l2_error,
            opt(r.r_dof),
            opt(r.r_eps)
        );
    }
    s
}
