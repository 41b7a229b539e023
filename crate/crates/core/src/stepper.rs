//! Time-step selection, TVD-RK3 and the adaptive predict / refine / evolve /
//! coarsen cycle.

use crate::domain::Domain;
use crate::element::{children, ElementTable};
use crate::error::{Error, Result};
use crate::operator::{Discretization, VelocityField};
use crate::projection::{element_indicator, ThresholdConfig};
use crate::transform::{ActiveSet, HierarchicalArray};

/// Semi-discrete right-hand side on a frozen active set.
pub trait Rhs: Sync {
    /// Residual of `coeffs` as a hierarchical array over the grid at
    /// `levels`.
    fn dense_residual(&self, t: f64, set: &ActiveSet, coeffs: &[f64], levels: &[u32]) -> Result<HierarchicalArray>;

    /// Per-dimension wave speed bounds for the current state.
    fn speed_bounds(&self, t: f64, set: &ActiveSet, coeffs: &[f64]) -> Result<Vec<f64>>;

    fn residual(&self, t: f64, set: &ActiveSet, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.dense_residual(t, set, coeffs, &set.max_levels())?.gather(set)
    }
}

/// Linear transport with a prescribed velocity field.
pub struct TransportRhs<'a> {
    pub disc: &'a Discretization,
    pub field: &'a dyn VelocityField,
}

impl Rhs for TransportRhs<'_> {
    fn dense_residual(&self, t: f64, set: &ActiveSet, coeffs: &[f64], levels: &[u32]) -> Result<HierarchicalArray> {
        self.disc.dense_residual(self.field, t, set, coeffs, levels)
    }

    fn speed_bounds(&self, t: f64, _set: &ActiveSet, _coeffs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.field.speed_bounds(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    pub thresholds: ThresholdConfig,
    pub reuse_first_stage: bool,
    /// When false the active set is frozen (fixed sparse / full grids).
    pub adaptive: bool,
}

impl StepConfig {
    pub fn new(cfl: f64, thresholds: ThresholdConfig) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        Ok(Self { cfl, thresholds, reuse_first_stage: true, adaptive: true })
    }
}

/// `CFL / sum_m c_m / h_m` with `h_m` the extent of dimension `m` times
/// `2^{-min(l_m + 1, N)}`.
pub fn compute_dt(max_levels: &[u32], domain: &Domain, speeds: &[f64], cfl: f64, max_level: u32) -> Result<f64> {
    if speeds.len() != max_levels.len() {
        return Err(Error::DimensionMismatch { expected: max_levels.len(), got: speeds.len() });
    }
    if speeds.iter().any(|c| !(*c >= 0.0)) || speeds.iter().all(|c| *c == 0.0) {
        return Err(Error::Config(format!("speed bounds must be non-negative and not all zero: {speeds:?}")));
    }
    let mut s = 0.0;
    for (m, (&l, &c)) in max_levels.iter().zip(speeds).enumerate() {
        let lp = (l + 1).min(max_level);
        let h = domain.extent(m) / (1u64 << lp) as f64;
        s += c / h;
    }
    Ok(cfl / s)
}

/// One TVD-RK3 step. `rhs(t, u)` evaluates the residual; `first`, when
/// given, is used as the stage-1 residual `R(u)`.
pub fn rk3_step<F>(u: &[f64], t: f64, dt: f64, mut rhs: F, first: Option<Vec<f64>>) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let r0 = match first {
        Some(r) => r,
        None => rhs(t, u)?,
    };
    let u1: Vec<f64> = u.iter().zip(&r0).map(|(a, r)| a + dt * r).collect();
    let r1 = rhs(t + dt, &u1)?;
    let u2: Vec<f64> = u.iter().zip(&u1).zip(&r1).map(|((a, b), r)| 0.75 * a + 0.25 * (b + dt * r)).collect();
    let r2 = rhs(t + 0.5 * dt, &u2)?;
    Ok(u.iter().zip(&u2).zip(&r2).map(|((a, b), r)| a / 3.0 + 2.0 / 3.0 * (b + dt * r)).collect())
}

/// Outcome of one adaptive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub added: usize,
    pub removed: usize,
}

/// Advance `table` from `t` by one step of size `min(CFL step, max_dt)`.
pub fn evolve_step(
    rhs: &dyn Rhs,
    disc: &Discretization,
    table: &mut ElementTable,
    t: f64,
    cfg: &StepConfig,
    max_dt: Option<f64>,
) -> Result<StepReport> {
    let n = cfg.thresholds.max_level;
    let set0 = ActiveSet::from_table(table);
    let u0 = set0.gather(table);
    let levels0 = set0.max_levels();
    let speeds = rhs.speed_bounds(t, &set0, &u0)?;
    let mut dt = compute_dt(&levels0, &disc.domain, &speeds, cfg.cfl, n)?;
    if let Some(cap) = max_dt {
        dt = dt.min(cap);
    }

    if !cfg.adaptive {
        let u = rk3_step(&u0, t, dt, |s, v| rhs.residual(s, &set0, v), None)?;
        check_finite(&u, t)?;
        set0.scatter(&u, table);
        return Ok(StepReport { dt, added: 0, removed: 0 });
    }

    // prediction
    let dense0 = rhs.dense_residual(t, &set0, &u0, &levels0)?;
    let r0 = dense0.gather(&set0)?;
    let b = set0.block_len();

    // refinement on the predicted state
    let mut added = 0;
    for (e, key) in set0.keys().iter().enumerate() {
        let pred: Vec<f64> = (0..b).map(|i| u0[e * b + i] + dt * r0[e * b + i]).collect();
        if element_indicator(&pred, key, &disc.basis, cfg.thresholds.norm, &disc.domain) > cfg.thresholds.epsilon {
            for c in children(key, n) {
                if !table.contains(&c) {
                    added += table.insert_closure(c)?.len();
                }
            }
        }
    }

    // evolution on the frozen space
    let set1 = if added > 0 { ActiveSet::from_table(table) } else { set0.clone() };
    let u1 = if added > 0 { set1.remap(&set0, &u0) } else { u0 };
    let first = if !cfg.reuse_first_stage {
        None
    } else if added == 0 {
        Some(r0)
    } else if dense0.covers(&set1) {
        Some(dense0.gather(&set1)?)
    } else {
        None
    };
    let u = rk3_step(&u1, t, dt, |s, v| rhs.residual(s, &set1, v), first)?;
    check_finite(&u, t)?;
    set1.scatter(&u, table);

    let removed = coarsen(table, disc, &cfg.thresholds)?;
    Ok(StepReport { dt, added, removed })
}

/// Remove non-root leaves whose indicator is below `eta`, repeating until
/// none qualifies. Returns the number of removed elements.
pub fn coarsen(table: &mut ElementTable, disc: &Discretization, th: &ThresholdConfig) -> Result<usize> {
    let mut removed = 0;
    loop {
        let doomed: Vec<_> = table
            .sorted_leaves()
            .into_iter()
            .filter(|k| !k.is_root())
            .filter(|k| {
                let e = table.get(k).expect("leaf present");
                element_indicator(&e.coeffs, k, &disc.basis, th.norm, &disc.domain) < th.eta
            })
            .collect();
        if doomed.is_empty() {
            return Ok(removed);
        }
        for k in &doomed {
            table.remove_leaf(k)?;
        }
        removed += doomed.len();
    }
}

fn check_finite(u: &[f64], t: f64) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(t))
    }
}
