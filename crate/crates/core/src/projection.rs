//! Refinement indicators and top-down adaptive L2 projection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis1d, Side, MAX_DEGREE};
use crate::domain::Domain;
use crate::element::{children, parents, ElementKey, ElementTable};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_quadrature, Quadrature};

/// Norm used by the refinement and coarsening indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    L1,
    L2,
    Linf,
}

/// Scalar function on the physical domain.
pub type ScalarFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    /// Refinement threshold.
    pub epsilon: f64,
    /// Coarsening threshold, `0 < eta < epsilon`.
    pub eta: f64,
    pub norm: NormChoice,
    pub max_level: u32,
    pub degree: usize,
}

impl ThresholdConfig {
    /// Thresholds with the default `eta = epsilon / 10`.
    pub fn new(epsilon: f64, norm: NormChoice, max_level: u32, degree: usize) -> Result<Self> {
        Self::with_eta(epsilon, epsilon / 10.0, norm, max_level, degree)
    }

    pub fn with_eta(epsilon: f64, eta: f64, norm: NormChoice, max_level: u32, degree: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !(eta > 0.0) || eta >= epsilon {
            return Err(Error::Config(format!("need 0 < eta < epsilon, got eta={eta}, epsilon={epsilon}")));
        }
        if degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        if max_level > 15 {
            return Err(Error::Config(format!("max level {max_level} too large")));
        }
        Ok(Self { epsilon, eta, norm, max_level, degree })
    }
}

/// 1D quadrature nodes on the support of element `(l, j)`: unit-coordinate
/// position, unit-measure weight, and the `k+1` basis values.
fn support_nodes(basis: &Basis1d, quad: &Quadrature, l: u32, j: u32, depth: u32) -> Vec<(f64, f64, Vec<f64>)> {
    let width = if l == 0 { 1.0 } else { 1.0 / (1u64 << (l - 1)) as f64 };
    let a = width * j as f64;
    let pieces = 2usize << depth;
    let h = width / pieces as f64;
    let mut out = Vec::with_capacity(pieces * quad.order());
    for c in 0..pieces {
        for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
            let x = a + h * (c as f64 + t);
            let mut vals = vec![0.0; basis.len()];
            basis.eval_all_1d(l, j, x, Side::Right, &mut vals);
            out.push((x, h * w, vals));
        }
    }
    out
}

/// Hierarchical coefficients of `u` on `key`, integrating separately over
/// each of the `2^d` sub-boxes where the basis is polynomial.
pub fn project_element(u: &ScalarFn, key: &ElementKey, basis: &Basis1d, domain: &Domain, quad: &Quadrature) -> Vec<f64> {
    project_element_refined(u, key, basis, domain, quad, &vec![0; key.dim()])
}

/// As [`project_element`], with each polynomial sub-box further split
/// into `2^{depth_m}` pieces along dimension `m`.
pub fn project_element_refined(
    u: &ScalarFn,
    key: &ElementKey,
    basis: &Basis1d,
    domain: &Domain,
    quad: &Quadrature,
    depth: &[u32],
) -> Vec<f64> {
    let d = key.dim();
    let np = basis.len();
    let nodes: Vec<_> = (0..d).map(|m| support_nodes(basis, quad, key.level(m), key.cell(m), depth[m])).collect();
    let counts: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    let total: usize = counts.iter().product();
    let block = np.pow(d as u32);
    let mut out = vec![0.0; block];
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut prod = vec![0.0; block];
    for _ in 0..total {
        let mut w = 1.0;
        for m in 0..d {
            let (xi, wm, _) = &nodes[m][idx[m]];
            x[m] = domain.from_unit(m, *xi);
            w *= wm;
        }
        let f = u(&x) * w;
        if f != 0.0 {
            // tensor product of the per-dimension basis values
            prod[0] = f;
            let mut len = 1;
            for m in 0..d {
                let vals = &nodes[m][idx[m]].2;
                for a in (0..len).rev() {
                    let base = prod[a];
                    for i in (0..np).rev() {
                        prod[a * np + i] = base * vals[i];
                    }
                }
                len *= np;
            }
            for (o, p) in out.iter_mut().zip(&prod) {
                *o += p;
            }
        }
        for m in (0..d).rev() {
            idx[m] += 1;
            if idx[m] < counts[m] {
                break;
            }
            idx[m] = 0;
        }
    }
    let scale = domain.volume().sqrt();
    out.iter_mut().for_each(|c| *c *= scale);
    out
}

/// Subdivision depth that resolves integrals down to level-`max_level`
/// cells.
fn fine_depth(key: &ElementKey, max_level: u32) -> Vec<u32> {
    key.levels().map(|l| max_level.saturating_sub(l.max(1))).collect()
}

/// Refinement indicator of one coefficient block.
pub fn element_indicator(coeffs: &[f64], key: &ElementKey, basis: &Basis1d, norm: NormChoice, domain: &Domain) -> f64 {
    match norm {
        NormChoice::L2 => coeffs.iter().map(|c| c * c).sum::<f64>().sqrt(),
        NormChoice::L1 | NormChoice::Linf => {
            let d = key.dim();
            let np = basis.len();
            let vol_sqrt = domain.volume().sqrt();
            let levels = key.level_vec();
            let mut i = vec![0usize; d];
            let mut s = 0.0;
            for c in coeffs {
                if *c != 0.0 {
                    let n = basis.basis_norms(&i, &levels).expect("valid indices");
                    let w = match norm {
                        NormChoice::L1 => n.l1 * vol_sqrt,
                        _ => n.linf / vol_sqrt,
                    };
                    s += c.abs() * w;
                }
                for m in (0..d).rev() {
                    i[m] += 1;
                    if i[m] < np {
                        break;
                    }
                    i[m] = 0;
                }
            }
            s
        }
    }
}

/// Project `u` onto exactly the given keys (which must be hole free).
pub fn project_onto_keys(
    u: &ScalarFn,
    keys: &[ElementKey],
    basis: &Basis1d,
    domain: &Domain,
    max_level: u32,
) -> Result<ElementTable> {
    let d = domain.dim();
    let quad = gauss_quadrature(basis.degree() + 2)?;
    let mut keys = keys.to_vec();
    keys.sort_by(|a, b| a.level_l1().cmp(&b.level_l1()).then_with(|| a.cmp(b)));
    let coeffs: Vec<Vec<f64>> = keys
        .par_iter()
        .map(|k| project_element_refined(u, k, basis, domain, &quad, &fine_depth(k, max_level)))
        .collect();
    let mut table = ElementTable::new(d, basis.degree(), max_level);
    for (k, c) in keys.into_iter().zip(coeffs) {
        table.insert_with(k, Some(c))?;
    }
    Ok(table)
}

/// Top-down adaptive projection.
///
/// Starting from the level-0 element, every pass expands each leaf whose
/// indicator exceeds `epsilon` by computing and inserting its missing
/// children (plus any missing ancestors of those children). Passes repeat
/// until nothing is added. Coefficients are computed by Gauss quadrature
/// resolved down to the level-`N` cells.
pub fn adaptive_project(u: &ScalarFn, config: &ThresholdConfig, basis: &Basis1d, domain: &Domain) -> Result<ElementTable> {
    let d = domain.dim();
    let n = config.max_level;
    let quad = gauss_quadrature(basis.degree() + 2)?;
    let project = |k: &ElementKey| project_element_refined(u, k, basis, domain, &quad, &fine_depth(k, n));

    let mut table = ElementTable::new(d, basis.degree(), n);
    let root = ElementKey::root(d);
    let c = project(&root);
    table.insert_with(root, Some(c))?;

    loop {
        let mut pending: Vec<ElementKey> = Vec::new();
        for leaf in table.sorted_leaves() {
            let e = table.get(&leaf).expect("leaf present");
            if element_indicator(&e.coeffs, &leaf, basis, config.norm, domain) > config.epsilon {
                for c in children(&leaf, n) {
                    collect_missing(&table, c, &mut pending);
                }
            }
        }
        if pending.is_empty() {
            break;
        }
        pending.sort_by(|a, b| a.level_l1().cmp(&b.level_l1()).then_with(|| a.cmp(b)));
        pending.dedup();
        let coeffs: Vec<Vec<f64>> = pending.par_iter().map(&project).collect();
        for (k, c) in pending.into_iter().zip(coeffs) {
            table.insert_with(k, Some(c))?;
        }
    }
    Ok(table)
}

fn collect_missing(table: &ElementTable, key: ElementKey, out: &mut Vec<ElementKey>) {
    if table.contains(&key) || out.contains(&key) {
        return;
    }
    for p in parents(&key) {
        collect_missing(table, p, out);
    }
    out.push(key);
}
