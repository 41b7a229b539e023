//! Exact change of basis between hierarchical multiwavelet coefficients and
//! per-cell orthonormal Legendre coefficients on a uniform (possibly
//! anisotropic) grid.
//!
//! Along each dimension the coefficients are laid out hierarchically as
//! level 0 first, then level `l` element `j` at offset
//! `(k+1)(2^{l-1} + j)`; in cell layout cell `c` occupies
//! `(k+1)c..(k+1)(c+1)`. Both layouts have length `(k+1) 2^L`, and the
//! multi-dimensional transform applies the 1D one along every axis.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::basis::Basis1d;
use crate::element::{ElementKey, ElementTable};
use crate::error::{Error, Result};

/// Largest dense array (in `f64` entries) the transform will allocate.
pub const MAX_DENSE_LEN: usize = 1 << 26;

/// Active keys frozen in canonical order, with coefficient offsets.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    keys: Vec<ElementKey>,
    index: HashMap<ElementKey, usize>,
    dim: usize,
    degree: usize,
}

impl ActiveSet {
    pub fn new(mut keys: Vec<ElementKey>, dim: usize, degree: usize) -> Self {
        keys.sort();
        keys.dedup();
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Self { keys, index, dim, degree }
    }

    pub fn from_table(table: &ElementTable) -> Self {
        Self::new(table.sorted_keys(), table.dim(), table.degree())
    }

    pub fn keys(&self) -> &[ElementKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn block_len(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn position(&self, key: &ElementKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &ElementKey) -> bool {
        self.index.contains_key(key)
    }

    /// Coefficient vector of `table` in this set's order (zeros for keys
    /// the table lacks).
    pub fn gather(&self, table: &ElementTable) -> Vec<f64> {
        let b = self.block_len();
        let mut out = vec![0.0; self.keys.len() * b];
        for (i, k) in self.keys.iter().enumerate() {
            if let Some(e) = table.get(k) {
                out[i * b..(i + 1) * b].copy_from_slice(&e.coeffs);
            }
        }
        out
    }

    /// Write coefficients back into `table` (keys must be present).
    pub fn scatter(&self, coeffs: &[f64], table: &mut ElementTable) {
        let b = self.block_len();
        for (i, k) in self.keys.iter().enumerate() {
            if let Some(e) = table.get_mut(k) {
                e.coeffs.copy_from_slice(&coeffs[i * b..(i + 1) * b]);
            }
        }
    }

    /// Re-express `coeffs` (ordered by `from`) in this set's order.
    pub fn remap(&self, from: &ActiveSet, coeffs: &[f64]) -> Vec<f64> {
        let b = self.block_len();
        let mut out = vec![0.0; self.keys.len() * b];
        for (i, k) in self.keys.iter().enumerate() {
            if let Some(src) = from.position(k) {
                out[i * b..(i + 1) * b].copy_from_slice(&coeffs[src * b..(src + 1) * b]);
            }
        }
        out
    }

    pub fn max_levels(&self) -> Vec<u32> {
        let mut out = vec![0; self.dim];
        for k in &self.keys {
            for (m, l) in k.levels().enumerate() {
                out[m] = out[m].max(l);
            }
        }
        out
    }
}

/// Offset of element `(l, j)` in the 1D hierarchical layout.
fn hier_offset(np: usize, l: u32, j: u32) -> usize {
    if l == 0 {
        0
    } else {
        np * ((1usize << (l - 1)) + j as usize)
    }
}

fn axis_dims(np: usize, levels: &[u32]) -> Vec<usize> {
    levels.iter().map(|&l| np << l).collect()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for m in (0..dims.len().saturating_sub(1)).rev() {
        s[m] = s[m + 1] * dims[m + 1];
    }
    s
}

/// Iterate over all multi-indices in `0..n^d` with the last index fastest.
fn for_each_multi(n: usize, d: usize, mut f: impl FnMut(usize, &[usize])) {
    let total = n.pow(d as u32);
    let mut idx = vec![0usize; d];
    for flat in 0..total {
        f(flat, &idx);
        for m in (0..d).rev() {
            idx[m] += 1;
            if idx[m] < n {
                break;
            }
            idx[m] = 0;
        }
    }
}

/// 1D hierarchical -> cell transform of one lane (in place).
fn inverse_lane(two_scale: &[f64], np: usize, level: u32, lane: &mut [f64], work: &mut Vec<f64>) {
    let m = 2 * np;
    let mut s = lane[..np].to_vec();
    for l in 1..=level {
        let cnt = 1usize << (l - 1);
        work.clear();
        work.resize(np * 2 * cnt, 0.0);
        for j in 0..cnt {
            let sj = &s[np * j..np * (j + 1)];
            let dj = &lane[np * (cnt + j)..np * (cnt + j + 1)];
            let out = &mut work[np * 2 * j..np * 2 * (j + 1)];
            for r in 0..np {
                let (a, b) = (sj[r], dj[r]);
                let row_s = &two_scale[r * m..(r + 1) * m];
                let row_d = &two_scale[(np + r) * m..(np + r + 1) * m];
                for q in 0..m {
                    out[q] += row_s[q] * a + row_d[q] * b;
                }
            }
        }
        std::mem::swap(&mut s, work);
    }
    lane.copy_from_slice(&s);
}

/// 1D cell -> hierarchical transform of one lane (in place).
fn forward_lane(two_scale: &[f64], np: usize, level: u32, lane: &mut [f64], work: &mut Vec<f64>) {
    let m = 2 * np;
    let mut s = lane.to_vec();
    for l in (1..=level).rev() {
        let cnt = 1usize << (l - 1);
        work.clear();
        work.resize(np * cnt, 0.0);
        for j in 0..cnt {
            let children = &s[np * 2 * j..np * 2 * (j + 1)];
            for r in 0..np {
                let row_s = &two_scale[r * m..(r + 1) * m];
                let row_d = &two_scale[(np + r) * m..(np + r + 1) * m];
                let mut a = 0.0;
                let mut b = 0.0;
                for q in 0..m {
                    a += row_s[q] * children[q];
                    b += row_d[q] * children[q];
                }
                work[np * j + r] = a;
                lane[np * (cnt + j) + r] = b;
            }
        }
        std::mem::swap(&mut s, work);
    }
    lane[..np].copy_from_slice(&s[..np]);
}

/// Apply `f` to every lane along `axis` of a row-major array.
fn for_each_lane(data: &mut [f64], dims: &[usize], axis: usize, f: impl Fn(&mut [f64], &mut Vec<f64>) + Sync) {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let block = n * inner;
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut lane = vec![0.0; n];
        let mut work = Vec::new();
        for r in 0..inner {
            for t in 0..n {
                lane[t] = chunk[t * inner + r];
            }
            f(&mut lane, &mut work);
            for t in 0..n {
                chunk[t * inner + r] = lane[t];
            }
        }
    });
}

/// Coefficients of a piecewise polynomial on a uniform grid with `2^{L_m}`
/// cells along dimension `m`, stored cell-major: cells in row-major order
/// (last dimension fastest), each followed by its `(k+1)^d` Legendre modes.
///
/// Modes are normalized so that the cell basis is orthonormal on the
/// physical domain, matching the hierarchical normalization.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub degree: usize,
    pub levels: Vec<u32>,
    pub data: Vec<f64>,
}

impl CellGrid {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn cells_per_dim(&self) -> Vec<usize> {
        self.levels.iter().map(|&l| 1usize << l).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_dim().iter().product()
    }

    pub fn block_len(&self) -> usize {
        (self.degree + 1).pow(self.dim() as u32)
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let b = self.block_len();
        &self.data[c * b..(c + 1) * b]
    }
}

fn check_size(np: usize, levels: &[u32]) -> Result<usize> {
    let mut total: usize = 1;
    for &l in levels {
        total = total.saturating_mul(np << l);
    }
    if total > MAX_DENSE_LEN {
        return Err(Error::GridTooLarge(total));
    }
    Ok(total)
}

/// Expand hierarchical coefficients into cell coefficients on the grid with
/// the given per-dimension levels. Every key must satisfy `l_m <= levels_m`.
pub fn to_cells(basis: &Basis1d, set: &ActiveSet, coeffs: &[f64], levels: &[u32]) -> Result<CellGrid> {
    let np = basis.len();
    let d = set.dim();
    if levels.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: levels.len() });
    }
    let total = check_size(np, levels)?;
    let dims = axis_dims(np, levels);
    let st = strides(&dims);
    let mut data = vec![0.0; total];
    let b = set.block_len();
    for (e, key) in set.keys().iter().enumerate() {
        let mut base = 0;
        for m in 0..d {
            if key.level(m) > levels[m] {
                return Err(Error::Structural { key: key.clone(), reason: "level above dense grid".into() });
            }
            base += hier_offset(np, key.level(m), key.cell(m)) * st[m];
        }
        let block = &coeffs[e * b..(e + 1) * b];
        for_each_multi(np, d, |flat, p| {
            let off: usize = p.iter().zip(&st).map(|(pm, s)| pm * s).sum();
            data[base + off] = block[flat];
        });
    }
    let ts = basis.two_scale();
    for m in 0..d {
        let l = levels[m];
        for_each_lane(&mut data, &dims, m, |lane, work| inverse_lane(ts, np, l, lane, work));
    }
    Ok(CellGrid { degree: basis.degree(), levels: levels.to_vec(), data: axis_to_cell_major(&data, np, levels) })
}

fn axis_to_cell_major(axis: &[f64], np: usize, levels: &[u32]) -> Vec<f64> {
    let d = levels.len();
    let dims = axis_dims(np, levels);
    let st = strides(&dims);
    let cells: Vec<usize> = levels.iter().map(|&l| 1usize << l).collect();
    let b = np.pow(d as u32);
    let mut out = vec![0.0; axis.len()];
    let mut mode_off = vec![0usize; b];
    for_each_multi(np, d, |flat, p| mode_off[flat] = p.iter().zip(&st).map(|(a, s)| a * s).sum());
    out.par_chunks_mut(b).enumerate().for_each(|(c, block)| {
        let mut rem = c;
        let mut base = 0;
        for m in (0..d).rev() {
            let cm = rem % cells[m];
            rem /= cells[m];
            base += np * cm * st[m];
        }
        for (slot, off) in block.iter_mut().zip(&mode_off) {
            *slot = axis[base + off];
        }
    });
    out
}

fn cell_major_to_axis(cm: &[f64], np: usize, levels: &[u32]) -> Vec<f64> {
    let d = levels.len();
    let dims = axis_dims(np, levels);
    let st = strides(&dims);
    let cells: Vec<usize> = levels.iter().map(|&l| 1usize << l).collect();
    let b = np.pow(d as u32);
    let mut out = vec![0.0; cm.len()];
    let mut mode_off = vec![0usize; b];
    for_each_multi(np, d, |flat, p| mode_off[flat] = p.iter().zip(&st).map(|(a, s)| a * s).sum());
    for (c, block) in cm.chunks(b).enumerate() {
        let mut rem = c;
        let mut base = 0;
        for m in (0..d).rev() {
            let cm = rem % cells[m];
            rem /= cells[m];
            base += np * cm * st[m];
        }
        for (v, off) in block.iter().zip(&mode_off) {
            out[base + off] = *v;
        }
    }
    out
}

/// Hierarchical coefficients of every element up to the grid levels,
/// obtained from a cell-major array by the forward transform.
#[derive(Debug, Clone)]
pub struct HierarchicalArray {
    np: usize,
    levels: Vec<u32>,
    data: Vec<f64>,
}

impl HierarchicalArray {
    pub fn from_cells(basis: &Basis1d, grid: &CellGrid) -> Self {
        let np = basis.len();
        let levels = grid.levels.clone();
        let dims = axis_dims(np, &levels);
        let mut data = cell_major_to_axis(&grid.data, np, &levels);
        let ts = basis.two_scale();
        for m in 0..levels.len() {
            let l = levels[m];
            for_each_lane(&mut data, &dims, m, |lane, work| forward_lane(ts, np, l, lane, work));
        }
        Self { np, levels, data }
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Whether every key of `set` lies within the grid levels.
    pub fn covers(&self, set: &ActiveSet) -> bool {
        set.keys().iter().all(|k| k.levels().zip(&self.levels).all(|(l, &g)| l <= g))
    }

    /// Coefficient block of `key`.
    pub fn block(&self, key: &ElementKey, out: &mut [f64]) -> Result<()> {
        let d = self.levels.len();
        let dims = axis_dims(self.np, &self.levels);
        let st = strides(&dims);
        let mut base = 0;
        for m in 0..d {
            if key.level(m) > self.levels[m] {
                return Err(Error::Structural { key: key.clone(), reason: "level above dense grid".into() });
            }
            base += hier_offset(self.np, key.level(m), key.cell(m)) * st[m];
        }
        for_each_multi(self.np, d, |flat, p| {
            let off: usize = p.iter().zip(&st).map(|(pm, s)| pm * s).sum();
            out[flat] = self.data[base + off];
        });
        Ok(())
    }

    /// Coefficients of every key of `set`, in set order.
    pub fn gather(&self, set: &ActiveSet) -> Result<Vec<f64>> {
        let b = set.block_len();
        let mut out = vec![0.0; set.len() * b];
        for (i, k) in set.keys().iter().enumerate() {
            self.block(k, &mut out[i * b..(i + 1) * b])?;
        }
        Ok(out)
    }
}
