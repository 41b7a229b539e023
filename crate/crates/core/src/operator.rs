//! Upwind / Lax-Friedrichs DG discretization of `u_t + div(a u) = 0`.
//!
//! The residual is assembled on the uniform grid at the per-dimension
//! maximum active level, where every active basis function is a piecewise
//! polynomial, and then restricted back to the active set. Faces of that
//! grid not present in the active space carry continuous data on both
//! sides and contribute nothing, so the result equals the residual
//! assembled on the finest mesh.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis1d, Side};
use crate::domain::{Boundary, Domain};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_quadrature, legendre_derivatives, legendre_values};
use crate::transform::{to_cells, ActiveSet, CellGrid, HierarchicalArray};

/// Divergence-free advection velocity `a(t, x)`.
pub trait VelocityField: Sync {
    fn dim(&self) -> usize;

    /// Velocity at physical point `x`, written to `out`.
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Per-dimension bounds on `|a_m|` over the domain.
    fn speed_bounds(&self, t: f64) -> Vec<f64>;
}

/// Constant velocity.
#[derive(Debug, Clone)]
pub struct ConstantVelocity(pub Vec<f64>);

impl VelocityField for ConstantVelocity {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn eval(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn speed_bounds(&self, _t: f64) -> Vec<f64> {
        self.0.iter().map(|a| a.abs()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    Upwind,
    LaxFriedrichs,
}

/// Numerical flux through a face with normal `+e_m`; `left`/`right` are the
/// traces from the lower/upper side and `a` the normal velocity.
#[inline]
pub fn numerical_flux(kind: FluxKind, a: f64, left: f64, right: f64, alpha: f64) -> f64 {
    match kind {
        FluxKind::Upwind => 0.5 * a * (left + right) + 0.5 * a.abs() * (left - right),
        FluxKind::LaxFriedrichs => 0.5 * a * (left + right) + 0.5 * alpha * (left - right),
    }
}

/// Reference-cell tables for the tensor Legendre basis, built from the
/// one-dimensional factors.
#[derive(Debug, Clone)]
pub struct DgKernel {
    dim: usize,
    np: usize,
    nq: usize,
    nodes: Vec<f64>,
    /// `vol[q * b + p]`: basis `p` at volume node `q`.
    vol: Vec<f64>,
    /// `der[m][q * b + p]`: derivative along `m`.
    der: Vec<Vec<f64>>,
    /// `face[2 m + side][qf * b + p]`: trace on the lower / upper face.
    face: Vec<Vec<f64>>,
    vol_w: Vec<f64>,
    face_w: Vec<f64>,
}

fn multi(flat: usize, n: usize, d: usize, out: &mut [usize]) {
    let mut r = flat;
    for m in (0..d).rev() {
        out[m] = r % n;
        r /= n;
    }
}

fn apply(table: &[f64], b: usize, coeffs: &[f64], out: &mut [f64]) {
    for (row, o) in table.chunks_exact(b).zip(out.iter_mut()) {
        *o = row.iter().zip(coeffs).map(|(t, c)| t * c).sum();
    }
}

fn apply_t(table: &[f64], b: usize, vals: &[f64], out: &mut [f64]) {
    for (row, v) in table.chunks_exact(b).zip(vals) {
        if *v != 0.0 {
            for (o, t) in out.iter_mut().zip(row) {
                *o += t * v;
            }
        }
    }
}

impl DgKernel {
    pub fn new(degree: usize, dim: usize) -> Result<Self> {
        let np = degree + 1;
        let nq = degree + 2;
        let quad = gauss_quadrature(nq)?;
        let b = np.pow(dim as u32);
        let nv = nq.pow(dim as u32);
        let nf = nq.pow(dim as u32 - 1);
        let mut val = vec![vec![0.0; np]; nq];
        let mut dval = vec![vec![0.0; np]; nq];
        for q in 0..nq {
            legendre_values(quad.nodes[q], &mut val[q]);
            legendre_derivatives(quad.nodes[q], &mut dval[q]);
        }
        let mut ends = [vec![0.0; np], vec![0.0; np]];
        legendre_values(0.0, &mut ends[0]);
        legendre_values(1.0, &mut ends[1]);

        let mut pi = vec![0; dim];
        let mut qi = vec![0; dim];
        let mut vol = vec![0.0; nv * b];
        let mut der = vec![vec![0.0; nv * b]; dim];
        let mut vol_w = vec![0.0; nv];
        for q in 0..nv {
            multi(q, nq, dim, &mut qi);
            vol_w[q] = qi.iter().map(|&i| quad.weights[i]).product();
            for p in 0..b {
                multi(p, np, dim, &mut pi);
                vol[q * b + p] = (0..dim).map(|m| val[qi[m]][pi[m]]).product();
                for (m, dm) in der.iter_mut().enumerate() {
                    dm[q * b + p] = (0..dim).map(|n| if n == m { dval[qi[n]][pi[n]] } else { val[qi[n]][pi[n]] }).product();
                }
            }
        }
        let mut fi = vec![0; dim.saturating_sub(1)];
        let mut face = vec![vec![0.0; nf * b]; 2 * dim];
        let mut face_w = vec![0.0; nf];
        for qf in 0..nf {
            multi(qf, nq, dim - 1, &mut fi);
            face_w[qf] = fi.iter().map(|&i| quad.weights[i]).product();
            for p in 0..b {
                multi(p, np, dim, &mut pi);
                for m in 0..dim {
                    let others: f64 = (0..dim)
                        .filter(|&n| n != m)
                        .zip(&fi)
                        .map(|(n, &i)| val[i][pi[n]])
                        .product();
                    for side in 0..2 {
                        face[2 * m + side][qf * b + p] = others * ends[side][pi[m]];
                    }
                }
            }
        }
        Ok(Self { dim, np, nq, nodes: quad.nodes, vol, der, face, vol_w, face_w })
    }

    fn block_len(&self) -> usize {
        self.np.pow(self.dim as u32)
    }
}

/// Fixed ingredients of the spatial discretization.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: Basis1d,
    pub domain: Domain,
    pub max_level: u32,
    pub flux: FluxKind,
    kernel: DgKernel,
}

impl Discretization {
    pub fn new(basis: Basis1d, domain: Domain, max_level: u32, flux: FluxKind) -> Result<Self> {
        let kernel = DgKernel::new(basis.degree(), domain.dim())?;
        Ok(Self { basis, domain, max_level, flux, kernel })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// DG residual of a cell grid, in the same cell-major layout.
    pub fn cell_residual(&self, field: &dyn VelocityField, t: f64, grid: &CellGrid) -> Result<CellGrid> {
        let d = self.dim();
        if field.dim() != d || grid.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: field.dim().min(grid.dim()) });
        }
        let k = &self.kernel;
        let nq = k.nq;
        let b = k.block_len();
        let nv = k.vol_w.len();
        let nf = k.face_w.len();
        let cells = grid.cells_per_dim();
        let mut stride = vec![1usize; d];
        for m in (0..d.saturating_sub(1)).rev() {
            stride[m] = stride[m + 1] * cells[m + 1];
        }
        let dom = &self.domain;
        let h: Vec<f64> = (0..d).map(|m| dom.extent(m) / cells[m] as f64).collect();
        let alpha = field.speed_bounds(t);
        let flux = self.flux;

        let mut qidx = vec![0usize; nv * d];
        for q in 0..nv {
            multi(q, nq, d, &mut qidx[q * d..(q + 1) * d]);
        }
        let mut fidx = vec![0usize; nf * (d - 1)];
        for q in 0..nf {
            multi(q, nq, d - 1, &mut fidx[q * (d - 1)..(q + 1) * (d - 1)]);
        }
        let node_x: Vec<Vec<f64>> = (0..d)
            .map(|m| {
                (0..cells[m] * nq)
                    .map(|iq| dom.lower[m] + h[m] * ((iq / nq) as f64 + k.nodes[iq % nq]))
                    .collect()
            })
            .collect();
        let face_x: Vec<Vec<f64>> =
            (0..d).map(|m| (0..=cells[m]).map(|i| dom.lower[m] + h[m] * i as f64).collect()).collect();
        let live: Vec<bool> = grid.data.par_chunks(b).map(|c| c.iter().any(|v| *v != 0.0)).collect();

        // traces on all 2d faces of every cell: [(2m + side) * nf + qf]
        let tl = 2 * d * nf;
        let mut traces = vec![0.0; grid.num_cells() * tl];
        traces.par_chunks_mut(tl).enumerate().for_each(|(c, tr)| {
            if live[c] {
                for (f, tab) in k.face.iter().enumerate() {
                    apply(tab, b, grid.cell(c), &mut tr[f * nf..(f + 1) * nf]);
                }
            }
        });

        let neighbour = |c: usize, i: usize, m: usize, up: bool| -> Option<usize> {
            let n = cells[m];
            let j = match (up, i) {
                (true, i) if i + 1 == n => {
                    if dom.boundaries[m] == Boundary::ZeroInflow {
                        return None;
                    }
                    0
                }
                (true, i) => i + 1,
                (false, 0) => {
                    if dom.boundaries[m] == Boundary::ZeroInflow {
                        return None;
                    }
                    n - 1
                }
                (false, i) => i - 1,
            };
            Some(c - i * stride[m] + j * stride[m])
        };

        let row_len = cells[d - 1];
        let mut out = vec![0.0; grid.data.len()];
        out.par_chunks_mut(b * row_len).enumerate().for_each(|(row, chunk)| {
            let mut ci = vec![0usize; d];
            let mut x = vec![0.0; d];
            let mut a = vec![0.0; d];
            let mut uq = vec![0.0; nv];
            let mut g = vec![vec![0.0; nv]; d];
            let mut fl = vec![0.0; nf];
            let zeros = vec![0.0; nf];
            for (off, res) in chunk.chunks_mut(b).enumerate() {
                let c = row * row_len + off;
                let mut r = c;
                for m in (0..d).rev() {
                    ci[m] = r % cells[m];
                    r /= cells[m];
                }

                if live[c] {
                    apply(&k.vol, b, grid.cell(c), &mut uq);
                    for q in 0..nv {
                        let qi = &qidx[q * d..(q + 1) * d];
                        for m in 0..d {
                            x[m] = node_x[m][ci[m] * nq + qi[m]];
                        }
                        field.eval(t, &x, &mut a);
                        let wu = k.vol_w[q] * uq[q];
                        for m in 0..d {
                            g[m][q] = wu * a[m] / h[m];
                        }
                    }
                    for m in 0..d {
                        apply_t(&k.der[m], b, &g[m], res);
                    }
                }

                for m in 0..d {
                    for side in 0..2 {
                        let up = side == 1;
                        let nb = neighbour(c, ci[m], m, up);
                        let nb_live = nb.is_some_and(|n| live[n]);
                        if !live[c] && !nb_live {
                            continue;
                        }
                        let own_tr = if live[c] { &traces[c * tl + (2 * m + side) * nf..][..nf] } else { &zeros[..] };
                        let nb_tr = match nb {
                            Some(n) if nb_live => &traces[n * tl + (2 * m + 1 - side) * nf..][..nf],
                            _ => &zeros[..],
                        };
                        x[m] = face_x[m][ci[m] + side];
                        let sign = if up { -1.0 } else { 1.0 };
                        for qf in 0..nf {
                            let fi = &fidx[qf * (d - 1)..(qf + 1) * (d - 1)];
                            let mut o = 0;
                            for n in 0..d {
                                if n != m {
                                    x[n] = node_x[n][ci[n] * nq + fi[o]];
                                    o += 1;
                                }
                            }
                            field.eval(t, &x, &mut a);
                            let (left, right) = if up { (own_tr[qf], nb_tr[qf]) } else { (nb_tr[qf], own_tr[qf]) };
                            fl[qf] = sign * k.face_w[qf] * numerical_flux(flux, a[m], left, right, alpha[m]) / h[m];
                        }
                        apply_t(&k.face[2 * m + side], b, &fl, res);
                    }
                }
            }
        });
        Ok(CellGrid { degree: grid.degree, levels: grid.levels.clone(), data: out })
    }

    /// Residual of the active coefficients as a hierarchical array over the
    /// grid at `levels` (which must dominate the set's levels).
    pub fn dense_residual(
        &self,
        field: &dyn VelocityField,
        t: f64,
        set: &ActiveSet,
        coeffs: &[f64],
        levels: &[u32],
    ) -> Result<HierarchicalArray> {
        let grid = to_cells(&self.basis, set, coeffs, levels)?;
        let res = self.cell_residual(field, t, &grid)?;
        Ok(HierarchicalArray::from_cells(&self.basis, &res))
    }
}

/// `L(u)` restricted to the active set: the time derivative of the active
/// coefficients under the semi-discrete scheme.
pub fn apply_dg_operator(
    disc: &Discretization,
    field: &dyn VelocityField,
    t: f64,
    set: &ActiveSet,
    coeffs: &[f64],
) -> Result<Vec<f64>> {
    let levels = set.max_levels();
    disc.dense_residual(field, t, set, coeffs, &levels)?.gather(set)
}

/// Point value of a hierarchical expansion.
pub fn eval_solution(basis: &Basis1d, domain: &Domain, set: &ActiveSet, coeffs: &[f64], x: &[f64]) -> f64 {
    let d = set.dim();
    let np = basis.len();
    let b = set.block_len();
    let xi: Vec<f64> = (0..d).map(|m| domain.to_unit(m, x[m])).collect();
    let mut vals = vec![vec![0.0; np]; d];
    let mut p = vec![0usize; d];
    let mut s = 0.0;
    'keys: for (e, key) in set.keys().iter().enumerate() {
        for m in 0..d {
            let (lo, hi) = key.support(m);
            if xi[m] < lo || xi[m] > hi {
                continue 'keys;
            }
            basis.eval_all_1d(key.level(m), key.cell(m), xi[m], Side::Right, &mut vals[m]);
        }
        let block = &coeffs[e * b..(e + 1) * b];
        for (f, c) in block.iter().enumerate() {
            multi(f, np, d, &mut p);
            s += c * (0..d).map(|m| vals[m][p[m]]).product::<f64>();
        }
    }
    s / domain.volume().sqrt()
}

/// Point value of a cell grid (cells are half-open on the right, except
/// the last).
pub fn eval_grid(grid: &CellGrid, domain: &Domain, x: &[f64]) -> f64 {
    let d = grid.dim();
    let np = grid.degree + 1;
    let cells = grid.cells_per_dim();
    let mut c = 0;
    let mut vals = vec![vec![0.0; np]; d];
    let mut vol = 1.0;
    for m in 0..d {
        let h = domain.extent(m) / cells[m] as f64;
        vol *= h;
        let s = (x[m] - domain.lower[m]) / h;
        let i = (s.floor().max(0.0) as usize).min(cells[m] - 1);
        legendre_values((s - i as f64).clamp(0.0, 1.0), &mut vals[m]);
        c = c * cells[m] + i;
    }
    let block = grid.cell(c);
    let mut p = vec![0usize; d];
    let mut s = 0.0;
    for (f, v) in block.iter().enumerate() {
        multi(f, np, d, &mut p);
        s += v * (0..d).map(|m| vals[m][p[m]]).product::<f64>();
    }
    s / vol.sqrt()
}
