//! Orthonormal piecewise-polynomial multiwavelets on the unit interval and their tensor
//! products.
//!
//! Level 0 holds the `k+1` orthonormal shifted Legendre polynomials on
//! `[0, 1]`. Level `l >= 1` holds the dilated and translated mother
//! wavelets `2^{(l-1)/2} w_i(2^{l-1} x - j)` supported on cell `j` of the
//! level `l-1` grid.
//!
//! Every function on `[0, 1]` is stored through the two-scale matrix: the
//! `2(k+1) x 2(k+1)` orthogonal matrix whose rows express the scaling
//! functions and the mother wavelets in the orthonormal Legendre bases of
//! the two half intervals. Evaluation is exact polynomial evaluation.
//!
//! Function indices are zero based here (`0..=k`).

use crate::error::{Error, Result};
use crate::quadrature::{gauss_quadrature, legendre_values};

/// Maximum supported polynomial degree.
pub const MAX_DEGREE: usize = 6;

/// One-sided limit used when evaluating at a point where a piecewise
/// polynomial may jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Limit from below, `f(x^-)`.
    Left,
    /// Limit from above, `f(x^+)`.
    Right,
}

/// L1 / L2 / Linf norms of a single basis function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone)]
pub struct Basis1d {
    degree: usize,
    /// Row-major `2n x 2n`; rows `0..n` scaling functions, rows `n..2n`
    /// mother wavelets; columns `0..n` left-half Legendre, `n..2n` right-half.
    two_scale: Vec<f64>,
    /// Reference L1 norms: scaling functions then wavelets.
    l1: Vec<f64>,
    /// Reference Linf norms: scaling functions then wavelets.
    linf: Vec<f64>,
}

/// Build the orthonormal multiwavelet basis of degree `k`.
///
/// The mother wavelets are obtained by Gram–Schmidt: the right-half
/// Legendre functions are orthogonalized against the scaling functions and
/// each other. Each wavelet is signed so that `w_i(1^-) > 0`.
pub fn build_basis(k: usize) -> Result<Basis1d> {
    if k > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(k));
    }
    let n = k + 1;
    let m = 2 * n;
    let quad = gauss_quadrature(n + 1)?;
    let mut two_scale = vec![0.0; m * m];

    // <phi_i, phi^L_p> and <phi_i, phi^R_p>, exact with n+1 points per half.
    let mut vi = vec![0.0; n];
    let mut vp = vec![0.0; n];
    for (half, offset) in [(0usize, 0.0), (1usize, 0.5)] {
        for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
            let x = offset + 0.5 * t;
            legendre_values(x, &mut vi);
            legendre_values(t, &mut vp);
            for i in 0..n {
                for p in 0..n {
                    // phi^{L/R}_p = sqrt(2) phi_p(t), dx = dt / 2
                    two_scale[i * m + half * n + p] +=
                        0.5 * w * vi[i] * std::f64::consts::SQRT_2 * vp[p];
                }
            }
        }
    }

    let mut right_end = vec![0.0; n];
    legendre_values(1.0, &mut right_end);
    for i in 0..n {
        let mut cand = vec![0.0; m];
        cand[n + i] = 1.0;
        // two sweeps of classical Gram-Schmidt
        for _ in 0..2 {
            for r in 0..n + i {
                let row = &two_scale[r * m..(r + 1) * m];
                let dot: f64 = row.iter().zip(&cand).map(|(a, b)| a * b).sum();
                for (c, a) in cand.iter_mut().zip(row) {
                    *c -= dot * a;
                }
            }
        }
        let norm = cand.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in cand.iter_mut() {
            *c /= norm;
        }
        let end: f64 = (0..n)
            .map(|p| cand[n + p] * std::f64::consts::SQRT_2 * right_end[p])
            .sum();
        if end < 0.0 {
            for c in cand.iter_mut() {
                *c = -*c;
            }
        }
        two_scale[(n + i) * m..(n + i + 1) * m].copy_from_slice(&cand);
    }

    let mut basis = Basis1d {
        degree: k,
        two_scale,
        l1: vec![0.0; m],
        linf: vec![0.0; m],
    };
    for r in 0..m {
        let (l1, linf) = reference_norms(|x, s| basis.reference_value(r, x, s));
        basis.l1[r] = l1;
        basis.linf[r] = linf;
    }
    Ok(basis)
}

/// L1 and Linf norms of a piecewise polynomial on `[0, 1]` whose only
/// possible break point is `1/2`.
fn reference_norms<F: Fn(f64, Side) -> f64>(f: F) -> (f64, f64) {
    const SAMPLES: usize = 1024;
    let quad = gauss_quadrature(12).expect("valid order");
    let mut l1 = 0.0;
    let mut linf: f64 = 0.0;
    for (a, b) in [(0.0, 0.5), (0.5, 1.0)] {
        let at = |x: f64| {
            if x <= a {
                f(a, Side::Right)
            } else if x >= b {
                f(b, Side::Left)
            } else {
                f(x, Side::Right)
            }
        };
        let h = (b - a) / SAMPLES as f64;
        let mut breaks = vec![a];
        let mut prev = at(a);
        linf = linf.max(prev.abs());
        let mut best = (prev.abs(), a);
        for s in 1..=SAMPLES {
            let x = a + h * s as f64;
            let v = at(x);
            if v.abs() > best.0 {
                best = (v.abs(), x);
            }
            if prev * v < 0.0 {
                // bisection on the sign change
                let (mut lo, mut hi) = (x - h, x);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if at(lo) * at(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                breaks.push(0.5 * (lo + hi));
            }
            prev = v;
        }
        breaks.push(b);
        for w in breaks.windows(2) {
            l1 += quad.integrate(w[0], w[1], &at).abs();
        }
        // golden-section refinement around the largest sample
        let (mut lo, mut hi) = ((best.1 - h).max(a), (best.1 + h).min(b));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if at(x1).abs() > at(x2).abs() {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        linf = linf.max(best.0).max(at(0.5 * (lo + hi)).abs()).max(at(b).abs());
    }
    (l1, linf)
}

impl Basis1d {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of functions per element and level, `k + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The orthogonal two-scale matrix (row-major, `2(k+1)` square).
    pub fn two_scale(&self) -> &[f64] {
        &self.two_scale
    }

    /// Reference-interval value of row `r` of the two-scale matrix, i.e.
    /// scaling function `r` (for `r <= k`) or mother wavelet `r - k - 1`.
    fn reference_value(&self, r: usize, x: f64, side: Side) -> f64 {
        let n = self.len();
        let m = 2 * n;
        let row = &self.two_scale[r * m..(r + 1) * m];
        let left = x < 0.5 || (x == 0.5 && side == Side::Left);
        let (coeffs, t) = if left {
            (&row[..n], 2.0 * x)
        } else {
            (&row[n..], 2.0 * x - 1.0)
        };
        let mut v = [0.0; MAX_DEGREE + 1];
        legendre_values(t, &mut v[..n]);
        std::f64::consts::SQRT_2 * coeffs.iter().zip(&v).map(|(c, p)| c * p).sum::<f64>()
    }

    /// Mother wavelet `i` on the reference interval.
    pub fn mother_wavelet(&self, i: usize, y: f64, side: Side) -> f64 {
        self.reference_value(self.len() + i, y, side)
    }

    /// Scaling function `i` on the reference interval.
    pub fn scaling_function(&self, i: usize, x: f64) -> f64 {
        let mut v = [0.0; MAX_DEGREE + 1];
        legendre_values(x, &mut v[..self.len()]);
        v[i]
    }

    /// Reference `(L1, Linf)` norms of the level-0 function (`wavelet =
    /// false`) or mother wavelet `i`.
    pub fn reference_norms(&self, i: usize, wavelet: bool) -> (f64, f64) {
        let r = if wavelet { self.len() + i } else { i };
        (self.l1[r], self.linf[r])
    }

    /// Value of `v^j_{i,l}` at `x` with the given one-sided limit.
    pub fn eval_1d(&self, i: usize, l: u32, j: u32, x: f64, side: Side) -> Result<f64> {
        if i > self.degree {
            return Err(Error::InvalidIndex(format!("function index {i} > degree {}", self.degree)));
        }
        if l > 30 || j > max_translation(l) {
            return Err(Error::InvalidIndex(format!("translation {j} not in B_{l}")));
        }
        Ok(self.eval_1d_unchecked(i, l, j, x, side))
    }

    /// [`Self::eval_1d`] without index validation.
    pub fn eval_1d_unchecked(&self, i: usize, l: u32, j: u32, x: f64, side: Side) -> f64 {
        let mut out = [0.0; MAX_DEGREE + 1];
        self.eval_all_1d(l, j, x, side, &mut out[..self.len()]);
        out[i]
    }

    /// Values of all `k + 1` functions of element `(l, j)` at `x`.
    pub fn eval_all_1d(&self, l: u32, j: u32, x: f64, side: Side, out: &mut [f64]) {
        let n = self.len();
        if l == 0 {
            let outside = !(0.0..=1.0).contains(&x) || (x == 0.0 && side == Side::Left) || (x == 1.0 && side == Side::Right);
            if outside {
                out[..n].fill(0.0);
            } else {
                legendre_values(x, &mut out[..n]);
            }
            return;
        }
        let s = (1u64 << (l - 1)) as f64;
        let y = s * x - j as f64;
        let outside = !(0.0..=1.0).contains(&y) || (y == 0.0 && side == Side::Left) || (y == 1.0 && side == Side::Right);
        if outside {
            out[..n].fill(0.0);
            return;
        }
        let m = 2 * n;
        let left = y < 0.5 || (y == 0.5 && side == Side::Left);
        let (col, t) = if left { (0, 2.0 * y) } else { (n, 2.0 * y - 1.0) };
        let mut v = [0.0; MAX_DEGREE + 1];
        legendre_values(t, &mut v[..n]);
        let scale = s.sqrt() * std::f64::consts::SQRT_2;
        for (i, slot) in out[..n].iter_mut().enumerate() {
            let row = &self.two_scale[(n + i) * m + col..(n + i) * m + col + n];
            *slot = scale * row.iter().zip(&v).map(|(c, p)| c * p).sum::<f64>();
        }
    }

    /// Product over dimensions of [`Self::eval_1d`].
    pub fn eval_nd(&self, i: &[usize], l: &[u32], j: &[u32], x: &[f64], side: &[Side]) -> Result<f64> {
        let d = i.len();
        for len in [l.len(), j.len(), x.len(), side.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, got: len });
            }
        }
        let mut v = 1.0;
        for m in 0..d {
            v *= self.eval_1d(i[m], l[m], j[m], x[m], side[m])?;
        }
        Ok(v)
    }

    /// Norms of `v^j_{i,l}` on the unit box.
    ///
    /// The L2 norm is 1 by orthonormality. L1 and Linf follow from the
    /// reference norms with the dyadic factors `2^{-|l'|_1/2}` and
    /// `2^{|l'|_1/2}` where `l'_m = max(l_m - 1, 0)`.
    pub fn basis_norms(&self, i: &[usize], l: &[u32]) -> Result<BasisNorms> {
        if i.len() != l.len() {
            return Err(Error::DimensionMismatch { expected: i.len(), got: l.len() });
        }
        let mut l1 = 1.0;
        let mut linf = 1.0;
        for (&im, &lm) in i.iter().zip(l) {
            if im > self.degree {
                return Err(Error::InvalidIndex(format!("function index {im} > degree {}", self.degree)));
            }
            let (a, b) = self.reference_norms(im, lm > 0);
            let shift = lm.saturating_sub(1) as f64;
            l1 *= a * 2f64.powf(-0.5 * shift);
            linf *= b * 2f64.powf(0.5 * shift);
        }
        Ok(BasisNorms { l1, l2: 1.0, linf })
    }
}

/// Largest translation index in `B_l`.
pub fn max_translation(l: u32) -> u32 {
    if l <= 1 {
        0
    } else {
        (1u32 << (l - 1)) - 1
    }
}

/// Number of translations at level `l`, `|B_l|`.
pub fn translations(l: u32) -> u64 {
    if l == 0 {
        1
    } else {
        1u64 << (l - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Inner product of two 1D hierarchical functions by composite Gauss on
    /// the level-`fine` grid (both are polynomial on every fine cell).
    fn inner(b: &Basis1d, f: (usize, u32, u32), g: (usize, u32, u32), fine: u32) -> f64 {
        let q = gauss_quadrature(b.degree() + 2).unwrap();
        let cells = 1u32 << fine;
        let h = 1.0 / cells as f64;
        let mut s = 0.0;
        for c in 0..cells {
            for (&t, &w) in q.nodes.iter().zip(&q.weights) {
                let x = h * (c as f64 + t);
                s += h * w * b.eval_1d(f.0, f.1, f.2, x, Side::Right).unwrap() * b.eval_1d(g.0, g.1, g.2, x, Side::Right).unwrap();
            }
        }
        s
    }

    #[test]
    fn haar_basis() {
        let b = build_basis(0).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b.eval_1d(0, 0, 0, 0.3, Side::Right).unwrap() - 1.0).abs() < 1e-15);
        // Gram-Schmidt oracle: orthonormalize 1_{(1/2,1]} against 1
        // gives (1_{right} - 1/2) / (1/2) = -1 on the left, +1 on the right.
        assert!((b.mother_wavelet(0, 0.25, Side::Right) + 1.0).abs() < 1e-14);
        assert!((b.mother_wavelet(0, 0.75, Side::Right) - 1.0).abs() < 1e-14);
        assert!((b.mother_wavelet(0, 0.5, Side::Left) + 1.0).abs() < 1e-14);
        assert!((b.mother_wavelet(0, 0.5, Side::Right) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_scale_matrix_is_orthogonal() {
        for k in 0..=MAX_DEGREE {
            let b = build_basis(k).unwrap();
            let m = 2 * (k + 1);
            let t = b.two_scale();
            for r in 0..m {
                for s in 0..m {
                    let dot: f64 = (0..m).map(|c| t[r * m + c] * t[s * m + c]).sum();
                    let want = if r == s { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12, "k={k} r={r} s={s} dot={dot}");
                }
            }
        }
    }

    #[test]
    fn wavelets_positive_at_right_end() {
        for k in 0..=MAX_DEGREE {
            let b = build_basis(k).unwrap();
            for i in 0..=k {
                assert!(b.mother_wavelet(i, 1.0, Side::Left) > 1e-3, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn wavelets_have_vanishing_moments() {
        let q = gauss_quadrature(8).unwrap();
        for k in 0..=MAX_DEGREE {
            let b = build_basis(k).unwrap();
            for i in 0..=k {
                for p in 0..=k {
                    let m = q.integrate(0.0, 0.5, |y| b.mother_wavelet(i, y, Side::Right) * y.powi(p as i32))
                        + q.integrate(0.5, 1.0, |y| b.mother_wavelet(i, y, Side::Right) * y.powi(p as i32));
                    assert!(m.abs() < 1e-12, "k={k} i={i} p={p} moment={m}");
                }
            }
        }
    }

    #[test]
    fn support_is_respected() {
        let b = build_basis(2).unwrap();
        for i in 0..3 {
            assert_eq!(b.eval_1d(i, 3, 2, 0.1, Side::Right).unwrap(), 0.0);
        }
        // support of (3, 2) is [0.5, 0.75]
        assert_eq!(b.eval_1d(0, 3, 2, 0.5, Side::Left).unwrap(), 0.0);
        assert!(b.eval_1d(0, 3, 2, 0.5, Side::Right).unwrap() != 0.0);
        assert_eq!(b.eval_1d(0, 3, 2, 0.75, Side::Right).unwrap(), 0.0);
    }

    #[test]
    fn rejects_invalid_indices() {
        let b = build_basis(1).unwrap();
        assert!(build_basis(7).is_err());
        assert!(b.eval_1d(2, 0, 0, 0.5, Side::Right).is_err());
        assert!(b.eval_1d(0, 1, 1, 0.5, Side::Right).is_err());
        assert!(b.eval_1d(0, 3, 4, 0.5, Side::Right).is_err());
        assert!(b.eval_nd(&[0, 0], &[0], &[0, 0], &[0.1, 0.2], &[Side::Right; 2]).is_err());
    }

    #[test]
    fn orthonormal_through_level_three() {
        for k in 0..=2 {
            let b = build_basis(k).unwrap();
            let mut funcs = vec![];
            for l in 0..=3u32 {
                for j in 0..=max_translation(l) {
                    for i in 0..=k {
                        funcs.push((i, l, j));
                    }
                }
            }
            for (a, &f) in funcs.iter().enumerate() {
                for (c, &g) in funcs.iter().enumerate().skip(a) {
                    let v = inner(&b, f, g, 3);
                    let want = if a == c { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-11, "k={k} {f:?} {g:?} {v}");
                }
            }
        }
    }

    #[test]
    fn dyadic_scaling() {
        let b = build_basis(3).unwrap();
        for &x in &[0.01, 0.2, 0.33, 0.49, 0.61, 0.9] {
            for i in 0..4 {
                // v_{i,l+1}^{j} (x) = sqrt(2) v_{i,l}^{j'}(2x - shift)
                let coarse = b.eval_1d(i, 2, 1, x, Side::Right).unwrap();
                let fine = b.eval_1d(i, 3, 1, 0.5 * x, Side::Right).unwrap();
                assert!((fine - 2f64.sqrt() * coarse).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_functions_reproduce_polynomials() {
        let b = build_basis(4).unwrap();
        let q = gauss_quadrature(6).unwrap();
        let p = |x: f64| 1.0 - 3.0 * x + 0.5 * x.powi(3) + 2.0 * x.powi(4);
        let coeffs: Vec<f64> = (0..5).map(|i| q.integrate(0.0, 1.0, |x| p(x) * b.scaling_function(i, x))).collect();
        for s in 0..=20 {
            let x = s as f64 / 20.0;
            let v: f64 = (0..5).map(|i| coeffs[i] * b.scaling_function(i, x)).sum();
            assert!((v - p(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_norms() {
        let b = build_basis(0).unwrap();
        let n = b.basis_norms(&[0], &[1]).unwrap();
        assert!((n.l1 - 1.0).abs() < 1e-12);
        assert!((n.linf - 1.0).abs() < 1e-12);
        assert_eq!(n.l2, 1.0);
        let n0 = b.basis_norms(&[0], &[0]).unwrap();
        assert_eq!(n0.l2, 1.0);
    }

    #[test]
    fn norm_scaling_with_level() {
        let b = build_basis(2).unwrap();
        for i in 0..3 {
            let a = b.basis_norms(&[i, 1], &[2, 3]).unwrap();
            let c = b.basis_norms(&[i, 1], &[3, 3]).unwrap();
            assert!((c.l1 / a.l1 - 2f64.powf(-0.5)).abs() < 1e-13);
            assert!((c.linf / a.linf - 2f64.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn reference_norms_match_quadrature() {
        let b = build_basis(3).unwrap();
        let q = gauss_quadrature(10).unwrap();
        for i in 0..4 {
            let (l1, linf) = b.reference_norms(i, true);
            let mut s = 0.0;
            let mut mx: f64 = 0.0;
            let cells = 4000;
            for c in 0..cells {
                let a = c as f64 / cells as f64;
                s += q.integrate(a, a + 1.0 / cells as f64, |y| b.mother_wavelet(i, y, Side::Right).abs());
                for y in [a + 1e-13, a + 0.5 / cells as f64, a + 1.0 / cells as f64 - 1e-13] {
                    mx = mx.max(b.mother_wavelet(i, y, Side::Right).abs());
                }
            }
            assert!((s - l1).abs() < 1e-7, "i={i} {s} {l1}");
            assert!(linf >= mx - 1e-12 && linf - mx < 1e-4, "i={i} {mx} {linf}");
        }
    }
}
