//! Hierarchical element keys and the active element table.
//!
//! The table `H` maps each active [`ElementKey`] to its coefficient block;
//! the leaf table `L` tracks elements with no active children. The table
//! never contains a "hole": every parent of an active element is active.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use smallvec::SmallVec;

use crate::basis::max_translation;
use crate::error::{Error, Result};

/// Mesh level vector `l` and translation vector `j` of one element.
///
/// Ordering and hashing use the canonical encoding: `d`, then `l_1..l_d`,
/// then `j_1..j_d`, each as an unsigned little-endian 16-bit integer.
#[derive(Clone, PartialEq, Eq)]
pub struct ElementKey {
    /// `l_1..l_d` followed by `j_1..j_d`.
    data: SmallVec<[u16; 8]>,
}

impl ElementKey {
    pub fn new(levels: &[u32], cells: &[u32]) -> Result<Self> {
        if levels.len() != cells.len() {
            return Err(Error::DimensionMismatch { expected: levels.len(), got: cells.len() });
        }
        let mut data = SmallVec::with_capacity(2 * levels.len());
        for &l in levels {
            if l > 16 {
                return Err(Error::InvalidIndex(format!("level {l} too large")));
            }
            data.push(l as u16);
        }
        for (&l, &j) in levels.iter().zip(cells) {
            if j > max_translation(l) {
                return Err(Error::InvalidIndex(format!("translation {j} not in B_{l}")));
            }
            data.push(j as u16);
        }
        Ok(Self { data })
    }

    /// The level-0 key in `d` dimensions.
    pub fn root(d: usize) -> Self {
        Self { data: SmallVec::from_elem(0, 2 * d) }
    }

    pub fn dim(&self) -> usize {
        self.data.len() / 2
    }

    pub fn level(&self, m: usize) -> u32 {
        self.data[m] as u32
    }

    pub fn cell(&self, m: usize) -> u32 {
        self.data[self.dim() + m] as u32
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.data[..self.dim()].iter().map(|&v| v as u32)
    }

    pub fn cells(&self) -> impl Iterator<Item = u32> + '_ {
        self.data[self.dim()..].iter().map(|&v| v as u32)
    }

    pub fn level_vec(&self) -> Vec<u32> {
        self.levels().collect()
    }

    pub fn cell_vec(&self) -> Vec<u32> {
        self.cells().collect()
    }

    pub fn level_l1(&self) -> u32 {
        self.levels().sum()
    }

    pub fn level_linf(&self) -> u32 {
        self.levels().max().unwrap_or(0)
    }

    pub fn is_root(&self) -> bool {
        self.levels().all(|l| l == 0)
    }

    /// Canonical byte encoding.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 2 * self.data.len());
        out.extend_from_slice(&(self.dim() as u16).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Support of the element in unit coordinates along dimension `m`.
    pub fn support(&self, m: usize) -> (f64, f64) {
        let l = self.level(m);
        let h = if l == 0 { 1.0 } else { 1.0 / (1u64 << (l - 1)) as f64 };
        let j = self.cell(m) as f64;
        (h * j, h * (j + 1.0))
    }

    fn with(&self, m: usize, level: u32, cell: u32) -> Self {
        let mut data = self.data.clone();
        let d = self.dim();
        data[m] = level as u16;
        data[d + m] = cell as u16;
        Self { data }
    }
}

impl Hash for ElementKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write(&self.canonical_bytes());
    }
}

impl Ord for ElementKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // lexicographic on the little-endian byte sequence
        self.dim().cmp(&other.dim()).then_with(|| {
            self.data
                .iter()
                .map(|v| v.to_le_bytes())
                .cmp(other.data.iter().map(|v| v.to_le_bytes()))
        })
    }
}

impl PartialOrd for ElementKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(l={:?}, j={:?})", self.level_vec(), self.cell_vec())
    }
}

/// Children of `key` with levels bounded by `max_level`, ordered by
/// dimension then translation.
pub fn children(key: &ElementKey, max_level: u32) -> Vec<ElementKey> {
    let mut out = Vec::with_capacity(2 * key.dim());
    for m in 0..key.dim() {
        let l = key.level(m);
        if l + 1 > max_level {
            continue;
        }
        if l == 0 {
            out.push(key.with(m, 1, 0));
        } else {
            let j = key.cell(m);
            out.push(key.with(m, l + 1, 2 * j));
            out.push(key.with(m, l + 1, 2 * j + 1));
        }
    }
    out
}

/// Parents of `key`: one per dimension with a nonzero level.
pub fn parents(key: &ElementKey) -> Vec<ElementKey> {
    let mut out = Vec::with_capacity(key.dim());
    for m in 0..key.dim() {
        let l = key.level(m);
        if l == 0 {
            continue;
        }
        let j = if l == 1 { 0 } else { key.cell(m) / 2 };
        out.push(key.with(m, l - 1, j));
    }
    out
}

/// An active element: its key, `(k+1)^d` coefficients and child count.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub key: ElementKey,
    pub coeffs: Vec<f64>,
    pub child_count: u32,
}

impl Element {
    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }

    /// Euclidean norm of the coefficient block.
    pub fn block_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// The active element set `H` together with the leaf set `L`.
#[derive(Debug, Clone)]
pub struct ElementTable {
    dim: usize,
    degree: usize,
    max_level: u32,
    elements: HashMap<ElementKey, Element>,
    leaves: HashSet<ElementKey>,
}

impl ElementTable {
    pub fn new(dim: usize, degree: usize, max_level: u32) -> Self {
        Self { dim, degree, max_level, elements: HashMap::new(), leaves: HashSet::new() }
    }

    /// A table holding only the level-0 element(s).
    pub fn with_roots(dim: usize, degree: usize, max_level: u32) -> Self {
        let mut t = Self::new(dim, degree, max_level);
        t.insert(ElementKey::root(dim)).expect("root has no parents");
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Coefficients per element, `(k+1)^d`.
    pub fn block_len(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Active degrees of freedom (coefficients).
    pub fn dof(&self) -> usize {
        self.len() * self.block_len()
    }

    pub fn contains(&self, key: &ElementKey) -> bool {
        self.elements.contains_key(key)
    }

    pub fn get(&self, key: &ElementKey) -> Option<&Element> {
        self.elements.get(key)
    }

    pub fn get_mut(&mut self, key: &ElementKey) -> Option<&mut Element> {
        self.elements.get_mut(key)
    }

    pub fn is_leaf(&self, key: &ElementKey) -> bool {
        self.leaves.contains(key)
    }

    /// Active keys in canonical order.
    pub fn sorted_keys(&self) -> Vec<ElementKey> {
        let mut keys: Vec<_> = self.elements.keys().cloned().collect();
        keys.sort();
        keys
    }

    /// Leaf keys in canonical order.
    pub fn sorted_leaves(&self) -> Vec<ElementKey> {
        let mut keys: Vec<_> = self.leaves.iter().cloned().collect();
        keys.sort();
        keys
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    /// Largest level present along each dimension.
    pub fn max_levels(&self) -> Vec<u32> {
        let mut out = vec![0; self.dim];
        for key in self.elements.keys() {
            for (m, l) in key.levels().enumerate() {
                out[m] = out[m].max(l);
            }
        }
        out
    }

    fn check_key(&self, key: &ElementKey) -> Result<()> {
        if key.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: key.dim() });
        }
        if key.level_linf() > self.max_level {
            return Err(Error::Structural { key: key.clone(), reason: format!("level exceeds maximum {}", self.max_level) });
        }
        Ok(())
    }

    /// Insert `key` with zero coefficients. All parents must be present.
    pub fn insert(&mut self, key: ElementKey) -> Result<()> {
        self.insert_with(key, None)
    }

    /// Insert `key` with the given coefficients. All parents must be present.
    pub fn insert_with(&mut self, key: ElementKey, coeffs: Option<Vec<f64>>) -> Result<()> {
        self.check_key(&key)?;
        if self.elements.contains_key(&key) {
            return Err(Error::Structural { key, reason: "already present".into() });
        }
        let ps = parents(&key);
        if let Some(missing) = ps.iter().find(|p| !self.elements.contains_key(p)) {
            return Err(Error::Structural { key: key.clone(), reason: format!("parent {missing:?} is missing") });
        }
        let coeffs = coeffs.unwrap_or_else(|| vec![0.0; self.block_len()]);
        if coeffs.len() != self.block_len() {
            return Err(Error::DimensionMismatch { expected: self.block_len(), got: coeffs.len() });
        }
        for p in &ps {
            let parent = self.elements.get_mut(p).expect("checked above");
            parent.child_count += 1;
            self.leaves.remove(p);
        }
        self.leaves.insert(key.clone());
        self.elements.insert(key.clone(), Element { key, coeffs, child_count: 0 });
        Ok(())
    }

    /// Insert `key` (zero coefficients) after recursively inserting any
    /// missing ancestors, also with zero coefficients. Returns the keys
    /// actually inserted, ancestors first.
    pub fn insert_closure(&mut self, key: ElementKey) -> Result<Vec<ElementKey>> {
        let mut added = Vec::new();
        self.insert_closure_into(key, &mut added)?;
        Ok(added)
    }

    fn insert_closure_into(&mut self, key: ElementKey, added: &mut Vec<ElementKey>) -> Result<()> {
        if self.elements.contains_key(&key) {
            return Ok(());
        }
        for p in parents(&key) {
            self.insert_closure_into(p, added)?;
        }
        self.insert(key.clone())?;
        added.push(key);
        Ok(())
    }

    /// Remove a leaf element other than the root. Parents that lose their
    /// last child become leaves.
    pub fn remove_leaf(&mut self, key: &ElementKey) -> Result<Element> {
        if key.is_root() {
            return Err(Error::Structural { key: key.clone(), reason: "level-0 elements are permanent".into() });
        }
        if !self.leaves.contains(key) {
            let reason = if self.elements.contains_key(key) { "not a leaf" } else { "not present" };
            return Err(Error::Structural { key: key.clone(), reason: reason.into() });
        }
        let elem = self.elements.remove(key).expect("leaf is present");
        self.leaves.remove(key);
        for p in parents(key) {
            let parent = self.elements.get_mut(&p).ok_or_else(|| Error::Structural {
                key: key.clone(),
                reason: format!("parent {p:?} missing during removal"),
            })?;
            parent.child_count -= 1;
            if parent.child_count == 0 {
                self.leaves.insert(p);
            }
        }
        Ok(elem)
    }

    /// Brute-force check of every structural invariant.
    pub fn audit(&self) -> Result<()> {
        let mut counts: HashMap<&ElementKey, u32> = self.elements.keys().map(|k| (k, 0)).collect();
        for key in self.elements.keys() {
            self.check_key(key)?;
            for p in parents(key) {
                match counts.get_mut(&p) {
                    Some(c) => *c += 1,
                    None => {
                        return Err(Error::Structural { key: key.clone(), reason: format!("hole: parent {p:?} missing") })
                    }
                }
            }
        }
        for (key, elem) in &self.elements {
            if counts[key] != elem.child_count {
                return Err(Error::Structural {
                    key: key.clone(),
                    reason: format!("child count {} but {} children present", elem.child_count, counts[key]),
                });
            }
            if elem.is_leaf() != self.leaves.contains(key) {
                return Err(Error::Structural { key: key.clone(), reason: "leaf table out of sync".into() });
            }
        }
        if let Some(k) = self.leaves.iter().find(|k| !self.elements.contains_key(k)) {
            return Err(Error::Structural { key: k.clone(), reason: "leaf not in table".into() });
        }
        Ok(())
    }

    /// Sum of squared coefficients over all active elements, accumulated in
    /// canonical order.
    pub fn coefficient_norm_sq(&self) -> f64 {
        self.sorted_keys().iter().flat_map(|k| self.elements[k].coeffs.iter()).map(|c| c * c).sum()
    }

    /// Element list as CSV: `l1..ld,j1..jd,block_l2,c0..`, sorted
    /// canonically. Coefficients are written in round-trip precision.
    pub fn to_csv(&self) -> String {
        let d = self.dim;
        let mut out = String::new();
        let header: Vec<String> = (1..=d).map(|m| format!("l{m}")).chain((1..=d).map(|m| format!("j{m}"))).collect();
        out.push_str(&header.join(","));
        out.push_str(",block_l2");
        for i in 0..self.block_len() {
            out.push_str(&format!(",c{i}"));
        }
        out.push('\n');
        for key in self.sorted_keys() {
            let e = &self.elements[&key];
            let fields: Vec<String> = key.levels().chain(key.cells()).map(|v| v.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push_str(&format!(",{:e}", e.block_l2()));
            for c in &e.coeffs {
                out.push_str(&format!(",{c:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Every level vector with `|l|_inf <= max_level` in `d` dimensions, in
/// lexicographic order.
pub fn all_level_vectors(d: usize, max_level: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &out {
            for l in 0..=max_level {
                let mut v = prefix.clone();
                v.push(l);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// All keys at level vector `levels`.
pub fn keys_at_level(levels: &[u32]) -> Vec<ElementKey> {
    let mut cells = vec![vec![]];
    for &l in levels {
        let mut next = Vec::new();
        for prefix in &cells {
            for j in 0..=max_translation(l) {
                let mut v: Vec<u32> = prefix.clone();
                v.push(j);
                next.push(v);
            }
        }
        cells = next;
    }
    cells.into_iter().map(|c| ElementKey::new(levels, &c).expect("valid by construction")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn key(l: &[u32], j: &[u32]) -> ElementKey {
        ElementKey::new(l, j).unwrap()
    }

    #[test]
    fn children_1d() {
        assert_eq!(children(&key(&[0], &[0]), 3), vec![key(&[1], &[0])]);
        // support containment oracle
        let parent = key(&[1], &[0]);
        let (a, b) = parent.support(0);
        let expect: Vec<_> = keys_at_level(&[2])
            .into_iter()
            .filter(|c| {
                let (ca, cb) = c.support(0);
                ca >= a && cb <= b
            })
            .collect();
        assert_eq!(children(&parent, 2), expect);
        assert_eq!(expect, vec![key(&[2], &[0]), key(&[2], &[1])]);
        assert!(children(&key(&[3], &[1]), 3).is_empty());
    }

    #[test]
    fn children_blocked_at_max_level() {
        let c = children(&key(&[7, 3], &[5, 1]), 7);
        assert_eq!(c, vec![key(&[7, 4], &[5, 2]), key(&[7, 4], &[5, 3])]);
    }

    #[test]
    fn parents_examples() {
        assert!(parents(&ElementKey::root(3)).is_empty());
        assert_eq!(parents(&key(&[2], &[1])), vec![key(&[1], &[0])]);
        let p = parents(&key(&[2, 3], &[1, 3]));
        assert_eq!(p, vec![key(&[1, 3], &[0, 3]), key(&[2, 2], &[1, 1])]);
        // invert-children oracle
        for q in &p {
            assert!(children(q, 7).contains(&key(&[2, 3], &[1, 3])));
        }
    }

    #[test]
    fn children_parents_inverse() {
        let n = 4;
        let all: Vec<_> = all_level_vectors(2, n).iter().flat_map(|l| keys_at_level(l)).collect();
        for x in &all {
            let cs = children(x, n);
            assert!(cs.len() <= 4);
            assert!(parents(x).len() <= 2);
            for y in &all {
                assert_eq!(cs.contains(y), parents(y).contains(x), "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn canonical_order_and_encoding() {
        let k = key(&[2, 1], &[1, 0]);
        assert_eq!(k.canonical_bytes(), vec![2, 0, 2, 0, 1, 0, 1, 0, 0, 0]);
        // little-endian bytes: 256 sorts before 1 in the first byte
        let a = ElementKey::new(&[10], &[256]).unwrap();
        let b = ElementKey::new(&[10], &[1]).unwrap();
        assert!(a < b);
    }

    #[test]
    fn insert_and_remove() {
        let mut t = ElementTable::with_roots(1, 1, 4);
        assert!(t.is_leaf(&ElementKey::root(1)));
        t.insert(key(&[1], &[0])).unwrap();
        assert!(!t.is_leaf(&ElementKey::root(1)));
        assert!(t.is_leaf(&key(&[1], &[0])));
        assert!(matches!(t.insert(key(&[3], &[0])), Err(Error::Structural { .. })));
        assert!(t.remove_leaf(&ElementKey::root(1)).is_err());
        t.remove_leaf(&key(&[1], &[0])).unwrap();
        assert!(t.is_leaf(&ElementKey::root(1)));
        t.audit().unwrap();
    }

    #[test]
    fn remove_non_leaf_rejected() {
        let mut t = ElementTable::with_roots(1, 0, 4);
        t.insert_closure(key(&[3], &[1])).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.remove_leaf(&key(&[2], &[0])).is_err());
        t.audit().unwrap();
    }

    #[test]
    fn insert_closure_fills_ancestors() {
        let mut t = ElementTable::with_roots(2, 0, 5);
        let added = t.insert_closure(key(&[2, 2], &[1, 0])).unwrap();
        assert_eq!(added.last().unwrap(), &key(&[2, 2], &[1, 0]));
        t.audit().unwrap();
        for k in &added {
            for p in parents(k) {
                assert!(t.contains(&p));
            }
        }
    }

    #[test]
    fn random_insert_remove_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let mut t = ElementTable::with_roots(2, 0, n);
        for _ in 0..10_000 {
            if rng.gen_bool(0.55) {
                // grow from a random active element
                let keys = t.sorted_keys();
                let base = &keys[rng.gen_range(0..keys.len())];
                let cs = children(base, n);
                if cs.is_empty() {
                    continue;
                }
                let c = cs[rng.gen_range(0..cs.len())].clone();
                t.insert_closure(c).unwrap();
            } else {
                let leaves: Vec<_> = t.sorted_leaves().into_iter().filter(|k| !k.is_root()).collect();
                if leaves.is_empty() {
                    continue;
                }
                let k = leaves[rng.gen_range(0..leaves.len())].clone();
                t.remove_leaf(&k).unwrap();
            }
            t.audit().unwrap();
        }
    }

    #[test]
    fn csv_dump() {
        let mut t = ElementTable::with_roots(2, 0, 3);
        t.get_mut(&ElementKey::root(2)).unwrap().coeffs[0] = -2.0;
        t.insert_with(key(&[1, 0], &[0, 0]), Some(vec![0.5])).unwrap();
        let csv = t.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "l1,l2,j1,j2,block_l2,c0");
        assert_eq!(lines[1], "0,0,0,0,2e0,-2e0");
        assert_eq!(lines[2], "1,0,0,0,5e-1,5e-1");
    }
}
