//! Dyadic geometry on a bounded interval `[0, length)` split into `2^depth` cells.
//!
//! Three lattices are available. Lattice `s` displaces the level-`k` grid by
//! `(-1)^k * s * w_k / 3` cells (rounded half up), where `w_k = N / 2^k` is the
//! cell width of a level-`k` cube. The alternating sign is what keeps each
//! lattice nested. Shifted cubes are clamped to the domain, so a level may hold
//! `2^k + 1` cubes and an index may be `-1` or `2^k`.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("depth must be in 1..=24, got {0}")]
    BadDepth(u32),
    #[error("leaf cube")]
    LeafCube,
    #[error("cube {0:?} does not meet the domain")]
    OutsideDomain(DyadicCube),
    #[error("empty cell range")]
    EmptyRange,
    #[error("cell range {start}..{end} exceeds {cells} cells")]
    RangeOutOfBounds { start: usize, end: usize, cells: usize },
    #[error("shift must be 0, 1 or 2, got {0}")]
    BadShift(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    length: f64,
    depth: u32,
}

impl Domain {
    pub fn new(length: f64, depth: u32) -> Result<Self, GeometryError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GeometryError::BadLength(length));
        }
        if depth == 0 || depth > 24 {
            return Err(GeometryError::BadDepth(depth));
        }
        Ok(Self { length, depth })
    }

    /// Unit-length domain; panics on an invalid depth.
    pub fn unit(depth: u32) -> Self {
        Self::new(1.0, depth).expect("valid depth")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cells(&self) -> usize {
        1usize << self.depth
    }

    pub fn cell_measure(&self) -> f64 {
        self.length / self.cells() as f64
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.cell_measure()
    }

    pub fn measure(&self, cells: &Range<usize>) -> f64 {
        cells.len() as f64 * self.cell_measure()
    }

    /// Cell containing the point `x`, clamped into the domain.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = (x / self.cell_measure()).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.cells() - 1)
        }
    }

    /// Cell range of `[a, b)` with endpoints rounded to the nearest cell boundary.
    pub fn snap(&self, a: f64, b: f64) -> Range<usize> {
        let n = self.cells() as f64;
        let h = self.cell_measure();
        let lo = (a / h).round().clamp(0.0, n) as usize;
        let hi = (b / h).round().clamp(0.0, n) as usize;
        lo..hi.max(lo)
    }

    pub fn check_range(&self, r: &Range<usize>) -> Result<(), GeometryError> {
        if r.start >= r.end {
            return Err(GeometryError::EmptyRange);
        }
        if r.end > self.cells() {
            return Err(GeometryError::RangeOutOfBounds { start: r.start, end: r.end, cells: self.cells() });
        }
        Ok(())
    }

    /// Width in cells of a level-`level` cube.
    pub fn width(&self, level: u32) -> i64 {
        1i64 << (self.depth - level)
    }

    /// Grid displacement in cells of lattice `shift` at `level`.
    pub fn offset(&self, shift: u8, level: u32) -> i64 {
        let w = self.width(level);
        let sign = if level % 2 == 0 { 1 } else { -1 };
        // round half up of sign * shift * w / 3
        (2 * sign * shift as i64 * w + 3).div_euclid(6)
    }

    fn raw_start(&self, q: &DyadicCube) -> i64 {
        q.index * self.width(q.level) + self.offset(q.shift, q.level)
    }

    /// Index range of the cubes of `(shift, level)` that meet the domain.
    pub fn index_range(&self, shift: u8, level: u32) -> Range<i64> {
        let w = self.width(level);
        let o = self.offset(shift, level);
        let n = self.cells() as i64;
        let lo = (-o).div_euclid(w);
        let hi = (n - o + w - 1).div_euclid(w);
        lo..hi
    }

    /// Cells of `q` after clamping to the domain.
    pub fn cube_cells(&self, q: &DyadicCube) -> Range<usize> {
        let start = self.raw_start(q);
        let end = start + self.width(q.level);
        let n = self.cells() as i64;
        let a = start.clamp(0, n) as usize;
        let b = end.clamp(0, n) as usize;
        a..b.max(a)
    }

    pub fn cube_measure(&self, q: &DyadicCube) -> f64 {
        self.measure(&self.cube_cells(q))
    }

    pub fn contains_cube(&self, q: &DyadicCube) -> bool {
        q.shift < 3 && q.level <= self.depth && self.index_range(q.shift, q.level).contains(&q.index)
    }

    pub fn top(&self) -> DyadicCube {
        DyadicCube { shift: 0, level: 0, index: 0 }
    }

    pub fn cubes_at(&self, shift: u8, level: u32) -> Vec<DyadicCube> {
        self.index_range(shift, level).map(|index| DyadicCube { shift, level, index }).collect()
    }

    /// Every cube of one lattice, coarse levels first.
    pub fn lattice(&self, shift: u8) -> Vec<DyadicCube> {
        (0..=self.depth).flat_map(|k| self.cubes_at(shift, k)).collect()
    }

    /// The cube of `(shift, level)` containing `cell`.
    pub fn cube_containing(&self, shift: u8, level: u32, cell: usize) -> DyadicCube {
        let w = self.width(level);
        let o = self.offset(shift, level);
        DyadicCube { shift, level, index: (cell as i64 - o).div_euclid(w) }
    }

    pub fn children(&self, q: &DyadicCube) -> Result<Vec<DyadicCube>, GeometryError> {
        if q.level >= self.depth {
            return Err(GeometryError::LeafCube);
        }
        if !self.contains_cube(q) {
            return Err(GeometryError::OutsideDomain(*q));
        }
        let level = q.level + 1;
        let w = self.width(level);
        let first = (self.raw_start(q) - self.offset(q.shift, level)) / w;
        let valid = self.index_range(q.shift, level);
        Ok((first..first + 2)
            .filter(|i| valid.contains(i))
            .map(|index| DyadicCube { shift: q.shift, level, index })
            .collect())
    }

    pub fn parent(&self, q: &DyadicCube) -> Option<DyadicCube> {
        if q.level == 0 {
            return None;
        }
        let level = q.level - 1;
        let start = self.raw_start(q);
        let w = self.width(level);
        Some(DyadicCube { shift: q.shift, level, index: (start - self.offset(q.shift, level)).div_euclid(w) })
    }

    /// `p` is `q` or lies below `q` in the same lattice.
    pub fn is_descendant_or_self(&self, p: &DyadicCube, q: &DyadicCube) -> bool {
        if p.shift != q.shift || p.level < q.level {
            return false;
        }
        let ps = self.raw_start(p);
        let qs = self.raw_start(q);
        ps >= qs && ps < qs + self.width(q.level)
    }

    /// Concentric triple of a cell range, clamped to the domain.
    pub fn triple_cells(&self, r: &Range<usize>) -> Range<usize> {
        let len = r.len();
        let a = r.start.saturating_sub(len);
        let b = (r.end + len).min(self.cells());
        a..b
    }

    pub fn triple(&self, q: &DyadicCube) -> Range<usize> {
        self.triple_cells(&self.cube_cells(q))
    }

    /// Smallest shifted cube (by clamped measure) containing the cell range.
    /// Ties prefer the lower shift, then the finer level.
    pub fn containing_cube(&self, r: &Range<usize>) -> Result<DyadicCube, GeometryError> {
        self.check_range(r)?;
        let mut best: Option<(usize, DyadicCube)> = None;
        for shift in 0..3u8 {
            for level in (0..=self.depth).rev() {
                let q = self.cube_containing(shift, level, r.start);
                let cells = self.cube_cells(&q);
                if cells.end >= r.end {
                    if best.map_or(true, |(m, _)| cells.len() < m) {
                        best = Some((cells.len(), q));
                    }
                    break;
                }
            }
        }
        Ok(best.expect("the shift-0 top cube contains every range").1)
    }

    /// Shifted cube `R_Q` containing the triple of `q`; `Q ⊆ 3Q ⊆ R_Q`.
    pub fn containing_triple(&self, q: &DyadicCube) -> Result<DyadicCube, GeometryError> {
        self.containing_cube(&self.triple(q))
    }

    /// Maximal cubes strictly below `q` (in its lattice) selected by `pred`,
    /// searched top-down. Larger cubes win, then lower index.
    pub fn maximal_subcubes<F: FnMut(&DyadicCube, &Range<usize>) -> bool>(
        &self,
        q: &DyadicCube,
        mut pred: F,
    ) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        let mut stack: Vec<DyadicCube> = match self.children(q) {
            Ok(c) => c.into_iter().rev().collect(),
            Err(_) => return out,
        };
        while let Some(c) = stack.pop() {
            let cells = self.cube_cells(&c);
            if pred(&c, &cells) {
                out.push(c);
            } else if let Ok(ch) = self.children(&c) {
                stack.extend(ch.into_iter().rev());
            }
        }
        out
    }

    pub fn whitney_decomposition(&self, open_set: &[bool]) -> Whitney {
        whitney(self, open_set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub shift: u8,
    pub level: u32,
    pub index: i64,
}

impl DyadicCube {
    pub fn new(shift: u8, level: u32, index: i64) -> Result<Self, GeometryError> {
        if shift > 2 {
            return Err(GeometryError::BadShift(shift));
        }
        Ok(Self { shift, level, index })
    }
}

/// Deduplicated cubes iterated in `(shift, level, index)` order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSet(BTreeSet<DyadicCube>);

impl CubeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, q: DyadicCube) -> bool {
        self.0.insert(q)
    }

    pub fn contains(&self, q: &DyadicCube) -> bool {
        self.0.contains(q)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicCube> {
        self.0.iter()
    }

    pub fn to_vec(&self) -> Vec<DyadicCube> {
        self.0.iter().copied().collect()
    }

    pub fn shifts(&self) -> BTreeSet<u8> {
        self.0.iter().map(|q| q.shift).collect()
    }
}

impl FromIterator<DyadicCube> for CubeSet {
    fn from_iter<I: IntoIterator<Item = DyadicCube>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a CubeSet {
    type Item = &'a DyadicCube;
    type IntoIter = std::collections::btree_set::Iter<'a, DyadicCube>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lower end of the Whitney ratio window `dist(Q, Ω^c) / diam(Q)`.
pub const WHITNEY_LOWER: f64 = 8.0;
/// Largest ratio a maximal cube can have: `2 * WHITNEY_LOWER + 1`.
pub const WHITNEY_UPPER: f64 = 2.0 * WHITNEY_LOWER + 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Whitney {
    pub cubes: CubeSet,
    /// Ω is the whole domain; the distance condition is vacuous.
    pub no_complement: bool,
    /// Finest-level cubes too close to Ω^c to reach the lower ratio.
    pub boundary_layer: Vec<DyadicCube>,
}

impl Whitney {
    pub fn ratio(&self, domain: &Domain, open_set: &[bool], q: &DyadicCube) -> f64 {
        let d = ComplementDistance::new(open_set);
        let r = domain.cube_cells(q);
        d.cells_to_complement(&r) as f64 / r.len() as f64
    }
}

/// Nearest complement cells, with the exterior of the domain counted as complement.
pub struct ComplementDistance {
    left: Vec<i64>,
    right: Vec<i64>,
}

impl ComplementDistance {
    pub fn new(open_set: &[bool]) -> Self {
        let n = open_set.len();
        let mut left = vec![-1i64; n];
        let mut last = -1i64;
        for i in 0..n {
            if !open_set[i] {
                last = i as i64;
            }
            left[i] = last;
        }
        let mut right = vec![n as i64; n];
        let mut next = n as i64;
        for i in (0..n).rev() {
            if !open_set[i] {
                next = i as i64;
            }
            right[i] = next;
        }
        Self { left, right }
    }

    /// Gap in cells between a range inside Ω and the complement.
    pub fn cells_to_complement(&self, r: &Range<usize>) -> i64 {
        let l = r.start as i64 - (self.left[r.start] + 1);
        let rr = self.right[r.end - 1] - r.end as i64;
        l.min(rr)
    }

    /// Distance in cells from the midpoint of `cell` to the complement.
    pub fn midpoint_distance(&self, cell: usize) -> f64 {
        let l = cell as i64 - (self.left[cell] + 1);
        let r = self.right[cell] - (cell as i64 + 1);
        l.min(r) as f64 + 0.5
    }
}

fn whitney(domain: &Domain, open_set: &[bool]) -> Whitney {
    assert_eq!(open_set.len(), domain.cells(), "mask length must equal the cell count");
    let mut out = Whitney { cubes: CubeSet::new(), no_complement: false, boundary_layer: Vec::new() };
    if open_set.iter().all(|&b| b) {
        out.cubes.insert(domain.top());
        out.no_complement = true;
        return out;
    }
    let mut inside = vec![0usize; open_set.len() + 1];
    for (i, &b) in open_set.iter().enumerate() {
        inside[i + 1] = inside[i] + b as usize;
    }
    let dist = ComplementDistance::new(open_set);
    let mut stack = vec![domain.top()];
    while let Some(q) = stack.pop() {
        let r = domain.cube_cells(&q);
        let count = inside[r.end] - inside[r.start];
        if count == 0 {
            continue;
        }
        if count == r.len() {
            let ratio = dist.cells_to_complement(&r) as f64 / r.len() as f64;
            if ratio > WHITNEY_LOWER {
                out.cubes.insert(q);
                continue;
            }
            if q.level == domain.depth() {
                out.cubes.insert(q);
                out.boundary_layer.push(q);
                continue;
            }
        }
        if let Ok(ch) = domain.children(&q) {
            stack.extend(ch);
        }
    }
    out.boundary_layer.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_of_top() {
        let d = Domain::unit(2);
        let ch = d.children(&d.top()).unwrap();
        assert_eq!(ch, vec![DyadicCube { shift: 0, level: 1, index: 0 }, DyadicCube { shift: 0, level: 1, index: 1 }]);
        let ch = d.children(&DyadicCube { shift: 0, level: 1, index: 1 }).unwrap();
        assert_eq!(ch.iter().map(|c| c.index).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(d.children(&DyadicCube { shift: 0, level: 2, index: 0 }), Err(GeometryError::LeafCube));
    }

    #[test]
    fn triple_clamps() {
        let d = Domain::unit(3);
        let q = DyadicCube { shift: 0, level: 2, index: 1 };
        assert_eq!(d.cube_cells(&q), 2..4);
        assert_eq!(d.triple(&q), 0..6);
        assert_eq!(d.triple(&d.top()), 0..8);
    }

    #[test]
    fn containing_triple_small_case() {
        let d = Domain::unit(3);
        let r = d.containing_cube(&(2..3)).unwrap();
        assert!(d.cube_measure(&r) <= 0.375 + 1e-12);
        let q = DyadicCube { shift: 0, level: 3, index: 2 };
        let rq = d.containing_triple(&q).unwrap();
        let c = d.cube_cells(&rq);
        assert!(c.start <= 1 && c.end >= 4);
    }

    #[test]
    fn shifted_children_partition_parent() {
        for depth in 1..=8 {
            let d = Domain::unit(depth);
            for s in 0..3 {
                for q in d.lattice(s) {
                    if q.level == depth {
                        continue;
                    }
                    let ch = d.children(&q).unwrap();
                    let cells = d.cube_cells(&q);
                    let mut covered: Vec<usize> = ch.iter().flat_map(|c| d.cube_cells(c)).collect();
                    covered.sort();
                    assert_eq!(covered, cells.clone().collect::<Vec<_>>(), "{q:?}");
                    for c in &ch {
                        assert_eq!(d.parent(c), Some(q));
                    }
                    if s == 0 {
                        assert_eq!(ch.len(), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn whitney_basic_cases() {
        let d = Domain::unit(4);
        let w = d.whitney_decomposition(&[false; 16]);
        assert!(w.cubes.is_empty());
        let w = d.whitney_decomposition(&[true; 16]);
        assert!(w.no_complement);
        assert_eq!(w.cubes.to_vec(), vec![d.top()]);
    }
}
