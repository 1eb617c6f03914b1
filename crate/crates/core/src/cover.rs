// Copyright 2026 The RISK Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Enumeration of potentially covered cell identifiers.
//!
//! The client knows only the maximum tree height `d` and the square width
//! `W`. For a query disc it takes the circumscribed square, finds every
//! finest-level cell (side `W * 2^-d`) that the square touches and emits the
//! whole root-to-cell chain of identifiers, because it cannot tell which
//! level of that chain holds a real node. Identifiers naming virtual nodes
//! simply miss on the cloud.

use std::collections::HashSet;

use crate::cell::{clamped_index, CellError, CellPath, MAX_DEPTH};
use crate::geo::Point;

/// Ordered, duplicate-free set of cell identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverSet {
    ids: Vec<CellPath>,
}

impl CoverSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CellPath> {
        self.ids.iter()
    }

    pub fn contains(&self, path: &CellPath) -> bool {
        self.ids.contains(path)
    }

    pub fn as_slice(&self) -> &[CellPath] {
        &self.ids
    }

    pub fn into_vec(self) -> Vec<CellPath> {
        self.ids
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.ids.iter().map(ToString::to_string).collect()
    }
}

impl IntoIterator for CoverSet {
    type Item = CellPath;
    type IntoIter = std::vec::IntoIter<CellPath>;

    fn into_iter(self) -> Self::IntoIter {
        self.ids.into_iter()
    }
}

/// Rectangle of finest-level cells `[x_lo, x_hi] x [y_lo, y_hi]` at depth `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBlock {
    depth: u8,
    x_lo: u32,
    x_hi: u32,
    y_lo: u32,
    y_hi: u32,
}

impl CellBlock {
    /// Finest cells touched by the square `[p - r, p + r]`, clamped to the
    /// bounding square. `p` is normalized. `None` when the square misses the
    /// bounding square entirely.
    pub fn around(p: Point, r: f64, d: u8, width: f64) -> Option<Self> {
        assert!((1..=MAX_DEPTH).contains(&d), "tree height must be in 1..={MAX_DEPTH}");
        let (x_min, x_max) = (p.x - r, p.x + r);
        let (y_min, y_max) = (p.y - r, p.y + r);
        if x_max < 0.0 || y_max < 0.0 || x_min > width || y_min > width {
            return None;
        }
        Some(Self {
            depth: d,
            x_lo: clamped_index(x_min, width, d),
            x_hi: clamped_index(x_max, width, d),
            y_lo: clamped_index(y_min, width, d),
            y_hi: clamped_index(y_max, width, d),
        })
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn cell_count(&self) -> u64 {
        u64::from(self.x_hi - self.x_lo + 1) * u64::from(self.y_hi - self.y_lo + 1)
    }

    /// True when the block spans the whole bounding square.
    pub fn is_full(&self) -> bool {
        let last = (1u32 << self.depth) - 1;
        self.x_lo == 0 && self.y_lo == 0 && self.x_hi == last && self.y_hi == last
    }

    pub fn contains_cell(&self, ix: u32, iy: u32) -> bool {
        (self.x_lo..=self.x_hi).contains(&ix) && (self.y_lo..=self.y_hi).contains(&iy)
    }

    /// Whether `path` is one of this block's identifiers.
    pub fn covers(&self, path: &CellPath) -> bool {
        let level = path.level();
        if level == 0 || level > self.depth {
            return false;
        }
        let s = self.depth - level;
        let (ix, iy) = path.cell();
        (self.x_lo >> s..=self.x_hi >> s).contains(&ix) && (self.y_lo >> s..=self.y_hi >> s).contains(&iy)
    }

    /// Identifiers in scan order: columns left to right, rows bottom to top,
    /// each finest cell contributing its root-to-cell chain.
    pub fn ids(&self) -> CoverSet {
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        for ix in self.x_lo..=self.x_hi {
            for iy in self.y_lo..=self.y_hi {
                let leaf = CellPath::from_cell(ix, iy, self.depth);
                for id in leaf.chain() {
                    if seen.insert(id) {
                        ids.push(id);
                    }
                }
            }
        }
        CoverSet { ids }
    }

    /// Identifiers of this block that `prev` did not already produce,
    /// enumerated level by level without materializing either set. Work is
    /// proportional to the output plus the block's column count.
    pub fn ids_excluding(&self, prev: Option<&CellBlock>) -> Vec<CellPath> {
        let mut out = Vec::new();
        for level in 1..=self.depth {
            let shift = self.depth - level;
            let shifted = |b: &CellBlock| {
                let s = shift + b.depth - self.depth;
                (b.x_lo >> s, b.x_hi >> s, b.y_lo >> s, b.y_hi >> s)
            };
            let (xl, xh, yl, yh) = shifted(self);
            let old = prev.filter(|p| p.depth == self.depth).map(shifted);
            for ix in xl..=xh {
                match old {
                    Some((pxl, pxh, pyl, pyh)) if (pxl..=pxh).contains(&ix) => {
                        for iy in yl..pyl.clamp(yl, yh + 1) {
                            out.push(CellPath::from_cell(ix, iy, level));
                        }
                        for iy in (pyh + 1).max(yl)..=yh {
                            out.push(CellPath::from_cell(ix, iy, level));
                        }
                    }
                    _ => {
                        for iy in yl..=yh {
                            out.push(CellPath::from_cell(ix, iy, level));
                        }
                    }
                }
            }
        }
        out
    }

    /// Largest radius around `p` (normalized) whose disc lies inside the
    /// block, treating block sides on the bounding square's border as open.
    pub fn clearance(&self, p: Point, width: f64) -> f64 {
        clearance(p, width, self.depth, (self.x_lo, self.x_hi), (self.y_lo, self.y_hi))
    }
}

/// Largest radius around `p` (normalized) whose disc stays inside `path`'s
/// cell, ignoring sides on the bounding square's border.
pub fn cell_clearance(path: &CellPath, p: Point, width: f64) -> f64 {
    let (ix, iy) = path.cell();
    clearance(p, width, path.level(), (ix, ix), (iy, iy))
}

fn clearance(p: Point, width: f64, level: u8, xs: (u32, u32), ys: (u32, u32)) -> f64 {
    let side = width / (1u64 << level) as f64;
    let last = (1u32 << level) - 1;
    let gap = |v: f64, (lo, hi): (u32, u32)| -> f64 {
        let below = if lo == 0 { f64::INFINITY } else { v - f64::from(lo) * side };
        let above = if hi == last {
            f64::INFINITY
        } else {
            f64::from(hi + 1) * side - v
        };
        below.min(above)
    };
    gap(p.x, xs).min(gap(p.y, ys)).max(0.0)
}

/// All identifiers potentially covered by the disc `(p, r)`; `p` normalized.
pub fn cover_identifiers(p: Point, r: f64, d: u8, width: f64) -> CoverSet {
    CellBlock::around(p, r, d, width)
        .map(|b| b.ids())
        .unwrap_or_default()
}

/// Path of length `level` of the cell containing normalized point `p`.
pub fn path_of_point(p: Point, level: u8, d: u8, width: f64) -> Result<CellPath, CellError> {
    if level == 0 || level > d || d > MAX_DEPTH {
        return Err(CellError::BadLevel { level, d });
    }
    let inside = |v: f64| (0.0..=width).contains(&v);
    if !inside(p.x) || !inside(p.y) {
        return Err(CellError::OutOfBounds);
    }
    // Alg. form: digit i = 2 * bit(y) + bit(x) of the finest-level index.
    let ix = clamped_index(p.x, width, d);
    let iy = clamped_index(p.y, width, d);
    let mut digits = Vec::with_capacity(level as usize);
    for i in 1..=level {
        let shift = d - i;
        let code = 2 * ((iy >> shift) & 1) + ((ix >> shift) & 1);
        digits.push(code as u8);
    }
    CellPath::from_digits(&digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(c: &CoverSet) -> Vec<String> {
        let mut v = c.to_strings();
        v.sort();
        v
    }

    fn sorted(ids: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn range_example_hits_021_and_023() {
        // d = 3, W = 8: finest cells are unit squares. 021 is (1,2), 023 is (1,3).
        let c = cover_identifiers(Point::new(1.5, 3.0), 0.3, 3, 8.0);
        assert_eq!(strs(&c), sorted(&["0", "02", "021", "023"]));
    }

    #[test]
    fn point_query_yields_single_chain() {
        let c = cover_identifiers(Point::new(4.5, 5.5), 0.0, 3, 8.0);
        assert_eq!(c.to_strings(), ["3", "30", "302"]);
        let corner = cover_identifiers(Point::new(0.0, 0.0), 0.0, 3, 8.0);
        assert_eq!(corner.to_strings(), ["0", "00", "000"]);
    }

    #[test]
    fn whole_square_cover_counts() {
        for d in 1..=5u8 {
            let c = cover_identifiers(Point::new(0.5, 0.5), 10.0, d, 1.0);
            let expected: usize = (1..=d as u32).map(|i| 4usize.pow(i)).sum();
            assert_eq!(c.len(), expected);
        }
    }

    #[test]
    fn outside_queries_are_clamped_or_empty() {
        assert!(cover_identifiers(Point::new(-5.0, 0.5), 1.0, 3, 1.0).is_empty());
        let edge = cover_identifiers(Point::new(-0.05, 0.5), 0.1, 2, 1.0);
        assert!(!edge.is_empty());
        assert!(edge.iter().all(|p| p.cell().0 == 0));
    }

    #[test]
    fn path_of_point_examples() {
        assert_eq!(path_of_point(Point::new(0.1, 0.1), 2, 3, 1.0).unwrap().to_string(), "00");
        assert_eq!(path_of_point(Point::new(0.5, 0.5), 1, 3, 1.0).unwrap().to_string(), "3");
        assert_eq!(path_of_point(Point::new(4.5, 5.5), 3, 3, 8.0).unwrap().to_string(), "302");
        assert_eq!(path_of_point(Point::new(1.0, 1.0), 3, 3, 1.0).unwrap().to_string(), "333");
        assert_eq!(path_of_point(Point::new(1.5, 0.5), 1, 3, 1.0), Err(CellError::OutOfBounds));
        assert!(path_of_point(Point::new(0.5, 0.5), 4, 3, 1.0).is_err());
    }

    #[test]
    fn excluding_matches_set_difference() {
        let w = 1.0;
        let p = Point::new(0.4, 0.61);
        let small = CellBlock::around(p, 0.05, 5, w).unwrap();
        let big = CellBlock::around(p, 0.2, 5, w).unwrap();
        let fresh: HashSet<CellPath> = big.ids_excluding(Some(&small)).into_iter().collect();
        let all: HashSet<CellPath> = big.ids().into_iter().collect();
        let old: HashSet<CellPath> = small.ids().into_iter().collect();
        let diff: HashSet<CellPath> = all.difference(&old).copied().collect();
        assert_eq!(fresh, diff);
        let everything: HashSet<CellPath> = big.ids_excluding(None).into_iter().collect();
        assert_eq!(everything, all);
    }

    #[test]
    fn excluding_handles_arbitrary_block_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let mut pick = || Point::new(rng.random::<f64>(), rng.random::<f64>());
            let (a, b) = (pick(), pick());
            let ra = rng.random::<f64>() * 0.4;
            let rb = rng.random::<f64>() * 0.4;
            let big = CellBlock::around(a, ra, 4, 1.0).unwrap();
            let other = CellBlock::around(b, rb, 4, 1.0).unwrap();
            let fresh = big.ids_excluding(Some(&other));
            let unique: HashSet<CellPath> = fresh.iter().copied().collect();
            assert_eq!(unique.len(), fresh.len());
            let all: HashSet<CellPath> = big.ids().into_iter().collect();
            let old: HashSet<CellPath> = other.ids().into_iter().collect();
            assert_eq!(unique, all.difference(&old).copied().collect());
            assert!(all.iter().all(|id| big.covers(id)));
            assert!(fresh.iter().all(|id| !other.covers(id)));
        }
    }

    #[test]
    fn clearance_ignores_border_sides() {
        let b = CellBlock::around(Point::new(0.3, 0.3), 0.0, 2, 1.0).unwrap();
        // Cell (1,1) spans [0.25, 0.5): nearest interior side is 0.05 away.
        assert!((b.clearance(Point::new(0.3, 0.3), 1.0) - 0.05).abs() < 1e-12);
        let full = CellBlock::around(Point::new(0.5, 0.5), 1.0, 2, 1.0).unwrap();
        assert!(full.is_full());
        assert_eq!(full.clearance(Point::new(0.5, 0.5), 1.0), f64::INFINITY);
        let root_child: CellPath = "0".parse().unwrap();
        assert!((cell_clearance(&root_child, Point::new(0.1, 0.2), 1.0) - 0.3).abs() < 1e-12);
    }
}
