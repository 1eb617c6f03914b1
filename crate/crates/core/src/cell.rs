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

//! Quadtree cell addressing.
//!
//! A cell at `level` is named by a base-4 path of `level` digits, one per
//! subdivision, with `0` bottom-left, `1` bottom-right, `2` top-left and `3`
//! top-right. Equivalently a cell is a pair of integer grid indices
//! `(ix, iy)` in `[0, 2^level)`; digit `i` is `2 * ybit + xbit` taken from
//! bit `level - i` of the indices.
//!
//! Intervals are half-open `[lo, hi)` except along the far edges of the
//! bounding square, which are closed.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Point, Space};

/// Hard limit on subdivision depth.
pub const MAX_DEPTH: u8 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CellError {
    #[error("invalid path digit {0:?}")]
    InvalidDigit(char),
    #[error("path longer than {MAX_DEPTH} levels")]
    TooDeep,
    #[error("point lies outside the cell")]
    OutOfCell,
    #[error("point lies outside the bounding square")]
    OutOfBounds,
    #[error("invalid level {level} for height {d}")]
    BadLevel { level: u8, d: u8 },
}

/// Path from the root to a quadtree cell; the empty path is the root.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CellPath {
    level: u8,
    /// Digits packed two bits each, first digit most significant.
    code: u64,
}

impl CellPath {
    pub const ROOT: CellPath = CellPath { level: 0, code: 0 };

    pub fn from_digits(digits: &[u8]) -> Result<Self, CellError> {
        if digits.len() > MAX_DEPTH as usize {
            return Err(CellError::TooDeep);
        }
        let mut path = Self::ROOT;
        for &d in digits {
            if d > 3 {
                return Err(CellError::InvalidDigit(char::from(b'0' + d.min(9))));
            }
            path = path.child(d);
        }
        Ok(path)
    }

    /// Path of grid cell `(ix, iy)` at `level`.
    pub fn from_cell(ix: u32, iy: u32, level: u8) -> Self {
        debug_assert!(level <= MAX_DEPTH);
        debug_assert!(u64::from(ix) < 1 << level && u64::from(iy) < 1 << level);
        let mut code = 0u64;
        for bit in (0..level).rev() {
            let digit = 2 * ((iy >> bit) & 1) + ((ix >> bit) & 1);
            code = (code << 2) | u64::from(digit);
        }
        Self { level, code }
    }

    /// Grid indices `(ix, iy)` of this cell at its own level.
    pub fn cell(&self) -> (u32, u32) {
        let (mut ix, mut iy) = (0u32, 0u32);
        for i in 0..self.level {
            let digit = self.digit(i);
            ix = (ix << 1) | u32::from(digit & 1);
            iy = (iy << 1) | u32::from(digit >> 1);
        }
        (ix, iy)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    /// Digit at position `i` (0-based from the root).
    pub fn digit(&self, i: u8) -> u8 {
        assert!(i < self.level);
        ((self.code >> (2 * (self.level - 1 - i))) & 3) as u8
    }

    pub fn digits(&self) -> Vec<u8> {
        (0..self.level).map(|i| self.digit(i)).collect()
    }

    pub fn child(&self, digit: u8) -> Self {
        assert!(digit < 4 && self.level < MAX_DEPTH);
        Self {
            level: self.level + 1,
            code: (self.code << 2) | u64::from(digit),
        }
    }

    pub fn prefix(&self, len: u8) -> Self {
        assert!(len <= self.level);
        Self {
            level: len,
            code: self.code >> (2 * (self.level - len)),
        }
    }

    pub fn is_prefix_of(&self, other: &CellPath) -> bool {
        self.level <= other.level && other.prefix(self.level) == *self
    }

    /// Non-empty prefixes, shortest first, ending with `self`.
    pub fn chain(&self) -> impl Iterator<Item = CellPath> + '_ {
        (1..=self.level).map(move |l| self.prefix(l))
    }

    /// ASCII digits, used in key encodings.
    pub fn to_ascii(&self) -> Vec<u8> {
        self.digits().into_iter().map(|d| b'0' + d).collect()
    }
}

impl Ord for CellPath {
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.level.min(other.level);
        self.prefix(common)
            .code
            .cmp(&other.prefix(common).code)
            .then(self.level.cmp(&other.level))
    }
}

impl PartialOrd for CellPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.level {
            write!(f, "{}", self.digit(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for CellPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellPath(\"{self}\")")
    }
}

impl FromStr for CellPath {
    type Err = CellError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .chars()
            .map(|c| match c {
                '0'..='3' => Ok(c as u8 - b'0'),
                other => Err(CellError::InvalidDigit(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_digits(&digits)
    }
}

/// Unclamped grid index of normalized coordinate `coord` at `level`.
///
/// Scaling by a power of two is exact, so for any `l <= level`,
/// `grid_index(c, w, level) >> (level - l) == grid_index(c, w, l)`.
#[inline]
pub fn grid_index(coord: f64, width: f64, level: u8) -> i64 {
    let t = coord / width;
    let scaled = t * (1u64 << level) as f64;
    // Saturating cast keeps far-away query corners finite.
    scaled.floor().clamp(-(1i64 << 40) as f64, (1i64 << 40) as f64) as i64
}

/// Grid index clamped into `[0, 2^level)`; the far edge joins the last cell.
#[inline]
pub fn clamped_index(coord: f64, width: f64, level: u8) -> u32 {
    grid_index(coord, width, level).clamp(0, (1i64 << level) - 1) as u32
}

/// Quadrant digit of `p_norm` inside the cell at `cell_origin` whose side is
/// `2 * level_width`.
pub fn cell_code(p_norm: Point, level_width: f64, cell_origin: Point) -> Result<u8, CellError> {
    let side = 2.0 * level_width;
    let inside = |v: f64, lo: f64| v >= lo && v <= lo + side;
    if !inside(p_norm.x, cell_origin.x) || !inside(p_norm.y, cell_origin.y) {
        return Err(CellError::OutOfCell);
    }
    let right = p_norm.x >= cell_origin.x + level_width;
    let upper = p_norm.y >= cell_origin.y + level_width;
    Ok(2 * u8::from(upper) + u8::from(right))
}

/// Axis-aligned rectangle in dataset coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    /// Smallest distance from `p` to any point of the rectangle.
    pub fn min_distance(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        (dx * dx + dy * dy).sqrt()
    }
}

impl Space {
    /// Path of the level-`level` cell containing `p` (dataset coordinates).
    /// Points outside the square are clamped onto its border cells.
    pub fn locate(&self, p: Point, level: u8) -> CellPath {
        let n = self.normalize(p);
        CellPath::from_cell(
            clamped_index(n.x, self.width, level),
            clamped_index(n.y, self.width, level),
            level,
        )
    }

    /// Rectangle covered by `path`, in dataset coordinates.
    pub fn cell_rect(&self, path: &CellPath) -> Rect {
        let (ix, iy) = path.cell();
        let side = self.width / (1u64 << path.level()) as f64;
        let min = Point::new(ix as f64 * side, iy as f64 * side);
        let max = Point::new(min.x + side, min.y + side);
        Rect {
            min: self.denormalize(min),
            max: self.denormalize(max),
        }
    }

    /// Whether `p` belongs to the cell under the half-open convention.
    pub fn cell_contains(&self, path: &CellPath, p: Point) -> bool {
        path.is_prefix_of(&self.locate(p, MAX_DEPTH))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trips_through_grid_indices() {
        let p: CellPath = "302".parse().unwrap();
        assert_eq!(p.level(), 3);
        assert_eq!(p.cell(), (4, 5));
        assert_eq!(CellPath::from_cell(4, 5, 3), p);
        assert_eq!(p.to_string(), "302");
        assert_eq!(p.prefix(2).to_string(), "30");
        assert!(p.prefix(1).is_prefix_of(&p));
        assert!(!"31".parse::<CellPath>().unwrap().is_prefix_of(&p));
        assert_eq!(p.chain().map(|c| c.to_string()).collect::<Vec<_>>(), ["3", "30", "302"]);
        assert_eq!("4".parse::<CellPath>(), Err(CellError::InvalidDigit('4')));
    }

    #[test]
    fn quadrant_codes_follow_bottom_left_to_top_right() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(cell_code(Point::new(0.1, 0.1), 0.5, o), Ok(0));
        assert_eq!(cell_code(Point::new(0.9, 0.1), 0.5, o), Ok(1));
        assert_eq!(cell_code(Point::new(0.1, 0.9), 0.5, o), Ok(2));
        assert_eq!(cell_code(Point::new(0.9, 0.9), 0.5, o), Ok(3));
        // The midline belongs to the right/upper half.
        assert_eq!(cell_code(Point::new(0.5, 0.2), 0.5, o), Ok(1));
        assert_eq!(cell_code(Point::new(0.5, 0.5), 0.5, o), Ok(3));
        assert_eq!(cell_code(Point::new(1.5, 0.5), 0.5, o), Err(CellError::OutOfCell));
    }

    #[test]
    fn midline_rule_matches_brute_force_containment() {
        let space = Space::new(Point::new(0.0, 0.0), 1.0);
        for (x, y) in [(0.5, 0.25), (0.5, 0.5), (0.25, 0.5), (1.0, 1.0), (0.0, 1.0)] {
            let p = Point::new(x, y);
            let code = cell_code(p, 0.5, Point::new(0.0, 0.0)).unwrap();
            let hits: Vec<u8> = (0..4u8)
                .filter(|&d| {
                    let r = space.cell_rect(&CellPath::ROOT.child(d));
                    let in_axis = |v: f64, lo: f64, hi: f64| v >= lo && (v < hi || hi >= 1.0);
                    in_axis(p.x, r.min.x, r.max.x) && in_axis(p.y, r.min.y, r.max.y)
                })
                .collect();
            assert_eq!(hits, vec![code], "point {p}");
            assert_eq!(space.locate(p, 1), CellPath::ROOT.child(code));
        }
    }

    #[test]
    fn index_shift_is_consistent_across_levels() {
        let w = 7.3;
        for i in 0..2000 {
            let c = (i as f64) * w / 1999.0;
            let fine = clamped_index(c, w, MAX_DEPTH);
            for level in 0..=MAX_DEPTH {
                assert_eq!(fine >> (MAX_DEPTH - level), clamped_index(c, w, level));
            }
        }
    }

    #[test]
    fn ordering_is_lexicographic_on_digits() {
        let mut v: Vec<CellPath> = ["3", "02", "0", "023", "021", "1"].iter().map(|s| s.parse().unwrap()).collect();
        v.sort();
        let s: Vec<String> = v.iter().map(ToString::to_string).collect();
        assert_eq!(s, ["0", "02", "021", "023", "1", "3"]);
    }
}
