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

//! Domain types for geo-textual data: points, objects, datasets and queries.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid object `{id}`: {reason}")]
    InvalidObject { id: String, reason: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A location in dataset units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance. Every ordering decision in the crate goes through
/// this function so that engine and oracle agree on ties.
#[inline]
pub fn euclidean(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Ranking order used by nearest-neighbor results: distance, then id.
#[inline]
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

/// A keyword must be non-empty and free of whitespace and control characters
/// (whitespace separates keywords in the dataset file).
pub fn is_valid_keyword(w: &str) -> bool {
    !w.is_empty() && !w.chars().any(|c| c.is_whitespace() || c.is_control())
}

fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c == '\t' || c == '\n' || c == '\r')
}

/// One geo-tagged object: identifier, location and keyword set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoObject {
    pub id: String,
    pub p: Point,
    pub psi: BTreeSet<String>,
}

impl GeoObject {
    pub fn new<I, S>(id: impl Into<String>, p: Point, keywords: I) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        let psi: BTreeSet<String> = keywords.into_iter().map(Into::into).collect();
        let invalid = |reason: &str| GeoError::InvalidObject {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if !is_valid_id(&id) {
            return Err(invalid("id must be non-empty and contain no tabs or newlines"));
        }
        if !p.is_finite() {
            return Err(invalid("coordinates must be finite"));
        }
        if psi.is_empty() {
            return Err(invalid("keyword set is empty"));
        }
        if let Some(bad) = psi.iter().find(|w| !is_valid_keyword(w)) {
            return Err(invalid(&format!("invalid keyword {bad:?}")));
        }
        Ok(Self { id, p, psi })
    }

    pub fn contains_all(&self, keywords: &BTreeSet<String>) -> bool {
        keywords.is_subset(&self.psi)
    }
}

/// Axis-aligned bounding square of a dataset. `width` is never zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Space {
    pub origin: Point,
    pub width: f64,
}

impl Space {
    pub fn new(origin: Point, width: f64) -> Self {
        let width = if width > 0.0 && width.is_finite() { width } else { 1.0 };
        Self { origin, width }
    }

    /// Coordinates relative to the square's bottom-left corner.
    #[inline]
    pub fn normalize(&self, p: Point) -> Point {
        Point::new(p.x - self.origin.x, p.y - self.origin.y)
    }

    #[inline]
    pub fn denormalize(&self, p: Point) -> Point {
        Point::new(p.x + self.origin.x, p.y + self.origin.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub objects: Vec<GeoObject>,
    pub bbox_min: Point,
    /// Larger of the two axis extents; zero for a single location.
    pub width: f64,
}

impl Dataset {
    pub fn new(objects: Vec<GeoObject>) -> Result<Self, GeoError> {
        if objects.is_empty() {
            return Err(GeoError::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(objects.len());
        for o in &objects {
            if !seen.insert(o.id.as_str()) {
                return Err(GeoError::DuplicateId(o.id.clone()));
            }
        }
        let (bbox_min, width) = bounding_square(&objects);
        Ok(Self {
            objects,
            bbox_min,
            width,
        })
    }

    /// The bounding square used for all cell arithmetic (`W = 0` becomes 1).
    pub fn space(&self) -> Space {
        Space::new(self.bbox_min, self.width)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GeoObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn group_by_keyword(&self) -> BTreeMap<String, Vec<GeoObject>> {
        group_by_keyword(&self.objects)
    }

    pub fn keywords(&self) -> BTreeSet<String> {
        self.objects.iter().flat_map(|o| o.psi.iter().cloned()).collect()
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, GeoError> {
        let mut objects = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            objects.push(parse_line(trimmed, lineno)?);
        }
        Self::new(objects)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for o in &self.objects {
            let kws: Vec<&str> = o.psi.iter().map(String::as_str).collect();
            writeln!(w, "{}\t{}\t{}\t{}", o.id, o.p.x, o.p.y, kws.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeoError> {
        let file = fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Supported dataset file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Tsv,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset, GeoError> {
    match format {
        DatasetFormat::Tsv => {
            let file = fs::File::open(path)?;
            Dataset::parse(io::BufReader::new(file))
        }
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<GeoObject, GeoError> {
    let err = |reason: String| GeoError::Parse {
        line: lineno,
        reason,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
    }
    let coord = |s: &str, axis: &str| -> Result<f64, GeoError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| err(format!("bad {axis} coordinate {s:?}")))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite {axis} coordinate")));
        }
        Ok(v)
    };
    let p = Point::new(coord(fields[1], "x")?, coord(fields[2], "y")?);
    let kws: Vec<&str> = fields[3].split_whitespace().collect();
    if kws.is_empty() {
        return Err(err("object has no keywords".into()));
    }
    GeoObject::new(fields[0], p, kws).map_err(|e| err(e.to_string()))
}

fn bounding_square(objects: &[GeoObject]) -> (Point, f64) {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for o in objects {
        min.x = min.x.min(o.p.x);
        min.y = min.y.min(o.p.y);
        max.x = max.x.max(o.p.x);
        max.y = max.y.max(o.p.y);
    }
    (min, (max.x - min.x).max(max.y - min.y))
}

/// Groups objects by keyword; an object with `s` keywords lands in `s` groups.
pub fn group_by_keyword(objects: &[GeoObject]) -> BTreeMap<String, Vec<GeoObject>> {
    let mut groups: BTreeMap<String, Vec<GeoObject>> = BTreeMap::new();
    for o in objects {
        for w in &o.psi {
            groups.entry(w.clone()).or_default().push(o.clone());
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QueryKind {
    /// All matches within radius `r`.
    Range { r: f64 },
    /// The `k` nearest matches; nearest-neighbor is `k = 1`.
    Knn { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub p: Point,
    pub psi: BTreeSet<String>,
    pub kind: QueryKind,
}

impl QuerySpec {
    pub fn range<I, S>(p: Point, psi: I, r: f64) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(p, psi, QueryKind::Range { r })
    }

    pub fn knn<I, S>(p: Point, psi: I, k: usize) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(p, psi, QueryKind::Knn { k })
    }

    pub fn nearest<I, S>(p: Point, psi: I) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::knn(p, psi, 1)
    }

    fn build<I, S>(p: Point, psi: I, kind: QueryKind) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let psi: BTreeSet<String> = psi.into_iter().map(Into::into).collect();
        let q = Self { p, psi, kind };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.p.is_finite() {
            return Err(GeoError::InvalidQuery("query point must be finite".into()));
        }
        if self.psi.is_empty() {
            return Err(GeoError::InvalidQuery("query keyword set is empty".into()));
        }
        if let Some(bad) = self.psi.iter().find(|w| !is_valid_keyword(w)) {
            return Err(GeoError::InvalidQuery(format!("invalid keyword {bad:?}")));
        }
        match self.kind {
            QueryKind::Range { r } if !(r.is_finite() && r >= 0.0) => Err(GeoError::InvalidQuery(
                "range radius must be finite and non-negative".into(),
            )),
            QueryKind::Knn { k: 0 } => Err(GeoError::InvalidQuery("k must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            QueryKind::Range { r } => Some(r),
            QueryKind::Knn { .. } => None,
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self.kind {
            QueryKind::Knn { k } => Some(k),
            QueryKind::Range { .. } => None,
        }
    }
}

/// Query answer. Range answers are sorted by id, kNN answers by (distance, id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub objects: Vec<GeoObject>,
    /// True when the answer is provably complete.
    pub exact: bool,
}

impl ResultSet {
    pub fn ids(&self) -> Vec<&str> {
        self.objects.iter().map(|o| o.id.as_str()).collect()
    }
}
