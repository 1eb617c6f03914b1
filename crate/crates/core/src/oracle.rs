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

//! Brute-force reference answers for range and kNN spatial-keyword queries.
//! Deliberately index-free.

use crate::geo::{euclidean, rank_order, GeoObject, QueryKind, QuerySpec, ResultSet};

/// Every object within `r` of the query point carrying all query keywords,
/// sorted by id.
pub fn oracle_range(objects: &[GeoObject], q: &QuerySpec) -> ResultSet {
    let r = match q.kind {
        QueryKind::Range { r } => r,
        QueryKind::Knn { .. } => panic!("oracle_range needs a range query"),
    };
    let mut hits: Vec<GeoObject> = objects
        .iter()
        .filter(|o| o.contains_all(&q.psi) && euclidean(o.p, q.p) <= r)
        .cloned()
        .collect();
    hits.sort_by(|a, b| a.id.cmp(&b.id));
    ResultSet {
        objects: hits,
        exact: true,
    }
}

/// The `k` matching objects nearest the query point, by (distance, id).
pub fn oracle_knn(objects: &[GeoObject], q: &QuerySpec) -> ResultSet {
    let k = match q.kind {
        QueryKind::Knn { k } => k,
        QueryKind::Range { .. } => panic!("oracle_knn needs a kNN query"),
    };
    let mut ranked: Vec<(f64, &GeoObject)> = objects
        .iter()
        .filter(|o| o.contains_all(&q.psi))
        .map(|o| (euclidean(o.p, q.p), o))
        .collect();
    ranked.sort_by(|a, b| rank_order((a.0, &a.1.id), (b.0, &b.1.id)));
    ResultSet {
        objects: ranked.into_iter().take(k).map(|(_, o)| o.clone()).collect(),
        exact: true,
    }
}

/// Dispatches on the query kind.
pub fn oracle_answer(objects: &[GeoObject], q: &QuerySpec) -> ResultSet {
    match q.kind {
        QueryKind::Range { .. } => oracle_range(objects, q),
        QueryKind::Knn { .. } => oracle_knn(objects, q),
    }
}
