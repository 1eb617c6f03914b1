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

//! Per-keyword kNN quadtrees.
//!
//! Each keyword group is partitioned by a point quadtree with leaf capacity
//! `k_max`. Every non-empty leaf becomes one [`PlainEntry`] keyed by
//! `(keyword, path)` whose value carries the leaf's objects and the `k_max`
//! nearest neighbors (within the group) of the leaf's representative object.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{clamped_index, CellPath, Rect, MAX_DEPTH};
use crate::geo::{euclidean, rank_order, Dataset, GeoObject, Point, Space};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("keyword group is empty")]
    EmptyGroup,
    #[error("object `{id}` does not carry keyword `{keyword}`")]
    MissingKeyword { id: String, keyword: String },
    #[error("leaf capacity must be at least 1")]
    ZeroCapacity,
}

/// One leaf of a kQ-tree in key-value form: key `(keyword, path)`, value
/// `(key, delta, delta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainEntry {
    pub keyword: String,
    pub path: CellPath,
    /// Objects of the group lying in the cell.
    pub delta: Vec<GeoObject>,
    /// Nearest neighbors of the representative within the group, ascending.
    pub delta_k: Vec<GeoObject>,
}

impl PlainEntry {
    /// The cell's representative: the resident object closest to the cell
    /// center. `None` only for a cell emptied by deletions.
    pub fn representative(&self, space: &Space) -> Option<&GeoObject> {
        select_representative(&self.delta, space.cell_rect(&self.path).center())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KQTree {
    pub keyword: String,
    /// Real (non-empty leaf) nodes in breadth-first order.
    pub entries: Vec<PlainEntry>,
    /// Maximum leaf depth; at least 1.
    pub height: u8,
}

/// Object closest to `center`, ties broken by the smaller id.
pub fn select_representative(objects: &[GeoObject], center: Point) -> Option<&GeoObject> {
    objects
        .iter()
        .min_by(|a, b| rank_order((euclidean(a.p, center), &a.id), (euclidean(b.p, center), &b.id)))
}

/// The `min(k, |group| - 1)` members of `group` other than `center` nearest
/// to it, ordered by (distance, id).
pub fn knn_in_group(group: &[GeoObject], center: &GeoObject, k: usize) -> Vec<GeoObject> {
    let mut ranked: Vec<(f64, &GeoObject)> = group
        .iter()
        .filter(|o| o.id != center.id)
        .map(|o| (euclidean(o.p, center.p), o))
        .collect();
    let cmp = |a: &(f64, &GeoObject), b: &(f64, &GeoObject)| rank_order((a.0, &a.1.id), (b.0, &b.1.id));
    if ranked.len() > k {
        if k > 0 {
            ranked.select_nth_unstable_by(k - 1, cmp);
        }
        ranked.truncate(k);
    }
    ranked.sort_by(cmp);
    ranked.into_iter().map(|(_, o)| o.clone()).collect()
}

/// A leaf with its objects given as indices into the slice the tree was laid
/// out over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafLayout {
    pub path: CellPath,
    pub delta: Vec<u32>,
    pub delta_k: Vec<u32>,
}

/// A kQ-tree without materialized objects.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeLayout {
    pub keyword: String,
    pub leaves: Vec<LeafLayout>,
    pub height: u8,
}

impl TreeLayout {
    pub fn materialize(&self, objects: &[GeoObject]) -> KQTree {
        let pick = |ids: &[u32]| ids.iter().map(|&i| objects[i as usize].clone()).collect();
        KQTree {
            keyword: self.keyword.clone(),
            entries: self
                .leaves
                .iter()
                .map(|l| PlainEntry {
                    keyword: self.keyword.clone(),
                    path: l.path,
                    delta: pick(&l.delta),
                    delta_k: pick(&l.delta_k),
                })
                .collect(),
            height: self.height,
        }
    }
}

/// Lays out the kQ-tree over `objects[members]`, all of which must carry
/// `keyword`.
pub fn layout_kq_tree(
    objects: &[GeoObject],
    members: &[u32],
    keyword: &str,
    k_max: usize,
    space: &Space,
) -> Result<TreeLayout, TreeError> {
    if k_max == 0 {
        return Err(TreeError::ZeroCapacity);
    }
    if members.is_empty() {
        return Err(TreeError::EmptyGroup);
    }
    let sites: Vec<(Point, &str)> = members
        .iter()
        .map(|&i| {
            let o = &objects[i as usize];
            (o.p, o.id.as_str())
        })
        .collect();
    if let Some(&i) = members.iter().find(|&&i| !objects[i as usize].psi.contains(keyword)) {
        return Err(TreeError::MissingKeyword {
            id: objects[i as usize].id.clone(),
            keyword: keyword.to_string(),
        });
    }
    let tree = PointQuadtree::build(&sites, k_max, space);
    let mut leaves = Vec::new();
    let mut height = 1;
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let node = &tree.nodes[idx];
        match &node.kind {
            NodeKind::Inner(children) => queue.extend(children.iter().copied()),
            NodeKind::Leaf(local) => {
                height = height.max(node.path.level());
                if local.is_empty() {
                    continue;
                }
                let center = node.rect.center();
                let rep = local
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        rank_order(
                            (euclidean(sites[a].0, center), sites[a].1),
                            (euclidean(sites[b].0, center), sites[b].1),
                        )
                    })
                    .expect("non-empty leaf");
                leaves.push(LeafLayout {
                    path: node.path,
                    delta: local.iter().map(|&i| members[i]).collect(),
                    delta_k: tree
                        .nearest(&sites, sites[rep].0, k_max, Some(rep))
                        .into_iter()
                        .map(|i| members[i])
                        .collect(),
                });
            }
        }
    }
    Ok(TreeLayout {
        keyword: keyword.to_string(),
        leaves,
        height,
    })
}

/// Builds the kQ-tree of one keyword group.
pub fn build_kq_tree(
    group: &[GeoObject],
    keyword: &str,
    k_max: usize,
    space: &Space,
) -> Result<KQTree, TreeError> {
    let members: Vec<u32> = (0..group.len() as u32).collect();
    Ok(layout_kq_tree(group, &members, keyword, k_max, space)?.materialize(group))
}

/// Lays out every keyword's tree over `dataset.objects`, in keyword order.
pub fn layout_all_trees(dataset: &Dataset, k_max: usize) -> Result<Vec<TreeLayout>, TreeError> {
    let space = dataset.space();
    let mut groups: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (i, o) in dataset.objects.iter().enumerate() {
        for w in &o.psi {
            groups.entry(w.as_str()).or_default().push(i as u32);
        }
    }
    let groups: Vec<(&str, Vec<u32>)> = groups.into_iter().collect();
    groups
        .par_iter()
        .map(|(w, members)| layout_kq_tree(&dataset.objects, members, w, k_max, &space))
        .collect()
}

/// Builds every keyword's tree, in keyword order.
pub fn build_all_trees(dataset: &Dataset, k_max: usize) -> Result<Vec<KQTree>, TreeError> {
    Ok(layout_all_trees(dataset, k_max)?
        .iter()
        .map(|t| t.materialize(&dataset.objects))
        .collect())
}

enum NodeKind {
    Inner([usize; 4]),
    Leaf(Vec<usize>),
}

struct Node {
    path: CellPath,
    rect: Rect,
    kind: NodeKind,
}

/// Plain quadtree over indices into a slice of `(location, id)` sites.
struct PointQuadtree {
    nodes: Vec<Node>,
    slack: f64,
}

impl PointQuadtree {
    fn build(sites: &[(Point, &str)], k_max: usize, space: &Space) -> Self {
        let fine: Vec<(u32, u32)> = sites
            .iter()
            .map(|(p, _)| {
                let n = space.normalize(*p);
                (
                    clamped_index(n.x, space.width, MAX_DEPTH),
                    clamped_index(n.y, space.width, MAX_DEPTH),
                )
            })
            .collect();
        let mut nodes = vec![Node {
            path: CellPath::ROOT,
            rect: space.cell_rect(&CellPath::ROOT),
            kind: NodeKind::Leaf(Vec::new()),
        }];
        let mut stack = vec![(0usize, (0..sites.len()).collect::<Vec<usize>>())];
        while let Some((idx, members)) = stack.pop() {
            let path = nodes[idx].path;
            let level = path.level();
            // The root always splits so every leaf path is non-empty.
            let split = level == 0 || (members.len() > k_max && level < MAX_DEPTH);
            if !split {
                nodes[idx].kind = NodeKind::Leaf(members);
                continue;
            }
            let shift = MAX_DEPTH - level - 1;
            let mut parts: [Vec<usize>; 4] = Default::default();
            for i in members {
                let (ix, iy) = fine[i];
                let digit = 2 * ((iy >> shift) & 1) + ((ix >> shift) & 1);
                parts[digit as usize].push(i);
            }
            let mut children = [0usize; 4];
            for (digit, part) in parts.into_iter().enumerate() {
                let child = path.child(digit as u8);
                children[digit] = nodes.len();
                nodes.push(Node {
                    path: child,
                    rect: space.cell_rect(&child),
                    kind: NodeKind::Leaf(Vec::new()),
                });
                stack.push((children[digit], part));
            }
            nodes[idx].kind = NodeKind::Inner(children);
        }
        Self {
            nodes,
            slack: 1e-9 * space.width,
        }
    }

    /// Best-first k-nearest search, ordered by (distance, id).
    fn nearest(&self, sites: &[(Point, &str)], p: Point, k: usize, exclude: Option<usize>) -> Vec<usize> {
        #[derive(PartialEq)]
        struct Pending(f64, usize);
        impl Eq for Pending {}
        impl PartialOrd for Pending {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Pending {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0)
            }
        }

        if k == 0 {
            return Vec::new();
        }
        let rank = |a: &(f64, usize), b: &(f64, usize)| rank_order((a.0, sites[a.1].1), (b.0, sites[b.1].1));
        // Candidates are buffered and cut back to k whenever the buffer
        // doubles; `bound` is never below the true k-th distance.
        let mut found: Vec<(f64, usize)> = Vec::with_capacity(2 * k);
        let mut bound = f64::INFINITY;
        let mut frontier = BinaryHeap::from([Pending(0.0, 0)]);
        while let Some(Pending(dist, idx)) = frontier.pop() {
            if dist > bound {
                break;
            }
            match &self.nodes[idx].kind {
                NodeKind::Inner(children) => {
                    for &c in children {
                        let d = (self.nodes[c].rect.min_distance(p) - self.slack).max(0.0);
                        if d <= bound {
                            frontier.push(Pending(d, c));
                        }
                    }
                }
                NodeKind::Leaf(members) => {
                    for &i in members {
                        if Some(i) == exclude {
                            continue;
                        }
                        let d = euclidean(sites[i].0, p);
                        if d > bound {
                            continue;
                        }
                        found.push((d, i));
                        if found.len() == k && bound.is_infinite() {
                            bound = found.iter().map(|f| f.0).fold(0.0, f64::max);
                        } else if found.len() == 2 * k {
                            found.select_nth_unstable_by(k - 1, rank);
                            found.truncate(k);
                            bound = found[k - 1].0;
                        }
                    }
                }
            }
        }
        found.sort_unstable_by(rank);
        found.truncate(k);
        found.into_iter().map(|f| f.1).collect()
    }
}
