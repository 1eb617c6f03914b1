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

//! Single-object inserts and deletes without tree splits.
//!
//! For every keyword of the object, the owner widens a square of fetched
//! cells around it until no representative outside the square can have the
//! object among its `k_max` nearest neighbors. Every fetched entry whose
//! neighbor list changes is then re-encrypted and pushed to the cloud.

use std::collections::HashSet;
use std::f64::consts::PI;

use risk_core::codec::{encode_value, encoded_value_len};
use risk_core::geo::rank_order;
use risk_core::kqtree::select_representative;
use risk_core::wire::{MsgType, Phase, UpdateAck};
use risk_core::{euclidean, CellPath, GeoObject, PlainEntry, Point, QuerySpec};

use crate::client::{Client, Expansion, QueryStats, Schedule};
use crate::crypto::encrypt_value;
use crate::error::{EngineError, Result};
use crate::index::entry_token;
use crate::transport::Transport;
use crate::trapdoor::cell_at;

/// Points sampled on the stopping circle.
const CIRCLE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReceipt {
    /// Existing entries rewritten.
    pub reencrypted: usize,
    /// Entries added for cells that had none.
    pub created: Vec<(String, CellPath)>,
    pub ack: UpdateAck,
    pub stats: QueryStats,
}

fn check_inside<T: Transport>(client: &Client<T>, o: &GeoObject) -> Result<Point> {
    let params = client.params();
    let p = params.space().normalize(o.p);
    let w = params.width;
    if !(0.0..=w).contains(&p.x) || !(0.0..=w).contains(&p.y) {
        return Err(EngineError::OutsideSpace);
    }
    Ok(p)
}

/// Fetches every entry of `keyword` whose representative could rank the
/// object `target_id` at `center` among its `k_max` nearest neighbors.
fn explore<T: Transport>(client: &mut Client<T>, keyword: &str, center: Point, target_id: &str) -> Result<Expansion> {
    let k_max = client.params().k_max as usize;
    let mut exp = Expansion::new(client, vec![keyword.to_string()], center);
    exp.grow(client, 0.0, Phase::KPhase1)?;
    let schedule = Schedule::new(k_max, &exp.entries);
    let mut round = 0u32;
    while !exp.is_full() {
        if let Some(group) = whole_group(&exp, client) {
            // Every object is known; fetching each one's chain reaches every
            // non-empty leaf.
            let d = client.params().d;
            let width = client.params().width;
            let space = client.params().space();
            let ids: Vec<CellPath> = group
                .iter()
                .flat_map(|o| cell_at(space.normalize(o.p), d, width).chain().collect::<Vec<_>>())
                .collect();
            exp.fetch_ids(client, ids, Phase::Supplementary(round as u16 + 1))?;
            break;
        }
        if settled(&exp, client, target_id) {
            break;
        }
        round += 1;
        let (radius, phase) = schedule.step(round, exp.p, client.params());
        exp.grow(client, radius, phase)?;
    }
    Ok(exp)
}

/// The whole keyword group, when some entry's neighbor list proves it small.
fn whole_group<T: Transport>(exp: &Expansion, client: &Client<T>) -> Option<Vec<GeoObject>> {
    let space = client.params().space();
    let k_max = client.params().k_max as usize;
    exp.entries.iter().find_map(|e| {
        let rep = e.representative(&space)?;
        (e.delta_k.len() < k_max).then(|| {
            let mut all = e.delta_k.clone();
            all.push(rep.clone());
            all
        })
    })
}

/// True when, on the circle of guaranteed radius around the center, every
/// sample point has more than `k_max` known objects strictly inside a
/// slightly smaller circle. Any representative beyond the circle then has
/// at least `k_max` other objects closer to it than the center.
fn settled<T: Transport>(exp: &Expansion, client: &Client<T>, target_id: &str) -> bool {
    let params = client.params();
    let k_max = params.k_max as usize;
    let g = exp.block_clearance(params.width) - client.slack();
    if g <= 0.0 {
        return false;
    }
    let eps = PI * g / CIRCLE_SAMPLES as f64;
    let mut seen = HashSet::new();
    let known: Vec<Point> = exp
        .entries
        .iter()
        .flat_map(|e| e.delta.iter().chain(e.delta_k.iter()))
        .filter(|o| o.id != target_id && seen.insert(o.id.as_str()))
        .map(|o| o.p)
        .collect();
    if known.len() <= k_max {
        return false;
    }
    let space = params.space();
    let (lo, hi) = (-eps, params.width + eps);
    (0..CIRCLE_SAMPLES).all(|j| {
        let angle = 2.0 * PI * j as f64 / CIRCLE_SAMPLES as f64;
        let b = Point::new(exp.raw_p.x + g * angle.cos(), exp.raw_p.y + g * angle.sin());
        let n = space.normalize(b);
        if n.x < lo || n.x > hi || n.y < lo || n.y > hi {
            return true;
        }
        known.iter().filter(|x| euclidean(b, **x) < g - eps).take(k_max + 1).count() > k_max
    })
}

fn ranks_before(rep: &GeoObject, a: &GeoObject, b: &GeoObject) -> bool {
    rank_order((euclidean(a.p, rep.p), &a.id), (euclidean(b.p, rep.p), &b.id)).is_lt()
}

/// Inserts `o` into a neighbor list of `rep` if it qualifies.
fn merge_neighbor(rep: &GeoObject, list: &[GeoObject], o: &GeoObject, k_max: usize) -> Option<Vec<GeoObject>> {
    let qualifies = list.len() < k_max || list.last().is_some_and(|last| ranks_before(rep, o, last));
    if !qualifies {
        return None;
    }
    let at = list.iter().position(|x| ranks_before(rep, o, x)).unwrap_or(list.len());
    let mut out = list.to_vec();
    out.insert(at, o.clone());
    out.truncate(k_max);
    Some(out)
}

/// The `k_max` nearest neighbors of `center` in the current keyword group,
/// leaving out `exclude` and adding `extra`.
fn fresh_neighbors<T: Transport>(
    client: &mut Client<T>,
    keyword: &str,
    center: &GeoObject,
    exclude: &[&str],
    extra: Option<&GeoObject>,
    stats: &mut QueryStats,
) -> Result<Vec<GeoObject>> {
    let k_max = client.params().k_max as usize;
    let q = QuerySpec::knn(center.p, [keyword], k_max + exclude.len() + 1)?;
    let outcome = client.run_knn(&q)?;
    stats.add(&outcome.stats);
    let mut list: Vec<GeoObject> = outcome
        .result
        .objects
        .into_iter()
        .chain(extra.cloned())
        .filter(|o| o.id != center.id && !exclude.contains(&o.id.as_str()))
        .collect();
    list.sort_by(|a, b| rank_order((euclidean(a.p, center.p), &a.id), (euclidean(b.p, center.p), &b.id)));
    list.truncate(k_max);
    Ok(list)
}

fn contains_id(list: &[GeoObject], id: &str) -> bool {
    list.iter().any(|o| o.id == id)
}

/// Encrypts and sends rewritten entries after checking they fit.
fn commit<T: Transport>(
    client: &mut Client<T>,
    value_len: usize,
    msg: MsgType,
    changed: Vec<PlainEntry>,
    created: Vec<(String, CellPath)>,
    stats: QueryStats,
) -> Result<UpdateReceipt> {
    if let Some(big) = changed.iter().map(encoded_value_len).max().filter(|&n| n > value_len) {
        return Err(EngineError::CapacityExceeded {
            needed: big,
            len: value_len,
        });
    }
    let keys = client.keys().clone();
    let records = changed
        .iter()
        .map(|e| Ok((entry_token(&keys, &e.keyword, &e.path), encrypt_value(&keys, &encode_value(e), value_len)?)))
        .collect::<Result<Vec<_>>>()?;
    let ack = client.send_update(msg, records)?;
    Ok(UpdateReceipt {
        reencrypted: changed.len() - created.len(),
        created,
        ack,
        stats,
    })
}

/// Adds `o` to the index. `value_len` is the index's padded value length.
pub fn insert_object<T: Transport>(client: &mut Client<T>, value_len: usize, o: &GeoObject) -> Result<UpdateReceipt> {
    let p = check_inside(client, o)?;
    let params = client.params().clone();
    let space = params.space();
    let k_max = params.k_max as usize;
    let mut stats = QueryStats::default();
    let mut changed = Vec::new();
    let mut created = Vec::new();
    for w in &o.psi {
        let exp = explore(client, w, o.p, &o.id)?;
        stats.add(&exp.stats);
        if exp.entries.iter().any(|e| contains_id(&e.delta, &o.id) || contains_id(&e.delta_k, &o.id)) {
            return Err(EngineError::DuplicateId(o.id.clone()));
        }
        let mut has_home = false;
        for e in &exp.entries {
            let old_rep = e.representative(&space);
            if cell_at(p, e.path.level(), params.width) == e.path {
                has_home = true;
                let mut delta = e.delta.clone();
                delta.push(o.clone());
                let center = space.cell_rect(&e.path).center();
                let rep = select_representative(&delta, center).expect("non-empty").clone();
                let delta_k = match old_rep {
                    Some(old) if old.id == rep.id => {
                        merge_neighbor(&rep, &e.delta_k, o, k_max).unwrap_or_else(|| e.delta_k.clone())
                    }
                    _ => fresh_neighbors(client, w, &rep, &[], Some(o), &mut stats)?,
                };
                changed.push(PlainEntry {
                    keyword: w.clone(),
                    path: e.path,
                    delta,
                    delta_k,
                });
            } else if let Some(rep) = old_rep {
                if let Some(delta_k) = merge_neighbor(rep, &e.delta_k, o, k_max) {
                    changed.push(PlainEntry {
                        delta_k,
                        ..e.clone()
                    });
                }
            }
        }
        if !has_home {
            let path = cell_at(p, params.d, params.width);
            let delta_k = fresh_neighbors(client, w, o, &[], None, &mut stats)?;
            changed.push(PlainEntry {
                keyword: w.clone(),
                path,
                delta: vec![o.clone()],
                delta_k,
            });
            created.push((w.clone(), path));
        }
    }
    commit(client, value_len, MsgType::Insert, changed, created, stats)
}

/// Removes `o` from the index. The owner supplies the stored object so its
/// home cells can be located.
pub fn delete_object<T: Transport>(client: &mut Client<T>, value_len: usize, o: &GeoObject) -> Result<UpdateReceipt> {
    let p = check_inside(client, o).map_err(|_| EngineError::NotFound(o.id.clone()))?;
    let params = client.params().clone();
    let space = params.space();
    let k_max = params.k_max as usize;
    let mut stats = QueryStats::default();
    let mut changed = Vec::new();
    for w in &o.psi {
        let exp = explore(client, w, o.p, &o.id)?;
        stats.add(&exp.stats);
        let home = exp
            .entries
            .iter()
            .position(|e| cell_at(p, e.path.level(), params.width) == e.path && contains_id(&e.delta, &o.id))
            .ok_or_else(|| EngineError::NotFound(o.id.clone()))?;
        for (i, e) in exp.entries.iter().enumerate() {
            let old_rep = e.representative(&space);
            let listed = contains_id(&e.delta_k, &o.id);
            if i == home {
                let delta: Vec<GeoObject> = e.delta.iter().filter(|x| x.id != o.id).cloned().collect();
                let center = space.cell_rect(&e.path).center();
                let delta_k = match select_representative(&delta, center) {
                    None => Vec::new(),
                    Some(rep) if old_rep.is_some_and(|old| old.id == rep.id) && !listed => e.delta_k.clone(),
                    Some(rep) => {
                        let rep = rep.clone();
                        fresh_neighbors(client, w, &rep, &[&o.id], None, &mut stats)?
                    }
                };
                changed.push(PlainEntry {
                    keyword: w.clone(),
                    path: e.path,
                    delta,
                    delta_k,
                });
            } else if let (Some(rep), true) = (old_rep, listed) {
                let delta_k = if e.delta_k.len() < k_max {
                    e.delta_k.iter().filter(|x| x.id != o.id).cloned().collect()
                } else {
                    let rep = rep.clone();
                    fresh_neighbors(client, w, &rep, &[&o.id], None, &mut stats)?
                };
                changed.push(PlainEntry {
                    delta_k,
                    ..e.clone()
                });
            }
        }
    }
    commit(client, value_len, MsgType::Delete, changed, Vec::new(), stats)
}
