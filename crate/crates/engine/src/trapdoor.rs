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

//! Client-side trapdoor primitives.

use std::collections::HashSet;

use rand::RngCore;

use risk_core::cell::clamped_index;
use risk_core::index_file::SystemParams;
use risk_core::wire::{Phase, Token, Trapdoor};
use risk_core::{cover_identifiers, CellPath, PlainEntry, Point, QueryKind, QuerySpec};

use crate::crypto::SecretKeys;
use crate::error::{EngineError, Result};
use crate::index::entry_token;

pub fn new_query_id() -> [u8; 16] {
    let mut id = [0u8; 16];
    rand::rng().fill_bytes(&mut id);
    id
}

/// Tokens for every (keyword, id) pair, keyword-major, skipping tokens in
/// `sent` and repeats.
pub fn tokens_for<'a>(
    keys: &SecretKeys,
    keywords: impl IntoIterator<Item = &'a String>,
    ids: &[CellPath],
    sent: &HashSet<Token>,
) -> Vec<Token> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for w in keywords {
        for id in ids {
            let t = entry_token(keys, w, id);
            if !sent.contains(&t) && seen.insert(t.clone()) {
                out.push(t);
            }
        }
    }
    out
}

fn check_keywords(q: &QuerySpec) -> Result<()> {
    if q.psi.is_empty() {
        return Err(EngineError::EmptyKeywords);
    }
    Ok(())
}

/// Range trapdoor: the cover set of the query disc crossed with the keywords.
pub fn r_trapdoor(q: &QuerySpec, sp: &SystemParams, keys: &SecretKeys, query_id: [u8; 16]) -> Result<Trapdoor> {
    check_keywords(q)?;
    let r = q.radius().unwrap_or(0.0);
    let ids = cover_identifiers(sp.space().normalize(q.p), r, sp.d, sp.width);
    Ok(Trapdoor {
        query_id,
        phase: Phase::Single,
        tokens: tokens_for(keys, &q.psi, ids.as_slice(), &HashSet::new()),
    })
}

/// Nearest-neighbor trapdoor: the range trapdoor at radius zero.
pub fn n_trapdoor(q: &QuerySpec, sp: &SystemParams, keys: &SecretKeys, query_id: [u8; 16]) -> Result<Trapdoor> {
    let point_query = QuerySpec {
        p: q.p,
        psi: q.psi.clone(),
        kind: QueryKind::Range { r: 0.0 },
    };
    r_trapdoor(&point_query, sp, keys, query_id)
}

/// Radius reaching every neighbor of a level-`path_len` cell, widened by
/// `theta` finest cells.
pub fn k_phase2_radius(path_len: u8, theta: u32, sp: &SystemParams) -> f64 {
    let cell = sp.width / 2f64.powi(i32::from(path_len));
    std::f64::consts::SQRT_2 * cell / 2.0 + (f64::from(theta) + 0.1) * sp.finest_width()
}

/// Radius of supplementary round `theta` when no first-phase candidate
/// exists: grows from zero in steps of one finest cell.
pub fn nsk_radius(theta: u32, sp: &SystemParams) -> f64 {
    f64::from(theta) * sp.finest_width()
}

/// Second-phase (or, for `theta > 0`, supplementary) kNN trapdoor. Every
/// candidate contributes the cover set of its own radius; tokens already in
/// `sent` are dropped.
pub fn k_trapdoor_phase2(
    q: &QuerySpec,
    phase1: &[PlainEntry],
    theta: u32,
    sp: &SystemParams,
    keys: &SecretKeys,
    sent: &HashSet<Token>,
    query_id: [u8; 16],
) -> Result<Trapdoor> {
    check_keywords(q)?;
    if phase1.is_empty() {
        return Err(EngineError::EmptyPhase1);
    }
    let p = sp.space().normalize(q.p);
    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    for cand in phase1 {
        let r = k_phase2_radius(cand.path.level(), theta, sp);
        for id in cover_identifiers(p, r, sp.d, sp.width) {
            if seen.insert(id) {
                ids.push(id);
            }
        }
    }
    Ok(Trapdoor {
        query_id,
        phase: if theta == 0 { Phase::KPhase2 } else { Phase::Supplementary(theta as u16) },
        tokens: tokens_for(keys, &q.psi, &ids, sent),
    })
}

/// Level-`level` cell containing the normalized point, clamped to the square.
pub fn cell_at(p: Point, level: u8, width: f64) -> CellPath {
    CellPath::from_cell(clamped_index(p.x, width, level), clamped_index(p.y, width, level), level)
}
