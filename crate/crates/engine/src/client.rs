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

//! Query orchestration and client-side refinement.
//!
//! kNN answers are exact: rounds continue until the k-th candidate is
//! strictly closer than a radius within which every matching object is
//! provably already known, or until nothing more can be learned.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use risk_core::codec::decode_value;
use risk_core::cover::cell_clearance;
use risk_core::geo::rank_order;
use risk_core::index_file::SystemParams;
use risk_core::wire::{
    Ciphertext, CloudStats, Frame, MsgType, Phase, QueryResponse, RecordLayout, Token, Trapdoor, UpdateAck,
    UpdateBatch,
};
use risk_core::{euclidean, CellBlock, CellPath, GeoObject, PlainEntry, Point, QueryKind, QuerySpec, ResultSet};

use crate::crypto::{decrypt_value, SecretKeys, TAG_LEN};
use crate::error::{EngineError, Result};
use crate::index::{check_params, entry_token};
use crate::transport::Transport;
use crate::trapdoor::{cell_at, k_phase2_radius, new_query_id, nsk_radius, tokens_for};

/// Relative tolerance absorbing rounding in coordinate translation.
const SLACK_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Trapdoors sent.
    pub rounds: u32,
    pub tokens: u64,
    /// Encrypted entries received.
    pub candidates: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub trapdoor_time: Duration,
    pub cloud_time: Duration,
    /// Decryption and refinement.
    pub refine_time: Duration,
}

impl QueryStats {
    /// Everything the client spends, trapdoors included.
    pub fn client_time(&self) -> Duration {
        self.trapdoor_time + self.refine_time
    }

    pub fn add(&mut self, other: &QueryStats) {
        self.rounds += other.rounds;
        self.tokens += other.tokens;
        self.candidates += other.candidates;
        self.bytes_sent += other.bytes_sent;
        self.bytes_received += other.bytes_received;
        self.trapdoor_time += other.trapdoor_time;
        self.cloud_time += other.cloud_time;
        self.refine_time += other.refine_time;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub result: ResultSet,
    pub stats: QueryStats,
}

/// Range refinement: residents only, exact circle and keyword filter,
/// sorted by id.
pub fn r_query(q: &QuerySpec, candidates: &[PlainEntry]) -> ResultSet {
    let r = q.radius().unwrap_or(0.0);
    let mut seen = HashSet::new();
    let mut objects: Vec<GeoObject> = candidates
        .iter()
        .flat_map(|e| e.delta.iter())
        .filter(|o| euclidean(o.p, q.p) <= r && o.contains_all(&q.psi))
        .filter(|o| seen.insert(o.id.as_str()))
        .cloned()
        .collect();
    objects.sort_by(|a, b| a.id.cmp(&b.id));
    ResultSet { objects, exact: true }
}

/// The `k` best matching objects of residents and neighbor lists.
fn top_k<'a>(q: &QuerySpec, k: usize, entries: impl Iterator<Item = &'a PlainEntry>) -> Vec<GeoObject> {
    let mut seen = HashSet::new();
    let mut ranked: Vec<(f64, &GeoObject)> = entries
        .flat_map(|e| e.delta.iter().chain(e.delta_k.iter()))
        .filter(|o| o.contains_all(&q.psi) && seen.insert(o.id.as_str()))
        .map(|o| (euclidean(o.p, q.p), o))
        .collect();
    ranked.sort_by(|a, b| rank_order((a.0, &a.1.id), (b.0, &b.1.id)));
    ranked.into_iter().take(k).map(|(_, o)| o.clone()).collect()
}

/// Nearest matching object of the candidate pool. `exact` is left false:
/// refinement alone cannot prove coverage.
pub fn n_query(q: &QuerySpec, candidates: &[PlainEntry]) -> ResultSet {
    ResultSet {
        objects: top_k(q, 1, candidates.iter()),
        exact: false,
    }
}

/// The `k` nearest matching objects over both phases' candidates.
pub fn k_query(q: &QuerySpec, phase1: &[PlainEntry], phase2: &[PlainEntry]) -> ResultSet {
    let k = q.k().unwrap_or(1);
    ResultSet {
        objects: top_k(q, k, phase1.iter().chain(phase2.iter())),
        exact: false,
    }
}

pub struct Client<T: Transport> {
    keys: SecretKeys,
    params: SystemParams,
    transport: T,
}

impl<T: Transport> Client<T> {
    pub fn new(keys: SecretKeys, params: SystemParams, transport: T) -> Result<Self> {
        check_params(&params, &keys)?;
        Ok(Self {
            keys,
            params,
            transport,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn keys(&self) -> &SecretKeys {
        &self.keys
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    pub(crate) fn slack(&self) -> f64 {
        let o = self.params.origin;
        SLACK_REL * self.params.width.max(o.x.abs()).max(o.y.abs())
    }

    fn layout(&self) -> RecordLayout {
        RecordLayout {
            token_len: self.params.token_len(),
            tag_len: TAG_LEN,
        }
    }

    fn round_trip(&mut self, request: &Frame, want: MsgType, stats: &mut QueryStats) -> Result<Vec<u8>> {
        let before = self.transport.stats();
        let reply = self.transport.exchange(request);
        let after = self.transport.stats();
        stats.bytes_sent += after.bytes_sent - before.bytes_sent;
        stats.bytes_received += after.bytes_received - before.bytes_received;
        stats.cloud_time += after.cloud_time - before.cloud_time;
        Ok(reply?.expect(want)?)
    }

    /// Sends one trapdoor and returns the encrypted candidates.
    pub fn c_query(&mut self, trapdoor: &Trapdoor, stats: &mut QueryStats) -> Result<Vec<(Token, Ciphertext)>> {
        let request = Frame::new(MsgType::Query, trapdoor.encode());
        let payload = self.round_trip(&request, MsgType::QueryReply, stats)?;
        let resp = QueryResponse::decode(&payload, self.layout())?;
        if resp.query_id != trapdoor.query_id {
            return Err(risk_core::wire::WireError::Malformed("reply for another query".into()).into());
        }
        stats.rounds += 1;
        stats.tokens += trapdoor.tokens.len() as u64;
        stats.candidates += resp.records.len() as u64;
        Ok(resp.records)
    }

    /// Decrypts candidates and checks each one sits under its own token.
    pub fn decrypt_candidates(&self, records: &[(Token, Ciphertext)]) -> Result<Vec<PlainEntry>> {
        let keys = &self.keys;
        let open = |(token, ct): &(Token, Ciphertext)| -> Result<PlainEntry> {
            let entry = decode_value(&decrypt_value(keys, ct)?)?;
            if entry_token(keys, &entry.keyword, &entry.path) != *token {
                return Err(EngineError::TokenMismatch);
            }
            Ok(entry)
        };
        if records.len() < 64 {
            records.iter().map(open).collect()
        } else {
            records.par_iter().map(open).collect()
        }
    }

    pub fn send_update(&mut self, msg: MsgType, records: Vec<(Token, Ciphertext)>) -> Result<UpdateAck> {
        let request = Frame::new(msg, UpdateBatch { records }.encode());
        let payload = self.round_trip(&request, msg.reply(), &mut QueryStats::default())?;
        Ok(UpdateAck::decode(&payload)?)
    }

    pub fn cloud_stats(&mut self) -> Result<CloudStats> {
        let request = Frame::new(MsgType::Stats, Vec::new());
        let payload = self.round_trip(&request, MsgType::StatsReply, &mut QueryStats::default())?;
        Ok(CloudStats::decode(&payload)?)
    }

    pub fn run(&mut self, q: &QuerySpec) -> Result<QueryOutcome> {
        match q.kind {
            QueryKind::Range { .. } => self.run_range(q),
            QueryKind::Knn { .. } => self.run_knn(q),
        }
    }

    /// One round trip; the cover set is complete, so the answer is exact.
    pub fn run_range(&mut self, q: &QuerySpec) -> Result<QueryOutcome> {
        q.validate()?;
        let r = q.radius().ok_or_else(|| invalid("range query expected"))?;
        let mut stats = QueryStats::default();
        let started = Instant::now();
        let p = self.params.space().normalize(q.p);
        let ids = CellBlock::around(p, r + self.slack(), self.params.d, self.params.width)
            .map(|b| b.ids().into_vec())
            .unwrap_or_default();
        let trapdoor = Trapdoor {
            query_id: new_query_id(),
            phase: Phase::Single,
            tokens: tokens_for(&self.keys, &q.psi, &ids, &HashSet::new()),
        };
        stats.trapdoor_time = started.elapsed();
        if trapdoor.tokens.is_empty() {
            return Ok(QueryOutcome {
                result: ResultSet {
                    objects: Vec::new(),
                    exact: true,
                },
                stats,
            });
        }
        let records = self.c_query(&trapdoor, &mut stats)?;
        let started = Instant::now();
        let entries = self.decrypt_candidates(&records)?;
        let result = r_query(q, &entries);
        stats.refine_time = started.elapsed();
        Ok(QueryOutcome { result, stats })
    }

    /// kNN with phase 1, phase 2 and supplementary rounds until exact.
    pub fn run_knn(&mut self, q: &QuerySpec) -> Result<QueryOutcome> {
        q.validate()?;
        let k = q.k().ok_or_else(|| invalid("kNN query expected"))?;
        let keywords: Vec<String> = q.psi.iter().cloned().collect();
        let mut exp = Expansion::new(self, keywords, q.p);
        let first = if k == 1 { Phase::Single } else { Phase::KPhase1 };
        exp.grow(self, 0.0, first)?;
        let schedule = Schedule::new(k, &exp.entries);
        let mut pool = MatchPool::default();
        let mut round = 0u32;
        loop {
            let started = Instant::now();
            pool.absorb(q, &exp.entries);
            let best = pool.top(k);
            let g = exp.guarantee(self);
            exp.stats.refine_time += started.elapsed();
            let done = match best.last() {
                _ if g == f64::INFINITY => true,
                Some(&(dk, _)) if best.len() == k => dk < g,
                _ => false,
            };
            if done || exp.is_full() {
                let objects = best.into_iter().map(|(_, o)| o.clone()).collect();
                return Ok(QueryOutcome {
                    result: ResultSet { objects, exact: true },
                    stats: exp.stats,
                });
            }
            round += 1;
            let (radius, phase) = schedule.step(round, exp.p, &self.params);
            exp.grow(self, radius, phase)?;
        }
    }
}

fn invalid(msg: &str) -> EngineError {
    risk_core::geo::GeoError::InvalidQuery(msg.into()).into()
}

/// Radius schedule after the first phase.
pub(crate) struct Schedule {
    /// Shortest first-phase path; `None` selects the nearest-neighbor ramp.
    min_len: Option<u8>,
}

impl Schedule {
    pub(crate) fn new(k: usize, phase1: &[PlainEntry]) -> Self {
        let min_len = if k > 1 { phase1.iter().map(|e| e.path.level()).min() } else { None };
        Self { min_len }
    }

    fn radius(&self, theta: u32, params: &SystemParams) -> f64 {
        match self.min_len {
            Some(len) => k_phase2_radius(len, theta, params),
            None => nsk_radius(theta, params),
        }
    }

    /// Radius and phase tag of round `round >= 1`. Rounds that could not
    /// reach the square are skipped.
    pub(crate) fn step(&self, round: u32, p: Point, params: &SystemParams) -> (f64, Phase) {
        let mut theta = if self.min_len.is_some() { round - 1 } else { round };
        let w = params.width;
        let outside = (-p.x).max(p.x - w).max(-p.y).max(p.y - w).max(0.0);
        if self.radius(theta, params) < outside {
            let base = self.radius(0, params);
            let need = ((outside - base) / params.finest_width()).ceil().max(0.0);
            theta = theta.max(need.min(f64::from(u32::MAX - 1)) as u32);
        }
        let phase = if self.min_len.is_some() && theta == 0 {
            Phase::KPhase2
        } else {
            Phase::Supplementary(theta.min(u32::from(u16::MAX)) as u16)
        };
        (self.radius(theta, params), phase)
    }
}

/// Matching objects seen so far with their distances.
#[derive(Default)]
pub(crate) struct MatchPool {
    scanned: usize,
    found: HashMap<String, (f64, GeoObject)>,
}

impl MatchPool {
    pub(crate) fn absorb(&mut self, q: &QuerySpec, entries: &[PlainEntry]) {
        for e in &entries[self.scanned..] {
            for o in e.delta.iter().chain(e.delta_k.iter()) {
                if o.contains_all(&q.psi) && !self.found.contains_key(&o.id) {
                    self.found.insert(o.id.clone(), (euclidean(o.p, q.p), o.clone()));
                }
            }
        }
        self.scanned = entries.len();
    }

    pub(crate) fn top(&self, k: usize) -> Vec<(f64, &GeoObject)> {
        let mut ranked: Vec<(f64, &GeoObject)> = self.found.values().map(|(d, o)| (*d, o)).collect();
        ranked.sort_by(|a, b| rank_order((a.0, &a.1.id), (b.0, &b.1.id)));
        ranked.truncate(k);
        ranked
    }
}

/// A growing square of fetched cells around one point, for a fixed keyword
/// set, under a single query id.
pub(crate) struct Expansion {
    pub(crate) query_id: [u8; 16],
    pub(crate) keywords: Vec<String>,
    /// Normalized center.
    pub(crate) p: Point,
    pub(crate) raw_p: Point,
    pub(crate) block: Option<CellBlock>,
    radius: f64,
    /// Identifiers fetched outside the block.
    extra: HashSet<CellPath>,
    pub(crate) entries: Vec<PlainEntry>,
    pub(crate) stats: QueryStats,
}

impl Expansion {
    pub(crate) fn new<T: Transport>(client: &Client<T>, keywords: Vec<String>, raw_p: Point) -> Self {
        Self {
            query_id: new_query_id(),
            keywords,
            p: client.params.space().normalize(raw_p),
            raw_p,
            block: None,
            radius: -1.0,
            extra: HashSet::new(),
            entries: Vec::new(),
            stats: QueryStats::default(),
        }
    }

    pub(crate) fn is_full(&self) -> bool {
        self.block.is_some_and(|b| b.is_full())
    }

    /// Whether identifier `id` was already requested.
    pub(crate) fn issued(&self, id: &CellPath) -> bool {
        self.extra.contains(id) || self.block.is_some_and(|b| b.covers(id))
    }

    /// Widens the fetched square to `radius` and fetches the new cells.
    pub(crate) fn grow<T: Transport>(&mut self, client: &mut Client<T>, radius: f64, phase: Phase) -> Result<usize> {
        if radius <= self.radius {
            return Ok(0);
        }
        let started = Instant::now();
        let params = &client.params;
        let Some(block) = CellBlock::around(self.p, radius, params.d, params.width) else {
            return Ok(0);
        };
        self.radius = radius;
        if Some(block) == self.block {
            return Ok(0);
        }
        let ids: Vec<CellPath> = block
            .ids_excluding(self.block.as_ref())
            .into_iter()
            .filter(|id| !self.extra.contains(id))
            .collect();
        self.block = Some(block);
        let tokens = tokens_for(&client.keys, &self.keywords, &ids, &HashSet::new());
        self.stats.trapdoor_time += started.elapsed();
        self.send(client, tokens, phase)
    }

    /// Fetches specific identifiers not yet requested.
    pub(crate) fn fetch_ids<T: Transport>(
        &mut self,
        client: &mut Client<T>,
        ids: impl IntoIterator<Item = CellPath>,
        phase: Phase,
    ) -> Result<usize> {
        let started = Instant::now();
        let mut fresh = Vec::new();
        for id in ids {
            if !self.issued(&id) && self.extra.insert(id) {
                fresh.push(id);
            }
        }
        let tokens = tokens_for(&client.keys, &self.keywords, &fresh, &HashSet::new());
        self.stats.trapdoor_time += started.elapsed();
        self.send(client, tokens, phase)
    }

    fn send<T: Transport>(&mut self, client: &mut Client<T>, tokens: Vec<Token>, phase: Phase) -> Result<usize> {
        if tokens.is_empty() {
            return Ok(0);
        }
        let trapdoor = Trapdoor {
            query_id: self.query_id,
            phase,
            tokens,
        };
        let records = client.c_query(&trapdoor, &mut self.stats)?;
        let started = Instant::now();
        let fresh = client.decrypt_candidates(&records)?;
        self.stats.refine_time += started.elapsed();
        let n = fresh.len();
        self.entries.extend(fresh);
        Ok(n)
    }

    /// Clearance of the fetched square alone.
    pub(crate) fn block_clearance(&self, width: f64) -> f64 {
        self.block.map_or(0.0, |b| b.clearance(self.p, width))
    }

    /// Radius around the center within which every object carrying any one
    /// of the keywords is known. Slack already subtracted.
    pub(crate) fn guarantee<T: Transport>(&self, client: &Client<T>) -> f64 {
        let params = &client.params;
        let space = params.space();
        let k_max = params.k_max as usize;
        let mut g = self.block_clearance(params.width);
        for e in &self.entries {
            if cell_at(self.p, e.path.level(), params.width) == e.path {
                g = g.max(cell_clearance(&e.path, self.p, params.width));
            }
            let Some(rep) = e.representative(&space) else { continue };
            match e.delta_k.last() {
                Some(last) if e.delta_k.len() >= k_max => {
                    g = g.max(euclidean(rep.p, last.p) - euclidean(self.raw_p, rep.p));
                }
                _ => return f64::INFINITY,
            }
        }
        g - client.slack()
    }
}
