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

//! Token-keyed encrypted entry store.
//!
//! The store never holds a key and never looks inside a ciphertext: a lookup
//! is a pure function of the presented tokens and the current map.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;

use risk_core::index_file::{IndexFile, IndexFileError, SystemParams};
use risk_core::wire::{
    Ciphertext, CloudStats, Frame, MsgType, Phase, QueryResponse, RecordLayout, Token, Trapdoor, UpdateAck,
    UpdateBatch, WireError,
};

/// One served trapdoor as the cloud observed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub query_id: [u8; 16],
    pub phase: Phase,
    pub tokens: Vec<Token>,
    /// Tokens that matched an entry, in response order.
    pub touched: Vec<Token>,
    /// Monotonic nanoseconds since the store was opened.
    pub timestamp_ns: u64,
}

#[derive(Debug, Default)]
pub struct QueryLog {
    records: Vec<QueryRecord>,
}

impl QueryLog {
    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }
}

/// Search-pattern and access-history leakage observed so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeakageReport {
    /// Distinct query ids in first-seen order (hex).
    pub query_ids: Vec<String>,
    /// `search_pattern[i][j]`: queries `i` and `j` presented the same token set.
    pub search_pattern: Vec<Vec<bool>>,
    /// Per trapdoor: query id, touched entry count and timestamp.
    pub history: Vec<HistoryItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryItem {
    pub query_id: String,
    pub touched: usize,
    pub timestamp_ns: u64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed record geometry of an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Widths {
    token: usize,
    nonce: usize,
    body: usize,
    tag: usize,
}

pub struct CloudIndex {
    params: SystemParams,
    value_len: u32,
    widths: Widths,
    map: RwLock<HashMap<Token, Ciphertext>>,
    log: Mutex<QueryLog>,
    opened: Instant,
    queries: AtomicU64,
    tokens: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
    updates: AtomicU64,
}

impl std::fmt::Debug for CloudIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CloudIndex")
            .field("entries", &self.len())
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl CloudIndex {
    pub fn new(file: IndexFile) -> Self {
        let widths = Widths {
            token: file.params.token_len(),
            nonce: usize::from(file.nonce_len),
            body: file.body_len as usize,
            tag: usize::from(file.tag_len),
        };
        let map: HashMap<Token, Ciphertext> = file.records.into_iter().collect();
        Self {
            params: file.params,
            value_len: file.value_len,
            widths,
            map: RwLock::new(map),
            log: Mutex::new(QueryLog::default()),
            opened: Instant::now(),
            queries: AtomicU64::new(0),
            tokens: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            updates: AtomicU64::new(0),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexFileError> {
        Ok(Self::new(IndexFile::load(path)?))
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn layout(&self) -> RecordLayout {
        RecordLayout {
            token_len: self.widths.token,
            tag_len: self.widths.tag,
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidate retrieval: one record per distinct trapdoor token present in
    /// the map, in trapdoor order. Misses are dropped silently.
    pub fn c_query(&self, trapdoor: &Trapdoor) -> Vec<(Token, Ciphertext)> {
        let map = self.map.read();
        let mut seen = HashSet::with_capacity(trapdoor.tokens.len());
        let mut out = Vec::new();
        for t in &trapdoor.tokens {
            if !seen.insert(t) {
                continue;
            }
            if let Some(ct) = map.get(t) {
                out.push((t.clone(), ct.clone()));
            }
        }
        drop(map);
        let hits = out.len() as u64;
        let presented = seen.len() as u64;
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.tokens.fetch_add(presented, Ordering::Relaxed);
        self.hits.fetch_add(hits, Ordering::Relaxed);
        self.misses.fetch_add(presented - hits, Ordering::Relaxed);
        let record = QueryRecord {
            query_id: trapdoor.query_id,
            phase: trapdoor.phase,
            tokens: trapdoor.tokens.clone(),
            touched: out.iter().map(|(t, _)| t.clone()).collect(),
            timestamp_ns: self.opened.elapsed().as_nanos() as u64,
        };
        self.log.lock().records.push(record);
        out
    }

    /// Stores owner-supplied records blindly, replacing existing tokens.
    pub fn apply_updates(&self, batch: UpdateBatch) -> Result<UpdateAck, WireError> {
        for (t, ct) in &batch.records {
            let ok = t.len() == self.widths.token
                && ct.nonce.len() == self.widths.nonce
                && ct.body.len() == self.widths.body
                && ct.tag.len() == self.widths.tag;
            if !ok {
                return Err(WireError::Malformed("update record width differs from index".into()));
            }
        }
        let applied = batch.records.len() as u32;
        let mut map = self.map.write();
        for (t, ct) in batch.records {
            map.insert(t, ct);
        }
        self.updates.fetch_add(1, Ordering::Relaxed);
        Ok(UpdateAck {
            applied,
            entries: map.len() as u64,
        })
    }

    pub fn stats(&self) -> CloudStats {
        CloudStats {
            entries: self.len() as u64,
            queries: self.queries.load(Ordering::Relaxed),
            tokens: self.tokens.load(Ordering::Relaxed),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            updates: self.updates.load(Ordering::Relaxed),
        }
    }

    pub fn query_log(&self) -> Vec<QueryRecord> {
        self.log.lock().records().to_vec()
    }

    pub fn clear_log(&self) {
        self.log.lock().records.clear();
    }

    pub fn leakage_report(&self) -> LeakageReport {
        let log = self.log.lock();
        let mut order: Vec<[u8; 16]> = Vec::new();
        let mut sets: BTreeMap<[u8; 16], HashSet<&Token>> = BTreeMap::new();
        for r in log.records() {
            let set = sets.entry(r.query_id).or_insert_with(|| {
                order.push(r.query_id);
                HashSet::new()
            });
            set.extend(r.tokens.iter());
        }
        let search_pattern = order
            .iter()
            .map(|a| order.iter().map(|b| sets[a] == sets[b]).collect())
            .collect();
        let history = log
            .records()
            .iter()
            .map(|r| HistoryItem {
                query_id: hex(&r.query_id),
                touched: r.touched.len(),
                timestamp_ns: r.timestamp_ns,
            })
            .collect();
        LeakageReport {
            query_ids: order.iter().map(|q| hex(q)).collect(),
            search_pattern,
            history,
        }
    }

    /// Snapshot of the current contents in index-file form.
    pub fn export(&self) -> IndexFile {
        let map = self.map.read();
        let mut records: Vec<(Token, Ciphertext)> = map.iter().map(|(t, c)| (t.clone(), c.clone())).collect();
        records.sort_by(|a, b| a.0.cmp(&b.0));
        IndexFile {
            params: self.params.clone(),
            value_len: self.value_len,
            body_len: self.widths.body as u32,
            nonce_len: self.widths.nonce as u16,
            tag_len: self.widths.tag as u16,
            records,
        }
    }

    /// Current token set.
    pub fn tokens(&self) -> HashSet<Token> {
        self.map.read().keys().cloned().collect()
    }

    /// Serves one request frame.
    pub fn handle_frame(&self, frame: Frame) -> Frame {
        match self.dispatch(&frame) {
            Ok(reply) => reply,
            Err(e) => Frame::error(e),
        }
    }

    fn dispatch(&self, frame: &Frame) -> Result<Frame, WireError> {
        match frame.msg_type {
            MsgType::Query => {
                let trapdoor = Trapdoor::decode(&frame.payload, self.widths.token)?;
                let records = self.c_query(&trapdoor);
                let resp = QueryResponse {
                    query_id: trapdoor.query_id,
                    records,
                };
                Ok(Frame::new(MsgType::QueryReply, resp.encode()))
            }
            MsgType::Insert | MsgType::Delete => {
                let batch = UpdateBatch::decode(&frame.payload, self.layout())?;
                let ack = self.apply_updates(batch)?;
                Ok(Frame::new(frame.msg_type.reply(), ack.encode()))
            }
            MsgType::Stats => {
                if !frame.payload.is_empty() {
                    return Err(WireError::Malformed("stats request carries a payload".into()));
                }
                Ok(Frame::new(MsgType::StatsReply, self.stats().encode()))
            }
            other => Err(WireError::Malformed(format!("{other:?} is not a request"))),
        }
    }
}
