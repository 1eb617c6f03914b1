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

//! Client/cloud wire formats.
//!
//! Every message travels in a frame:
//!
//! ```text
//! "RSKQ" | version u8 | msg_type u8 | payload_len u32 | payload
//! ```
//!
//! Integers are little-endian. Requests use msg_type 1 (query), 2 (insert),
//! 3 (delete) and 4 (stats); responses set the high bit (`0x81`..`0x84`),
//! and `0xFF` carries a protocol error message.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAME_MAGIC: [u8; 4] = *b"RSKQ";
pub const PROTOCOL_VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 10;
/// Default upper bound on a frame payload.
pub const DEFAULT_MAX_FRAME: usize = 256 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("frame of {len} bytes exceeds limit of {limit}")]
    Oversized { len: usize, limit: usize },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn malformed(msg: impl Into<String>) -> WireError {
    WireError::Malformed(msg.into())
}

/// Keyed-hash output identifying one encrypted entry.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token(pub Vec<u8>);

impl Token {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token(")?;
        for b in self.0.iter().take(6) {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Opaque authenticated ciphertext: nonce, encrypted body and tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub nonce: Vec<u8>,
    pub body: Vec<u8>,
    pub tag: Vec<u8>,
}

impl Ciphertext {
    pub fn byte_len(&self) -> usize {
        self.nonce.len() + self.body.len() + self.tag.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Range or nearest-neighbor trapdoor.
    Single,
    KPhase1,
    KPhase2,
    /// Supplementary round `theta`.
    Supplementary(u16),
}

impl Phase {
    fn code(self) -> (u8, u16) {
        match self {
            Phase::Single => (0, 0),
            Phase::KPhase1 => (1, 0),
            Phase::KPhase2 => (2, 0),
            Phase::Supplementary(theta) => (3, theta),
        }
    }

    fn from_code(code: u8, theta: u16) -> Result<Self, WireError> {
        Ok(match code {
            0 => Phase::Single,
            1 => Phase::KPhase1,
            2 => Phase::KPhase2,
            3 => Phase::Supplementary(theta),
            other => return Err(malformed(format!("unknown phase {other}"))),
        })
    }
}

/// What the cloud sees of a query: a correlation id, a phase tag and tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trapdoor {
    pub query_id: [u8; 16],
    pub phase: Phase,
    pub tokens: Vec<Token>,
}

impl Trapdoor {
    /// `query_id (16) | phase u8 | theta u16 | count u32 | tokens`.
    pub fn encode(&self) -> Vec<u8> {
        let (code, theta) = self.phase.code();
        let token_bytes: usize = self.tokens.iter().map(Token::len).sum();
        let mut out = Vec::with_capacity(23 + token_bytes);
        out.extend_from_slice(&self.query_id);
        out.push(code);
        out.extend_from_slice(&theta.to_le_bytes());
        out.extend_from_slice(&(self.tokens.len() as u32).to_le_bytes());
        for t in &self.tokens {
            out.extend_from_slice(&t.0);
        }
        out
    }

    /// Decodes a trapdoor whose tokens are `token_len` bytes each.
    pub fn decode(payload: &[u8], token_len: usize) -> Result<Self, WireError> {
        let mut r = Cursor::new(payload);
        let query_id: [u8; 16] = r.take(16)?.try_into().expect("16 bytes");
        let code = r.u8()?;
        let theta = r.u16()?;
        let phase = Phase::from_code(code, theta)?;
        let count = r.u32()? as usize;
        if token_len == 0 || r.remaining() != count.saturating_mul(token_len) {
            return Err(malformed(format!(
                "{} token bytes for {count} tokens of {token_len} bytes",
                r.remaining()
            )));
        }
        let tokens = (0..count)
            .map(|_| r.take(token_len).map(|b| Token(b.to_vec())))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            query_id,
            phase,
            tokens,
        })
    }
}

/// Fixed sizes needed to parse record lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordLayout {
    pub token_len: usize,
    pub tag_len: usize,
}

/// `token | nonce_len u32 | nonce | body_len u32 | body | tag`.
pub fn put_record(out: &mut Vec<u8>, token: &Token, ct: &Ciphertext) {
    out.extend_from_slice(&token.0);
    out.extend_from_slice(&(ct.nonce.len() as u32).to_le_bytes());
    out.extend_from_slice(&ct.nonce);
    out.extend_from_slice(&(ct.body.len() as u32).to_le_bytes());
    out.extend_from_slice(&ct.body);
    out.extend_from_slice(&ct.tag);
}

fn read_records(r: &mut Cursor<'_>, layout: RecordLayout) -> Result<Vec<(Token, Ciphertext)>, WireError> {
    let count = r.u32()? as usize;
    let min_record = layout.token_len + 8 + layout.tag_len;
    if count > r.remaining() / min_record.max(1) {
        return Err(malformed("record count exceeds payload"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let token = Token(r.take(layout.token_len)?.to_vec());
        let nonce_len = r.u32()? as usize;
        let nonce = r.take(nonce_len)?.to_vec();
        let body_len = r.u32()? as usize;
        let body = r.take(body_len)?.to_vec();
        let tag = r.take(layout.tag_len)?.to_vec();
        out.push((token, Ciphertext { nonce, body, tag }));
    }
    Ok(out)
}

/// Cloud answer to one trapdoor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResponse {
    pub query_id: [u8; 16],
    pub records: Vec<(Token, Ciphertext)>,
}

impl QueryResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.records.len() * 64);
        out.extend_from_slice(&self.query_id);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (t, c) in &self.records {
            put_record(&mut out, t, c);
        }
        out
    }

    pub fn decode(payload: &[u8], layout: RecordLayout) -> Result<Self, WireError> {
        let mut r = Cursor::new(payload);
        let query_id: [u8; 16] = r.take(16)?.try_into().expect("16 bytes");
        let records = read_records(&mut r, layout)?;
        r.finish()?;
        Ok(Self { query_id, records })
    }
}

/// Replacement or new entries pushed by the data owner.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UpdateBatch {
    pub records: Vec<(Token, Ciphertext)>,
}

impl UpdateBatch {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (t, c) in &self.records {
            put_record(&mut out, t, c);
        }
        out
    }

    pub fn decode(payload: &[u8], layout: RecordLayout) -> Result<Self, WireError> {
        let mut r = Cursor::new(payload);
        let records = read_records(&mut r, layout)?;
        r.finish()?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateAck {
    /// Records written, including replacements.
    pub applied: u32,
    /// Entry count after the update.
    pub entries: u64,
}

impl UpdateAck {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12);
        out.extend_from_slice(&self.applied.to_le_bytes());
        out.extend_from_slice(&self.entries.to_le_bytes());
        out
    }

    pub fn decode(payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Cursor::new(payload);
        let ack = Self {
            applied: r.u32()?,
            entries: r.u64()?,
        };
        r.finish()?;
        Ok(ack)
    }
}

/// Counters reported by the stats message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CloudStats {
    pub entries: u64,
    pub queries: u64,
    pub tokens: u64,
    pub hits: u64,
    pub misses: u64,
    pub updates: u64,
}

impl CloudStats {
    pub fn encode(&self) -> Vec<u8> {
        [self.entries, self.queries, self.tokens, self.hits, self.misses, self.updates]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    pub fn decode(payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Cursor::new(payload);
        let s = Self {
            entries: r.u64()?,
            queries: r.u64()?,
            tokens: r.u64()?,
            hits: r.u64()?,
            misses: r.u64()?,
            updates: r.u64()?,
        };
        r.finish()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Query = 1,
    Insert = 2,
    Delete = 3,
    Stats = 4,
    QueryReply = 0x81,
    InsertReply = 0x82,
    DeleteReply = 0x83,
    StatsReply = 0x84,
    Error = 0xFF,
}

impl MsgType {
    pub fn reply(self) -> MsgType {
        match self {
            MsgType::Query => MsgType::QueryReply,
            MsgType::Insert => MsgType::InsertReply,
            MsgType::Delete => MsgType::DeleteReply,
            MsgType::Stats => MsgType::StatsReply,
            other => other,
        }
    }
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(v: u8) -> Result<Self, WireError> {
        Ok(match v {
            1 => MsgType::Query,
            2 => MsgType::Insert,
            3 => MsgType::Delete,
            4 => MsgType::Stats,
            0x81 => MsgType::QueryReply,
            0x82 => MsgType::InsertReply,
            0x83 => MsgType::DeleteReply,
            0x84 => MsgType::StatsReply,
            0xFF => MsgType::Error,
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    pub fn error(msg: impl fmt::Display) -> Self {
        Self::new(MsgType::Error, msg.to_string().into_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.push(PROTOCOL_VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.to_bytes())?;
        w.flush()
    }

    /// Reads one frame; `Ok(None)` on clean end of stream.
    pub fn read_from<R: Read>(r: &mut R, max_payload: usize) -> Result<Option<Self>, WireError> {
        let mut header = [0u8; FRAME_HEADER_LEN];
        match r.read_exact(&mut header[..1]) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        r.read_exact(&mut header[1..])?;
        let (msg_type, len) = Self::parse_header(&header, max_payload)?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Some(Self { msg_type, payload }))
    }

    pub fn from_bytes(bytes: &[u8], max_payload: usize) -> Result<Self, WireError> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(malformed("short frame"));
        }
        let header: [u8; FRAME_HEADER_LEN] = bytes[..FRAME_HEADER_LEN].try_into().expect("header");
        let (msg_type, len) = Self::parse_header(&header, max_payload)?;
        let payload = &bytes[FRAME_HEADER_LEN..];
        if payload.len() != len {
            return Err(malformed("frame length mismatch"));
        }
        Ok(Self {
            msg_type,
            payload: payload.to_vec(),
        })
    }

    fn parse_header(header: &[u8; FRAME_HEADER_LEN], max_payload: usize) -> Result<(MsgType, usize), WireError> {
        if header[..4] != FRAME_MAGIC {
            return Err(WireError::BadMagic);
        }
        if header[4] != PROTOCOL_VERSION {
            return Err(WireError::Version(header[4]));
        }
        let msg_type = MsgType::try_from(header[5])?;
        let len = u32::from_le_bytes(header[6..10].try_into().expect("4 bytes")) as usize;
        if len > max_payload {
            return Err(WireError::Oversized {
                len,
                limit: max_payload,
            });
        }
        Ok((msg_type, len))
    }

    /// Turns an error frame into `WireError::Remote`.
    pub fn expect(self, want: MsgType) -> Result<Vec<u8>, WireError> {
        match self.msg_type {
            t if t == want => Ok(self.payload),
            MsgType::Error => Err(WireError::Remote(String::from_utf8_lossy(&self.payload).into_owned())),
            other => Err(malformed(format!("expected {want:?}, got {other:?}"))),
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn remaining(&self) -> usize {
        self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(malformed("payload truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(malformed(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(b: u8) -> Token {
        Token(vec![b; 16])
    }

    #[test]
    fn trapdoor_layout_is_byte_exact() {
        let t = Trapdoor {
            query_id: [7; 16],
            phase: Phase::Supplementary(3),
            tokens: vec![token(1), token(2)],
        };
        let bytes = t.encode();
        assert_eq!(bytes.len(), 16 + 1 + 2 + 4 + 32);
        assert_eq!(&bytes[16..23], &[3, 3, 0, 2, 0, 0, 0]);
        assert_eq!(Trapdoor::decode(&bytes, 16).unwrap(), t);
        assert!(Trapdoor::decode(&bytes, 15).is_err());
        assert!(Trapdoor::decode(&bytes[..30], 16).is_err());
    }

    #[test]
    fn frame_header_layout() {
        let f = Frame::new(MsgType::Stats, vec![]);
        assert_eq!(f.to_bytes(), b"RSKQ\x01\x04\x00\x00\x00\x00");
        let f = Frame::new(MsgType::Query, vec![9; 5]);
        let bytes = f.to_bytes();
        assert_eq!(Frame::from_bytes(&bytes, 1024).unwrap(), f);
        assert_eq!(Frame::read_from(&mut bytes.as_slice(), 1024).unwrap(), Some(f));
        assert!(matches!(Frame::from_bytes(&bytes, 4), Err(WireError::Oversized { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Frame::from_bytes(&bad, 1024), Err(WireError::BadMagic)));
        assert_eq!(Frame::read_from(&mut [].as_slice(), 1024).unwrap(), None);
    }

    #[test]
    fn response_and_update_round_trip() {
        let ct = Ciphertext {
            nonce: vec![1; 12],
            body: vec![2; 40],
            tag: vec![3; 16],
        };
        let layout = RecordLayout {
            token_len: 16,
            tag_len: 16,
        };
        let resp = QueryResponse {
            query_id: [5; 16],
            records: vec![(token(4), ct.clone()), (token(6), ct.clone())],
        };
        assert_eq!(QueryResponse::decode(&resp.encode(), layout).unwrap(), resp);
        let batch = UpdateBatch {
            records: vec![(token(8), ct)],
        };
        assert_eq!(UpdateBatch::decode(&batch.encode(), layout).unwrap(), batch);
        let stats = CloudStats {
            entries: 1,
            queries: 2,
            tokens: 3,
            hits: 4,
            misses: 5,
            updates: 6,
        };
        assert_eq!(CloudStats::decode(&stats.encode()).unwrap(), stats);
    }

    #[test]
    fn error_frames_surface_as_remote_errors() {
        let err = Frame::error("boom").expect(MsgType::QueryReply).unwrap_err();
        assert!(matches!(err, WireError::Remote(ref m) if m == "boom"));
    }
}
