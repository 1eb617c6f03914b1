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

//! Canonical binary encodings of entry keys and values.
//!
//! All integers are little-endian. A value is
//! `key block | delta block | delta_k block`, where the key block is
//! `u32 len(keyword) | keyword | u32 len(path) | path digits (ASCII)` and
//! each object block is `u32 count` followed by objects encoded as
//! `u32 len(id) | id | f64 x | f64 y | u32 count | (u32 len | keyword)*`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cell::CellPath;
use crate::geo::{is_valid_keyword, GeoObject, Point};
use crate::kqtree::PlainEntry;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("value truncated")]
    Truncated,
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in value")]
    Utf8,
    #[error("malformed value: {0}")]
    Malformed(String),
}

/// PRF input for key `keyword || path`: a length-prefixed keyword followed by
/// the path digits, so no keyword/path split is ambiguous.
pub fn key_bytes(keyword: &str, path: &CellPath) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + keyword.len() + path.level() as usize);
    put_bytes(&mut out, keyword.as_bytes());
    out.extend_from_slice(&path.to_ascii());
    out
}

pub fn encode_value(entry: &PlainEntry) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_value_len(entry));
    put_bytes(&mut out, entry.keyword.as_bytes());
    put_bytes(&mut out, &entry.path.to_ascii());
    put_objects(&mut out, &entry.delta);
    put_objects(&mut out, &entry.delta_k);
    out
}

pub fn encoded_value_len(entry: &PlainEntry) -> usize {
    8 + entry.keyword.len()
        + entry.path.level() as usize
        + 8
        + entry.delta.iter().map(encoded_object_len).sum::<usize>()
        + entry.delta_k.iter().map(encoded_object_len).sum::<usize>()
}

pub fn encoded_object_len(o: &GeoObject) -> usize {
    4 + o.id.len() + 16 + 4 + o.psi.iter().map(|w| 4 + w.len()).sum::<usize>()
}

pub fn decode_value(bytes: &[u8]) -> Result<PlainEntry, CodecError> {
    let mut r = Reader { buf: bytes };
    let keyword = r.string()?;
    let path_digits = r.bytes()?;
    let path = std::str::from_utf8(path_digits)
        .map_err(|_| CodecError::Utf8)?
        .parse::<CellPath>()
        .map_err(|e| CodecError::Malformed(e.to_string()))?;
    let delta = r.objects()?;
    let delta_k = r.objects()?;
    if !r.buf.is_empty() {
        return Err(CodecError::TrailingBytes(r.buf.len()));
    }
    Ok(PlainEntry {
        keyword,
        path,
        delta,
        delta_k,
    })
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

fn put_objects(out: &mut Vec<u8>, objects: &[GeoObject]) {
    out.extend_from_slice(&(objects.len() as u32).to_le_bytes());
    for o in objects {
        put_object(out, o);
    }
}

fn put_object(out: &mut Vec<u8>, o: &GeoObject) {
    put_bytes(out, o.id.as_bytes());
    out.extend_from_slice(&o.p.x.to_le_bytes());
    out.extend_from_slice(&o.p.y.to_le_bytes());
    out.extend_from_slice(&(o.psi.len() as u32).to_le_bytes());
    for w in &o.psi {
        put_bytes(out, w.as_bytes());
    }
}

/// The encoding of a single object as it appears inside a value.
pub fn encode_object(o: &GeoObject) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_object_len(o));
    put_object(&mut out, o);
    out
}

/// Assembles a value from already encoded objects. Produces the same bytes
/// as [`encode_value`] on the corresponding entry.
pub fn encode_value_from_parts<'a>(
    keyword: &str,
    path: &CellPath,
    delta: impl ExactSizeIterator<Item = &'a [u8]> + Clone,
    delta_k: impl ExactSizeIterator<Item = &'a [u8]> + Clone,
) -> Vec<u8> {
    let body: usize = delta.clone().map(<[u8]>::len).sum::<usize>() + delta_k.clone().map(<[u8]>::len).sum::<usize>();
    let mut out = Vec::with_capacity(16 + keyword.len() + path.level() as usize + body);
    put_bytes(&mut out, keyword.as_bytes());
    put_bytes(&mut out, &path.to_ascii());
    out.extend_from_slice(&(delta.len() as u32).to_le_bytes());
    delta.for_each(|b| out.extend_from_slice(b));
    out.extend_from_slice(&(delta_k.len() as u32).to_le_bytes());
    delta_k.for_each(|b| out.extend_from_slice(b));
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, CodecError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| CodecError::Utf8)
    }

    fn objects(&mut self) -> Result<Vec<GeoObject>, CodecError> {
        let n = self.u32()? as usize;
        // Each object needs at least 28 bytes; reject absurd counts early.
        if n > self.buf.len() / 28 {
            return Err(CodecError::Truncated);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let id = self.string()?;
            let p = Point::new(self.f64()?, self.f64()?);
            let count = self.u32()? as usize;
            let mut psi = BTreeSet::new();
            for _ in 0..count {
                let w = self.string()?;
                if !is_valid_keyword(&w) {
                    return Err(CodecError::Malformed(format!("bad keyword {w:?}")));
                }
                psi.insert(w);
            }
            if psi.len() != count {
                return Err(CodecError::Malformed("repeated keyword".into()));
            }
            out.push(GeoObject { id, p, psi });
        }
        Ok(out)
    }
}
