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

//! Public system parameters and the on-disk encrypted index format.
//!
//! ```text
//! header:  "RSKI" | version u16 | lambda u16 | d u8 | hash_id u8 | cipher_id u8 | 0u8
//!          | W f64 | origin.x f64 | origin.y f64 | k_max u32 | len u32
//!          | body_len u32 | nonce_len u16 | tag_len u16 | count u64
//! records: count x (token | nonce | body | tag), all fixed width
//! ```
//!
//! All integers are little-endian.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Point, Space};
use crate::wire::{Ciphertext, RecordLayout, Token};

pub const INDEX_MAGIC: [u8; 4] = *b"RSKI";
pub const INDEX_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 24 + 4 + 4 + 4 + 2 + 2 + 8;

pub const HASH_HMAC_SHA256: &str = "HMAC-SHA256";
pub const CIPHER_AES_GCM: &str = "AES-GCM";

#[derive(Debug, Error)]
pub enum IndexFileError {
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(msg: impl Into<String>) -> IndexFileError {
    IndexFileError::Corrupt(msg.into())
}

/// Parameters published alongside the index; enough for a key holder to
/// derive trapdoors without any other knowledge of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Maximum tree height over all keywords.
    pub d: u8,
    /// Side of the bounding square.
    pub width: f64,
    /// Bottom-left corner of the bounding square.
    pub origin: Point,
    /// Security parameter in bits.
    pub lambda: u16,
    /// Leaf capacity the index was built with.
    pub k_max: u32,
    pub hash: String,
    pub cipher: String,
}

impl SystemParams {
    pub fn space(&self) -> Space {
        Space::new(self.origin, self.width)
    }

    pub fn token_len(&self) -> usize {
        usize::from(self.lambda / 8)
    }

    /// Side of a finest-level cell, `W * 2^-d`.
    pub fn finest_width(&self) -> f64 {
        self.width / (1u64 << self.d) as f64
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(path, text)
    }

    pub fn load_json(path: impl AsRef<Path>) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Everything stored in an index file.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFile {
    pub params: SystemParams,
    /// Uniform padded plaintext length.
    pub value_len: u32,
    pub body_len: u32,
    pub nonce_len: u16,
    pub tag_len: u16,
    pub records: Vec<(Token, Ciphertext)>,
}

fn hash_id(name: &str) -> Result<u8, IndexFileError> {
    match name {
        HASH_HMAC_SHA256 => Ok(1),
        other => Err(corrupt(format!("unknown hash {other}"))),
    }
}

fn cipher_id(name: &str) -> Result<u8, IndexFileError> {
    match name {
        CIPHER_AES_GCM => Ok(1),
        other => Err(corrupt(format!("unknown cipher {other}"))),
    }
}

impl IndexFile {
    pub fn layout(&self) -> RecordLayout {
        RecordLayout {
            token_len: self.params.token_len(),
            tag_len: usize::from(self.tag_len),
        }
    }

    pub fn record_len(&self) -> usize {
        self.params.token_len() + usize::from(self.nonce_len) + self.body_len as usize + usize::from(self.tag_len)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), IndexFileError> {
        let p = &self.params;
        let mut h = Vec::with_capacity(HEADER_LEN);
        h.extend_from_slice(&INDEX_MAGIC);
        h.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        h.extend_from_slice(&p.lambda.to_le_bytes());
        h.push(p.d);
        h.push(hash_id(&p.hash)?);
        h.push(cipher_id(&p.cipher)?);
        h.push(0);
        h.extend_from_slice(&p.width.to_le_bytes());
        h.extend_from_slice(&p.origin.x.to_le_bytes());
        h.extend_from_slice(&p.origin.y.to_le_bytes());
        h.extend_from_slice(&p.k_max.to_le_bytes());
        h.extend_from_slice(&self.value_len.to_le_bytes());
        h.extend_from_slice(&self.body_len.to_le_bytes());
        h.extend_from_slice(&self.nonce_len.to_le_bytes());
        h.extend_from_slice(&self.tag_len.to_le_bytes());
        h.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        debug_assert_eq!(h.len(), HEADER_LEN);
        w.write_all(&h)?;
        for (token, ct) in &self.records {
            if token.len() != p.token_len()
                || ct.nonce.len() != usize::from(self.nonce_len)
                || ct.body.len() != self.body_len as usize
                || ct.tag.len() != usize::from(self.tag_len)
            {
                return Err(corrupt("record width differs from header"));
            }
            w.write_all(&token.0)?;
            w.write_all(&ct.nonce)?;
            w.write_all(&ct.body)?;
            w.write_all(&ct.tag)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self, IndexFileError> {
        let mut h = [0u8; HEADER_LEN];
        r.read_exact(&mut h).map_err(|_| corrupt("truncated header"))?;
        if h[..4] != INDEX_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([h[i], h[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().expect("4 bytes"));
        let f64_at = |i: usize| f64::from_le_bytes(h[i..i + 8].try_into().expect("8 bytes"));
        let version = u16_at(4);
        if version != INDEX_VERSION {
            return Err(IndexFileError::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let lambda = u16_at(6);
        let d = h[8];
        let hash = match h[9] {
            1 => HASH_HMAC_SHA256.to_string(),
            other => return Err(corrupt(format!("unknown hash id {other}"))),
        };
        let cipher = match h[10] {
            1 => CIPHER_AES_GCM.to_string(),
            other => return Err(corrupt(format!("unknown cipher id {other}"))),
        };
        let width = f64_at(12);
        let origin = Point::new(f64_at(20), f64_at(28));
        let k_max = u32_at(36);
        let value_len = u32_at(40);
        let body_len = u32_at(44);
        let nonce_len = u16_at(48);
        let tag_len = u16_at(50);
        let count = u64::from_le_bytes(h[52..60].try_into().expect("8 bytes"));
        if lambda < 128 || lambda % 8 != 0 || d == 0 || !(width.is_finite() && width > 0.0) || !origin.is_finite() {
            return Err(corrupt("invalid system parameters"));
        }
        let params = SystemParams {
            d,
            width,
            origin,
            lambda,
            k_max,
            hash,
            cipher,
        };
        let mut file = IndexFile {
            params,
            value_len,
            body_len,
            nonce_len,
            tag_len,
            records: Vec::new(),
        };
        let record_len = file.record_len();
        let token_len = file.params.token_len();
        let mut buf = vec![0u8; record_len];
        let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
        for i in 0..count {
            r.read_exact(&mut buf)
                .map_err(|_| corrupt(format!("truncated at record {i} of {count}")))?;
            let (token, rest) = buf.split_at(token_len);
            let (nonce, rest) = rest.split_at(usize::from(nonce_len));
            let (body, tag) = rest.split_at(body_len as usize);
            records.push((
                Token(token.to_vec()),
                Ciphertext {
                    nonce: nonce.to_vec(),
                    body: body.to_vec(),
                    tag: tag.to_vec(),
                },
            ));
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(corrupt("trailing bytes after last record"));
        }
        file.records = records;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexFileError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexFileError> {
        let mut r = BufReader::new(fs::File::open(path)?);
        Self::read(&mut r)
    }
}
