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

//! Keyed hash, authenticated encryption with uniform-length padding, and
//! key management.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use aes_gcm::aead::{AeadInOut, KeyInit};
use aes_gcm::{Aes128Gcm, Aes256Gcm, Nonce, Tag};
use hmac::{Hmac, Mac};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use thiserror::Error;

use risk_core::wire::{Ciphertext, Token};

pub const MIN_LAMBDA: u16 = 128;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
const PAD_PREFIX: usize = 4;
const KEY_MAGIC: [u8; 4] = *b"RSKK";
const KEY_FILE_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("security parameter {0} bits is below the {MIN_LAMBDA}-bit minimum")]
    WeakParameter(u16),
    #[error("security parameter {0} bits is not supported (use 128 or 256)")]
    UnsupportedParameter(u16),
    #[error("value of {len} bytes exceeds the padded length {max}")]
    ValueTooLong { len: usize, max: usize },
    #[error("ciphertext failed authentication")]
    AuthenticationFailure,
    #[error("malformed padding")]
    PaddingError,
    #[error("bad key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The data owner's secrets: `sk_h` keys the token hash, `sk_e` the cipher.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKeys {
    lambda: u16,
    sk_h: Vec<u8>,
    sk_e: Vec<u8>,
}

impl fmt::Debug for SecretKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKeys").field("lambda", &self.lambda).finish_non_exhaustive()
    }
}

fn check_lambda(lambda: u16) -> Result<(), CryptoError> {
    match lambda {
        l if l < MIN_LAMBDA => Err(CryptoError::WeakParameter(l)),
        128 | 256 => Ok(()),
        l => Err(CryptoError::UnsupportedParameter(l)),
    }
}

/// Samples fresh keys. A seed makes the keys reproducible and is meant for
/// tests only.
pub fn setup(lambda: u16, seed: Option<u64>) -> Result<SecretKeys, CryptoError> {
    check_lambda(lambda)?;
    let n = usize::from(lambda / 8);
    let mut sk_h = vec![0u8; n];
    let mut sk_e = vec![0u8; n];
    match seed {
        Some(s) => {
            let mut rng = ChaCha20Rng::seed_from_u64(s);
            rng.fill_bytes(&mut sk_h);
            rng.fill_bytes(&mut sk_e);
        }
        None => {
            let mut rng = rand::rng();
            rng.fill_bytes(&mut sk_h);
            rng.fill_bytes(&mut sk_e);
        }
    }
    Ok(SecretKeys { lambda, sk_h, sk_e })
}

impl SecretKeys {
    pub fn lambda(&self) -> u16 {
        self.lambda
    }

    pub fn token_len(&self) -> usize {
        usize::from(self.lambda / 8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 2 * self.sk_h.len());
        out.extend_from_slice(&KEY_MAGIC);
        out.push(KEY_FILE_VERSION);
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.sk_h);
        out.extend_from_slice(&self.sk_e);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bad = |m: &str| CryptoError::KeyFile(m.to_string());
        if bytes.len() < 7 || bytes[..4] != KEY_MAGIC {
            return Err(bad("missing magic"));
        }
        if bytes[4] != KEY_FILE_VERSION {
            return Err(bad("unknown version"));
        }
        let lambda = u16::from_le_bytes([bytes[5], bytes[6]]);
        check_lambda(lambda)?;
        let n = usize::from(lambda / 8);
        if bytes.len() != 7 + 2 * n {
            return Err(bad("wrong length"));
        }
        Ok(Self {
            lambda,
            sk_h: bytes[7..7 + n].to_vec(),
            sk_e: bytes[7 + n..].to_vec(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CryptoError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CryptoError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// HMAC-SHA256 under `sk_h`, truncated to lambda bits.
pub fn prf_token(keys: &SecretKeys, key_bytes: &[u8]) -> Token {
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&keys.sk_h).expect("HMAC takes any key length");
    mac.update(key_bytes);
    let digest = mac.finalize().into_bytes();
    Token(digest[..keys.token_len()].to_vec())
}

/// 4-byte big-endian length, the plaintext, then zeros up to `len`.
pub fn pad(plaintext: &[u8], len: usize) -> Result<Vec<u8>, CryptoError> {
    if plaintext.len() > len || plaintext.len() > u32::MAX as usize {
        return Err(CryptoError::ValueTooLong {
            len: plaintext.len(),
            max: len,
        });
    }
    let mut out = Vec::with_capacity(PAD_PREFIX + len);
    out.extend_from_slice(&(plaintext.len() as u32).to_be_bytes());
    out.extend_from_slice(plaintext);
    out.resize(PAD_PREFIX + len, 0);
    Ok(out)
}

pub fn unpad(padded: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if padded.len() < PAD_PREFIX {
        return Err(CryptoError::PaddingError);
    }
    let n = u32::from_be_bytes(padded[..PAD_PREFIX].try_into().expect("4 bytes")) as usize;
    let rest = &padded[PAD_PREFIX..];
    if n > rest.len() || rest[n..].iter().any(|&b| b != 0) {
        return Err(CryptoError::PaddingError);
    }
    Ok(rest[..n].to_vec())
}

/// Body length of every ciphertext produced for padded length `len`.
pub fn body_len(len: usize) -> usize {
    PAD_PREFIX + len
}

/// Encrypts `buf` in place and returns the tag.
fn seal(keys: &SecretKeys, nonce: &[u8; NONCE_LEN], buf: &mut [u8]) -> Vec<u8> {
    let nonce = Nonce::from(*nonce);
    let tag = match keys.lambda {
        128 => Aes128Gcm::new_from_slice(&keys.sk_e)
            .expect("key length")
            .encrypt_inout_detached(&nonce, &[], buf.into()),
        _ => Aes256Gcm::new_from_slice(&keys.sk_e)
            .expect("key length")
            .encrypt_inout_detached(&nonce, &[], buf.into()),
    };
    tag.expect("in-memory encryption cannot fail").to_vec()
}

fn open(keys: &SecretKeys, nonce: &[u8; NONCE_LEN], buf: &mut [u8], tag: &[u8]) -> Result<(), CryptoError> {
    let nonce = Nonce::from(*nonce);
    let tag = Tag::try_from(tag).map_err(|_| CryptoError::AuthenticationFailure)?;
    let out = match keys.lambda {
        128 => Aes128Gcm::new_from_slice(&keys.sk_e)
            .expect("key length")
            .decrypt_inout_detached(&nonce, &[], buf.into(), &tag),
        _ => Aes256Gcm::new_from_slice(&keys.sk_e)
            .expect("key length")
            .decrypt_inout_detached(&nonce, &[], buf.into(), &tag),
    };
    out.map_err(|_| CryptoError::AuthenticationFailure)
}

/// Pads `plaintext` to `len` and encrypts it under a fresh random nonce.
pub fn encrypt_value(keys: &SecretKeys, plaintext: &[u8], len: usize) -> Result<Ciphertext, CryptoError> {
    let mut body = pad(plaintext, len)?;
    let mut nonce = [0u8; NONCE_LEN];
    rand::rng().fill(&mut nonce);
    let tag = seal(keys, &nonce, &mut body);
    Ok(Ciphertext {
        nonce: nonce.to_vec(),
        body,
        tag,
    })
}

pub fn decrypt_value(keys: &SecretKeys, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let nonce: [u8; NONCE_LEN] = ct
        .nonce
        .as_slice()
        .try_into()
        .map_err(|_| CryptoError::AuthenticationFailure)?;
    if ct.tag.len() != TAG_LEN {
        return Err(CryptoError::AuthenticationFailure);
    }
    let mut buf = ct.body.clone();
    open(keys, &nonce, &mut buf, &ct.tag)?;
    unpad(&buf)
}
