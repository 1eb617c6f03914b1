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

//! Secure index generation: one kQ-tree per keyword, merged, hashed, padded
//! to a single value length and encrypted.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use risk_core::codec::{encode_object, encode_value, encode_value_from_parts, encoded_object_len, key_bytes};
use risk_core::index_file::{IndexFile, SystemParams, CIPHER_AES_GCM, HASH_HMAC_SHA256};
use risk_core::kqtree::{layout_all_trees, LeafLayout, TreeLayout};
use risk_core::wire::{Ciphertext, Token};
use risk_core::{CellPath, Dataset, GeoObject, PlainEntry};

use crate::crypto::{body_len, encrypt_value, prf_token, SecretKeys, NONCE_LEN, TAG_LEN};
use crate::error::{EngineError, Result};

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Extra object slots reserved in every value for later inserts.
    /// Defaults to `k_max`, so a full leaf can double before a rebuild.
    pub slack_objects: Option<usize>,
    /// Seed for the record shuffle; random when absent.
    pub shuffle_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub keywords: usize,
    pub entries: usize,
    pub d: u8,
    /// Longest serialized value before slack.
    pub max_value_len: usize,
    /// Provisioned plaintext length of every value.
    pub value_len: usize,
    pub tree_time: Duration,
    pub encrypt_time: Duration,
}

pub fn entry_token(keys: &SecretKeys, keyword: &str, path: &CellPath) -> Token {
    prf_token(keys, &key_bytes(keyword, path))
}

pub fn encrypt_entry(keys: &SecretKeys, entry: &PlainEntry, len: usize) -> Result<(Token, Ciphertext)> {
    let ct = encrypt_value(keys, &encode_value(entry), len)?;
    Ok((entry_token(keys, &entry.keyword, &entry.path), ct))
}

/// Builds the encrypted index of `dataset`.
pub fn index_gen(
    dataset: &Dataset,
    k_max: usize,
    keys: &SecretKeys,
    opts: &BuildOptions,
) -> Result<(IndexFile, BuildReport)> {
    let started = Instant::now();
    let trees = layout_all_trees(dataset, k_max)?;
    let tree_time = started.elapsed();
    let (file, mut report) = seal_layouts(&trees, dataset, k_max, keys, opts)?;
    report.tree_time = tree_time;
    Ok((file, report))
}

/// Encodes and encrypts laid-out trees. Each object is serialized once and
/// values are assembled from those bytes.
fn seal_layouts(
    trees: &[TreeLayout],
    dataset: &Dataset,
    k_max: usize,
    keys: &SecretKeys,
    opts: &BuildOptions,
) -> Result<(IndexFile, BuildReport)> {
    let started = Instant::now();
    if trees.is_empty() {
        return Err(risk_core::geo::GeoError::EmptyDataset.into());
    }
    let space = dataset.space();
    let d = trees.iter().map(|t| t.height).max().unwrap_or(1).max(1);
    let objects: Vec<Vec<u8>> = dataset.objects.par_iter().map(encode_object).collect();
    let max_object = objects.iter().map(Vec::len).max().unwrap_or(0);
    let leaves: Vec<(&str, &LeafLayout)> = trees
        .iter()
        .flat_map(|t| t.leaves.iter().map(move |l| (t.keyword.as_str(), l)))
        .collect();
    let parts = |ids: &[u32]| ids.iter().map(|&i| objects[i as usize].as_slice()).collect::<Vec<_>>();
    let encoded: Vec<Vec<u8>> = leaves
        .par_iter()
        .map(|(w, l)| {
            let (delta, delta_k) = (parts(&l.delta), parts(&l.delta_k));
            encode_value_from_parts(w, &l.path, delta.into_iter(), delta_k.into_iter())
        })
        .collect();
    let max_value_len = encoded.iter().map(Vec::len).max().unwrap_or(0);
    let slack = opts.slack_objects.unwrap_or(k_max);
    let value_len = max_value_len + slack * max_object;
    let mut records = leaves
        .par_iter()
        .zip(encoded.par_iter())
        .map(|((w, l), v)| {
            let ct = encrypt_value(keys, v, value_len)?;
            Ok((entry_token(keys, w, &l.path), ct))
        })
        .collect::<Result<Vec<(Token, Ciphertext)>, EngineError>>()?;
    let mut rng = match opts.shuffle_seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_rng(&mut rand::rng()),
    };
    records.shuffle(&mut rng);
    let params = SystemParams {
        d,
        width: space.width,
        origin: space.origin,
        lambda: keys.lambda(),
        k_max: k_max as u32,
        hash: HASH_HMAC_SHA256.into(),
        cipher: CIPHER_AES_GCM.into(),
    };
    let report = BuildReport {
        keywords: trees.len(),
        entries: records.len(),
        d,
        max_value_len,
        value_len,
        tree_time: Duration::ZERO,
        encrypt_time: started.elapsed(),
    };
    let file = IndexFile {
        params,
        value_len: value_len as u32,
        body_len: body_len(value_len) as u32,
        nonce_len: NONCE_LEN as u16,
        tag_len: TAG_LEN as u16,
        records,
    };
    Ok((file, report))
}

/// Longest encoded object among `objects`.
pub fn max_object_len<'a>(objects: impl IntoIterator<Item = &'a GeoObject>) -> usize {
    objects.into_iter().map(encoded_object_len).max().unwrap_or(0)
}

/// Checks that an index was produced for these keys.
pub fn check_params(params: &SystemParams, keys: &SecretKeys) -> Result<()> {
    if params.lambda != keys.lambda() {
        return Err(EngineError::ParamMismatch(format!(
            "index uses {} bits, key has {}",
            params.lambda,
            keys.lambda()
        )));
    }
    if params.hash != HASH_HMAC_SHA256 || params.cipher != CIPHER_AES_GCM {
        return Err(EngineError::ParamMismatch(format!("{} / {}", params.hash, params.cipher)));
    }
    Ok(())
}
