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

use risk_core::codec::CodecError;
use risk_core::geo::GeoError;
use risk_core::index_file::IndexFileError;
use risk_core::kqtree::TreeError;
use risk_core::wire::WireError;
use thiserror::Error;

use crate::crypto::CryptoError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("candidate value does not decode: {0}")]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    IndexFile(#[from] IndexFileError),
    #[error("query has no keywords")]
    EmptyKeywords,
    #[error("first phase returned no candidates")]
    EmptyPhase1,
    #[error("candidate does not belong to the token it was returned for")]
    TokenMismatch,
    #[error("index parameters do not match the key: {0}")]
    ParamMismatch(String),
    #[error("object `{0}` already exists")]
    DuplicateId(String),
    #[error("object `{0}` not found")]
    NotFound(String),
    #[error("updated entry needs {needed} bytes but the index holds {len}; rebuild with more slack")]
    CapacityExceeded { needed: usize, len: usize },
    #[error("point lies outside the indexed square")]
    OutsideSpace,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
