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

//! Plaintext building blocks for encrypted spatial-keyword search.
//!
//! This crate holds everything that involves no secret key: geometry and
//! dataset handling, quadtree cell addressing, per-keyword kQ-tree
//! construction, cover-identifier enumeration, value codecs, the index file
//! format, the client/cloud wire format and a brute-force query oracle.

pub mod cell;
pub mod codec;
pub mod cover;
pub mod geo;
pub mod index_file;
pub mod kqtree;
pub mod oracle;
pub mod synth;
pub mod wire;

pub use cell::{CellPath, MAX_DEPTH};
pub use cover::{cover_identifiers, path_of_point, CellBlock, CoverSet};
pub use geo::{euclidean, Dataset, GeoObject, Point, QueryKind, QuerySpec, ResultSet, Space};
pub use index_file::{IndexFile, SystemParams};
pub use kqtree::{build_kq_tree, KQTree, PlainEntry};
pub use wire::{Ciphertext, Phase, Token, Trapdoor};
