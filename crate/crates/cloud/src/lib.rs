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

//! Cloud side of RISK. Holds encrypted entries keyed by opaque tokens and
//! answers trapdoors by exact token match. No key material is ever present.

pub mod server;
pub mod store;

pub use server::{serve_connection, Server, ServerConfig};
pub use store::{CloudIndex, HistoryItem, LeakageReport, QueryLog, QueryRecord};
