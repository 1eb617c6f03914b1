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

//! Parameter sweep over `k_max`: build cost, index size, and per-query
//! communication and response time for a fixed workload.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use risk_cloud::CloudIndex;
use risk_core::{Dataset, QuerySpec};

use crate::client::{Client, QueryStats};
use crate::crypto::setup;
use crate::error::Result;
use crate::index::{index_gen, BuildOptions};
use crate::transport::Loopback;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Rsk,
    Ksk,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub queries: usize,
    /// Range radius as a fraction of the dataset width.
    pub range_fraction: f64,
    /// kNN `k`; `None` uses the configuration's `k_max`.
    pub k: Option<usize>,
    pub kinds: Vec<BenchKind>,
    pub seed: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            queries: 100,
            range_fraction: 0.01,
            k: None,
            kinds: vec![BenchKind::Rsk, BenchKind::Ksk],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub k_max_values: Vec<usize>,
    pub runs: usize,
    pub lambda: u16,
    pub workload: Workload,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k_max_values: vec![2, 10, 40, 80],
            runs: 5,
            lambda: 128,
            workload: Workload::default(),
        }
    }
}

/// One (k_max, query kind) configuration. Times are per query unless the
/// name says otherwise; `_mean`/`_median` aggregate over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kind: BenchKind,
    pub k_max: usize,
    pub entries: usize,
    pub d: u8,
    pub build_ms_mean: f64,
    pub build_ms_median: f64,
    pub index_bytes: u64,
    pub trapdoor_bytes: f64,
    pub candidate_bytes: f64,
    pub rounds: f64,
    pub cloud_ms_mean: f64,
    pub cloud_ms_median: f64,
    pub client_ms_mean: f64,
    pub client_ms_median: f64,
    pub total_ms_mean: f64,
    pub total_ms_median: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Query centers and keywords drawn from the dataset itself.
pub fn workload_queries(dataset: &Dataset, w: &Workload, kind: BenchKind, k_max: usize) -> Vec<QuerySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
    let picks: Vec<_> = dataset.objects.choose_multiple(&mut rng, w.queries).collect();
    let mut kw_rng = ChaCha8Rng::seed_from_u64(w.seed ^ 0x9e37_79b9);
    picks
        .into_iter()
        .map(|o| {
            let kws: Vec<&String> = o.psi.iter().collect();
            let kw = kws.choose(&mut kw_rng).expect("objects carry keywords").as_str();
            match kind {
                BenchKind::Rsk => QuerySpec::range(o.p, [kw], w.range_fraction * dataset.width),
                BenchKind::Ksk => QuerySpec::knn(o.p, [kw], w.k.unwrap_or(k_max)),
            }
            .expect("workload queries are valid")
        })
        .collect()
}

#[derive(Default)]
struct Samples {
    cloud: Vec<f64>,
    client: Vec<f64>,
    total: Vec<f64>,
    sent: f64,
    received: f64,
    rounds: f64,
}

/// Runs the sweep. Every run rebuilds the index with fresh keys.
pub fn run_bench(dataset: &Dataset, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &k_max in &cfg.k_max_values {
        let mut builds = Vec::new();
        let mut shape = (0usize, 0u8, 0u64);
        let mut samples: Vec<Samples> = cfg.workload.kinds.iter().map(|_| Samples::default()).collect();
        let queries: Vec<Vec<QuerySpec>> = cfg
            .workload
            .kinds
            .iter()
            .map(|&kind| workload_queries(dataset, &cfg.workload, kind, k_max))
            .collect();
        for run in 0..cfg.runs.max(1) {
            let keys = setup(cfg.lambda, None)?;
            let started = Instant::now();
            let (file, report) = index_gen(dataset, k_max, &keys, &BuildOptions::default())?;
            builds.push(ms(started.elapsed()));
            shape = (report.entries, report.d, (file.records.len() * file.record_len()) as u64);
            let cloud = Arc::new(CloudIndex::new(file.clone()));
            let mut client = Client::new(keys, file.params.clone(), Loopback::new(cloud))?;
            for (qs, s) in queries.iter().zip(samples.iter_mut()) {
                let mut total = QueryStats::default();
                for q in qs {
                    total.add(&client.run(q)?.stats);
                }
                let n = qs.len().max(1) as f64;
                s.cloud.push(ms(total.cloud_time) / n);
                s.client.push(ms(total.client_time()) / n);
                s.total.push(ms(total.cloud_time + total.client_time()) / n);
                if run == 0 {
                    s.sent = total.bytes_sent as f64 / n;
                    s.received = total.bytes_received as f64 / n;
                    s.rounds = f64::from(total.rounds) / n;
                }
            }
            log::info!("k_max={k_max} run {run}: build {:.1} ms", builds[run]);
        }
        for (&kind, s) in cfg.workload.kinds.iter().zip(&samples) {
            rows.push(BenchRow {
                kind,
                k_max,
                entries: shape.0,
                d: shape.1,
                build_ms_mean: mean(&builds),
                build_ms_median: median(&builds),
                index_bytes: shape.2,
                trapdoor_bytes: s.sent,
                candidate_bytes: s.received,
                rounds: s.rounds,
                cloud_ms_mean: mean(&s.cloud),
                cloud_ms_median: median(&s.cloud),
                client_ms_mean: mean(&s.client),
                client_ms_median: median(&s.client),
                total_ms_mean: mean(&s.total),
                total_ms_median: median(&s.total),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use risk_core::synth::{generate, SpatialDistribution, SyntheticSpec};

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn small_sweep_has_deterministic_shape() {
        let ds = generate(&SyntheticSpec::new(2000, 10, SpatialDistribution::Uniform, 3));
        let cfg = BenchConfig {
            k_max_values: vec![2, 16],
            runs: 2,
            lambda: 128,
            workload: Workload {
                queries: 10,
                ..Workload::default()
            },
        };
        let a = run_bench(&ds, &cfg).unwrap();
        let b = run_bench(&ds, &cfg).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                (x.kind, x.k_max, x.entries, x.d, x.index_bytes, x.trapdoor_bytes, x.candidate_bytes),
                (y.kind, y.k_max, y.entries, y.d, y.index_bytes, y.trapdoor_bytes, y.candidate_bytes)
            );
        }
        assert!(a[2].entries < a[0].entries);
    }
}
