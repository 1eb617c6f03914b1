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

#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use risk_cloud::CloudIndex;
use risk_core::synth::{generate, SpatialDistribution, SyntheticSpec};
use risk_core::{Dataset, IndexFile, Point, QuerySpec};
use risk_engine::client::Client;
use risk_engine::crypto::{setup, SecretKeys};
use risk_engine::index::{index_gen, BuildOptions};
use risk_engine::transport::Loopback;

pub fn dataset(n: usize, keywords: usize, gaussian: bool, seed: u64) -> Dataset {
    let dist = if gaussian {
        SpatialDistribution::Gaussian
    } else {
        SpatialDistribution::Uniform
    };
    generate(&SyntheticSpec::new(n, keywords, dist, seed))
}

pub struct Setup {
    pub keys: SecretKeys,
    pub file: IndexFile,
    pub cloud: Arc<CloudIndex>,
    pub client: Client<Loopback>,
}

pub fn deploy(ds: &Dataset, k_max: usize, seed: u64) -> Setup {
    let keys = setup(128, Some(seed)).unwrap();
    let (file, _) = index_gen(ds, k_max, &keys, &BuildOptions::default()).unwrap();
    let cloud = Arc::new(CloudIndex::new(file.clone()));
    let client = Client::new(keys.clone(), file.params.clone(), Loopback::new(Arc::clone(&cloud))).unwrap();
    Setup {
        keys,
        file,
        cloud,
        client,
    }
}

/// Keywords of a random object, trimmed to at most `max` of them.
pub fn keywords_of(ds: &Dataset, rng: &mut impl Rng, max: usize) -> Vec<String> {
    let o = ds.objects.choose(rng).unwrap();
    let mut kws: Vec<String> = o.psi.iter().cloned().collect();
    let n = rng.random_range(1..=max.min(kws.len()));
    while kws.len() > n {
        let i = rng.random_range(0..kws.len());
        kws.remove(i);
    }
    kws
}

pub fn random_point(ds: &Dataset, rng: &mut impl Rng) -> Point {
    Point::new(
        ds.bbox_min.x + rng.random::<f64>() * ds.width,
        ds.bbox_min.y + rng.random::<f64>() * ds.width,
    )
}

pub fn range_query(ds: &Dataset, rng: &mut impl Rng, max_kw: usize) -> QuerySpec {
    let r = ds.width * rng.random_range(0.01..=0.05);
    QuerySpec::range(random_point(ds, rng), keywords_of(ds, rng, max_kw), r).unwrap()
}

pub fn knn_query(ds: &Dataset, rng: &mut impl Rng, max_kw: usize) -> QuerySpec {
    let k = *[1usize, 2, 5, 10].choose(rng).unwrap();
    QuerySpec::knn(random_point(ds, rng), keywords_of(ds, rng, max_kw), k).unwrap()
}

/// Decrypts the whole cloud index and checks every entry against a
/// brute-force recomputation over `objects`: residents are exactly the
/// group members in the cell, neighbors are the exact `k_max` nearest of
/// the representative, and every group member has a home entry.
pub fn audit(cloud: &CloudIndex, keys: &SecretKeys, objects: &[risk_core::GeoObject]) {
    use risk_core::geo::group_by_keyword;
    use risk_core::kqtree::knn_in_group;
    use std::collections::HashMap;

    let file = cloud.export();
    let space = file.params.space();
    let k_max = file.params.k_max as usize;
    let groups = group_by_keyword(objects);
    let mut homes: HashMap<(String, String), usize> = HashMap::new();
    for (token, ct) in &file.records {
        let plain = risk_engine::crypto::decrypt_value(keys, ct).unwrap();
        let e = risk_core::codec::decode_value(&plain).unwrap();
        assert_eq!(&risk_engine::index::entry_token(keys, &e.keyword, &e.path), token);
        let group = groups.get(&e.keyword).map(Vec::as_slice).unwrap_or(&[]);
        let mut want: Vec<&str> = group
            .iter()
            .filter(|o| space.cell_contains(&e.path, o.p))
            .map(|o| o.id.as_str())
            .collect();
        let mut have: Vec<&str> = e.delta.iter().map(|o| o.id.as_str()).collect();
        want.sort_unstable();
        have.sort_unstable();
        assert_eq!(have, want, "residents of {}/{}", e.keyword, e.path);
        for o in &e.delta {
            *homes.entry((e.keyword.clone(), o.id.clone())).or_default() += 1;
        }
        match e.representative(&space) {
            None => assert!(e.delta_k.is_empty()),
            Some(rep) => {
                let want = knn_in_group(group, rep, k_max);
                assert_eq!(e.delta_k, want, "neighbors of {}/{}", e.keyword, e.path);
            }
        }
    }
    for (w, g) in &groups {
        for o in g {
            assert_eq!(homes.get(&(w.clone(), o.id.clone())), Some(&1), "home of {}/{}", w, o.id);
        }
    }
}
