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

//! Seeded synthetic geo-textual datasets.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::geo::{Dataset, GeoObject, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SpatialDistribution {
    #[default]
    Uniform,
    /// Isotropic Gaussian around the center of the extent, sigma = extent / 8.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub keywords: usize,
    pub distribution: SpatialDistribution,
    pub seed: u64,
    /// Side of the sampling square in dataset units.
    pub extent: f64,
    /// Upper bound on keywords per object (at least 1 each).
    pub max_keywords_per_object: usize,
    /// Zipf exponent of keyword popularity; 0 means uniform.
    pub zipf_exponent: f64,
}

impl SyntheticSpec {
    pub fn new(n: usize, keywords: usize, distribution: SpatialDistribution, seed: u64) -> Self {
        Self {
            n,
            keywords,
            distribution,
            seed,
            extent: 10_000.0,
            max_keywords_per_object: 3,
            zipf_exponent: 0.7,
        }
    }
}

pub fn keyword_name(i: usize) -> String {
    format!("k{i:03}")
}

pub fn generate(spec: &SyntheticSpec) -> Dataset {
    assert!(spec.n > 0 && spec.keywords > 0, "need at least one object and keyword");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = Zipf::new(spec.keywords as f64, spec.zipf_exponent.max(0.0)).expect("valid zipf parameters");
    let center = spec.extent / 2.0;
    let normal = Normal::new(center, spec.extent / 8.0).expect("valid sigma");
    let max_kw = spec.max_keywords_per_object.clamp(1, spec.keywords);
    let snap = |v: f64| (v * 1e4).round() / 1e4;
    let objects = (0..spec.n)
        .map(|i| {
            let (x, y) = match spec.distribution {
                SpatialDistribution::Uniform => (
                    rng.random_range(0.0..spec.extent),
                    rng.random_range(0.0..spec.extent),
                ),
                SpatialDistribution::Gaussian => (normal.sample(&mut rng), normal.sample(&mut rng)),
            };
            let want = rng.random_range(1..=max_kw);
            let mut psi = BTreeSet::new();
            while psi.len() < want {
                let k = zipf.sample(&mut rng) as usize - 1;
                psi.insert(keyword_name(k.min(spec.keywords - 1)));
            }
            GeoObject::new(format!("o{i}"), Point::new(snap(x), snap(y)), psi).expect("generated object is valid")
        })
        .collect();
    Dataset::new(objects).expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_dataset() {
        let spec = SyntheticSpec::new(500, 20, SpatialDistribution::Gaussian, 9);
        assert_eq!(generate(&spec), generate(&spec));
        let other = SyntheticSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate(&spec), generate(&other));
    }

    #[test]
    fn respects_keyword_bounds() {
        let spec = SyntheticSpec::new(2000, 50, SpatialDistribution::Uniform, 1);
        let d = generate(&spec);
        assert_eq!(d.len(), 2000);
        for o in &d.objects {
            assert!((1..=3).contains(&o.psi.len()));
            assert!(o.psi.iter().all(|w| w.as_str() < "k050"));
        }
        let memberships: usize = d.objects.iter().map(|o| o.psi.len()).sum();
        let grouped: usize = d.group_by_keyword().values().map(Vec::len).sum();
        assert_eq!(memberships, grouped);
    }
}
