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

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risk_core::cover::{cover_identifiers, path_of_point, CellBlock};
use risk_core::index_file::{IndexFileError, CIPHER_AES_GCM, HASH_HMAC_SHA256};
use risk_core::kqtree::{build_all_trees, knn_in_group};
use risk_core::synth::{generate, SpatialDistribution, SyntheticSpec};
use risk_core::{Ciphertext, IndexFile, Point, SystemParams, Token};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn cover_holds_every_point_of_the_disc(
        d in 1u8..=8,
        width in 0.5f64..5000.0,
        fx in -0.1f64..1.1,
        fy in -0.1f64..1.1,
        fr in 0.0f64..0.4,
        seed in any::<u64>(),
    ) {
        let p = Point::new(fx * width, fy * width);
        let r = fr * width;
        let cover = cover_identifiers(p, r, d, width);
        let ids: HashSet<_> = cover.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let s = r * rng.random::<f64>().sqrt();
            let q = Point::new(p.x + s * a.cos(), p.y + s * a.sin());
            if !(0.0..=width).contains(&q.x) || !(0.0..=width).contains(&q.y) {
                continue;
            }
            for level in 1..=d {
                let path = path_of_point(q, level, d, width).unwrap();
                prop_assert!(ids.contains(&path), "{q:?} lands in {path} which is not listed");
            }
        }
    }

    #[test]
    fn growing_blocks_enumerate_each_identifier_once(
        d in 1u8..=7,
        fx in 0.0f64..1.0,
        fy in 0.0f64..1.0,
        radii in proptest::collection::vec(0.0f64..0.5, 1..5),
    ) {
        let width = 100.0;
        let p = Point::new(fx * width, fy * width);
        let mut radii: Vec<f64> = radii.into_iter().map(|f| f * width).collect();
        radii.sort_by(f64::total_cmp);
        let mut prev: Option<CellBlock> = None;
        let mut sent = HashSet::new();
        for r in radii {
            let block = CellBlock::around(p, r, d, width).unwrap();
            for id in block.ids_excluding(prev.as_ref()) {
                prop_assert!(sent.insert(id), "{id} enumerated twice");
            }
            let want: HashSet<_> = block.ids().iter().copied().collect();
            prop_assert_eq!(&sent, &want);
            prev = Some(block);
        }
    }
}

#[test]
fn trees_partition_groups_and_store_exact_neighbors() {
    for (dist, k_max) in [(SpatialDistribution::Uniform, 3), (SpatialDistribution::Gaussian, 7)] {
        let ds = generate(&SyntheticSpec::new(2_000, 15, dist, 9));
        let space = ds.space();
        let trees = build_all_trees(&ds, k_max).unwrap();
        let groups = ds.group_by_keyword();
        assert_eq!(trees.len(), groups.len());
        for tree in &trees {
            let group = &groups[&tree.keyword];
            let mut homes: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &tree.entries {
                assert!(!e.delta.is_empty());
                assert!(e.path.level() <= tree.height);
                for o in &e.delta {
                    assert!(space.cell_contains(&e.path, o.p), "{} outside {}", o.id, e.path);
                    *homes.entry(o.id.as_str()).or_default() += 1;
                }
                let rep = e.representative(&space).unwrap();
                assert_eq!(e.delta_k, knn_in_group(group, rep, k_max));
            }
            assert_eq!(homes.len(), group.len());
            assert!(homes.values().all(|&n| n == 1));
            // Leaves are disjoint: no path is a prefix of another.
            for a in &tree.entries {
                for b in &tree.entries {
                    assert!(a.path == b.path || !a.path.is_prefix_of(&b.path));
                }
            }
        }
    }
}

fn random_file(rng: &mut ChaCha8Rng, lambda: u16, count: usize) -> IndexFile {
    let params = SystemParams {
        d: rng.random_range(1..=20),
        width: rng.random_range(1.0..1e6),
        origin: Point::new(rng.random_range(-1e6..1e6), rng.random_range(-1e6..1e6)),
        lambda,
        k_max: rng.random_range(1..100),
        hash: HASH_HMAC_SHA256.into(),
        cipher: CIPHER_AES_GCM.into(),
    };
    let value_len = rng.random_range(16..400);
    let body_len = value_len + 4;
    let mut bytes = |n: usize| -> Vec<u8> { (0..n).map(|_| rng.random()).collect() };
    let records = (0..count)
        .map(|_| {
            (
                Token(bytes(usize::from(lambda / 8))),
                Ciphertext {
                    nonce: bytes(12),
                    body: bytes(body_len as usize),
                    tag: bytes(16),
                },
            )
        })
        .collect();
    IndexFile {
        params,
        value_len,
        body_len,
        nonce_len: 12,
        tag_len: 16,
        records,
    }
}

#[test]
fn index_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (i, lambda) in [128u16, 256, 128, 256].into_iter().enumerate() {
        let file = random_file(&mut rng, lambda, i * 50);
        let path = dir.path().join(format!("{i}.rski"));
        file.save(&path).unwrap();
        let back = IndexFile::load(&path).unwrap();
        assert_eq!(back, file);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, std::fs::read(&path).unwrap());
    }
}

#[test]
fn damaged_index_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let file = random_file(&mut rng, 128, 20);
    let mut bytes = Vec::new();
    file.write(&mut bytes).unwrap();

    let path = dir.path().join("short.rski");
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(IndexFile::load(&path), Err(IndexFileError::Corrupt(_))));

    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(IndexFile::read(&mut long.as_slice()), Err(IndexFileError::Corrupt(_))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(IndexFile::read(&mut magic.as_slice()), Err(IndexFileError::Corrupt(_))));

    let mut version = bytes;
    version[4] = 99;
    assert!(matches!(
        IndexFile::read(&mut version.as_slice()),
        Err(IndexFileError::VersionMismatch { found: 99, .. })
    ));

    let mut ragged = file;
    ragged.records[3].1.body.pop();
    assert!(ragged.write(&mut Vec::new()).is_err());
}
