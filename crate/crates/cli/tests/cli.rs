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

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

fn risk() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_risk"));
    c.env_remove("RISK_KEY_FILE");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(out: Output) -> Value {
    serde_json::from_str(&ok(out)).unwrap()
}

/// Generates a dataset and builds an index; returns the temp dir.
fn deploy(n: &str, k_max: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(risk()
        .args(["gen", "--n", n, "--keywords", "12", "--seed", "5", "--out"])
        .arg(d.join("data.tsv"))
        .output()
        .unwrap());
    let built = json(
        risk()
            .args(["build", "--k-max", k_max, "--data"])
            .arg(d.join("data.tsv"))
            .arg("--key")
            .arg(d.join("key.bin"))
            .arg("--out")
            .arg(d.join("index.rski"))
            .output()
            .unwrap(),
    );
    assert_eq!(built["key_created"], true);
    assert!(built["entries"].as_u64().unwrap() > 0);
    assert!(d.join("index.rski.params.json").exists());
    dir
}

fn ids(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|h| h["id"].as_str().unwrap().to_string())
        .collect()
}

fn oracle(d: &Path, extra: &[&str]) -> Vec<String> {
    let out = risk()
        .arg("oracle")
        .arg("--data")
        .arg(d.join("data.tsv"))
        .args(extra)
        .output()
        .unwrap();
    ids(&json(out))
}

#[test]
fn in_process_queries_match_oracle() {
    let dir = deploy("3000", "8");
    let d = dir.path();
    let cases: [&[&str]; 4] = [
        &["--x", "5000", "--y", "5000", "--keywords", "k000", "--r", "600"],
        &["--x", "1200", "--y", "8000", "--keywords", "k001,k000", "--r", "1500"],
        &["--x", "5000", "--y", "5000", "--keywords", "k002", "--k", "7"],
        &["--x", "-300", "--y", "10500", "--keywords", "k003", "--k", "2"],
    ];
    for args in cases {
        let sub = if args.contains(&"--r") { "query-range" } else { "query-knn" };
        let v = json(
            risk()
                .arg(sub)
                .arg("--index")
                .arg(d.join("index.rski"))
                .arg("--key")
                .arg(d.join("key.bin"))
                .args(args)
                .output()
                .unwrap(),
        );
        assert_eq!(ids(&v["results"]), oracle(d, args), "{args:?}");
        let t = &v["timing"];
        assert_eq!(t["exact"], true);
        assert!(t["rounds"].as_u64().unwrap() >= 1);
        assert!(t["bytes_received"].as_u64().unwrap() > 0);
        for field in ["trapdoor_ms", "cloud_ms", "client_ms", "total_ms"] {
            assert!(t[field].as_f64().unwrap() >= 0.0);
        }
    }
}

#[test]
fn key_file_from_environment() {
    let dir = deploy("800", "4");
    let d = dir.path();
    let out = risk()
        .env("RISK_KEY_FILE", d.join("key.bin"))
        .args(["query-knn", "--x", "0", "--y", "0", "--keywords", "k000", "--format", "csv", "--index"])
        .arg(d.join("index.rski"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let stdout = ok(out);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("rank,id,x,y,keywords,distance"));
    assert_eq!(lines.count(), 1);
    assert!(stderr.starts_with("exact,results,rounds"), "{stderr}");
}

#[test]
fn updates_write_back_to_index_file() {
    let dir = deploy("1500", "6");
    let d = dir.path();
    let target = |c: &mut Command| {
        c.arg("--index").arg(d.join("index.rski")).arg("--key").arg(d.join("key.bin"));
    };
    let obj = ["--id", "fresh", "--x", "4321", "--y", "1234", "--keywords", "k000,zeta"];
    let mut c = risk();
    c.arg("insert");
    target(&mut c);
    let v = json(c.args(obj).output().unwrap());
    assert_eq!(v["op"], "insert");
    assert!(v["created"].as_u64().unwrap() >= 1, "new keyword needs a new entry");

    let mut c = risk();
    c.arg("query-knn");
    target(&mut c);
    let v = json(c.args(["--x", "4320", "--y", "1234", "--keywords", "zeta"]).output().unwrap());
    assert_eq!(ids(&v["results"]), ["fresh"]);

    let mut c = risk();
    c.arg("insert");
    target(&mut c);
    let dup = c.args(obj).output().unwrap();
    assert!(!dup.status.success());
    assert!(String::from_utf8_lossy(&dup.stderr).contains("error"));

    let mut c = risk();
    c.arg("delete");
    target(&mut c);
    json(c.args(obj).output().unwrap());
    let mut c = risk();
    c.arg("query-knn");
    target(&mut c);
    let v = json(c.args(["--x", "4320", "--y", "1234", "--keywords", "zeta"]).output().unwrap());
    assert!(v["results"].as_array().unwrap().is_empty());
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn server_round_trip() {
    let dir = deploy("2000", "10");
    let d = dir.path();
    let mut child = risk()
        .args(["serve", "--listen", "127.0.0.1:0", "--format", "csv", "--index"])
        .arg(d.join("index.rski"))
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let _served = Served(child);
    assert_eq!(lines.next().unwrap().unwrap(), "listen,entries");
    let row = lines.next().unwrap().unwrap();
    let addr = row.split(',').next().unwrap().to_string();

    let query = ["--x", "2500", "--y", "7500", "--keywords", "k000", "--k", "5"];
    let remote = |extra: &[&str]| {
        risk()
            .arg("query-knn")
            .args(["--server", &addr, "--key"])
            .arg(d.join("key.bin"))
            .args(extra)
            .args(query)
            .output()
            .unwrap()
    };
    let missing = remote(&[]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--params"));

    let params = d.join("index.rski.params.json");
    let v = json(remote(&["--params", params.to_str().unwrap()]));
    assert_eq!(ids(&v["results"]), oracle(d, &query));
    assert!(v["timing"]["bytes_sent"].as_u64().unwrap() > 0);
}

#[test]
fn bench_is_deterministic_apart_from_timings() {
    let dir = TempDir::new().unwrap();
    let run = || {
        ok(risk()
            .args(["bench", "--n", "3000", "--keywords", "10", "--k-max", "4,16", "--runs", "1", "--queries", "5"])
            .output()
            .unwrap())
    };
    let strip = |csv: &str| -> Vec<String> {
        csv.lines()
            .map(|l| l.split(',').take(4).chain(l.split(',').skip(6).take(4)).collect::<Vec<_>>().join(","))
            .collect()
    };
    let (a, b) = (run(), run());
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("kind,k_max,entries,d,build_ms_mean,build_ms_median,index_bytes,trapdoor_bytes,candidate_bytes,rounds"));
    assert_eq!(a.lines().count(), 5);
    assert_eq!(strip(&a), strip(&b));

    let out = dir.path().join("bench.json");
    ok(risk()
        .args(["bench", "--n", "1000", "--keywords", "5", "--k-max", "8", "--runs", "1", "--queries", "3", "--kinds", "rsk", "--format", "json", "--out"])
        .arg(&out)
        .output()
        .unwrap());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["kind"], "rsk");
}

#[test]
fn argument_errors_fail_cleanly() {
    let dir = deploy("300", "4");
    let d = dir.path();
    let out = risk()
        .args(["query-range", "--x", "1", "--y", "1", "--keywords", "k000", "--r", "10", "--index"])
        .arg(d.join("index.rski"))
        .output()
        .unwrap();
    assert!(!out.status.success(), "no key given");

    let out = risk()
        .args(["build", "--k-max", "4", "--lambda", "256", "--data"])
        .arg(d.join("data.tsv"))
        .arg("--key")
        .arg(d.join("key.bin"))
        .arg("--out")
        .arg(d.join("other.rski"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("128-bit"));

    let out = risk()
        .args(["oracle", "--x", "1", "--y", "1", "--keywords", "k000", "--r", "1", "--k", "2", "--data"])
        .arg(d.join("data.tsv"))
        .output()
        .unwrap();
    assert!(!out.status.success(), "--r and --k conflict");
}
