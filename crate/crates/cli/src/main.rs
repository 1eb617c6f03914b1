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

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use risk_cloud::{CloudIndex, Server, ServerConfig};
use risk_core::geo::{load_dataset, DatasetFormat};
use risk_core::oracle::oracle_answer;
use risk_core::synth::{generate, SpatialDistribution, SyntheticSpec};
use risk_core::{euclidean, Dataset, GeoObject, IndexFile, Point, QuerySpec, ResultSet};
use risk_engine::bench::{run_bench, BenchConfig, BenchKind, Workload};
use risk_engine::client::{Client, QueryStats};
use risk_engine::crypto::{setup, SecretKeys};
use risk_engine::index::{index_gen, BuildOptions};
use risk_engine::transport::{Loopback, TcpTransport, Transport};
use risk_engine::update::{delete_object, insert_object, UpdateReceipt};

mod output;
mod params;

use output::Format;
use params::PublicParams;

#[derive(Parser)]
#[command(name = "risk", version, about = "Encrypted spatial-keyword index: build, serve, query, update, benchmark")]
struct Cli {
    /// Output format. Defaults to csv for `bench` and json elsewhere.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an encrypted index from a dataset. Creates the key file if missing.
    Build(BuildArgs),
    /// Serve an index over TCP.
    Serve(ServeArgs),
    /// Secure range query.
    QueryRange(RangeArgs),
    /// Secure k-nearest-neighbor query.
    QueryKnn(KnnArgs),
    /// Insert an object into a deployed index.
    Insert(UpdateArgs),
    /// Delete an object from a deployed index.
    Delete(UpdateArgs),
    /// Sweep k_max and report build cost, index size and query cost.
    Bench(BenchArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Answer a query by brute force over the plaintext dataset.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct KeyArg {
    /// Secret key file.
    #[arg(long = "key", env = "RISK_KEY_FILE")]
    path: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    /// Dataset file (id, x, y, space-separated keywords; tab-separated).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k_max: usize,
    #[command(flatten)]
    key: KeyArg,
    /// Index output path.
    #[arg(long)]
    out: PathBuf,
    /// Public parameter output path [default: <out>.params.json]
    #[arg(long)]
    params: Option<PathBuf>,
    /// Security parameter for a new key (128 or 256).
    #[arg(long)]
    lambda: Option<u16>,
    /// Extra object slots per value for later inserts [default: k_max]
    #[arg(long)]
    slack: Option<usize>,
    /// Seed for the record shuffle.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Largest accepted request payload in bytes.
    #[arg(long)]
    max_frame: Option<usize>,
}

#[derive(Args)]
struct Target {
    /// Address of a `risk serve` instance.
    #[arg(long, required_unless_present = "index", conflicts_with = "index")]
    server: Option<String>,
    /// Use an index file in-process instead of a server. Updates are
    /// written back to the file.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Public parameters from `risk build`. Required with --server.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    key: KeyArg,
}

#[derive(Args)]
struct Location {
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    /// Comma-separated keywords. Queries match objects carrying all of them.
    #[arg(long, value_delimiter = ',', required = true)]
    keywords: Vec<String>,
}

#[derive(Args)]
struct RangeArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    at: Location,
    #[arg(long)]
    r: f64,
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    at: Location,
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Args)]
struct UpdateArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    id: String,
    #[command(flatten)]
    at: Location,
}

#[derive(Clone, Copy, ValueEnum)]
enum Distribution {
    Uniform,
    Gaussian,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    keywords: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    dist: Distribution,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Side of the sampling square.
    #[arg(long)]
    extent: Option<f64>,
    /// Most keywords per object.
    #[arg(long)]
    max_keywords: Option<usize>,
    /// Zipf exponent of keyword popularity (0 = uniform).
    #[arg(long)]
    zipf: Option<f64>,
}

impl SynthArgs {
    fn spec(&self) -> SyntheticSpec {
        let dist = match self.dist {
            Distribution::Uniform => SpatialDistribution::Uniform,
            Distribution::Gaussian => SpatialDistribution::Gaussian,
        };
        let mut spec = SyntheticSpec::new(self.n, self.keywords, dist, self.seed);
        if let Some(e) = self.extent {
            spec.extent = e;
        }
        if let Some(m) = self.max_keywords {
            spec.max_keywords_per_object = m;
        }
        if let Some(z) = self.zipf {
            spec.zipf_exponent = z;
        }
        spec
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rsk,
    Ksk,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset file; a synthetic one is generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,10,40,80")]
    k_max: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Range radius as a fraction of the dataset width.
    #[arg(long, default_value_t = 0.01)]
    range_fraction: f64,
    /// kNN k [default: the configuration's k_max]
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rsk,ksk")]
    kinds: Vec<Kind>,
    /// Seed of the query workload.
    #[arg(long, default_value_t = 1)]
    workload_seed: u64,
    #[arg(long, default_value_t = 128)]
    lambda: u16,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    at: Location,
    #[arg(long, conflicts_with = "k", required_unless_present = "k")]
    r: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        if closed_pipe(&e) {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Output cut short by a reader like `head` is not a failure.
fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let kind = if let Some(io) = c.downcast_ref::<std::io::Error>() {
            Some(io.kind())
        } else if let Some(json) = c.downcast_ref::<serde_json::Error>() {
            json.io_error_kind()
        } else if let Some(csv::ErrorKind::Io(io)) = c.downcast_ref::<csv::Error>().map(csv::Error::kind) {
            Some(io.kind())
        } else {
            None
        };
        kind == Some(std::io::ErrorKind::BrokenPipe)
    })
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    let fmt = format.unwrap_or(Format::Json);
    match cli.command {
        Command::Build(a) => cmd_build(a, fmt),
        Command::Serve(a) => cmd_serve(a, fmt),
        Command::QueryRange(a) => {
            let q = QuerySpec::range(a.at.point(), a.at.keywords.clone(), a.r)?;
            cmd_query(&a.target, &q, fmt)
        }
        Command::QueryKnn(a) => {
            let q = QuerySpec::knn(a.at.point(), a.at.keywords.clone(), a.k)?;
            cmd_query(&a.target, &q, fmt)
        }
        Command::Insert(a) => cmd_update(a, true, fmt),
        Command::Delete(a) => cmd_update(a, false, fmt),
        Command::Bench(a) => cmd_bench(a, format.unwrap_or(Format::Csv)),
        Command::Gen(a) => cmd_gen(a, fmt),
        Command::Oracle(a) => cmd_oracle(a, fmt),
    }
}

impl Location {
    fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path, DatasetFormat::Tsv).with_context(|| format!("loading {}", path.display()))
}

fn load_keys(path: &Path) -> Result<SecretKeys> {
    SecretKeys::load(path).with_context(|| format!("loading key {}", path.display()))
}

#[derive(Serialize)]
struct BuildSummary {
    objects: usize,
    keywords: usize,
    entries: usize,
    d: u8,
    k_max: usize,
    lambda: u16,
    value_len: usize,
    record_len: usize,
    index_bytes: u64,
    tree_ms: f64,
    encrypt_ms: f64,
    build_ms: f64,
    key_created: bool,
    index: PathBuf,
    params: PathBuf,
}

fn cmd_build(a: BuildArgs, fmt: Format) -> Result<()> {
    let ds = read_dataset(&a.data)?;
    let key_path = &a.key.path;
    let key_created = !key_path.exists();
    let keys = if key_created {
        let keys = setup(a.lambda.unwrap_or(128), None)?;
        keys.save(key_path)
            .with_context(|| format!("writing key {}", key_path.display()))?;
        keys
    } else {
        let keys = load_keys(key_path)?;
        if let Some(l) = a.lambda {
            ensure!(l == keys.lambda(), "key file holds a {}-bit key, --lambda asks for {l}", keys.lambda());
        }
        keys
    };
    let opts = BuildOptions {
        slack_objects: a.slack,
        shuffle_seed: a.shuffle_seed,
    };
    let started = Instant::now();
    let (file, report) = index_gen(&ds, a.k_max, &keys, &opts)?;
    let build_ms = ms(started.elapsed());
    file.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let params_path = a.params.unwrap_or_else(|| params::default_path(&a.out));
    PublicParams {
        params: file.params.clone(),
        value_len: file.value_len as usize,
    }
    .save(&params_path)?;
    let summary = BuildSummary {
        objects: ds.len(),
        keywords: report.keywords,
        entries: report.entries,
        d: report.d,
        k_max: a.k_max,
        lambda: keys.lambda(),
        value_len: report.value_len,
        record_len: file.record_len(),
        index_bytes: (file.record_len() * file.records.len()) as u64,
        tree_ms: ms(report.tree_time),
        encrypt_ms: ms(report.encrypt_time),
        build_ms,
        key_created,
        index: a.out,
        params: params_path,
    };
    output::record(fmt, &summary, output::stdout())
}

#[derive(Serialize)]
struct Listening {
    listen: String,
    entries: usize,
}

fn cmd_serve(a: ServeArgs, fmt: Format) -> Result<()> {
    let cloud = Arc::new(CloudIndex::load(&a.index).with_context(|| format!("loading {}", a.index.display()))?);
    let mut config = ServerConfig::default();
    if let Some(m) = a.max_frame {
        config.max_frame = m;
    }
    let entries = cloud.len();
    let server = Server::bind(a.listen.as_str(), cloud, config).with_context(|| format!("binding {}", a.listen))?;
    let listen = server.local_addr()?.to_string();
    let mut out = output::stdout();
    output::record(fmt, &Listening { listen, entries }, &mut out)?;
    out.flush()?;
    drop(out);
    server.run()?;
    Ok(())
}

/// A client plus, for in-process targets, the store and file to write back.
struct Session {
    client: Client<Box<dyn Transport>>,
    value_len: usize,
    local: Option<(Arc<CloudIndex>, PathBuf)>,
}

fn open_session(t: &Target) -> Result<Session> {
    let keys = load_keys(&t.key.path)?;
    let explicit = t.params.as_deref().map(PublicParams::load).transpose()?;
    let (pp, transport, local): (PublicParams, Box<dyn Transport>, _) = match (&t.server, &t.index) {
        (_, Some(path)) => {
            let file = IndexFile::load(path).with_context(|| format!("loading {}", path.display()))?;
            let pp = explicit.unwrap_or_else(|| PublicParams {
                params: file.params.clone(),
                value_len: file.value_len as usize,
            });
            let cloud = Arc::new(CloudIndex::new(file));
            let transport = Box::new(Loopback::new(cloud.clone()));
            (pp, transport, Some((cloud, path.clone())))
        }
        (Some(addr), None) => {
            let Some(pp) = explicit else {
                bail!("--params is required with --server");
            };
            let transport = Box::new(TcpTransport::connect(addr.as_str()).with_context(|| format!("connecting to {addr}"))?);
            (pp, transport, None)
        }
        (None, None) => bail!("one of --server or --index is required"),
    };
    Ok(Session {
        client: Client::new(keys, pp.params, transport)?,
        value_len: pp.value_len,
        local,
    })
}

#[derive(Serialize)]
struct Hit {
    rank: usize,
    id: String,
    x: f64,
    y: f64,
    keywords: String,
    distance: f64,
}

fn hits(result: &ResultSet, p: Point) -> Vec<Hit> {
    result
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| Hit {
            rank: i + 1,
            id: o.id.clone(),
            x: o.p.x,
            y: o.p.y,
            keywords: o.psi.iter().cloned().collect::<Vec<_>>().join(" "),
            distance: euclidean(o.p, p),
        })
        .collect()
}

#[derive(Serialize)]
struct Timing {
    exact: bool,
    results: usize,
    rounds: u32,
    tokens: u64,
    candidates: u64,
    bytes_sent: u64,
    bytes_received: u64,
    trapdoor_ms: f64,
    cloud_ms: f64,
    client_ms: f64,
    total_ms: f64,
}

impl Timing {
    fn new(result: &ResultSet, s: &QueryStats) -> Self {
        Self {
            exact: result.exact,
            results: result.objects.len(),
            rounds: s.rounds,
            tokens: s.tokens,
            candidates: s.candidates,
            bytes_sent: s.bytes_sent,
            bytes_received: s.bytes_received,
            trapdoor_ms: ms(s.trapdoor_time),
            cloud_ms: ms(s.cloud_time),
            client_ms: ms(s.client_time()),
            total_ms: ms(s.client_time() + s.cloud_time),
        }
    }
}

#[derive(Serialize)]
struct QueryReport {
    results: Vec<Hit>,
    timing: Timing,
}

/// JSON prints one object; CSV prints the hits on stdout and the timing
/// row on stderr.
fn cmd_query(t: &Target, q: &QuerySpec, fmt: Format) -> Result<()> {
    let mut session = open_session(t)?;
    let outcome = session.client.run(q)?;
    let report = QueryReport {
        results: hits(&outcome.result, q.p),
        timing: Timing::new(&outcome.result, &outcome.stats),
    };
    match fmt {
        Format::Json => output::record(fmt, &report, output::stdout()),
        Format::Csv => {
            output::rows(fmt, &report.results, output::stdout())?;
            output::record(fmt, &report.timing, std::io::stderr().lock())
        }
    }
}

#[derive(Serialize)]
struct UpdateSummary {
    op: &'static str,
    id: String,
    reencrypted: usize,
    created: usize,
    applied: u32,
    entries: u64,
    rounds: u32,
    bytes_sent: u64,
    bytes_received: u64,
    client_ms: f64,
    cloud_ms: f64,
}

fn cmd_update(a: UpdateArgs, insert: bool, fmt: Format) -> Result<()> {
    let o = GeoObject::new(a.id.clone(), a.at.point(), a.at.keywords.clone())?;
    let mut session = open_session(&a.target)?;
    let receipt: UpdateReceipt = if insert {
        insert_object(&mut session.client, session.value_len, &o)?
    } else {
        delete_object(&mut session.client, session.value_len, &o)?
    };
    if let Some((cloud, path)) = &session.local {
        cloud
            .export()
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let s = &receipt.stats;
    let summary = UpdateSummary {
        op: if insert { "insert" } else { "delete" },
        id: a.id,
        reencrypted: receipt.reencrypted,
        created: receipt.created.len(),
        applied: receipt.ack.applied,
        entries: receipt.ack.entries,
        rounds: s.rounds,
        bytes_sent: s.bytes_sent,
        bytes_received: s.bytes_received,
        client_ms: ms(s.client_time()),
        cloud_ms: ms(s.cloud_time),
    };
    output::record(fmt, &summary, output::stdout())
}

fn cmd_bench(a: BenchArgs, fmt: Format) -> Result<()> {
    let ds = match &a.data {
        Some(path) => read_dataset(path)?,
        None => generate(&a.synth.spec()),
    };
    ensure!(!a.k_max.is_empty() && a.k_max.iter().all(|&k| k > 0), "k_max values must be positive");
    let cfg = BenchConfig {
        k_max_values: a.k_max,
        runs: a.runs,
        lambda: a.lambda,
        workload: Workload {
            queries: a.queries,
            range_fraction: a.range_fraction,
            k: a.k,
            kinds: a
                .kinds
                .iter()
                .map(|k| match k {
                    Kind::Rsk => BenchKind::Rsk,
                    Kind::Ksk => BenchKind::Ksk,
                })
                .collect(),
            seed: a.workload_seed,
        },
    };
    let rows = run_bench(&ds, &cfg)?;
    match &a.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
            output::rows(fmt, &rows, std::io::BufWriter::new(file))
        }
        None => output::rows(fmt, &rows, output::stdout()),
    }
}

#[derive(Serialize)]
struct GenSummary {
    objects: usize,
    keywords: usize,
    width: f64,
    out: PathBuf,
}

fn cmd_gen(a: GenArgs, fmt: Format) -> Result<()> {
    let spec = a.synth.spec();
    ensure!(spec.n > 0 && spec.keywords > 0, "--n and --keywords must be positive");
    let ds = generate(&spec);
    ds.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let summary = GenSummary {
        objects: ds.len(),
        keywords: ds.keywords().len(),
        width: ds.width,
        out: a.out,
    };
    output::record(fmt, &summary, output::stdout())
}

fn cmd_oracle(a: OracleArgs, fmt: Format) -> Result<()> {
    let ds = read_dataset(&a.data)?;
    let kws = a.at.keywords.clone();
    let q = match (a.r, a.k) {
        (Some(r), _) => QuerySpec::range(a.at.point(), kws, r)?,
        (None, Some(k)) => QuerySpec::knn(a.at.point(), kws, k)?,
        (None, None) => bail!("one of --r or --k is required"),
    };
    let result = oracle_answer(&ds.objects, &q);
    output::rows(fmt, &hits(&result, q.p), output::stdout())
}
