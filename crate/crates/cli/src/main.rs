//! `pathdist`: learn, query, evaluate and generate.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use pathdist_core::eval::{parse_paths, run_eval, EvalOptions, TruthSource};
use pathdist_core::model::Model;
use pathdist_core::synthgen::{gen_trajectories, model_network, GroundTruthModel, TRUTH_DRAWS};
use pathdist_core::time::{format_clock, parse_clock};
use pathdist_core::trajstore::write_jsonl;
use pathdist_core::{
    build_store, EdgeId, EstimateError, EstimationResult, LearnParams, Method, RoadNetwork, Source,
    TrajectoryStore,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "pathdist",
    version,
    about = "Travel-cost distributions of road-network paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model from a network and trajectories.
    Learn(LearnArgs),
    /// Estimate the cost distribution of a path at a departure time.
    Query(QueryArgs),
    /// Compare methods against ground truth; writes CSV.
    Eval(EvalArgs),
    /// Generate a synthetic network and trajectories from a model spec.
    Gen(GenArgs),
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    /// Base interval width in minutes.
    #[arg(long, default_value_t = 30)]
    alpha: u32,
    /// Minimum qualified trajectories, exclusive.
    #[arg(long, default_value_t = 30)]
    beta: usize,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Relative error decrease that justifies another bucket.
    #[arg(long, default_value_t = 0.1)]
    sig: f64,
    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated edge ids.
    #[arg(long)]
    path: String,
    /// Departure time, HH:MM.
    #[arg(long)]
    depart: String,
    #[arg(long, default_value = "ocrv")]
    method: String,
    /// Trajectories, needed by `aob`.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Seed for `crv-random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// One `<edge,edge,...> <HH:MM>` query per line.
    #[arg(long = "paths-file")]
    paths_file: PathBuf,
    /// `holdout` (needs `--traj`) or a generator spec file.
    #[arg(long)]
    truth: String,
    /// Trajectories for holdout truth, or for `aob` under model truth.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, default_value = "lb,hp,crv-random,ocrv")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    trajs: usize,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// A failure and its exit code.
enum Failure {
    Input(anyhow::Error),
    Estimate(EstimateError),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Estimate(e)) => {
            eprintln!("estimation failed: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_network(path: &FsPath) -> anyhow::Result<RoadNetwork> {
    RoadNetwork::from_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn read_trajectories(network: &RoadNetwork, path: &FsPath) -> anyhow::Result<TrajectoryStore> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TrajectoryStore::read_jsonl(network, BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &FsPath) -> anyhow::Result<Model> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Model::read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn learn(a: LearnArgs) -> CmdResult {
    let mut params = LearnParams {
        alpha: a.alpha,
        beta: a.beta,
        ..LearnParams::default()
    };
    params.hist.folds = a.folds;
    params.hist.sig = a.sig;
    params.hist.seed = a.seed;
    params.validate().context("invalid parameters")?;
    let network = read_network(&a.network)?;
    let trajs = read_trajectories(&network, &a.traj)?;
    let store = build_store(&network, &trajs, &params).context("learning")?;

    let model = Model::new(network, store);
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    model.write(BufWriter::new(file)).context("writing model")?;

    let learned = model.store.count_by_rank(true);
    for (rank, n) in learned.iter().enumerate().skip(1).filter(|x| *x.1 > 0) {
        println!("rank {rank}: {n} learned variables");
    }
    let fallback = model
        .store
        .variables()
        .iter()
        .filter(|v| v.source == Source::SpeedLimitFallback)
        .count();
    println!("fallback variables: {fallback}");
    // Edges covered by learned variables over edges with any traversal record.
    let covered: BTreeSet<&EdgeId> = model
        .store
        .variables()
        .iter()
        .filter(|v| v.is_learned())
        .flat_map(|v| v.path.edges())
        .collect();
    let recorded = model
        .network
        .edges()
        .filter(|e| trajs.edge_record_count(&e.id) > 0)
        .count();
    let ratio = if recorded == 0 {
        0.0
    } else {
        covered.len() as f64 / recorded as f64
    };
    println!(
        "coverage: {} of {recorded} recorded edges ({ratio:.3})",
        covered.len()
    );
    let raw: usize = model
        .store
        .variables()
        .iter()
        .filter(|v| v.is_learned())
        .map(|v| v.support * v.rank())
        .sum();
    let size = fs::metadata(&a.out).map(|m| m.len()).unwrap_or(0);
    println!(
        "model: {size} bytes for {raw} raw cost samples ({} bytes as f64)",
        raw * 8
    );
    Ok(())
}

#[derive(Serialize)]
struct BucketOut {
    l: f64,
    u: f64,
    pr: f64,
}

#[derive(Serialize)]
struct CrvOut<'a> {
    path: Vec<&'a str>,
    interval: [u32; 2],
    rank: usize,
}

#[derive(Serialize)]
struct QueryOut<'a> {
    path: Vec<&'a str>,
    depart: String,
    method: String,
    buckets: Vec<BucketOut>,
    entropy: f64,
    crv: Vec<CrvOut<'a>>,
}

fn parse_method(s: &str) -> anyhow::Result<Method> {
    s.parse().map_err(|e: String| anyhow!(e))
}

fn query(a: QueryArgs) -> CmdResult {
    let method = parse_method(&a.method)?;
    let depart = parse_clock(&a.depart).context("--depart")?;
    let model = read_model(&a.model)?;
    let path = model
        .network
        .path(a.path.split(',').map(|s| EdgeId::from(s.trim())))
        .context("--path")?;
    let trajs = match (&a.traj, method) {
        (Some(t), _) => Some(read_trajectories(&model.network, t)?),
        (None, Method::Aob) => return Err(anyhow!("--method aob needs --traj").into()),
        (None, _) => None,
    };
    let result = pathdist_core::baselines::run_method(
        method,
        &path,
        depart,
        &model.store,
        trajs.as_ref(),
        a.seed,
    )
    .map_err(Failure::Estimate)?;
    let out = query_output(&model, &path, depart, &result);
    let mut stdout = io::stdout().lock();
    serde_json::to_writer(&mut stdout, &out).context("writing result")?;
    writeln!(stdout).context("writing result")?;
    Ok(())
}

fn query_output<'a>(
    model: &'a Model,
    path: &'a pathdist_core::Path,
    depart: f64,
    r: &EstimationResult,
) -> QueryOut<'a> {
    QueryOut {
        path: path.edges().iter().map(EdgeId::as_str).collect(),
        depart: format_clock(depart),
        method: r.method.to_string(),
        buckets: r
            .marginal
            .buckets()
            .iter()
            .map(|(b, pr)| BucketOut {
                l: b.l,
                u: b.u,
                pr: *pr,
            })
            .collect(),
        entropy: r.entropy,
        crv: r
            .crv
            .iter()
            .map(|c| {
                let v = model.store.get(c.var);
                CrvOut {
                    path: v.path.edges().iter().map(EdgeId::as_str).collect(),
                    interval: v.interval.into(),
                    rank: v.rank(),
                }
            })
            .collect(),
    }
}

fn eval(a: EvalArgs) -> CmdResult {
    let methods = a
        .method
        .split(',')
        .map(|m| parse_method(m.trim()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let model = read_model(&a.model)?;
    let text = fs::read_to_string(&a.paths_file)
        .with_context(|| format!("reading {}", a.paths_file.display()))?;
    let queries = parse_paths(&model.network, &text).context("--paths-file")?;
    let trajs = a
        .traj
        .as_deref()
        .map(|t| read_trajectories(&model.network, t))
        .transpose()?;
    let options = EvalOptions {
        methods,
        seed: a.seed,
        ..EvalOptions::default()
    };
    let params = model.store.meta().params();
    let report = if a.truth == "holdout" {
        let Some(trajectories) = trajs.as_ref() else {
            return Err(anyhow!("--truth holdout needs --traj").into());
        };
        let truth = TruthSource::Holdout {
            network: &model.network,
            trajectories,
            params: &params,
        };
        run_eval(&queries, &truth, &options)
    } else {
        let spec = read_spec(FsPath::new(&a.truth))?;
        let truth = TruthSource::Model {
            model: &spec,
            store: &model.store,
            draws: TRUTH_DRAWS,
            trajectories: trajs.as_ref(),
        };
        run_eval(&queries, &truth, &options)
    };
    for f in &report.failures {
        eprintln!("skipped: {f}");
    }
    match &a.out {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            report
                .write_csv(BufWriter::new(file))
                .context("writing report")?;
        }
        None => report
            .write_csv(io::stdout().lock())
            .context("writing report")?,
    }
    if !queries.is_empty() && report.rows.is_empty() {
        return Err(Failure::Input(anyhow!("no query could be evaluated")));
    }
    Ok(())
}

fn read_spec(path: &FsPath) -> anyhow::Result<GroundTruthModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: GroundTruthModel =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.validate()
        .with_context(|| format!("checking {}", path.display()))?;
    Ok(spec)
}

fn gen(a: GenArgs) -> CmdResult {
    let mut spec = read_spec(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let network = model_network(&spec).context("building network")?;
    let trajs = gen_trajectories(&spec, &network, a.trajs).context("generating trajectories")?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let net_path = a.out.join("network.csv");
    fs::write(&net_path, network.to_csv_string())
        .with_context(|| format!("writing {}", net_path.display()))?;
    let traj_path = a.out.join("trajectories.jsonl");
    let file =
        File::create(&traj_path).with_context(|| format!("creating {}", traj_path.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, &trajs)
        .and_then(|()| w.flush())
        .with_context(|| format!("writing {}", traj_path.display()))?;
    println!(
        "{} edges, {} trajectories",
        network.edge_count(),
        trajs.len()
    );
    Ok(())
}
