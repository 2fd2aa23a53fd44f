//! Accuracy and cost evaluation of the estimation methods against ground truth.
//!
//! With trajectory ground truth every query holds out its own qualified
//! trajectories: the truth is built from them and a store scoped to the query
//! path is learned from everything else. A generator model gives the truth by
//! simulation instead and the given store is used as is.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Exp, Gamma, Normal};
use statrs::function::gamma::digamma;

use crate::baselines::run_method;
use crate::estimator::{EstimateError, EstimationResult, Method};
use crate::histogram::{build_1d, kl_divergence_1d, Bucket, HistError, HistParams, Histogram1D};
use crate::learner::{build_store_scoped, LearnError, LearnParams, LearnScope, VariableStore};
use crate::roadnet::{EdgeId, Path, RoadNetwork};
use crate::synthgen::{ground_truth_marginal_with, GroundTruthModel, SynthError};
use crate::time::{format_clock, interval_index, parse_clock, partition_day, TimeInterval};
use crate::trajstore::TrajectoryStore;

/// Column order of evaluation reports.
pub const REPORT_HEADER: [&str; 8] = [
    "path",
    "depart",
    "method",
    "cardinality",
    "kl",
    "entropy",
    "micros",
    "variables_used",
];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("paths file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no ground truth for {path} at {depart}: {count} qualified trajectories (need more than {beta})")]
    MissingTruth {
        path: String,
        depart: String,
        count: usize,
        beta: usize,
    },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Histogram(#[from] HistError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub path: Path,
    /// Departure, minutes of day.
    pub depart: f64,
}

impl QuerySpec {
    pub fn path_label(&self) -> String {
        join_path(&self.path)
    }
}

fn join_path(p: &Path) -> String {
    p.edges()
        .iter()
        .map(EdgeId::as_str)
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses `edge,edge,... HH:MM` lines; blank lines and `#` comments are skipped.
pub fn parse_paths(network: &RoadNetwork, text: &str) -> Result<Vec<QuerySpec>, EvalError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Parse {
            line: i + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(edges), Some(depart), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected `<edge,edge,...> <HH:MM>`".into()));
        };
        let path = network
            .path(edges.split(',').map(EdgeId::from))
            .map_err(|e| err(e.to_string()))?;
        let depart = parse_clock(depart).map_err(|e| err(e.to_string()))?;
        out.push(QuerySpec { path, depart });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub path: String,
    pub depart: String,
    pub method: String,
    pub cardinality: usize,
    pub kl: f64,
    pub entropy: f64,
    pub micros: f64,
    pub variables_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Queries or methods that produced no row, with the reason.
    pub failures: Vec<String>,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Mean KL of `method` over rows with the given cardinality.
    pub fn mean_kl(&self, method: &str, cardinality: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.cardinality == cardinality)
            .map(|r| r.kl)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub enum TruthSource<'a> {
    Holdout {
        network: &'a RoadNetwork,
        trajectories: &'a TrajectoryStore,
        params: &'a LearnParams,
    },
    Model {
        model: &'a GroundTruthModel,
        store: &'a VariableStore,
        draws: usize,
        trajectories: Option<&'a TrajectoryStore>,
    },
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    /// Timed repetitions per (query, method).
    pub repetitions: usize,
    pub seed: u64,
    /// Add parametric-fit rows for unit-path queries.
    pub fits: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            methods: vec![Method::Lb, Method::Hp, Method::CrvRandom, Method::Ocrv],
            repetitions: 100,
            seed: 0,
            fits: true,
        }
    }
}

/// The α-interval containing `t`.
pub fn interval_at(alpha: u32, t: f64) -> TimeInterval {
    partition_day(alpha).expect("validated alpha")[interval_index(alpha, t)]
}

/// A holdout split for one query.
pub struct Holdout {
    pub truth: Histogram1D,
    pub samples: Vec<f64>,
    pub excluded: Vec<usize>,
    pub store: VariableStore,
}

/// Builds the truth from the query's qualified trajectories and learns a
/// store restricted to the query path from all the others.
pub fn holdout(
    network: &RoadNetwork,
    trajectories: &TrajectoryStore,
    params: &LearnParams,
    q: &QuerySpec,
) -> Result<Holdout, EvalError> {
    let interval = interval_at(params.alpha, q.depart);
    let occ = trajectories.qualified(&q.path, &interval);
    if occ.len() <= params.beta {
        return Err(EvalError::MissingTruth {
            path: q.path_label(),
            depart: format_clock(q.depart),
            count: occ.len(),
            beta: params.beta,
        });
    }
    let samples: Vec<f64> = occ.iter().map(|c| c.total()).collect();
    let truth = build_1d(&samples, &params.hist)?;
    let excluded: Vec<usize> = occ
        .iter()
        .map(|c| c.trajectory)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let scope = LearnScope {
        within: Some(q.path.clone()),
        exclude: excluded.clone(),
    };
    let store = build_store_scoped(network, trajectories, params, &scope)?;
    Ok(Holdout {
        truth,
        samples,
        excluded,
        store,
    })
}

fn timed(
    method: Method,
    q: &QuerySpec,
    store: &VariableStore,
    trajectories: Option<&TrajectoryStore>,
    seed: u64,
    repetitions: usize,
) -> (Result<EstimationResult, EstimateError>, f64) {
    let start = Instant::now();
    let mut result = run_method(method, &q.path, q.depart, store, trajectories, seed);
    for _ in 1..repetitions.max(1) {
        result = run_method(method, &q.path, q.depart, store, trajectories, seed);
    }
    let micros = start.elapsed().as_secs_f64() * 1e6 / repetitions.max(1) as f64;
    (result, micros)
}

/// Rows for one query against a known truth.
pub fn evaluate_query(
    q: &QuerySpec,
    truth: &Histogram1D,
    store: &VariableStore,
    trajectories: Option<&TrajectoryStore>,
    options: &EvalOptions,
    seed: u64,
    report: &mut EvalReport,
) {
    for &m in &options.methods {
        let (result, micros) = timed(m, q, store, trajectories, seed, options.repetitions);
        match result {
            Ok(r) => report.rows.push(EvalRow {
                path: q.path_label(),
                depart: format_clock(q.depart),
                method: m.to_string(),
                cardinality: q.path.len(),
                kl: kl_divergence_1d(truth, &r.marginal),
                entropy: r.entropy,
                micros,
                variables_used: r.variables_used,
            }),
            Err(e) => report.failures.push(format!(
                "{} {} {m}: {e}",
                q.path_label(),
                format_clock(q.depart)
            )),
        }
    }
}

fn fit_rows(q: &QuerySpec, samples: &[f64], params: &HistParams, report: &mut EvalReport) {
    match parametric_fits(samples, params) {
        Ok(fits) => {
            for (name, kl) in fits {
                report.rows.push(EvalRow {
                    path: q.path_label(),
                    depart: format_clock(q.depart),
                    method: name.to_string(),
                    cardinality: 1,
                    kl,
                    entropy: f64::NAN,
                    micros: 0.0,
                    variables_used: 1,
                });
            }
        }
        Err(e) => report
            .failures
            .push(format!("{} fits: {e}", q.path_label())),
    }
}

/// Evaluates every query with every requested method. Row order follows the
/// query order, then the method order.
pub fn run_eval(
    queries: &[QuerySpec],
    truth: &TruthSource<'_>,
    options: &EvalOptions,
) -> EvalReport {
    let mut report = EvalReport::default();
    for (i, q) in queries.iter().enumerate() {
        let seed = options.seed.wrapping_add(i as u64);
        match truth {
            TruthSource::Holdout {
                network,
                trajectories,
                params,
            } => match holdout(network, trajectories, params, q) {
                Ok(h) => {
                    evaluate_query(q, &h.truth, &h.store, None, options, seed, &mut report);
                    if options.fits && q.path.len() == 1 {
                        fit_rows(q, &h.samples, &params.hist, &mut report);
                    }
                }
                Err(e) => report.failures.push(e.to_string()),
            },
            TruthSource::Model {
                model,
                store,
                draws,
                trajectories,
            } => {
                let meta = store.meta();
                let interval = interval_at(meta.alpha, q.depart);
                match ground_truth_marginal_with(model, &q.path, &interval, meta.resolution, *draws)
                {
                    Ok(t) => {
                        evaluate_query(q, &t, store, *trajectories, options, seed, &mut report)
                    }
                    Err(e) => report.failures.push(format!("{}: {e}", q.path_label())),
                }
            }
        }
    }
    report
}

/// Histogram of samples on cells `[k·res, (k+1)·res)`.
pub fn empirical(samples: &[f64], resolution: f64) -> Result<Histogram1D, HistError> {
    if samples.is_empty() {
        return Err(HistError::Empty);
    }
    let mut cells: Vec<i64> = samples
        .iter()
        .map(|v| (v / resolution).floor() as i64)
        .collect();
    cells.sort_unstable();
    let mut buckets: Vec<(Bucket, f64)> = Vec::new();
    for k in cells {
        let l = k as f64 * resolution;
        match buckets.last_mut() {
            Some(b) if b.0.l == l => b.1 += 1.0,
            _ => buckets.push((
                Bucket {
                    l,
                    u: l + resolution,
                },
                1.0,
            )),
        }
    }
    Histogram1D::normalized(buckets)
}

/// A continuous distribution discretized on resolution cells spanning the
/// data range and its central 99.9% mass.
fn discretize(
    d: &dyn ContinuousCDF<f64, f64>,
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Result<Histogram1D, HistError> {
    let a = lo.min(d.inverse_cdf(0.0005));
    let b = hi.max(d.inverse_cdf(0.9995));
    let mut width = resolution;
    while (b - a) / width > 100_000.0 {
        width *= 2.0;
    }
    let start = (a / width).floor() * width;
    let mut buckets = Vec::new();
    let mut l = start;
    while l < b {
        let u = l + width;
        let m = d.cdf(u) - d.cdf(l);
        if m > 0.0 {
            buckets.push((Bucket { l, u }, m));
        }
        l = u;
    }
    Histogram1D::normalized(buckets)
}

/// Maximum-likelihood gamma shape and rate.
pub fn gamma_mle(samples: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = samples.iter().map(|&x| x.max(1e-6)).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let s = mean.ln() - xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    if !(s > 1e-12) {
        return (1e6, 1e6 / mean);
    }
    // ln k − ψ(k) falls monotonically from +∞ to 0.
    let (mut lo, mut hi) = (1e-8f64.ln(), 1e8f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k = mid.exp();
        if k.ln() - digamma(k) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    (k, k / mean)
}

/// KL from the empirical distribution to the automatic histogram and to
/// Gaussian, gamma and exponential maximum-likelihood fits of the same samples.
pub fn parametric_fits(
    samples: &[f64],
    params: &HistParams,
) -> Result<Vec<(&'static str, f64)>, HistError> {
    let truth = empirical(samples, params.resolution)?;
    let auto = build_1d(samples, params)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (lo, hi) = (truth.min(), truth.max());
    let bad = |e: statrs::distribution::NormalError| HistError::Malformed(e.to_string());
    let normal = Normal::new(mean, var.sqrt().max(params.resolution * 1e-3)).map_err(bad)?;
    let (k, rate) = gamma_mle(samples);
    let gamma = Gamma::new(k, rate).map_err(|e| HistError::Malformed(e.to_string()))?;
    let exp = Exp::new(1.0 / mean.max(1e-9)).map_err(|e| HistError::Malformed(e.to_string()))?;
    let r = params.resolution;
    Ok(vec![
        ("fit-auto", kl_divergence_1d(&truth, &auto)),
        (
            "fit-gaussian",
            kl_divergence_1d(&truth, &discretize(&normal, lo, hi, r)?),
        ),
        (
            "fit-gamma",
            kl_divergence_1d(&truth, &discretize(&gamma, lo, hi, r)?),
        ),
        (
            "fit-exponential",
            kl_divergence_1d(&truth, &discretize(&exp, lo, hi, r)?),
        ),
    ])
}
