//! Off-line learning of the variable store.
//!
//! Unit paths get one variable per base interval, learned from the qualified
//! costs when more than `beta` trajectories exist and derived from the speed
//! limit otherwise. Adjacent intervals with similar distributions are merged
//! and rebuilt from the pooled samples. Longer paths are then learned level by
//! level from pairs of learned shorter paths that overlap in all but one edge.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::histogram::{
    build_nd, symmetric_kl, Bucket, HistError, HistParams, Histogram1D, HistogramND,
};
use crate::roadnet::{EdgeId, Path, RoadNetwork};
use crate::time::{interval_index, partition_day, TimeError, TimeInterval};
use crate::trajstore::{CostVector, TrajectoryStore};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Histogram(#[from] HistError),
    #[error("beta must be at least 1")]
    BadBeta,
    #[error("edge `{0}` is not in the network")]
    UnknownEdge(EdgeId),
}

/// Where a variable's histogram came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Learned,
    SpeedLimitFallback,
}

/// Learning parameters; recorded in the store's metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    /// Base interval width in minutes.
    pub alpha: u32,
    /// A variable is learned only from more than `beta` trajectories.
    pub beta: usize,
    pub hist: HistParams,
    /// Symmetric KL threshold for merging adjacent intervals.
    pub merge_tau: f64,
    /// Label of the cost channel (e.g. `travel-time`).
    pub cost_kind: String,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            alpha: 30,
            beta: 30,
            hist: HistParams::default(),
            merge_tau: 0.05,
            cost_kind: "travel-time".to_string(),
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        partition_day(self.alpha)?;
        if self.beta == 0 {
            return Err(LearnError::BadBeta);
        }
        if self.hist.folds < 2 {
            return Err(HistError::TooFewSamples {
                samples: 0,
                folds: self.hist.folds,
            }
            .into());
        }
        Ok(())
    }
}

/// Store metadata as written to model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub version: u32,
    pub alpha: u32,
    pub beta: usize,
    pub f: usize,
    pub sig: f64,
    pub resolution: f64,
    pub max_buckets: usize,
    pub merge_tau: f64,
    pub cost_kind: String,
    pub seed: u64,
}

impl StoreMeta {
    pub fn from_params(p: &LearnParams) -> Self {
        StoreMeta {
            version: MODEL_VERSION,
            alpha: p.alpha,
            beta: p.beta,
            f: p.hist.folds,
            sig: p.hist.sig,
            resolution: p.hist.resolution,
            max_buckets: p.hist.max_buckets,
            merge_tau: p.merge_tau,
            cost_kind: p.cost_kind.clone(),
            seed: p.hist.seed,
        }
    }

    pub fn params(&self) -> LearnParams {
        LearnParams {
            alpha: self.alpha,
            beta: self.beta,
            hist: HistParams {
                folds: self.f,
                sig: self.sig,
                resolution: self.resolution,
                max_buckets: self.max_buckets,
                seed: self.seed,
            },
            merge_tau: self.merge_tau,
            cost_kind: self.cost_kind.clone(),
        }
    }
}

/// A histogram over a path's edges during a time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedVariable {
    pub path: Path,
    pub interval: TimeInterval,
    pub support: usize,
    pub source: Source,
    pub hist: HistogramND,
}

impl LearnedVariable {
    pub fn rank(&self) -> usize {
        self.path.len()
    }

    /// Smallest and largest represented total cost, in minutes.
    pub fn minute_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.hist.sum_bounds();
        (lo / 60.0, hi / 60.0)
    }

    pub fn is_learned(&self) -> bool {
        self.source == Source::Learned
    }
}

/// The learned variables with lookup by first edge.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableStore {
    meta: StoreMeta,
    vars: Vec<LearnedVariable>,
    by_first: HashMap<EdgeId, Vec<usize>>,
}

impl VariableStore {
    /// Assembles a store; variables are ordered by first edge, rank and interval.
    pub fn new(meta: StoreMeta, mut vars: Vec<LearnedVariable>) -> Self {
        vars.sort_by(|a, b| {
            (a.path.first(), a.rank(), &a.path, a.interval).cmp(&(
                b.path.first(),
                b.rank(),
                &b.path,
                b.interval,
            ))
        });
        let mut by_first: HashMap<EdgeId, Vec<usize>> = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            by_first.entry(v.path.first().clone()).or_default().push(i);
        }
        VariableStore {
            meta,
            vars,
            by_first,
        }
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub fn variables(&self) -> &[LearnedVariable] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: usize) -> &LearnedVariable {
        &self.vars[id]
    }

    /// Ids of variables whose path starts with `edge`, by rank then interval.
    pub fn starting_with(&self, edge: &EdgeId) -> &[usize] {
        self.by_first.get(edge).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ids of the variables on exactly `path`.
    pub fn for_path(&self, path: &Path) -> Vec<usize> {
        self.starting_with(path.first())
            .iter()
            .copied()
            .filter(|&i| self.vars[i].path == *path)
            .collect()
    }

    /// Count of variables per rank (index 0 holds rank 1).
    pub fn count_by_rank(&self, learned_only: bool) -> Vec<usize> {
        let max = self
            .vars
            .iter()
            .map(LearnedVariable::rank)
            .max()
            .unwrap_or(0);
        let mut out = vec![0; max];
        for v in &self.vars {
            if !learned_only || v.is_learned() {
                out[v.rank() - 1] += 1;
            }
        }
        out
    }

    pub fn max_rank(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.is_learned())
            .map(LearnedVariable::rank)
            .max()
            .unwrap_or(0)
    }
}

/// Restricts learning, for evaluation.
#[derive(Debug, Clone, Default)]
pub struct LearnScope {
    /// Learn only sub-paths of this path.
    pub within: Option<Path>,
    /// Trajectory indices to ignore.
    pub exclude: Vec<usize>,
}

struct Segment {
    interval: TimeInterval,
    source: Source,
    members: Vec<usize>,
    hist: HistogramND,
}

/// Learns the full store: unit variables for every edge, then joints.
pub fn build_store(
    network: &RoadNetwork,
    trajectories: &TrajectoryStore,
    params: &LearnParams,
) -> Result<VariableStore, LearnError> {
    build_store_scoped(network, trajectories, params, &LearnScope::default())
}

pub fn build_store_scoped(
    network: &RoadNetwork,
    trajectories: &TrajectoryStore,
    params: &LearnParams,
    scope: &LearnScope,
) -> Result<VariableStore, LearnError> {
    params.validate()?;
    let mut excluded = vec![false; trajectories.len()];
    for &i in &scope.exclude {
        if i < excluded.len() {
            excluded[i] = true;
        }
    }
    let edges: Vec<EdgeId> = match &scope.within {
        Some(p) => p.edges().to_vec(),
        None => network.edges().map(|e| e.id.clone()).collect(),
    };
    let mut vars = Vec::new();
    let mut level: BTreeMap<Path, Vec<CostVector>> = BTreeMap::new();
    for id in &edges {
        let path = network
            .path([id.clone()])
            .map_err(|_| LearnError::UnknownEdge(id.clone()))?;
        let mut occ = trajectories.occurrences(&path);
        occ.retain(|c| !excluded[c.trajectory]);
        let unit = learn_path(network, &path, &occ, params)?;
        if unit.iter().any(LearnedVariable::is_learned) {
            level.insert(path, occ);
        }
        vars.extend(unit);
    }
    vars.extend(learn_joints_from(
        network,
        trajectories,
        params,
        level,
        scope.within.as_ref(),
    )?);
    Ok(VariableStore::new(StoreMeta::from_params(params), vars))
}

/// Variables of a unit path, with the speed-limit fallback filling sparse intervals.
pub fn learn_unit(
    network: &RoadNetwork,
    edge: &EdgeId,
    params: &LearnParams,
    trajectories: &TrajectoryStore,
) -> Result<Vec<LearnedVariable>, LearnError> {
    params.validate()?;
    let path = network
        .path([edge.clone()])
        .map_err(|_| LearnError::UnknownEdge(edge.clone()))?;
    learn_path(network, &path, &trajectories.occurrences(&path), params)
}

/// Variables of rank 2 and above, given a store of learned unit variables.
pub fn learn_joints(
    network: &RoadNetwork,
    trajectories: &TrajectoryStore,
    params: &LearnParams,
    units: &VariableStore,
) -> Result<Vec<LearnedVariable>, LearnError> {
    let mut level = BTreeMap::new();
    for v in units.variables() {
        if v.rank() == 1 && v.is_learned() && !level.contains_key(&v.path) {
            level.insert(v.path.clone(), trajectories.occurrences(&v.path));
        }
    }
    learn_joints_from(network, trajectories, params, level, None)
}

fn learn_joints_from(
    network: &RoadNetwork,
    trajectories: &TrajectoryStore,
    params: &LearnParams,
    mut level: BTreeMap<Path, Vec<CostVector>>,
    within: Option<&Path>,
) -> Result<Vec<LearnedVariable>, LearnError> {
    let mut out = Vec::new();
    let mut k = 2;
    while !level.is_empty() {
        // Learned (k−1)-paths indexed by their first k−2 edges.
        let mut by_prefix: HashMap<&[EdgeId], Vec<&Path>> = HashMap::new();
        for p in level.keys() {
            by_prefix.entry(&p.edges()[..k - 2]).or_default().push(p);
        }
        let mut next: BTreeMap<Path, Vec<CostVector>> = BTreeMap::new();
        for (q, occ) in &level {
            let Some(partners) = by_prefix.get(&q.edges()[1..]) else {
                continue;
            };
            for r in partners {
                let last = r.slice(k - 2..k - 1);
                let Ok(Some(p)) = network.concat(q, &last) else {
                    continue;
                };
                if within.is_some_and(|w| !w.contains_subpath(&p)) || next.contains_key(&p) {
                    continue;
                }
                let ext = trajectories.extend_occurrences(occ, last.first());
                let learned = learn_path(network, &p, &ext, params)?;
                if !learned.is_empty() {
                    out.extend(learned);
                    next.insert(p, ext);
                }
            }
        }
        level = next;
        k += 1;
    }
    Ok(out)
}

fn fallback_hist(
    network: &RoadNetwork,
    edge: &EdgeId,
    resolution: f64,
) -> Result<HistogramND, LearnError> {
    let e = network
        .require(edge)
        .map_err(|_| LearnError::UnknownEdge(edge.clone()))?;
    let l = e.free_flow_seconds();
    let h = Histogram1D::new(vec![(Bucket::new(l, l + resolution)?, 1.0)])?;
    Ok(h.to_nd(edge.clone()))
}

fn build_hist(
    path: &Path,
    occ: &[CostVector],
    members: &[usize],
    params: &HistParams,
) -> Result<HistogramND, HistError> {
    let vectors: Vec<&[f64]> = members.iter().map(|&i| occ[i].costs.as_slice()).collect();
    build_nd(&vectors, path.edges().to_vec(), params)
}

/// Interval variables for one path from its occurrences; unit paths also get
/// fallback variables for sparse intervals.
fn learn_path(
    network: &RoadNetwork,
    path: &Path,
    occ: &[CostVector],
    params: &LearnParams,
) -> Result<Vec<LearnedVariable>, LearnError> {
    let intervals = partition_day(params.alpha)?;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); intervals.len()];
    for (i, c) in occ.iter().enumerate() {
        bins[interval_index(params.alpha, c.minute)].push(i);
    }
    let unit = path.len() == 1;
    let fallback = if unit {
        Some(fallback_hist(
            network,
            path.first(),
            params.hist.resolution,
        )?)
    } else {
        None
    };
    let mut segments = Vec::new();
    for (interval, members) in intervals.into_iter().zip(bins) {
        if members.len() > params.beta {
            let hist = build_hist(path, occ, &members, &params.hist)?;
            segments.push(Segment {
                interval,
                source: Source::Learned,
                members,
                hist,
            });
        } else if let Some(fb) = &fallback {
            segments.push(Segment {
                interval,
                source: Source::SpeedLimitFallback,
                members,
                hist: fb.clone(),
            });
        }
    }
    merge_segments(&mut segments, path, occ, params)?;
    Ok(segments
        .into_iter()
        .map(|s| LearnedVariable {
            path: path.clone(),
            interval: s.interval,
            support: s.members.len(),
            source: s.source,
            hist: s.hist,
        })
        .collect())
}

/// Greedy left-to-right merging of touching, same-source, similar intervals,
/// repeated until a pass merges nothing.
fn merge_segments(
    segments: &mut Vec<Segment>,
    path: &Path,
    occ: &[CostVector],
    params: &LearnParams,
) -> Result<(), LearnError> {
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < segments.len() {
            let (a, b) = (&segments[i], &segments[i + 1]);
            let joined = a.interval.join(&b.interval);
            let similar = match joined {
                Some(_) if a.source == b.source => {
                    a.source == Source::SpeedLimitFallback
                        || symmetric_kl(&a.hist, &b.hist)? <= params.merge_tau
                }
                _ => false,
            };
            if !similar {
                i += 1;
                continue;
            }
            let b = segments.remove(i + 1);
            let a = &mut segments[i];
            a.interval = joined.expect("touching intervals");
            a.members.extend(b.members);
            a.members.sort_unstable();
            if a.source == Source::Learned {
                a.hist = build_hist(path, occ, &a.members, &params.hist)?;
            }
            changed = true;
        }
        if !changed {
            return Ok(());
        }
    }
}
