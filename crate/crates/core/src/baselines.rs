//! Reference estimators the optimal candidate set is compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimator::{
    candidate_array, crv_entropy, estimate, estimate_joint, pick_interval, unit_chain, Candidate,
    CandidateArray, Crv, EntropyCache, EstimateError, EstimationResult, Method,
};
use crate::histogram::{build_1d, convolve, entropy_1d, HistParams, Histogram1D};
use crate::learner::VariableStore;
use crate::roadnet::Path;
use crate::time::{interval_index, partition_day};
use crate::trajstore::TrajectoryStore;

/// Histogram of total path costs straight from the qualified trajectories of
/// the α-interval containing `t`. Needs more than `beta` of them.
pub fn aob(
    p: &Path,
    t: f64,
    trajectories: &TrajectoryStore,
    alpha: u32,
    beta: usize,
    params: &HistParams,
) -> Result<EstimationResult, EstimateError> {
    let intervals = partition_day(alpha).map_err(|e| EstimateError::InvalidCrv(e.to_string()))?;
    let interval = intervals[interval_index(alpha, t)];
    let totals: Vec<f64> = trajectories
        .qualified(p, &interval)
        .iter()
        .map(|c| c.total())
        .collect();
    if totals.len() <= beta {
        return Err(EstimateError::Sparse {
            count: totals.len(),
            beta,
        });
    }
    let marginal = build_1d(&totals, params)?;
    Ok(EstimationResult {
        method: Method::Aob,
        entropy: entropy_1d(&marginal),
        marginal,
        crv: Vec::new(),
        variables_used: 1,
    })
}

fn unit_ids(p: &Path, t: f64, store: &VariableStore) -> Result<Vec<usize>, EstimateError> {
    let (_, units) = unit_chain(p, t, store);
    units
        .into_iter()
        .enumerate()
        .map(|(i, u)| u.ok_or_else(|| EstimateError::Uncoverable(p.edges()[i].clone())))
        .collect()
}

fn unit_1d(store: &VariableStore, v: usize) -> Histogram1D {
    store
        .get(v)
        .hist
        .to_1d()
        .expect("unit variables are one-dimensional")
}

/// Convolution of per-edge unit variables, each chosen for its arrival window.
pub fn lb(p: &Path, t: f64, store: &VariableStore) -> Result<EstimationResult, EstimateError> {
    let units = unit_ids(p, t, store)?;
    let mut acc = unit_1d(store, units[0]);
    let mut h = entropy_1d(&acc);
    for &u in &units[1..] {
        let next = unit_1d(store, u);
        h += entropy_1d(&next);
        acc = convolve(&acc, &next);
    }
    Ok(EstimationResult {
        method: Method::Lb,
        marginal: acc,
        entropy: h,
        crv: units
            .iter()
            .enumerate()
            .map(|(i, &var)| Candidate {
                var,
                start: i,
                end: i + 1,
            })
            .collect(),
        variables_used: units.len(),
    })
}

/// Chain of adjacent-pair variables. Where a pair has no learned variable the
/// chain breaks and the pieces are convolved, single edges using their unit
/// variables.
pub fn hp(p: &Path, t: f64, store: &VariableStore) -> Result<EstimationResult, EstimateError> {
    let n = p.len();
    let (windows, units) = unit_chain(p, t, store);
    let pairs: Vec<Option<usize>> = (0..n.saturating_sub(1))
        .map(|i| {
            let ids: Vec<usize> = store
                .for_path(&p.slice(i..i + 2))
                .into_iter()
                .filter(|&v| store.get(v).is_learned())
                .collect();
            pick_interval(store, &ids, &windows[i])
        })
        .collect();
    let mut cache = EntropyCache::new();
    let mut pieces: Vec<Crv> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut members = Vec::new();
        while i + 1 < n {
            let Some(var) = pairs[i] else {
                break;
            };
            members.push(Candidate {
                var,
                start: i,
                end: i + 2,
            });
            i += 1;
        }
        if members.is_empty() {
            let var = units[i].ok_or_else(|| EstimateError::Uncoverable(p.edges()[i].clone()))?;
            members.push(Candidate {
                var,
                start: i,
                end: i + 1,
            });
        }
        i += 1;
        pieces.push(Crv { members });
    }
    let mut marginal: Option<Histogram1D> = None;
    let mut h = 0.0;
    let mut crv = Vec::new();
    for piece in pieces {
        let offset = piece.members[0].start;
        let local = Crv {
            members: piece
                .members
                .iter()
                .map(|c| Candidate {
                    var: c.var,
                    start: c.start - offset,
                    end: c.end - offset,
                })
                .collect(),
        };
        h += crv_entropy(&local, store, &mut cache);
        let m = estimate_joint(&local, store)?;
        marginal = Some(match marginal {
            None => m,
            Some(acc) => convolve(&acc, &m),
        });
        crv.extend(piece.members);
    }
    Ok(EstimationResult {
        method: Method::Hp,
        marginal: marginal.expect("non-empty path"),
        entropy: h,
        variables_used: crv.len(),
        crv,
    })
}

/// Number of valid chains continuing from each candidate (candidates sorted).
fn chain_counts(nodes: &[Candidate], n: usize) -> Vec<f64> {
    let mut counts = vec![0.0; nodes.len()];
    for j in (0..nodes.len()).rev() {
        let v = nodes[j];
        counts[j] = if v.end == n {
            1.0
        } else {
            (j + 1..nodes.len())
                .filter(|&k| follows(&v, &nodes[k]))
                .map(|k| counts[k])
                .sum()
        };
    }
    counts
}

fn follows(a: &Candidate, b: &Candidate) -> bool {
    a.start < b.start && b.start <= a.end && a.end < b.end
}

fn weighted_pick(rng: &mut ChaCha8Rng, options: &[(usize, f64)]) -> usize {
    let total: f64 = options.iter().map(|o| o.1).sum();
    let mut x = rng.gen::<f64>() * total;
    for &(i, w) in options {
        if x < w {
            return i;
        }
        x -= w;
    }
    options.last().expect("non-empty options").0
}

/// Number of valid candidate sets in the array.
pub fn count_crvs(array: &CandidateArray) -> f64 {
    let mut nodes: Vec<Candidate> = array.all().copied().collect();
    nodes.sort();
    let counts = chain_counts(&nodes, array.len());
    nodes
        .iter()
        .zip(&counts)
        .filter(|(c, _)| c.start == 0)
        .map(|(_, k)| k)
        .sum()
}

/// A valid candidate set drawn uniformly from all of them.
pub fn sample_crv(array: &CandidateArray, seed: u64) -> Option<Crv> {
    let n = array.len();
    let mut nodes: Vec<Candidate> = array.all().copied().collect();
    nodes.sort();
    let counts = chain_counts(&nodes, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(usize, f64)> = (0..nodes.len())
        .filter(|&j| nodes[j].start == 0 && counts[j] > 0.0)
        .map(|j| (j, counts[j]))
        .collect();
    if starts.is_empty() {
        return None;
    }
    let mut cur = weighted_pick(&mut rng, &starts);
    let mut members = vec![nodes[cur]];
    while nodes[cur].end < n {
        let next: Vec<(usize, f64)> = (cur + 1..nodes.len())
            .filter(|&k| follows(&nodes[cur], &nodes[k]) && counts[k] > 0.0)
            .map(|k| (k, counts[k]))
            .collect();
        cur = weighted_pick(&mut rng, &next);
        members.push(nodes[cur]);
    }
    Some(Crv { members })
}

/// Composition over a uniformly random valid candidate set.
pub fn random_crv(
    p: &Path,
    t: f64,
    store: &VariableStore,
    seed: u64,
) -> Result<EstimationResult, EstimateError> {
    let array = candidate_array(p, t, store);
    if let Some(j) = (0..array.len()).find(|&j| !array.all().any(|c| c.start <= j && j < c.end)) {
        return Err(EstimateError::Uncoverable(p.edges()[j].clone()));
    }
    let crv =
        sample_crv(&array, seed).ok_or_else(|| EstimateError::Uncoverable(p.first().clone()))?;
    let h = crv_entropy(&crv, store, &mut EntropyCache::new());
    let marginal = estimate_joint(&crv, store)?;
    Ok(EstimationResult {
        method: Method::CrvRandom,
        marginal,
        entropy: h,
        variables_used: crv.len(),
        crv: crv.members,
    })
}

/// Runs any estimation method. `aob` needs the trajectories.
pub fn run_method(
    method: Method,
    p: &Path,
    t: f64,
    store: &VariableStore,
    trajectories: Option<&TrajectoryStore>,
    seed: u64,
) -> Result<EstimationResult, EstimateError> {
    match method {
        Method::Ocrv => estimate(p, t, store),
        Method::Lb => lb(p, t, store),
        Method::Hp => hp(p, t, store),
        Method::CrvRandom => random_crv(p, t, store, seed),
        Method::Aob => {
            let traj = trajectories
                .ok_or_else(|| EstimateError::InvalidCrv("aob needs trajectory data".into()))?;
            let meta = store.meta();
            aob(p, t, traj, meta.alpha, meta.beta, &meta.params().hist)
        }
    }
}
