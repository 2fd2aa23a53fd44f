//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use pathdist_core::estimator::{CandidateArray, Crv};
use pathdist_core::histogram::{marginalize_onto, Cell, MASS_TOLERANCE};
use pathdist_core::learner::StoreMeta;
use pathdist_core::synthgen::gen_network;
use pathdist_core::{
    Bucket, EdgeId, Histogram1D, HistogramND, LearnParams, LearnedVariable, Path, RoadNetwork,
    Source, TimeInterval, VariableStore,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn ids(names: &[&str]) -> Vec<EdgeId> {
    names.iter().map(|s| EdgeId::from(*s)).collect()
}

/// Corridor `e1 … en` (plus the westbound edges of a one-row grid).
pub fn corridor_net(n: usize) -> (RoadNetwork, Path) {
    let net = gen_network(1, n + 1).unwrap();
    let p = net.path((1..=n).map(|i| format!("e{i}"))).unwrap();
    (net, p)
}

/// The two-edge joint of the worked example, over `e7` and `e8`.
pub fn table2() -> HistogramND {
    HistogramND::new(
        ids(&["e7", "e8"]),
        vec![vec![20.0, 30.0, 50.0], vec![20.0, 40.0, 60.0]],
        vec![
            Cell {
                idx: vec![0, 0],
                pr: 0.30,
            },
            Cell {
                idx: vec![0, 1],
                pr: 0.20,
            },
            Cell {
                idx: vec![1, 0],
                pr: 0.25,
            },
            Cell {
                idx: vec![1, 1],
                pr: 0.25,
            },
        ],
    )
    .unwrap()
}

pub fn b(l: f64, u: f64) -> Bucket {
    Bucket::new(l, u).unwrap()
}

/// Unit mass, disjoint sorted buckets, no negative mass.
pub fn check_1d(h: &Histogram1D) -> Result<(), String> {
    let total: f64 = h.buckets().iter().map(|x| x.1).sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(format!("mass {total}"));
    }
    if h.buckets().iter().any(|x| x.1 < 0.0 || !(x.0.l < x.0.u)) {
        return Err("bad bucket".into());
    }
    if h.buckets().windows(2).any(|w| w[1].0.l < w[0].0.u) {
        return Err("overlapping buckets".into());
    }
    Ok(())
}

pub fn check_nd(h: &HistogramND) -> Result<(), String> {
    if (h.total() - 1.0).abs() > MASS_TOLERANCE {
        return Err(format!("mass {}", h.total()));
    }
    if h.cells().windows(2).any(|w| w[0].idx >= w[1].idx) {
        return Err("duplicate or unsorted cells".into());
    }
    for (d, g) in h.boundaries().iter().enumerate() {
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("dimension {d} boundaries not increasing"));
        }
    }
    Ok(())
}

/// Every chain of candidates that covers the path left to right with
/// increasing starts and ends and no gaps.
pub fn all_crvs(array: &CandidateArray) -> Vec<Crv> {
    fn go(array: &CandidateArray, chain: &mut Vec<pathdist_core::Candidate>, out: &mut Vec<Crv>) {
        let n = array.len();
        let last = *chain.last().unwrap();
        if last.end == n {
            out.push(Crv {
                members: chain.clone(),
            });
            return;
        }
        for c in array.all() {
            if c.start > last.start && c.start <= last.end && c.end > last.end {
                chain.push(*c);
                go(array, chain, out);
                chain.pop();
            }
        }
    }
    let mut out = Vec::new();
    if let Some(row) = array.rows.first() {
        for c in row {
            let mut chain = vec![*c];
            go(array, &mut chain, &mut out);
        }
    }
    out
}

/// A random joint over the edges of `p`: each dimension has up to
/// `max_values` buckets with random bounds, and a random subset of the grid
/// carries mass.
pub fn random_joint(p: &Path, max_values: usize, rng: &mut ChaCha8Rng) -> HistogramND {
    let n = p.len();
    let mut grids = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(1..=max_values);
        let mut g = vec![rng.gen_range(5..20) as f64];
        for _ in 0..k {
            let next = g.last().unwrap() + rng.gen_range(1..15) as f64;
            g.push(next);
        }
        grids.push(g);
    }
    let total: usize = grids.iter().map(|g| g.len() - 1).product();
    let mut cells = Vec::new();
    for flat in 0..total {
        if rng.gen_bool(0.6) || flat == 0 {
            let mut idx = Vec::with_capacity(n);
            let mut rest = flat;
            for g in &grids {
                let k = g.len() - 1;
                idx.push((rest % k) as u32);
                rest /= k;
            }
            cells.push(Cell {
                idx,
                pr: rng.gen_range(0.05..1.0),
            });
        }
    }
    HistogramND::normalized(p.edges().to_vec(), grids, cells).unwrap()
}

pub fn meta() -> StoreMeta {
    StoreMeta::from_params(&LearnParams::default())
}

/// A whole-day learned variable on `p[s..e]` holding `hist`.
pub fn variable(p: &Path, s: usize, e: usize, hist: HistogramND) -> LearnedVariable {
    LearnedVariable {
        path: p.slice(s..e),
        interval: TimeInterval::whole_day(),
        support: 100,
        source: Source::Learned,
        hist,
    }
}

/// A store of exact marginals of `joint`: every unit path plus each listed
/// sub-path `[s, e)`.
pub fn consistent_store(p: &Path, joint: &HistogramND, spans: &[(usize, usize)]) -> VariableStore {
    let mut all: Vec<(usize, usize)> = (0..p.len()).map(|i| (i, i + 1)).collect();
    for &s in spans {
        if !all.contains(&s) {
            all.push(s);
        }
    }
    let vars = all
        .into_iter()
        .map(|(s, e)| variable(p, s, e, marginalize_onto(joint, &p.edges()[s..e]).unwrap()))
        .collect();
    VariableStore::new(meta(), vars)
}

/// Random sub-path spans of rank 2 and above.
pub fn random_spans(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for s in 0..n {
        for e in s + 2..=n {
            if rng.gen_bool(0.4) {
                spans.push((s, e));
            }
        }
    }
    spans
}

/// Mass of `h` on each cell of the union of both histograms' boundaries.
pub fn max_bucket_gap(a: &Histogram1D, b: &Histogram1D) -> f64 {
    let mut grid: Vec<f64> = a.boundaries().into_iter().chain(b.boundaries()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.windows(2)
        .map(|w| (a.mass_in(w[0], w[1]) - b.mass_in(w[0], w[1])).abs())
        .fold(0.0, f64::max)
}

/// Squared error of grouping sorted distinct integer values, counted cell by
/// cell at resolution 1.
pub fn grouping_sse(values: &[f64], freqs: &[f64], starts: &[usize]) -> f64 {
    let m = values.len();
    let mut total = 0.0;
    for (g, &s) in starts.iter().enumerate() {
        let e = starts.get(g + 1).copied().unwrap_or(m);
        let l = values[s];
        let u = if e < m {
            (values[e - 1] + 1.0).min(values[e])
        } else {
            values[e - 1] + 1.0
        };
        let mass: f64 = freqs[s..e].iter().sum();
        let density = mass / (u - l);
        let mut c = l;
        while c < u {
            let f = (s..e).find(|&k| values[k] == c).map_or(0.0, |k| freqs[k]);
            total += (f - density).powi(2);
            c += 1.0;
        }
    }
    total
}

/// Minimum over every placement of `b − 1` group boundaries.
pub fn exhaustive_sse(values: &[f64], freqs: &[f64], b: usize) -> f64 {
    fn go(values: &[f64], freqs: &[f64], starts: &mut Vec<usize>, left: usize, best: &mut f64) {
        if left == 0 {
            *best = best.min(grouping_sse(values, freqs, starts));
            return;
        }
        let from = starts.last().unwrap() + 1;
        for s in from..values.len() {
            starts.push(s);
            go(values, freqs, starts, left - 1, best);
            starts.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(values, freqs, &mut vec![0], b - 1, &mut best);
    best
}

pub fn distinct(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((y, c)) if *y == x => *c += 1.0,
            _ => out.push((x, 1.0)),
        }
    }
    let n = values.len() as f64;
    out.into_iter().map(|(x, c)| (x, c / n)).unzip()
}
