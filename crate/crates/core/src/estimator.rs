//! On-line estimation of a path's cost distribution.
//!
//! [`estimate`] finds the learned variables relevant to a query path and
//! departure time, arranges them in a candidate array, picks the
//! least-entropy candidate set, composes the joint distribution and returns
//! the distribution of its sum.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::histogram::{
    entropy, for_each_index, marginal::spread, sort_dedup, Bucket, Cell, HistError, Histogram1D,
    HistogramND,
};
use crate::learner::{LearnedVariable, VariableStore};
use crate::roadnet::{EdgeId, Path};
use crate::time::Window;

/// Sum-bucket lists longer than this are compacted during composition.
pub const PAIR_CAP: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error("no learned variable covers edge `{0}` at this time")]
    Uncoverable(EdgeId),
    #[error("composed joint distribution has zero mass")]
    Inconsistent,
    #[error("only {count} qualified trajectories (need more than {beta})")]
    Sparse { count: usize, beta: usize },
    #[error("invalid candidate set: {0}")]
    InvalidCrv(String),
    #[error(transparent)]
    Histogram(#[from] HistError),
}

/// Estimation method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Aob,
    Lb,
    Hp,
    CrvRandom,
    Ocrv,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Aob,
        Method::Lb,
        Method::Hp,
        Method::CrvRandom,
        Method::Ocrv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Aob => "aob",
            Method::Lb => "lb",
            Method::Hp => "hp",
            Method::CrvRandom => "crv-random",
            Method::Ocrv => "ocrv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!("unknown method `{s}` (expected aob, lb, hp, crv-random or ocrv)")
            })
    }
}

/// A relevant variable placed on the query path: covers positions `[start, end)`.
/// Ordered by position first, which sorts chain predecessors before successors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub start: usize,
    pub end: usize,
    pub var: usize,
}

impl Candidate {
    pub fn rank(&self) -> usize {
        self.end - self.start
    }

    fn within(&self, other: &Candidate) -> bool {
        other.start <= self.start && self.end <= other.end
    }
}

/// Row `i` holds the relevant variables whose paths start at position `i`, by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateArray {
    pub rows: Vec<Vec<Candidate>>,
}

impl CandidateArray {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn all(&self) -> impl Iterator<Item = &Candidate> {
        self.rows.iter().flatten()
    }

    /// Per-row maximal ranks (0 for empty rows).
    pub fn max_ranks(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.last().map_or(0, Candidate::rank))
            .collect()
    }
}

/// An ordered candidate set covering the query path left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Crv {
    pub members: Vec<Candidate>,
}

impl Crv {
    /// Checks the covering and overlap conditions for a path of `n` edges.
    pub fn is_valid(&self, n: usize) -> bool {
        let m = &self.members;
        if m.is_empty() || m[0].start != 0 || m[m.len() - 1].end != n {
            return false;
        }
        m.iter().all(|c| c.start < c.end && c.end <= n)
            && m.windows(2)
                .all(|w| w[0].start < w[1].start && w[0].end < w[1].end && w[1].start <= w[0].end)
    }

    /// True when every member of `finer` lies inside some member of `self`.
    pub fn is_coarser_than(&self, finer: &Crv) -> bool {
        finer
            .members
            .iter()
            .all(|c| self.members.iter().any(|d| c.within(d)))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Outcome of one estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub method: Method,
    pub marginal: Histogram1D,
    /// Entropy of the chosen candidate set (joint entropy for single-histogram methods).
    pub entropy: f64,
    pub crv: Vec<Candidate>,
    pub variables_used: usize,
}

/// Picks, among `ids`, the interval intersecting `w` with the largest overlap;
/// ties go to the earliest start.
pub fn pick_interval(store: &VariableStore, ids: &[usize], w: &Window) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in ids {
        let iv = store.get(i).interval;
        if !iv.intersects(w) {
            continue;
        }
        let ov = iv.overlap(w);
        let better = match best {
            None => true,
            Some((b, bo)) => ov > bo || (ov == bo && iv.start() < store.get(b).interval.start()),
        };
        if better {
            best = Some((i, ov));
        }
    }
    best.map(|b| b.0)
}

/// Per-position arrival windows and the unit variable chosen at each position.
///
/// Position 0 has the point window at `t`; each next window shifts and
/// enlarges the previous one by the chosen unit variable's cost bounds.
pub fn unit_chain(p: &Path, t: f64, store: &VariableStore) -> (Vec<Window>, Vec<Option<usize>>) {
    let mut windows = Vec::with_capacity(p.len());
    let mut units = Vec::with_capacity(p.len());
    let mut w = Window::point(t);
    for i in 0..p.len() {
        windows.push(w);
        let unit = p.slice(i..i + 1);
        let chosen = pick_interval(store, &store.for_path(&unit), &w);
        if let Some(v) = chosen {
            let (lo, hi) = store.get(v).minute_bounds();
            w = w.shift_enlarge(lo, hi);
        }
        units.push(chosen);
    }
    (windows, units)
}

/// Relevant learned variables by start position: spatially a sub-path of `p`
/// starting there, temporally intersecting that position's window. At most
/// one interval per sub-path.
pub fn relevant_variables(p: &Path, t: f64, store: &VariableStore) -> Vec<Vec<usize>> {
    let (windows, _) = unit_chain(p, t, store);
    relevant_with_windows(p, store, &windows)
}

fn relevant_with_windows(p: &Path, store: &VariableStore, windows: &[Window]) -> Vec<Vec<usize>> {
    let n = p.len();
    let edges = p.edges();
    (0..n)
        .map(|i| {
            let mut by_rank: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &v in store.starting_with(&edges[i]) {
                let var = store.get(v);
                let k = var.rank();
                if var.is_learned() && i + k <= n && var.path.edges() == &edges[i..i + k] {
                    by_rank.entry(k).or_default().push(v);
                }
            }
            by_rank
                .values()
                .filter_map(|ids| pick_interval(store, ids, &windows[i]))
                .collect()
        })
        .collect()
}

pub fn build_candidate_array(store: &VariableStore, relevant: &[Vec<usize>]) -> CandidateArray {
    CandidateArray {
        rows: relevant
            .iter()
            .enumerate()
            .map(|(i, ids)| {
                let mut row: Vec<Candidate> = ids
                    .iter()
                    .map(|&v| Candidate {
                        var: v,
                        start: i,
                        end: i + store.get(v).rank(),
                    })
                    .collect();
                row.sort_by_key(Candidate::rank);
                row
            })
            .collect(),
    }
}

/// Memoized entropies of variables and of their overlap prefixes.
#[derive(Debug, Default)]
pub struct EntropyCache {
    full: HashMap<usize, f64>,
    prefix: HashMap<usize, Vec<f64>>,
}

impl EntropyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, store: &VariableStore, v: usize) -> f64 {
        *self
            .full
            .entry(v)
            .or_insert_with(|| entropy(&store.get(v).hist))
    }

    /// Entropy of variable `v` marginalized onto its first `len` edges.
    pub fn prefix(&mut self, store: &VariableStore, v: usize, len: usize) -> f64 {
        let h = &store.get(v).hist;
        if len >= h.arity() {
            return self.var(store, v);
        }
        let all = self.prefix.entry(v).or_insert_with(|| prefix_entropies(h));
        all[len - 1]
    }

    /// `H(b) − H(overlap of b with a)` for consecutive members `a`, `b`.
    fn step(&mut self, store: &VariableStore, a: Option<&Candidate>, b: &Candidate) -> f64 {
        let h = self.var(store, b.var);
        match a {
            Some(a) if a.end > b.start => h - self.prefix(store, b.var, a.end - b.start),
            _ => h,
        }
    }
}

/// Entropies of the marginals onto the first `1..arity` dimensions. Cells are
/// sorted, so each marginal cell is a run of equal index prefixes.
fn prefix_entropies(h: &HistogramND) -> Vec<f64> {
    let cells = h.cells();
    (1..h.arity())
        .map(|len| {
            let mut total = 0.0;
            let mut i = 0;
            while i < cells.len() {
                let mut mass = 0.0;
                let mut j = i;
                while j < cells.len() && cells[j].idx[..len] == cells[i].idx[..len] {
                    mass += cells[j].pr;
                    j += 1;
                }
                if mass > 0.0 {
                    total -= mass * mass.ln();
                }
                i = j;
            }
            total
        })
        .collect()
}

/// Sum of member entropies minus the entropies of the overlaps, each taken
/// from the later variable's histogram.
pub fn crv_entropy(crv: &Crv, store: &VariableStore, cache: &mut EntropyCache) -> f64 {
    let mut h = 0.0;
    for (i, c) in crv.members.iter().enumerate() {
        let prev = if i > 0 {
            Some(&crv.members[i - 1])
        } else {
            None
        };
        h += cache.step(store, prev, c);
    }
    h
}

fn longest<'a>(cands: impl Iterator<Item = &'a Candidate>, prefer_late: bool) -> Option<Candidate> {
    cands.copied().max_by(|a, b| {
        a.rank().cmp(&b.rank()).then_with(|| {
            if prefer_late {
                a.end.cmp(&b.end)
            } else {
                b.start.cmp(&a.start)
            }
        })
    })
}

/// The candidate set grown from a base variable: rightward with the longest
/// admissible next variable (earliest start on ties), then leftward with the
/// longest admissible predecessor (latest end on ties).
pub fn grow_from_base(array: &CandidateArray, base: Candidate) -> Option<Crv> {
    let n = array.len();
    let mut chain = vec![base];
    while let Some(cur) = chain.last().copied().filter(|c| c.end < n) {
        let next = longest(
            array
                .all()
                .filter(|c| c.start > cur.start && c.start <= cur.end && c.end > cur.end),
            false,
        )?;
        chain.push(next);
    }
    let mut left = Vec::new();
    let mut first = base;
    while first.start > 0 {
        let prev = longest(
            array
                .all()
                .filter(|c| c.start < first.start && first.start <= c.end && c.end < first.end),
            true,
        )?;
        left.push(prev);
        first = prev;
    }
    left.reverse();
    left.extend(chain);
    Some(Crv { members: left })
}

/// Candidate sets built from each row's highest-rank variable, with sets that
/// a coarser one dominates removed.
pub fn candidate_sets(array: &CandidateArray) -> Vec<Crv> {
    let mut sets: Vec<Crv> = Vec::new();
    for row in &array.rows {
        let Some(&base) = row.last() else {
            continue;
        };
        let Some(d) = grow_from_base(array, base) else {
            continue;
        };
        let mut add = true;
        let mut kept = Vec::with_capacity(sets.len() + 1);
        for crv in sets.drain(..) {
            if !add {
                kept.push(crv);
            } else if d.is_coarser_than(&crv) {
                continue;
            } else if crv.is_coarser_than(&d) {
                add = false;
                kept.push(crv);
            } else {
                kept.push(crv);
            }
        }
        sets = kept;
        if add {
            sets.push(d);
        }
    }
    sets
}

/// Least-entropy valid chain over all candidates, by dynamic programming.
/// A predecessor matters only through its end, so the best chain ending at
/// each position, among candidates with earlier starts, is enough.
pub fn min_entropy_chain(
    array: &CandidateArray,
    store: &VariableStore,
    cache: &mut EntropyCache,
) -> Option<(Crv, f64)> {
    let n = array.len();
    let mut nodes: Vec<Candidate> = array.all().copied().collect();
    nodes.sort();
    let mut best: Vec<Option<(f64, Option<usize>)>> = vec![None; nodes.len()];
    // Best finished node per end position, over starts already processed.
    let mut by_end: Vec<Option<(f64, usize)>> = vec![None; n + 1];
    let mut j = 0;
    while j < nodes.len() {
        let s = nodes[j].start;
        let group = j..nodes[j..]
            .iter()
            .position(|c| c.start != s)
            .map_or(nodes.len(), |k| j + k);
        for k in group.clone() {
            let v = nodes[k];
            if s == 0 {
                best[k] = Some((cache.step(store, None, &v), None));
                continue;
            }
            for &(bu, i) in by_end[s..v.end].iter().flatten() {
                let h = bu + cache.step(store, Some(&nodes[i]), &v);
                if best[k].is_none_or(|(b, _)| h < b) {
                    best[k] = Some((h, Some(i)));
                }
            }
        }
        for k in group.clone() {
            if let Some((h, _)) = best[k] {
                let e = nodes[k].end;
                if by_end[e].is_none_or(|(b, _)| h < b) {
                    by_end[e] = Some((h, k));
                }
            }
        }
        j = group.end;
    }
    let (h, end) = by_end[n]?;
    let mut members = vec![nodes[end]];
    let mut cur = best[end].and_then(|b| b.1);
    while let Some(i) = cur {
        members.push(nodes[i]);
        cur = best[i].and_then(|b| b.1);
    }
    members.reverse();
    Some((Crv { members }, h))
}

fn first_uncovered(array: &CandidateArray, p: &Path) -> Option<EdgeId> {
    (0..array.len())
        .find(|&j| !array.all().any(|c| c.start <= j && j < c.end))
        .map(|j| p.edges()[j].clone())
}

/// The least-entropy member of the row-based candidate sets and the least
/// entropy chain. Coarser sets only win on consistent stores, so the chain
/// keeps the result optimal when learned histograms disagree.
pub fn identify_crv_opt(
    array: &CandidateArray,
    store: &VariableStore,
    p: &Path,
    cache: &mut EntropyCache,
) -> Result<(Crv, f64), EstimateError> {
    if let Some(e) = first_uncovered(array, p) {
        return Err(EstimateError::Uncoverable(e));
    }
    let mut best: Option<(Crv, f64)> = None;
    for crv in candidate_sets(array) {
        let h = crv_entropy(&crv, store, cache);
        if best.as_ref().is_none_or(|(_, b)| h < *b) {
            best = Some((crv, h));
        }
    }
    // Near-ties go to the row-based set.
    if let Some(chain) = min_entropy_chain(array, store, cache) {
        if best.as_ref().is_none_or(|(_, b)| chain.1 < *b - 1e-12) {
            best = Some(chain);
        }
    }
    best.ok_or_else(|| EstimateError::Uncoverable(p.first().clone()))
}

/// A bucket keyed by the bit patterns of its bounds, for ordered maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Span(u64, u64);

impl Span {
    fn new(b: Bucket) -> Self {
        Span(b.l.to_bits(), b.u.to_bits())
    }

    fn bucket(self) -> Bucket {
        Bucket {
            l: f64::from_bits(self.0),
            u: f64::from_bits(self.1),
        }
    }
}

/// Cells of a histogram grouped by their buckets on the first `shared`
/// dimensions: (shared buckets, group mass, cell indices).
fn group_shared(h: &HistogramND, shared: usize) -> Vec<(Vec<Bucket>, f64, Vec<usize>)> {
    let mut groups: BTreeMap<&[u32], (f64, Vec<usize>)> = BTreeMap::new();
    for (ci, c) in h.cells().iter().enumerate() {
        let g = groups.entry(&c.idx[..shared]).or_insert((0.0, Vec::new()));
        g.0 += c.pr;
        g.1.push(ci);
    }
    groups
        .into_iter()
        .map(|(idx, (m, cells))| {
            let boxes = idx
                .iter()
                .enumerate()
                .map(|(d, &i)| h.bucket(d, i))
                .collect();
            (boxes, m, cells)
        })
        .collect()
}

/// Intersection of two boxes and the fraction of `a`'s volume it covers.
fn intersect(a: &[Bucket], b: &[Bucket]) -> Option<(Vec<Bucket>, f64)> {
    let mut frac = 1.0;
    let mut out = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let l = x.l.max(y.l);
        let u = x.u.min(y.u);
        if u <= l {
            return None;
        }
        frac *= (u - l) / x.width();
        out.push(Bucket { l, u });
    }
    Some((out, frac))
}

fn check_chain(crv: &Crv, store: &VariableStore) -> Result<usize, EstimateError> {
    let n = crv.members.last().map_or(0, |c| c.end);
    if !crv.is_valid(n) {
        return Err(EstimateError::InvalidCrv(
            "members do not form a covering chain".into(),
        ));
    }
    for c in &crv.members {
        if store.get(c.var).rank() != c.rank() {
            return Err(EstimateError::InvalidCrv(
                "member span differs from its rank".into(),
            ));
        }
    }
    Ok(n)
}

fn merge_pairs(pairs: &mut Vec<(f64, f64, f64)>, cap: usize) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(pairs.len());
    for &(l, u, m) in pairs.iter() {
        match out.last_mut() {
            Some(last) if last.0 == l && last.1 == u => last.2 += m,
            _ => out.push((l, u, m)),
        }
    }
    if out.len() > cap {
        let buckets: Vec<(Bucket, f64)> =
            out.iter().map(|&(l, u, m)| (Bucket { l, u }, m)).collect();
        out = spread(&buckets)
            .into_iter()
            .map(|(b, m)| (b.l, b.u, m))
            .collect();
    }
    *pairs = out;
}

type SumState = BTreeMap<Vec<Span>, Vec<(f64, f64, f64)>>;

/// Composes the chain left to right. The state maps boxes over the edges
/// still needed to (lower, upper, mass) sums of the edges already summed out.
/// Each member is conditioned on its overlap with the previous one: a state
/// box and a member cell combine over the intersection of their overlap
/// buckets, with uniform density inside buckets. With `eliminate` an edge is
/// summed out as soon as no later member covers it; otherwise every edge
/// stays in the boxes.
fn compose(crv: &Crv, store: &VariableStore, eliminate: bool) -> Result<SumState, EstimateError> {
    check_chain(crv, store)?;
    let mut state: SumState = BTreeMap::from([(Vec::new(), vec![(0.0, 0.0, 1.0)])]);
    let (mut key_start, mut prev_end) = (0, 0);
    for (hi, c) in crv.members.iter().enumerate() {
        let h = &store.get(c.var).hist;
        let (s, e) = (c.start, c.end);
        let shared = prev_end - s.min(prev_end);
        let next_start = match crv.members.get(hi + 1) {
            _ if !eliminate => 0,
            Some(n) => n.start,
            None => e,
        };
        let groups = group_shared(h, shared);
        let mut next: SumState = BTreeMap::new();
        for (key, pairs) in &state {
            let boxes: Vec<Bucket> = key.iter().map(|k| k.bucket()).collect();
            let own = &boxes[s.max(key_start) - key_start..];
            for (gbox, m, cells) in &groups {
                let Some((r, frac)) = intersect(own, gbox) else {
                    continue;
                };
                for &ci in cells {
                    let cell = &h.cells()[ci];
                    let at = |q: usize| {
                        if q < s {
                            boxes[q - key_start]
                        } else if q < prev_end {
                            r[q - s]
                        } else {
                            h.bucket(q - s, cell.idx[q - s])
                        }
                    };
                    let (mut sl, mut su) = (0.0, 0.0);
                    for q in key_start..next_start {
                        let b = at(q);
                        sl += b.l;
                        su += b.u;
                    }
                    let new_key: Vec<Span> = (next_start.max(key_start)..e)
                        .map(|q| Span::new(at(q)))
                        .collect();
                    let w = frac * cell.pr / m;
                    next.entry(new_key)
                        .or_default()
                        .extend(pairs.iter().map(|&(l, u, mass)| (l + sl, u + su, mass * w)));
                }
            }
        }
        let cap = if eliminate { PAIR_CAP } else { usize::MAX };
        for pairs in next.values_mut() {
            merge_pairs(pairs, cap);
        }
        state = next;
        key_start = next_start;
        prev_end = e;
    }
    Ok(state)
}

fn sum_histogram(pairs: Vec<(f64, f64, f64)>) -> Result<Histogram1D, EstimateError> {
    let buckets: Vec<(Bucket, f64)> = pairs
        .into_iter()
        .filter(|p| p.2 > 0.0)
        .map(|(l, u, m)| (Bucket { l, u }, m))
        .collect();
    let spread = spread(&buckets);
    if spread.iter().map(|b| b.1).sum::<f64>() <= 0.0 {
        return Err(EstimateError::Inconsistent);
    }
    Ok(Histogram1D::normalized(spread)?)
}

/// Distribution of the path-cost sum under the chain's joint, summing out
/// edges as soon as no later member shares them.
pub fn estimate_joint(crv: &Crv, store: &VariableStore) -> Result<Histogram1D, EstimateError> {
    let mut state = compose(crv, store, true)?;
    sum_histogram(state.remove(&Vec::new()).unwrap_or_default())
}

/// The chain's joint over every edge of the path as (hyper-bucket, mass)
/// boxes, normalized. The boxes are disjoint but need not form a grid.
pub fn explicit_joint(
    crv: &Crv,
    store: &VariableStore,
) -> Result<Vec<(Vec<Bucket>, f64)>, EstimateError> {
    let state = compose(crv, store, false)?;
    let boxes: Vec<(Vec<Bucket>, f64)> = state
        .into_iter()
        .map(|(k, pairs)| {
            (
                k.into_iter().map(Span::bucket).collect(),
                pairs.iter().map(|p| p.2).sum::<f64>(),
            )
        })
        .filter(|b: &(Vec<Bucket>, f64)| b.1 > 0.0)
        .collect();
    let total: f64 = boxes.iter().map(|b| b.1).sum();
    if total <= 0.0 {
        return Err(EstimateError::Inconsistent);
    }
    Ok(boxes.into_iter().map(|(b, m)| (b, m / total)).collect())
}

/// Sum distribution computed from [`explicit_joint`]: every box maps to the
/// bucket of its summed bounds. Exponential in the path length; a reference
/// for [`estimate_joint`] on short paths.
pub fn estimate_joint_explicit(
    crv: &Crv,
    store: &VariableStore,
) -> Result<Histogram1D, EstimateError> {
    let pairs = explicit_joint(crv, store)?
        .into_iter()
        .map(|(b, m)| (b.iter().map(|x| x.l).sum(), b.iter().map(|x| x.u).sum(), m))
        .collect();
    sum_histogram(pairs)
}

/// Boxes redistributed onto the per-dimension union of their bounds.
pub fn boxes_to_nd(
    dims: Vec<EdgeId>,
    boxes: &[(Vec<Bucket>, f64)],
) -> Result<HistogramND, EstimateError> {
    let n = dims.len();
    if boxes.iter().any(|b| b.0.len() != n) {
        return Err(EstimateError::InvalidCrv(
            "box arity differs from the dimensions".into(),
        ));
    }
    let grids: Vec<Vec<f64>> = (0..n)
        .map(|d| {
            let mut g: Vec<f64> = boxes.iter().flat_map(|b| [b.0[d].l, b.0[d].u]).collect();
            sort_dedup(&mut g);
            g
        })
        .collect();
    let mut cells: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (b, m) in boxes {
        let ranges: Vec<(usize, usize)> = (0..n)
            .map(|d| {
                let g = &grids[d];
                (
                    g.partition_point(|&x| x < b[d].l),
                    g.partition_point(|&x| x < b[d].u),
                )
            })
            .collect();
        let volume: f64 = b.iter().map(Bucket::width).product();
        for_each_index(&ranges, |idx| {
            let v: f64 = (0..n)
                .map(|d| grids[d][idx[d] as usize + 1] - grids[d][idx[d] as usize])
                .product();
            *cells.entry(idx.to_vec()).or_insert(0.0) += m * v / volume;
        });
    }
    let cells = cells
        .into_iter()
        .map(|(idx, pr)| Cell { idx, pr })
        .collect();
    Ok(HistogramND::normalized(dims, grids, cells)?)
}

/// Candidate array for a query, windows included.
pub fn candidate_array(p: &Path, t: f64, store: &VariableStore) -> CandidateArray {
    build_candidate_array(store, &relevant_variables(p, t, store))
}

/// The full on-line pipeline with the least-entropy candidate set.
pub fn estimate(
    p: &Path,
    t: f64,
    store: &VariableStore,
) -> Result<EstimationResult, EstimateError> {
    let array = candidate_array(p, t, store);
    let mut cache = EntropyCache::new();
    let (crv, h) = identify_crv_opt(&array, store, p, &mut cache)?;
    let marginal = estimate_joint(&crv, store)?;
    Ok(EstimationResult {
        method: Method::Ocrv,
        marginal,
        entropy: h,
        variables_used: crv.len(),
        crv: crv.members,
    })
}

/// Descriptor of a variable used in an estimate.
pub fn describe<'a>(store: &'a VariableStore, c: &Candidate) -> &'a LearnedVariable {
    store.get(c.var)
}
