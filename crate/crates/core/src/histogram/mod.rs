//! Histogram representations and the operations on them.
//!
//! Probability inside a bucket (or hyper-bucket) is uniformly spread over its
//! extent. Every operation that needs to compare histograms with different
//! boundaries relies on that assumption to split mass.

mod auto;
mod convolve;
pub(crate) mod marginal;
mod measure;
pub(crate) mod nd;
mod vopt;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::roadnet::EdgeId;

pub use auto::{auto_bucket_count, build_1d, fold_errors};
pub use convolve::{convolve, trapezoid_cdf};
pub use marginal::{hb2bu, marginal_sum, rearrange, sum_pairs};
pub use measure::{entropy, entropy_1d, kl_divergence, kl_divergence_1d, symmetric_kl, KL_EPSILON};
pub use nd::{build_nd, marginalize_onto};
pub use vopt::{bucket_sse, v_optimal, VOptimal};

/// Tolerance for total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HistError {
    #[error("no values")]
    Empty,
    #[error("bucket count {b} outside 1..={max}")]
    BadBucketCount { b: usize, max: usize },
    #[error("{samples} samples cannot be split into {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("invalid bucket [{0}, {1})")]
    BadBucket(f64, f64),
    #[error("negative or non-finite probability {0}")]
    BadProbability(f64),
    #[error("probabilities sum to {0}")]
    NotNormalized(f64),
    #[error("buckets overlap or are unsorted")]
    Overlapping,
    #[error("cost vectors have inconsistent dimensionality")]
    Dimensionality,
    #[error("histograms have different dimensions")]
    DimensionMismatch,
    #[error("unknown dimension `{0}`")]
    UnknownDimension(EdgeId),
    #[error("malformed histogram: {0}")]
    Malformed(String),
}

/// Parameters shared by histogram construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistParams {
    /// Fold count for cross validation.
    pub folds: usize,
    /// Relative decrease in fold error below which adding a bucket stops.
    pub sig: f64,
    /// Width given to the bucket holding the largest value.
    pub resolution: f64,
    /// Hard cap on the number of buckets per dimension.
    pub max_buckets: usize,
    /// Seed for the fold shuffle.
    pub seed: u64,
}

impl Default for HistParams {
    fn default() -> Self {
        HistParams {
            folds: 10,
            sig: 0.1,
            resolution: 1.0,
            max_buckets: 16,
            seed: 0,
        }
    }
}

/// Half-open cost range `[l, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub l: f64,
    pub u: f64,
}

impl Bucket {
    pub fn new(l: f64, u: f64) -> Result<Self, HistError> {
        if l.is_finite() && u.is_finite() && l < u {
            Ok(Bucket { l, u })
        } else {
            Err(HistError::BadBucket(l, u))
        }
    }

    pub fn width(&self) -> f64 {
        self.u - self.l
    }

    pub fn contains(&self, x: f64) -> bool {
        self.l <= x && x < self.u
    }

    pub fn overlap(&self, other: &Bucket) -> f64 {
        (self.u.min(other.u) - self.l.max(other.l)).max(0.0)
    }
}

/// One-dimensional histogram: sorted, disjoint buckets with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram1D {
    buckets: Vec<(Bucket, f64)>,
}

impl Histogram1D {
    pub fn new(buckets: Vec<(Bucket, f64)>) -> Result<Self, HistError> {
        check_pairs(&buckets)?;
        for w in buckets.windows(2) {
            if w[1].0.l < w[0].0.u {
                return Err(HistError::Overlapping);
            }
        }
        let total: f64 = buckets.iter().map(|b| b.1).sum();
        if buckets.is_empty() || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(HistError::NotNormalized(total));
        }
        Ok(Histogram1D { buckets })
    }

    /// Drops empty buckets and rescales so the masses sum to one.
    pub fn normalized(mut buckets: Vec<(Bucket, f64)>) -> Result<Self, HistError> {
        check_pairs(&buckets)?;
        buckets.retain(|b| b.1 > 0.0);
        let total: f64 = buckets.iter().map(|b| b.1).sum();
        if !(total > 0.0) {
            return Err(HistError::NotNormalized(total));
        }
        for b in &mut buckets {
            b.1 /= total;
        }
        Histogram1D::new(buckets)
    }

    pub fn point(l: f64, u: f64) -> Result<Self, HistError> {
        Histogram1D::new(vec![(Bucket::new(l, u)?, 1.0)])
    }

    pub(crate) fn from_sorted_unchecked(buckets: Vec<(Bucket, f64)>) -> Self {
        Histogram1D { buckets }
    }

    pub fn buckets(&self) -> &[(Bucket, f64)] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.buckets[0].0.l
    }

    pub fn max(&self) -> f64 {
        self.buckets[self.buckets.len() - 1].0.u
    }

    pub fn total(&self) -> f64 {
        self.buckets.iter().map(|b| b.1).sum()
    }

    /// `P(X < x)` under uniform in-bucket density.
    pub fn cdf(&self, x: f64) -> f64 {
        self.buckets
            .iter()
            .map(|(b, p)| p * ((x.min(b.u) - b.l) / b.width()).clamp(0.0, 1.0))
            .sum()
    }

    /// Probability mass inside `[l, u)`.
    pub fn mass_in(&self, l: f64, u: f64) -> f64 {
        self.buckets
            .iter()
            .map(|(b, p)| p * b.overlap(&Bucket { l, u }) / b.width())
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.buckets
            .iter()
            .map(|(b, p)| p * (b.l + b.u) / 2.0)
            .sum()
    }

    /// Variance under uniform in-bucket density.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.buckets
            .iter()
            .map(|(b, p)| {
                let c = (b.l + b.u) / 2.0;
                p * ((c - m).powi(2) + b.width().powi(2) / 12.0)
            })
            .sum()
    }

    /// Bounding values of every bucket, sorted and deduplicated.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.buckets.iter().flat_map(|(b, _)| [b.l, b.u]).collect();
        sort_dedup(&mut v);
        v
    }

    /// The same distribution as a one-dimensional [`HistogramND`].
    pub fn to_nd(&self, dim: EdgeId) -> HistogramND {
        let bounds = self.boundaries();
        let cells = self
            .buckets
            .iter()
            .map(|(b, p)| Cell {
                idx: vec![locate(&bounds, b.l) as u32],
                pr: *p,
            })
            .collect();
        HistogramND {
            dims: vec![dim],
            boundaries: vec![bounds],
            cells,
        }
    }

    /// Re-expresses the histogram on a finer grid containing all its boundaries.
    pub fn refine(&self, grid: &[f64]) -> Vec<(Bucket, f64)> {
        let mut out = Vec::new();
        for (b, p) in &self.buckets {
            let mut i = locate(grid, b.l);
            while i + 1 < grid.len() && grid[i] < b.u {
                let piece = Bucket {
                    l: grid[i],
                    u: grid[i + 1],
                };
                out.push((piece, p * piece.width() / b.width()));
                i += 1;
            }
        }
        out
    }
}

impl<'de> Deserialize<'de> for Histogram1D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            buckets: Vec<(Bucket, f64)>,
        }
        let raw = Raw::deserialize(d)?;
        Histogram1D::new(raw.buckets).map_err(serde::de::Error::custom)
    }
}

fn check_pairs(pairs: &[(Bucket, f64)]) -> Result<(), HistError> {
    for (b, p) in pairs {
        Bucket::new(b.l, b.u)?;
        if !(*p >= 0.0 && p.is_finite()) {
            return Err(HistError::BadProbability(*p));
        }
    }
    Ok(())
}

/// One occupied hyper-bucket: per-dimension cell indices and its mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub idx: Vec<u32>,
    pub pr: f64,
}

/// Sparse multi-dimensional histogram on a per-dimension boundary grid.
///
/// Cell index `i` in dimension `d` denotes `[boundaries[d][i], boundaries[d][i + 1])`.
/// Only hyper-buckets with positive mass are stored, sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramND {
    dims: Vec<EdgeId>,
    boundaries: Vec<Vec<f64>>,
    cells: Vec<Cell>,
}

impl HistogramND {
    pub fn new(
        dims: Vec<EdgeId>,
        boundaries: Vec<Vec<f64>>,
        cells: Vec<Cell>,
    ) -> Result<Self, HistError> {
        let h = HistogramND::assemble(dims, boundaries, cells)?;
        let total = h.total();
        if h.cells.is_empty() || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(HistError::NotNormalized(total));
        }
        Ok(h)
    }

    /// Like [`HistogramND::new`] but merges duplicate cells and rescales to unit mass.
    pub fn normalized(
        dims: Vec<EdgeId>,
        boundaries: Vec<Vec<f64>>,
        mut cells: Vec<Cell>,
    ) -> Result<Self, HistError> {
        for c in &cells {
            if !(c.pr >= 0.0 && c.pr.is_finite()) {
                return Err(HistError::BadProbability(c.pr));
            }
        }
        cells.sort_by(|a, b| a.idx.cmp(&b.idx));
        let mut merged: Vec<Cell> = Vec::with_capacity(cells.len());
        for c in cells {
            match merged.last_mut() {
                Some(last) if last.idx == c.idx => last.pr += c.pr,
                _ => merged.push(c),
            }
        }
        merged.retain(|c| c.pr > 0.0);
        let total: f64 = merged.iter().map(|c| c.pr).sum();
        if !(total > 0.0) {
            return Err(HistError::NotNormalized(total));
        }
        for c in &mut merged {
            c.pr /= total;
        }
        HistogramND::new(dims, boundaries, merged)
    }

    fn assemble(
        dims: Vec<EdgeId>,
        boundaries: Vec<Vec<f64>>,
        cells: Vec<Cell>,
    ) -> Result<Self, HistError> {
        if dims.is_empty() || dims.len() != boundaries.len() {
            return Err(HistError::Malformed(
                "dimension and boundary counts differ".into(),
            ));
        }
        for b in &boundaries {
            if b.len() < 2
                || b.windows(2).any(|w| !(w[0] < w[1]))
                || b.iter().any(|x| !x.is_finite())
            {
                return Err(HistError::Malformed(
                    "boundaries must be finite and increasing".into(),
                ));
            }
        }
        for (i, c) in cells.iter().enumerate() {
            if c.idx.len() != dims.len() {
                return Err(HistError::Malformed("cell index arity".into()));
            }
            if c.idx
                .iter()
                .zip(&boundaries)
                .any(|(&k, b)| k as usize + 1 >= b.len())
            {
                return Err(HistError::Malformed("cell index outside grid".into()));
            }
            if !(c.pr >= 0.0 && c.pr.is_finite()) {
                return Err(HistError::BadProbability(c.pr));
            }
            if i > 0 && cells[i - 1].idx >= c.idx {
                return Err(HistError::Malformed(
                    "cells must be unique and sorted".into(),
                ));
            }
        }
        Ok(HistogramND {
            dims,
            boundaries,
            cells,
        })
    }

    pub fn dims(&self) -> &[EdgeId] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn boundaries(&self) -> &[Vec<f64>] {
        &self.boundaries
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.pr).sum()
    }

    pub fn bucket(&self, dim: usize, idx: u32) -> Bucket {
        let b = &self.boundaries[dim];
        Bucket {
            l: b[idx as usize],
            u: b[idx as usize + 1],
        }
    }

    /// Per-dimension buckets of a cell.
    pub fn hyper_bucket(&self, cell: &Cell) -> Vec<Bucket> {
        cell.idx
            .iter()
            .enumerate()
            .map(|(d, &i)| self.bucket(d, i))
            .collect()
    }

    pub fn volume(&self, cell: &Cell) -> f64 {
        cell.idx
            .iter()
            .enumerate()
            .map(|(d, &i)| self.bucket(d, i).width())
            .product()
    }

    /// Smallest and largest represented cost sum.
    pub fn sum_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.cells {
            let (l, u) = c
                .idx
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(l, u), (d, &i)| {
                    let b = self.bucket(d, i);
                    (l + b.l, u + b.u)
                });
            lo = lo.min(l);
            hi = hi.max(u);
        }
        (lo, hi)
    }

    /// Per-dimension minimum and maximum represented cost.
    pub fn dim_bounds(&self, dim: usize) -> (f64, f64) {
        let lo = self.cells.iter().map(|c| c.idx[dim]).min().unwrap_or(0);
        let hi = self.cells.iter().map(|c| c.idx[dim]).max().unwrap_or(0);
        (self.bucket(dim, lo).l, self.bucket(dim, hi).u)
    }

    /// A one-dimensional histogram, for arity-1 inputs.
    pub fn to_1d(&self) -> Option<Histogram1D> {
        if self.arity() != 1 {
            return None;
        }
        Some(Histogram1D::from_sorted_unchecked(
            self.cells
                .iter()
                .map(|c| (self.bucket(0, c.idx[0]), c.pr))
                .collect(),
        ))
    }

    /// Mass of the cell with exactly this index, if stored.
    pub fn mass_at(&self, idx: &[u32]) -> f64 {
        self.cells
            .binary_search_by(|c| c.idx.as_slice().cmp(idx))
            .map_or(0.0, |i| self.cells[i].pr)
    }

    /// Redistributes mass onto finer per-dimension grids; each grid must contain
    /// every boundary of the corresponding dimension.
    pub fn refine(&self, grids: &[Vec<f64>]) -> Result<HistogramND, HistError> {
        if grids.len() != self.arity() {
            return Err(HistError::DimensionMismatch);
        }
        let maps: Vec<Vec<(usize, usize)>> = (0..self.arity())
            .map(|d| fine_ranges(&self.boundaries[d], &grids[d]))
            .collect();
        let mut cells = Vec::new();
        for c in &self.cells {
            let ranges: Vec<(usize, usize)> = c
                .idx
                .iter()
                .enumerate()
                .map(|(d, &i)| maps[d][i as usize])
                .collect();
            let vol = self.volume(c);
            for_each_index(&ranges, |idx| {
                let w: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(d, &k)| grids[d][k as usize + 1] - grids[d][k as usize])
                    .product();
                cells.push(Cell {
                    idx: idx.to_vec(),
                    pr: c.pr * w / vol,
                });
            });
        }
        cells.sort_by(|a, b| a.idx.cmp(&b.idx));
        HistogramND::assemble(self.dims.clone(), grids.to_vec(), cells)
    }
}

impl<'de> Deserialize<'de> for HistogramND {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dims: Vec<EdgeId>,
            boundaries: Vec<Vec<f64>>,
            cells: Vec<Cell>,
        }
        let raw = Raw::deserialize(d)?;
        HistogramND::new(raw.dims, raw.boundaries, raw.cells).map_err(serde::de::Error::custom)
    }
}

/// Empirical distribution: distinct values (or vectors) with their fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDistribution<T> {
    pub entries: Vec<(T, f64)>,
}

impl RawDistribution<f64> {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut entries: Vec<(f64, f64)> = Vec::new();
        for v in sorted {
            match entries.last_mut() {
                Some((x, c)) if *x == v => *c += 1.0,
                _ => entries.push((v, 1.0)),
            }
        }
        for e in &mut entries {
            e.1 /= n;
        }
        RawDistribution { entries }
    }
}

impl RawDistribution<Vec<f64>> {
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Self {
        let mut sorted = vectors.to_vec();
        sorted.sort_by(|a, b| cmp_vec(a, b));
        let n = sorted.len() as f64;
        let mut entries: Vec<(Vec<f64>, f64)> = Vec::new();
        for v in sorted {
            match entries.last_mut() {
                Some((x, c)) if *x == v => *c += 1.0,
                _ => entries.push((v, 1.0)),
            }
        }
        for e in &mut entries {
            e.1 /= n;
        }
        RawDistribution { entries }
    }
}

fn cmp_vec(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// Index `i` with `grid[i] <= x < grid[i + 1]`, clamped to the grid.
pub(crate) fn locate(grid: &[f64], x: f64) -> usize {
    grid.partition_point(|&g| g <= x)
        .saturating_sub(1)
        .min(grid.len().saturating_sub(2))
}

/// For each coarse cell, the half-open range of fine cells it spans.
pub(crate) fn fine_ranges(coarse: &[f64], fine: &[f64]) -> Vec<(usize, usize)> {
    coarse
        .windows(2)
        .map(|w| {
            let a = fine.partition_point(|&g| g < w[0]);
            let b = fine.partition_point(|&g| g < w[1]);
            (a, b)
        })
        .collect()
}

/// Calls `f` with every index in the Cartesian product of `ranges`.
pub(crate) fn for_each_index(ranges: &[(usize, usize)], mut f: impl FnMut(&[u32])) {
    if ranges.iter().any(|(a, b)| a >= b) {
        return;
    }
    let mut idx: Vec<u32> = ranges.iter().map(|r| r.0 as u32).collect();
    loop {
        f(&idx);
        let mut d = ranges.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if (idx[d] as usize) < ranges[d].1 {
                break;
            }
            idx[d] = ranges[d].0 as u32;
        }
    }
}
