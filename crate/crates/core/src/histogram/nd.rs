//! Multi-dimensional histogram construction and projection.

use std::collections::BTreeMap;

use super::{build_1d, locate, Cell, HistError, HistParams, HistogramND};
use crate::roadnet::EdgeId;

/// Builds a joint histogram: per-dimension bucketing by [`build_1d`], then the
/// fraction of vectors inside each hyper-bucket of the resulting grid.
pub fn build_nd<V: AsRef<[f64]>>(
    vectors: &[V],
    dims: Vec<EdgeId>,
    params: &HistParams,
) -> Result<HistogramND, HistError> {
    if vectors.is_empty() {
        return Err(HistError::Empty);
    }
    let n = dims.len();
    if n == 0 || vectors.iter().any(|v| v.as_ref().len() != n) {
        return Err(HistError::Dimensionality);
    }
    let mut boundaries = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(vectors.len());
    for d in 0..n {
        column.clear();
        column.extend(vectors.iter().map(|v| v.as_ref()[d]));
        boundaries.push(build_1d(&column, params)?.boundaries());
    }
    let mut counts: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for v in vectors {
        let idx: Vec<u32> = v
            .as_ref()
            .iter()
            .zip(&boundaries)
            .map(|(&x, b)| locate(b, x) as u32)
            .collect();
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }
    let total = vectors.len() as f64;
    let cells = counts
        .into_iter()
        .map(|(idx, c)| Cell { idx, pr: c / total })
        .collect();
    HistogramND::normalized(dims, boundaries, cells)
}

/// Sums out every dimension not in `dims`; retained dimensions keep `h`'s order.
pub fn marginalize_onto(h: &HistogramND, dims: &[EdgeId]) -> Result<HistogramND, HistError> {
    if dims.is_empty() {
        return Err(HistError::Malformed("no dimensions to keep".into()));
    }
    for d in dims {
        if !h.dims().contains(d) {
            return Err(HistError::UnknownDimension(d.clone()));
        }
    }
    let keep: Vec<usize> = (0..h.arity())
        .filter(|&i| dims.contains(&h.dims()[i]))
        .collect();
    marginalize_positions(h, &keep)
}

/// Projection onto dimension positions (ascending).
pub(crate) fn marginalize_positions(
    h: &HistogramND,
    keep: &[usize],
) -> Result<HistogramND, HistError> {
    if keep.len() == h.arity() {
        return Ok(h.clone());
    }
    let mut sums: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for c in h.cells() {
        let idx: Vec<u32> = keep.iter().map(|&d| c.idx[d]).collect();
        *sums.entry(idx).or_insert(0.0) += c.pr;
    }
    HistogramND::normalized(
        keep.iter().map(|&d| h.dims()[d].clone()).collect(),
        keep.iter().map(|&d| h.boundaries()[d].clone()).collect(),
        sums.into_iter().map(|(idx, pr)| Cell { idx, pr }).collect(),
    )
}
