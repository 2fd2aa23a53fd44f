//! Entropy and KL divergence.

use std::collections::HashMap;

use super::{for_each_index, HistError, Histogram1D, HistogramND};
use crate::roadnet::EdgeId;

/// Mass given to each uncovered region of `p`'s support before `q` is renormalized.
pub const KL_EPSILON: f64 = 1e-9;

/// Discrete Shannon entropy of the hyper-bucket masses, in nats.
pub fn entropy(h: &HistogramND) -> f64 {
    h.cells()
        .iter()
        .filter(|c| c.pr > 0.0)
        .map(|c| -c.pr * c.pr.ln())
        .sum()
}

pub fn entropy_1d(h: &Histogram1D) -> f64 {
    h.buckets()
        .iter()
        .filter(|b| b.1 > 0.0)
        .map(|b| -b.1 * b.1.ln())
        .sum()
}

/// `KL(p ‖ q)` on the common refinement of both grids.
///
/// Mass splits uniformly inside a hyper-bucket, so the refined divergence is a
/// sum over overlapping cell pairs and no refined grid is materialized. Parts
/// of `p`'s support that `q` leaves empty receive `KL_EPSILON` each in `q`,
/// which is then renormalized; when `q` covers `p` the result is exact.
pub fn kl_divergence(p: &HistogramND, q: &HistogramND) -> Result<f64, HistError> {
    let n = p.arity();
    if q.arity() != n {
        return Err(HistError::DimensionMismatch);
    }
    let q_cells: HashMap<&[u32], f64> =
        q.cells().iter().map(|c| (c.idx.as_slice(), c.pr)).collect();
    // For each dimension and p cell index, the q cell indices overlapping it.
    let spans: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|d| {
            let qb = &q.boundaries()[d];
            p.boundaries()[d]
                .windows(2)
                .map(|w| {
                    let a = qb.partition_point(|&x| x <= w[0]).saturating_sub(1);
                    let b = qb.partition_point(|&x| x < w[1]).min(qb.len() - 1);
                    (a, b.max(a))
                })
                .collect()
        })
        .collect();

    let mut covered_terms = 0.0;
    let mut covered_mass = 0.0;
    let mut uncovered: Vec<f64> = Vec::new();
    let mut ranges = vec![(0usize, 0usize); n];
    for a in p.cells() {
        let pa = p.hyper_bucket(a);
        let vol_a: f64 = pa.iter().map(|b| b.width()).product();
        let dp = a.pr / vol_a;
        for d in 0..n {
            ranges[d] = spans[d][a.idx[d] as usize];
        }
        let mut cover = 0.0;
        let mut term = 0.0;
        let mut pair = |idx: &[u32], qm: f64| {
            let mut ov = 1.0;
            let mut vol_b = 1.0;
            for d in 0..n {
                let qb = q.bucket(d, idx[d]);
                ov *= qb.overlap(&pa[d]);
                vol_b *= qb.width();
            }
            if ov > 0.0 && qm > 0.0 {
                cover += ov;
                term += ov * dp * (dp / (qm / vol_b)).ln();
            }
        };
        // Enumerate the overlapping index box, or scan q when the box is larger.
        let boxed = ranges.iter().try_fold(1usize, |acc, r| {
            acc.checked_mul(r.1 - r.0).filter(|&v| v <= q.cells().len())
        });
        if boxed.is_some() {
            for_each_index(&ranges, |idx| {
                if let Some(&qm) = q_cells.get(idx) {
                    pair(idx, qm);
                }
            });
        } else {
            for c in q.cells() {
                if c.idx
                    .iter()
                    .zip(&ranges)
                    .all(|(&i, r)| (r.0..r.1).contains(&(i as usize)))
                {
                    pair(&c.idx, c.pr);
                }
            }
        }
        covered_terms += term;
        covered_mass += cover * dp;
        let frac = 1.0 - cover / vol_a;
        if frac > 1e-12 {
            uncovered.push(a.pr * frac);
        }
    }
    let z = 1.0 + uncovered.len() as f64 * KL_EPSILON;
    let mut kl = covered_terms + covered_mass * z.ln();
    for m in uncovered {
        kl += m * (m * z / KL_EPSILON).ln();
    }
    Ok(kl.max(0.0))
}

pub fn kl_divergence_1d(p: &Histogram1D, q: &Histogram1D) -> f64 {
    let dim = EdgeId::new("x");
    kl_divergence(&p.to_nd(dim.clone()), &q.to_nd(dim)).expect("same arity")
}

/// `(KL(p ‖ q) + KL(q ‖ p)) / 2`.
pub fn symmetric_kl(p: &HistogramND, q: &HistogramND) -> Result<f64, HistError> {
    Ok(0.5 * (kl_divergence(p, q)? + kl_divergence(q, p)?))
}
