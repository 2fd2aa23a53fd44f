//! From a joint histogram to the distribution of the cost sum.

use super::{sort_dedup, Bucket, HistError, Histogram1D, HistogramND};

/// The bucket of summed bounds of a hyper-bucket.
pub fn hb2bu(hb: &[Bucket]) -> Bucket {
    let (l, u) = hb.iter().fold((0.0, 0.0), |(l, u), b| (l + b.l, u + b.u));
    Bucket { l, u }
}

/// Spreads each pair's mass uniformly over the cells of the union of all
/// boundaries. Returns the non-empty cells; mass is preserved.
pub(crate) fn spread(pairs: &[(Bucket, f64)]) -> Vec<(Bucket, f64)> {
    let mut grid: Vec<f64> = pairs.iter().flat_map(|(b, _)| [b.l, b.u]).collect();
    sort_dedup(&mut grid);
    if grid.len() < 2 {
        return Vec::new();
    }
    let mut mass = vec![0.0; grid.len() - 1];
    for (b, p) in pairs {
        let density = p / b.width();
        let mut k = grid.partition_point(|&g| g < b.l);
        while k + 1 < grid.len() && grid[k] < b.u {
            mass[k] += density * (grid[k + 1] - grid[k]);
            k += 1;
        }
    }
    grid.windows(2)
        .zip(mass)
        .filter(|(_, m)| *m > 0.0)
        .map(|(w, m)| (Bucket { l: w[0], u: w[1] }, m))
        .collect()
}

/// Turns overlapping (bucket, probability) pairs into a disjoint histogram.
pub fn rearrange(pairs: &[(Bucket, f64)]) -> Result<Histogram1D, HistError> {
    for (b, p) in pairs {
        Bucket::new(b.l, b.u)?;
        if !(*p >= 0.0 && p.is_finite()) {
            return Err(HistError::BadProbability(*p));
        }
    }
    let out = spread(pairs);
    if out.is_empty() {
        return Err(HistError::NotNormalized(0.0));
    }
    Ok(Histogram1D::from_sorted_unchecked(out))
}

/// HB2BU on every hyper-bucket, as (bucket, probability) pairs.
pub fn sum_pairs(h: &HistogramND) -> Vec<(Bucket, f64)> {
    h.cells()
        .iter()
        .map(|c| (hb2bu(&h.hyper_bucket(c)), c.pr))
        .collect()
}

/// Distribution of the sum of all dimensions of a joint histogram.
pub fn marginal_sum(h: &HistogramND) -> Histogram1D {
    rearrange(&sum_pairs(h)).expect("histogram cells are valid pairs")
}
