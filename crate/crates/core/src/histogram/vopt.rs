//! V-Optimal bucketing by dynamic programming.
//!
//! The sorted distinct values are split into contiguous groups. A group
//! `v_i..=v_j` becomes the bucket `[v_i, min(v_j + res, v_{j+1}))`, so buckets
//! may leave gaps where no value was observed; the last bucket ends at
//! `max + res`. The group cost is the squared deviation of the raw
//! distribution from the bucket mass spread uniformly over its resolution
//! cells: `Σ f² − M² / n` with `n = max(width / res, #values)`.

use super::{Bucket, HistError, Histogram1D, RawDistribution};

/// Incremental V-Optimal solver; layer `b` holds the best `b`-bucket partitions
/// of every prefix of the distinct values.
#[derive(Debug, Clone)]
pub struct VOptimal {
    values: Vec<f64>,
    upper: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
    resolution: f64,
    layers: Vec<Vec<f64>>,
    choice: Vec<Vec<usize>>,
}

impl VOptimal {
    pub fn new(values: &[f64], resolution: f64) -> Result<Self, HistError> {
        if values.is_empty() {
            return Err(HistError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HistError::Malformed("non-finite value".into()));
        }
        let raw = RawDistribution::from_values(values);
        let (values, freqs): (Vec<f64>, Vec<f64>) = raw.entries.into_iter().unzip();
        Ok(Self::from_distinct(values, freqs, resolution))
    }

    /// From already sorted distinct values and their fractions.
    pub(crate) fn from_distinct(values: Vec<f64>, freqs: Vec<f64>, resolution: f64) -> Self {
        let m = values.len();
        let upper = (0..m)
            .map(|j| {
                if j + 1 < m {
                    (values[j] + resolution).min(values[j + 1])
                } else {
                    values[j] + resolution
                }
            })
            .collect();
        let mut prefix = vec![0.0; m + 1];
        let mut prefix_sq = vec![0.0; m + 1];
        for (k, f) in freqs.iter().enumerate() {
            prefix[k + 1] = prefix[k] + f;
            prefix_sq[k + 1] = prefix_sq[k] + f * f;
        }
        VOptimal {
            values,
            upper,
            prefix,
            prefix_sq,
            resolution,
            layers: Vec::new(),
            choice: Vec::new(),
        }
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    fn group_cost(&self, i: usize, j: usize) -> f64 {
        let mass = self.prefix[j + 1] - self.prefix[i];
        let sq = self.prefix_sq[j + 1] - self.prefix_sq[i];
        let cells = ((self.upper[j] - self.values[i]) / self.resolution).max((j - i + 1) as f64);
        (sq - mass * mass / cells).max(0.0)
    }

    /// Computes layers up to `b`.
    pub fn extend_to(&mut self, b: usize) -> Result<(), HistError> {
        let m = self.distinct();
        if b < 1 || b > m {
            return Err(HistError::BadBucketCount { b, max: m });
        }
        while self.layers.len() < b {
            let k = self.layers.len() + 1;
            let mut layer = vec![f64::INFINITY; m];
            let mut arg = vec![0usize; m];
            if k == 1 {
                for (j, slot) in layer.iter_mut().enumerate() {
                    *slot = self.group_cost(0, j);
                }
            } else {
                let prev = &self.layers[k - 2];
                for j in (k - 1)..m {
                    let mut best = f64::INFINITY;
                    let mut best_i = k - 1;
                    for i in (k - 1)..=j {
                        let c = prev[i - 1] + self.group_cost(i, j);
                        if c < best {
                            best = c;
                            best_i = i;
                        }
                    }
                    layer[j] = best;
                    arg[j] = best_i;
                }
            }
            self.layers.push(layer);
            self.choice.push(arg);
        }
        Ok(())
    }

    /// Minimal total squared error with `b` buckets.
    pub fn sse(&mut self, b: usize) -> Result<f64, HistError> {
        self.extend_to(b)?;
        Ok(self.layers[b - 1][self.distinct() - 1])
    }

    /// Start indices (into the distinct values) of the optimal `b` groups.
    pub fn group_starts(&mut self, b: usize) -> Result<Vec<usize>, HistError> {
        self.extend_to(b)?;
        let mut starts = vec![0; b];
        let mut j = self.distinct() - 1;
        for k in (1..b).rev() {
            let i = self.choice[k][j];
            starts[k] = i;
            j = i - 1;
        }
        Ok(starts)
    }

    pub fn histogram(&mut self, b: usize) -> Result<Histogram1D, HistError> {
        let starts = self.group_starts(b)?;
        let m = self.distinct();
        let mut buckets = Vec::with_capacity(b);
        for (g, &i) in starts.iter().enumerate() {
            let j = starts.get(g + 1).map_or(m - 1, |&n| n - 1);
            let mass = self.prefix[j + 1] - self.prefix[i];
            buckets.push((
                Bucket {
                    l: self.values[i],
                    u: self.upper[j],
                },
                mass,
            ));
        }
        let total: f64 = buckets.iter().map(|b| b.1).sum();
        for b in &mut buckets {
            b.1 /= total;
        }
        Ok(Histogram1D::from_sorted_unchecked(buckets))
    }
}

/// The V-Optimal `b`-bucket histogram of `values`.
pub fn v_optimal(values: &[f64], b: usize, resolution: f64) -> Result<Histogram1D, HistError> {
    VOptimal::new(values, resolution)?.histogram(b)
}

/// Squared error of a histogram against the raw distribution of `values`,
/// counted over resolution cells the same way the optimizer does.
pub fn bucket_sse(values: &[f64], hist: &Histogram1D, resolution: f64) -> f64 {
    let raw = RawDistribution::from_values(values);
    let mut total = 0.0;
    for (b, p) in hist.buckets() {
        let inside: Vec<f64> = raw
            .entries
            .iter()
            .filter(|(v, _)| b.contains(*v))
            .map(|e| e.1)
            .collect();
        let cells = (b.width() / resolution).max(inside.len() as f64);
        let density = p / cells;
        total += inside.iter().map(|f| (f - density).powi(2)).sum::<f64>()
            + (cells - inside.len() as f64) * density * density;
    }
    for (v, f) in &raw.entries {
        if !hist.buckets().iter().any(|(b, _)| b.contains(*v)) {
            total += f * f;
        }
    }
    total
}
