//! Distribution of the sum of two independent histograms.

use super::{sort_dedup, Bucket, Histogram1D};

/// `P(U1 + U2 < s)` for independent `U1 ~ U[0, w1)`, `U2 ~ U[0, w2)`.
pub fn trapezoid_cdf(s: f64, w1: f64, w2: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= w1 + w2 {
        return 1.0;
    }
    let r = |y: f64| if y > 0.0 { y * y } else { 0.0 };
    ((r(s) - r(s - w1) - r(s - w2) + r(s - w1 - w2)) / (2.0 * w1 * w2)).clamp(0.0, 1.0)
}

/// Convolution under uniform in-bucket density, discretized onto the grid of
/// all pairwise bound sums.
pub fn convolve(h1: &Histogram1D, h2: &Histogram1D) -> Histogram1D {
    let mut grid: Vec<f64> = Vec::with_capacity(4 * h1.len() * h2.len());
    for (a, _) in h1.buckets() {
        for (b, _) in h2.buckets() {
            grid.extend([a.l + b.l, a.l + b.u, a.u + b.l, a.u + b.u]);
        }
    }
    sort_dedup(&mut grid);
    let mut mass = vec![0.0; grid.len() - 1];
    for (a, p) in h1.buckets() {
        for (b, q) in h2.buckets() {
            let lo = a.l + b.l;
            let hi = a.u + b.u;
            let (w1, w2) = (a.width(), b.width());
            let pq = p * q;
            let mut k = grid.partition_point(|&g| g < lo);
            let mut prev = 0.0;
            while k + 1 < grid.len() && grid[k] < hi {
                let next = trapezoid_cdf(grid[k + 1] - lo, w1, w2);
                mass[k] += pq * (next - prev);
                prev = next;
                k += 1;
            }
        }
    }
    let total: f64 = mass.iter().sum();
    let buckets: Vec<(Bucket, f64)> = grid
        .windows(2)
        .zip(mass)
        .filter(|(_, m)| *m > 0.0)
        .map(|(w, m)| (Bucket { l: w[0], u: w[1] }, m / total))
        .collect();
    Histogram1D::from_sorted_unchecked(buckets)
}
