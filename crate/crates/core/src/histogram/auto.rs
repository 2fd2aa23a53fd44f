//! Bucket-count selection by f-fold cross validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vopt::VOptimal;
use super::{HistError, HistParams, Histogram1D, RawDistribution};

/// Squared error of a histogram against a held-out raw distribution, over the
/// distinct held-out costs. A bucket's mass is spread over its resolution cells.
fn fold_se(h: &Histogram1D, test: &RawDistribution<f64>, resolution: f64) -> f64 {
    let buckets = h.buckets();
    test.entries
        .iter()
        .map(|&(c, d)| {
            let k = buckets.partition_point(|(b, _)| b.u <= c);
            let hc = match buckets.get(k) {
                Some((b, p)) if b.contains(c) => p / (b.width() / resolution).max(1.0),
                _ => 0.0,
            };
            (hc - d).powi(2)
        })
        .sum()
}

/// Training (distinct values, fractions) and the test distribution.
type Fold = ((Vec<f64>, Vec<f64>), RawDistribution<f64>);

/// Training (distinct values, fractions) and test distribution of each fold.
/// Values are sorted, shuffled with the seed and cut into contiguous folds;
/// distinct values are counted once and each fold is derived by subtraction.
fn split_folds(values: &[f64], params: &HistParams) -> Vec<Fold> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut idx: Vec<u32> = Vec::with_capacity(sorted.len());
    for v in &sorted {
        if distinct.last() != Some(v) {
            distinct.push(*v);
        }
        idx.push(distinct.len() as u32 - 1);
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut totals = vec![0usize; distinct.len()];
    for &i in &idx {
        totals[i as usize] += 1;
    }
    let n = idx.len();
    let f = params.folds;
    let mut counts = vec![0usize; distinct.len()];
    (0..f)
        .map(|k| {
            let fold = &idx[k * n / f..(k + 1) * n / f];
            for &i in fold {
                counts[i as usize] += 1;
            }
            let n_test = fold.len() as f64;
            let n_train = (n - fold.len()) as f64;
            let mut train = (Vec::new(), Vec::new());
            let mut test = Vec::new();
            for (j, &v) in distinct.iter().enumerate() {
                if totals[j] > counts[j] {
                    train.0.push(v);
                    train.1.push((totals[j] - counts[j]) as f64 / n_train);
                }
                if counts[j] > 0 {
                    test.push((v, counts[j] as f64 / n_test));
                }
            }
            for &i in fold {
                counts[i as usize] = 0;
            }
            (train, RawDistribution { entries: test })
        })
        .collect()
}

/// Mean fold error `E_b` for `b = 1, 2, …` until the stopping rule fires,
/// together with the chosen bucket count.
pub fn fold_errors(values: &[f64], params: &HistParams) -> Result<(usize, Vec<f64>), HistError> {
    if values.is_empty() {
        return Err(HistError::Empty);
    }
    if params.folds < 2 || values.len() < params.folds {
        return Err(HistError::TooFewSamples {
            samples: values.len(),
            folds: params.folds,
        });
    }
    let mut folds = split_folds(values, params);
    let mut solvers: Vec<VOptimal> = folds
        .iter_mut()
        .map(|(train, _)| {
            VOptimal::from_distinct(
                std::mem::take(&mut train.0),
                std::mem::take(&mut train.1),
                params.resolution,
            )
        })
        .collect();
    let min_distinct = solvers.iter().map(VOptimal::distinct).min().unwrap_or(1);
    let cap = params.max_buckets.max(1);
    let mut errors: Vec<f64> = Vec::new();
    let mut b = 1;
    loop {
        if b > cap || b > min_distinct {
            return Ok((b - 1, errors));
        }
        let mut sum = 0.0;
        for (solver, (_, test)) in solvers.iter_mut().zip(&folds) {
            let h = solver.histogram(b)?;
            sum += fold_se(&h, test, params.resolution);
        }
        let cur = sum / folds.len() as f64;
        errors.push(cur);
        if let Some(&prev) = errors.iter().rev().nth(1) {
            if prev <= 0.0 || (prev - cur) / prev < params.sig {
                return Ok((b - 1, errors));
            }
        }
        b += 1;
    }
}

/// Number of buckets chosen by cross validation.
pub fn auto_bucket_count(values: &[f64], params: &HistParams) -> Result<usize, HistError> {
    fold_errors(values, params).map(|(b, _)| b.max(1))
}

/// V-Optimal histogram with an automatically chosen bucket count; a single
/// bucket when there are fewer values than folds.
pub fn build_1d(values: &[f64], params: &HistParams) -> Result<Histogram1D, HistError> {
    if values.is_empty() {
        return Err(HistError::Empty);
    }
    let mut solver = VOptimal::new(values, params.resolution)?;
    let b = if values.len() < params.folds.max(2) {
        1
    } else {
        auto_bucket_count(values, params)?
    };
    solver.histogram(b.min(solver.distinct()))
}
