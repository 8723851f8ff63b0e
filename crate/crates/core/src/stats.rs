//! Two-sample Kolmogorov–Smirnov, Fleiss' kappa, empirical distributions and summaries.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("sample contains NaN")]
    NaN,
    #[error("rating row {row} sums to {got}, expected {expected}")]
    RowSum { row: usize, got: u64, expected: u64 },
    #[error("fleiss kappa needs at least 2 raters per item")]
    TooFewRaters,
    #[error("ratings matrix is ragged")]
    Ragged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject_null: bool,
}

/// Rejection threshold `sqrt(-ln(alpha) / 2) * sqrt((n + m) / (n m))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-alpha.ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(StatsError::NaN);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `max_x |E1(x) - E2(x)|`, evaluated at the pooled sample points by a merge walk.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    // once either sample is exhausted the gap can only shrink
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    let d = ks_statistic(a, b)?;
    let critical_value = ks_critical_value(a.len(), b.len(), alpha);
    Ok(KsResult {
        d_statistic: d,
        n: a.len(),
        m: b.len(),
        alpha,
        critical_value,
        reject_null: d > critical_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub p_a: f64,
    pub p_e: f64,
}

/// Fleiss' kappa over an items × categories matrix of rating counts.
///
/// Every row must sum to the same rater count. When chance agreement is total
/// (`p_e == 1`, every rating in one category) the raters agree completely and
/// kappa is 1.
pub fn fleiss_kappa(ratings: &[Vec<u64>]) -> Result<KappaResult, StatsError> {
    let first = ratings.first().ok_or(StatsError::EmptySample)?;
    let k = first.len();
    let raters: u64 = first.iter().sum();
    if raters < 2 {
        return Err(StatsError::TooFewRaters);
    }
    // exact integer sums; kappa is formed with a single division at the end
    let mut totals = vec![0u64; k];
    let mut agree: u128 = 0;
    for (row_idx, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::Ragged);
        }
        let got: u64 = row.iter().sum();
        if got != raters {
            return Err(StatsError::RowSum {
                row: row_idx,
                got,
                expected: raters,
            });
        }
        agree += row.iter().map(|&c| u128::from(c * c.saturating_sub(1))).sum::<u128>();
        for (t, &c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    let items = ratings.len() as u128;
    let r = u128::from(raters);
    let d_a = items * r * (r - 1);
    let d_e = (items * r) * (items * r);
    let s_e: u128 = totals.iter().map(|&t| u128::from(t) * u128::from(t)).sum();
    let p_a = agree as f64 / d_a as f64;
    let p_e = s_e as f64 / d_e as f64;
    let kappa = if s_e == d_e {
        1.0
    } else {
        let num = (agree * d_e) as i128 - (s_e * d_a) as i128;
        num as f64 / (d_a * (d_e - s_e)) as f64
    };
    Ok(KappaResult { kappa, p_a, p_e })
}

/// Right-continuous empirical distribution `F(x) = P(X <= x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Distinct support points, ascending.
    pub points: Vec<f64>,
    /// `F` at each support point.
    pub values: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Result<Self, StatsError> {
        let s = sorted(sample)?;
        let n = s.len() as f64;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in s.iter().enumerate() {
            if i + 1 < s.len() && s[i + 1] == x {
                continue;
            }
            points.push(x);
            values.push((i + 1) as f64 / n);
        }
        Ok(Ecdf { points, values })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= x);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// `P(X > x)`.
    pub fn ccdf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// `(x, P(X > x))` pairs at each support point, ready for plotting.
    pub fn ccdf_points(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(&x, &f)| (x, 1.0 - f))
            .collect()
    }
}

pub fn ecdf(sample: &[f64]) -> Result<Ecdf, StatsError> {
    Ecdf::new(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation (divides by n).
    pub std: f64,
}

/// Median of a nonempty sample; midpoint of the two central values for even sizes.
pub fn median(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

pub fn describe(sample: &[f64]) -> Result<Summary, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary {
        mean,
        median: median(sample),
        std: var.sqrt(),
    })
}

/// Downsamples every group without replacement to the size of the smallest one.
/// Selected members keep their original relative order.
pub fn equal_size_sample(
    groups: &BTreeMap<String, Vec<String>>,
    seed: u64,
) -> BTreeMap<String, Vec<String>> {
    let Some(target) = groups.values().map(Vec::len).min() else {
        return BTreeMap::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups
        .iter()
        .map(|(name, ids)| {
            let mut idx: Vec<usize> = (0..ids.len()).collect();
            idx.shuffle(&mut rng);
            let mut chosen = idx[..target].to_vec();
            chosen.sort_unstable();
            (name.clone(), chosen.into_iter().map(|i| ids[i].clone()).collect())
        })
        .collect()
}
