//! Naive Bayes with Gaussian or kernel-density class-conditional likelihoods.

use super::{Classifier, Dataset, MlError};

const VARIANCE_FLOOR: f64 = 1e-9;
const KDE_GRID: usize = 256;
/// Weight of the uniform component mixed into every kernel density.
const KDE_UNIFORM_WEIGHT: f64 = 1e-3;

fn log_priors(ds: &Dataset) -> Vec<f64> {
    let n = ds.len() as f64;
    ds.class_counts()
        .iter()
        .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64 / n).ln() })
        .collect()
}

/// Softmax over log scores; `-inf` entries get probability 0.
fn softmax(log_scores: &[f64]) -> Vec<f64> {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / log_scores.len() as f64; log_scores.len()];
    }
    let exps: Vec<f64> = log_scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn rows_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by[l].push(i);
    }
    by
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

pub fn train_nb(ds: &Dataset) -> Result<GaussianNb, MlError> {
    ds.require_two_classes()?;
    let f = ds.n_features();
    let mut means = Vec::with_capacity(ds.n_classes());
    let mut variances = Vec::with_capacity(ds.n_classes());
    for idx in rows_by_class(ds) {
        let n = idx.len().max(1) as f64;
        let mu: Vec<f64> = (0..f).map(|j| idx.iter().map(|&i| ds.rows[i][j]).sum::<f64>() / n).collect();
        let var: Vec<f64> = (0..f)
            .map(|j| {
                let v = idx.iter().map(|&i| (ds.rows[i][j] - mu[j]).powi(2)).sum::<f64>() / n;
                v.max(VARIANCE_FLOOR)
            })
            .collect();
        means.push(mu);
        variances.push(var);
    }
    Ok(GaussianNb {
        log_priors: log_priors(ds),
        means,
        variances,
    })
}

impl Classifier for GaussianNb {
    fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.n_classes())
            .map(|c| {
                if !self.log_priors[c].is_finite() {
                    return f64::NEG_INFINITY;
                }
                self.log_priors[c]
                    + x.iter()
                        .zip(&self.means[c])
                        .zip(&self.variances[c])
                        .map(|((&xi, &m), &v)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (xi - m).powi(2) / (2.0 * v))
                        .sum::<f64>()
            })
            .collect();
        softmax(&scores)
    }
}

/// Gaussian kernel density tabulated on a regular grid and linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
struct GridDensity {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl GridDensity {
    fn fit(samples: &[f64], bandwidth: f64) -> Self {
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = min - 4.0 * bandwidth;
        let step = (max - min + 8.0 * bandwidth) / (KDE_GRID - 1) as f64;
        let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let values = (0..KDE_GRID)
            .map(|g| {
                let at = lo + g as f64 * step;
                norm * samples.iter().map(|&s| (-0.5 * ((at - s) / bandwidth).powi(2)).exp()).sum::<f64>()
            })
            .collect();
        GridDensity { lo, step, values }
    }

    fn at(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos.is_nan() || pos < 0.0 || pos > (KDE_GRID - 1) as f64 {
            return 0.0;
        }
        let i = (pos.floor() as usize).min(KDE_GRID - 2);
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

/// Silverman's rule of thumb, falling back to a fraction of the feature range.
fn bandwidth(samples: &[f64], feature_range: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        feature_range * 1e-2
    }
}

/// Naive Bayes whose per-feature likelihoods are kernel density estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeNb {
    log_priors: Vec<f64>,
    /// `ranges[j]` is the training range of feature j; zero-range features carry no evidence.
    ranges: Vec<f64>,
    densities: Vec<Vec<Option<GridDensity>>>,
}

pub fn train_kde_nb(ds: &Dataset) -> Result<KdeNb, MlError> {
    ds.require_two_classes()?;
    let f = ds.n_features();
    let ranges: Vec<f64> = (0..f)
        .map(|j| {
            let col = ds.column(j);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let densities = rows_by_class(ds)
        .into_iter()
        .map(|idx| {
            (0..f)
                .map(|j| {
                    if idx.is_empty() || ranges[j] <= 0.0 {
                        return None;
                    }
                    let samples: Vec<f64> = idx.iter().map(|&i| ds.rows[i][j]).collect();
                    Some(GridDensity::fit(&samples, bandwidth(&samples, ranges[j])))
                })
                .collect()
        })
        .collect();
    Ok(KdeNb {
        log_priors: log_priors(ds),
        ranges,
        densities,
    })
}

impl Classifier for KdeNb {
    fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.n_classes())
            .map(|c| {
                if !self.log_priors[c].is_finite() {
                    return f64::NEG_INFINITY;
                }
                let mut s = self.log_priors[c];
                for (j, d) in self.densities[c].iter().enumerate() {
                    if let Some(d) = d {
                        let p = (1.0 - KDE_UNIFORM_WEIGHT) * d.at(x[j]) + KDE_UNIFORM_WEIGHT / self.ranges[j];
                        s += p.ln();
                    }
                }
                s
            })
            .collect();
        softmax(&scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(n: usize, gap: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            rows.push(vec![c as f64 * gap + noise.sample(&mut rng), noise.sample(&mut rng)]);
            labels.push(c);
        }
        Dataset::new(vec!["x".into(), "y".into()], rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn gaussian_separates_one_dimension() {
        let ds = Dataset::new(
            vec!["x".into()],
            vec![vec![0.0], vec![0.2], vec![-0.1], vec![10.0], vec![9.8], vec![10.3]],
            vec![0, 0, 0, 1, 1, 1],
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        let nb = train_nb(&ds).unwrap();
        assert_eq!(nb.predict(&[0.1]), 0);
        assert_eq!(nb.predict(&[9.0]), 1);
        let p = nb.predict_proba(&[0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(train_nb(&ds).unwrap(), nb);
    }

    #[test]
    fn identical_distributions_give_priors() {
        // Monte Carlo: with the same generating distribution, the posterior averages to the prior.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..4000).map(|_| vec![noise.sample(&mut rng)]).collect();
        let labels: Vec<usize> = (0..4000).map(|i| usize::from(i % 4 == 0)).collect();
        let ds = Dataset::new(vec!["x".into()], rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let nb = train_nb(&ds).unwrap();
        let probes: Vec<f64> = (0..2000).map(|_| noise.sample(&mut rng)).collect();
        let mean_b = probes.iter().map(|&x| nb.predict_proba(&[x])[1]).sum::<f64>() / probes.len() as f64;
        assert!((mean_b - 0.25).abs() < 0.05, "{mean_b}");
    }

    #[test]
    fn constant_feature_survives() {
        let ds = Dataset::new(
            vec!["c".into(), "x".into()],
            vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 5.0], vec![1.0, 6.0]],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let nb = train_nb(&ds).unwrap();
        assert!(nb.predict_proba(&[1.0, 0.5]).iter().all(|p| p.is_finite()));
        assert_eq!(nb.predict(&[1.0, 5.5]), 1);
        let kde = train_kde_nb(&ds).unwrap();
        assert_eq!(kde.predict(&[1.0, 0.5]), 0);
        assert_eq!(kde.predict(&[1.0, 5.5]), 1);
    }

    #[test]
    fn single_class_is_an_error() {
        let ds = Dataset::new(vec!["x".into()], vec![vec![0.0], vec![1.0]], vec![0, 0], vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(train_nb(&ds), Err(MlError::SingleClass)));
        assert!(matches!(train_kde_nb(&ds), Err(MlError::SingleClass)));
    }

    #[test]
    fn kde_handles_bimodal_class() {
        // class a at -5 and +5, class b at 0: a single Gaussian cannot fit class a
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..300 {
            let jitter: f64 = rng.random_range(-0.5..0.5);
            match i % 3 {
                0 => (rows.push(vec![-5.0 + jitter]), labels.push(0)),
                1 => (rows.push(vec![5.0 + jitter]), labels.push(0)),
                _ => (rows.push(vec![jitter]), labels.push(1)),
            };
        }
        let ds = Dataset::new(vec!["x".into()], rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let kde = train_kde_nb(&ds).unwrap();
        assert_eq!(kde.predict(&[-5.0]), 0);
        assert_eq!(kde.predict(&[5.0]), 0);
        assert_eq!(kde.predict(&[0.0]), 1);
    }

    #[test]
    fn blobs_are_classified() {
        let ds = two_blobs(400, 6.0, 3);
        for model in [Box::new(train_nb(&ds).unwrap()) as Box<dyn Classifier>, Box::new(train_kde_nb(&ds).unwrap())] {
            let acc = ds.rows.iter().zip(&ds.labels).filter(|(r, &l)| model.predict(r) == l).count() as f64 / 400.0;
            assert!(acc > 0.97, "{acc}");
        }
    }
}
