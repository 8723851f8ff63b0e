//! Multiclass AdaBoost (SAMME) over an arbitrary base learner.
//!
//! The first round fits the base learner on the training data as given; later rounds
//! fit it on a weighted resample drawn from the current instance weights. Members
//! are combined by the `alpha`-weighted average of their class probabilities.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Classifier, Dataset, Learner, MlError};

/// Cap on a member's weight when it makes no training error.
const MAX_ALPHA: f64 = 25.0;

pub struct AdaBoost {
    members: Vec<(Box<dyn Classifier>, f64)>,
    n_classes: usize,
    /// Weighted training error per completed round.
    pub errors: Vec<f64>,
}

impl std::fmt::Debug for AdaBoost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdaBoost")
            .field("rounds", &self.members.len())
            .field("alphas", &self.alphas())
            .field("errors", &self.errors)
            .finish()
    }
}

impl AdaBoost {
    pub fn rounds(&self) -> usize {
        self.members.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.members.iter().map(|(_, a)| *a).collect()
    }
}

pub fn train_boosted(ds: &Dataset, base: &dyn Learner, rounds: usize, seed: u64) -> Result<AdaBoost, MlError> {
    ds.require_two_classes()?;
    let n = ds.len();
    let k = ds.n_classes() as f64;
    let chance = 1.0 - 1.0 / k;
    let mut weights = vec![1.0 / n as f64; n];
    let mut members: Vec<(Box<dyn Classifier>, f64)> = Vec::new();
    let mut errors = Vec::new();
    for round in 0..rounds.max(1) {
        let round_seed = derive_seed(seed, round as u64, 0);
        let model = if round == 0 {
            base.fit(ds, round_seed)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, round as u64, 1));
            let dist = WeightedIndex::new(&weights).expect("weights are positive");
            let idx: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let sample = ds.subset(&idx);
            if sample.present_classes() < 2 {
                break;
            }
            base.fit(&sample, round_seed)?
        };
        let wrong: Vec<bool> = ds.rows.iter().zip(&ds.labels).map(|(r, &l)| model.predict(r) != l).collect();
        let total: f64 = weights.iter().sum();
        let err = weights.iter().zip(&wrong).filter(|(_, &w)| w).map(|(x, _)| x).sum::<f64>() / total;
        if err >= chance {
            if round == 0 {
                log::warn!("boosting: base learner error {err:.4} is no better than chance; stopping after one round");
                members.push((model, 1.0));
                errors.push(err);
            }
            break;
        }
        errors.push(err);
        if err <= 0.0 {
            members.push((model, MAX_ALPHA));
            break;
        }
        let alpha = (((1.0 - err) / err).ln() + (k - 1.0).ln()).min(MAX_ALPHA);
        members.push((model, alpha));
        for (w, &bad) in weights.iter_mut().zip(&wrong) {
            if bad {
                *w *= alpha.exp();
            }
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
    }
    Ok(AdaBoost {
        members,
        n_classes: ds.n_classes(),
        errors,
    })
}

impl Classifier for AdaBoost {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for (m, a) in &self.members {
            for (s, p) in acc.iter_mut().zip(m.predict_proba(x)) {
                *s += a * p;
            }
            total += a;
        }
        acc.iter_mut().for_each(|s| *s /= total);
        acc
    }
}
