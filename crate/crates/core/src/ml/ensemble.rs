//! Plurality-vote ensemble of random forest, kernel-density Bayes, Gaussian naive
//! Bayes and boosted forests.

use super::{argmax, derive_seed, train_boosted, train_kde_nb, train_nb, train_rf, Classifier, Dataset, MlError, RfParams};

/// Plurality label among `votes`; ties go to the lowest (most severe) class index.
pub fn ensemble_vote(votes: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0.0; n_classes];
    for &v in votes {
        counts[v] += 1.0;
    }
    argmax(&counts)
}

pub struct Ensemble {
    members: Vec<Box<dyn Classifier>>,
    n_classes: usize,
}

impl Ensemble {
    pub fn new(members: Vec<Box<dyn Classifier>>) -> Self {
        let n_classes = members.first().map_or(0, |m| m.n_classes());
        Ensemble { members, n_classes }
    }

    pub fn train(ds: &Dataset, forest: &RfParams, boost_rounds: usize, seed: u64) -> Result<Self, MlError> {
        Ok(Ensemble::new(vec![
            Box::new(train_rf(ds, forest, derive_seed(seed, 1, 0))?),
            Box::new(train_kde_nb(ds)?),
            Box::new(train_nb(ds)?),
            Box::new(train_boosted(ds, forest, boost_rounds, derive_seed(seed, 2, 0))?),
        ]))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Classifier for Ensemble {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean of the members' probabilities; used as a ranking score.
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for m in &self.members {
            for (a, p) in acc.iter_mut().zip(m.predict_proba(x)) {
                *a += p;
            }
        }
        let n = self.members.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    fn predict(&self, x: &[f64]) -> usize {
        let votes: Vec<usize> = self.members.iter().map(|m| m.predict(x)).collect();
        ensemble_vote(&votes, self.n_classes)
    }
}
