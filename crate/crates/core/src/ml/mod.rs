//! Classifiers and the evaluation harness.
//!
//! Classes are dense indices `0..K` into [`Dataset::class_names`]. Whenever a
//! decision ties, the lower index wins; class lists are ordered most severe first,
//! so ties resolve towards the more severe label.

mod bayes;
mod boost;
mod cv;
mod dataset;
mod ensemble;
mod forest;
mod infogain;
mod metrics;
mod setup;

pub use bayes::{train_kde_nb, train_nb, GaussianNb, KdeNb};
pub use boost::{train_boosted, AdaBoost};
pub use cv::{repeated_cv, stratified_folds, ClassSummary, CvParams, EvalReport, WeightedSummary};
pub use dataset::Dataset;
pub use ensemble::{ensemble_vote, Ensemble};
pub use forest::{train_rf, DecisionTree, RandomForest, RfParams};
pub use infogain::{entropy, info_gain, info_gain_ranking};
pub use metrics::{auc_one_vs_rest, confusion_matrix, metrics, ClassMetrics, Metrics};
pub use setup::{run_setup, Setup};

use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("training data must contain at least two classes")]
    SingleClass,
    #[error("class {class:?} has {count} instance(s); at least {needed} required")]
    TooFewInstances { class: String, count: usize, needed: usize },
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("label index {0} out of range")]
    LabelOutOfRange(usize),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("unknown setup {0:?} (expected four_class, three_no_spam, three_offensive or two_offensive)")]
    UnknownSetup(String),
    #[error("unknown learner {0:?} (expected nb, kde, rf, boost or ensemble)")]
    UnknownLearner(String),
    #[error("setup {setup} needs a dataset labeled with bully/aggressor/spammer/normal, got {found:?}")]
    NotRawLabels { setup: Setup, found: Vec<String> },
    #[error("dataset has no rows")]
    Empty,
    #[error("bad dataset CSV: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A trained model. Probabilities are over the training dataset's class indices.
pub trait Classifier: Send + Sync {
    fn n_classes(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Vec<f64>;

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }
}

/// Something that can be fitted to a dataset, deterministically under `seed`.
pub trait Learner: Sync {
    fn name(&self) -> String;

    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Box<dyn Classifier>, MlError>;
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mixes a master seed with two coordinates (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The learners selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    NaiveBayes,
    KdeBayes,
    RandomForest,
    Boosted,
    Ensemble,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::NaiveBayes => "nb",
            LearnerKind::KdeBayes => "kde",
            LearnerKind::RandomForest => "rf",
            LearnerKind::Boosted => "boost",
            LearnerKind::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self, MlError> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "nb" | "naive_bayes" | "naivebayes" => LearnerKind::NaiveBayes,
            "kde" | "kde_nb" | "bayesnet" => LearnerKind::KdeBayes,
            "rf" | "random_forest" | "randomforest" => LearnerKind::RandomForest,
            "boost" | "adaboost" => LearnerKind::Boosted,
            "ensemble" => LearnerKind::Ensemble,
            _ => return Err(MlError::UnknownLearner(s.to_string())),
        })
    }
}

/// A named learner with its forest and boosting settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub forest: RfParams,
    pub boost_rounds: usize,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            forest: RfParams::default(),
            boost_rounds: 10,
        }
    }
}

impl Learner for LearnerSpec {
    fn name(&self) -> String {
        self.kind.as_str().to_string()
    }

    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Box<dyn Classifier>, MlError> {
        Ok(match self.kind {
            LearnerKind::NaiveBayes => Box::new(train_nb(ds)?),
            LearnerKind::KdeBayes => Box::new(train_kde_nb(ds)?),
            LearnerKind::RandomForest => Box::new(train_rf(ds, &self.forest, seed)?),
            LearnerKind::Boosted => Box::new(train_boosted(ds, &self.forest, self.boost_rounds, seed)?),
            LearnerKind::Ensemble => Box::new(Ensemble::train(ds, &self.forest, self.boost_rounds, seed)?),
        })
    }
}

impl Learner for RfParams {
    fn name(&self) -> String {
        "rf".to_string()
    }

    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Box<dyn Classifier>, MlError> {
        Ok(Box::new(train_rf(ds, self, seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0]), 0);
    }

    #[test]
    fn learner_names_parse() {
        for k in [
            LearnerKind::NaiveBayes,
            LearnerKind::KdeBayes,
            LearnerKind::RandomForest,
            LearnerKind::Boosted,
            LearnerKind::Ensemble,
        ] {
            assert_eq!(k.as_str().parse::<LearnerKind>().unwrap(), k);
        }
        assert!("svm".parse::<LearnerKind>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 1), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(9, 3, 4), derive_seed(9, 3, 4));
    }
}
