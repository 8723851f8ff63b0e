//! Repeated stratified k-fold cross-validation.
//!
//! Each repeat pools its out-of-fold predictions and scores them once; the report
//! averages those repeat-level metrics and gives their standard deviation. The
//! confusion matrix uses each instance's most frequent out-of-fold prediction across
//! repeats, so every row sums to the class support.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{argmax, derive_seed, metrics, Dataset, Learner, Metrics, MlError};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvParams {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for CvParams {
    fn default() -> Self {
        CvParams {
            repeats: 10,
            folds: 10,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub name: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub precision_std: f64,
    pub recall_std: f64,
    pub f1_std: f64,
    pub auc_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub precision_std: f64,
    pub recall_std: f64,
    pub f1_std: f64,
    pub auc_std: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub learner: String,
    pub setup: Option<String>,
    pub class_names: Vec<String>,
    pub n_instances: usize,
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub per_class: Vec<ClassSummary>,
    pub weighted: WeightedSummary,
    /// Counts; rows are true classes.
    pub confusion: Vec<Vec<u64>>,
    /// Row percentages of `confusion`.
    pub confusion_pct: Vec<Vec<f64>>,
    /// Features ranked by information gain, as percentages of the total gain.
    pub feature_ranking: Vec<(String, f64)>,
    /// Most frequent out-of-fold prediction per instance.
    #[serde(skip)]
    pub consensus: Vec<usize>,
}

/// Fold index per instance: each class's instances are shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

type FoldOutput = Vec<(usize, usize, Vec<f64>)>;

pub fn repeated_cv(ds: &Dataset, learner: &dyn Learner, params: &CvParams) -> Result<EvalReport, MlError> {
    if ds.is_empty() {
        return Err(MlError::Empty);
    }
    for (c, &count) in ds.class_counts().iter().enumerate() {
        if count < 2 {
            return Err(MlError::TooFewInstances {
                class: ds.class_names[c].clone(),
                count,
                needed: 2,
            });
        }
    }
    let folds = params.folds.clamp(2, ds.len());
    let repeats = params.repeats.max(1);
    let k = ds.n_classes();
    let assignments: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, r as u64, u64::MAX));
            stratified_folds(&ds.labels, k, folds, &mut rng)
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..folds).map(move |f| (r, f))).collect();
    let outputs: Vec<FoldOutput> = params.exec.try_map(&tasks, |&(r, f)| {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| assignments[r][i] == f);
        let model = learner.fit(&ds.subset(&train), derive_seed(params.seed, r as u64, f as u64))?;
        Ok::<_, MlError>(
            test.into_iter()
                .map(|i| (i, model.predict(&ds.rows[i]), model.predict_proba(&ds.rows[i])))
                .collect(),
        )
    })?;

    let mut per_repeat: Vec<Metrics> = Vec::with_capacity(repeats);
    let mut votes = vec![vec![0.0; k]; ds.len()];
    for r in 0..repeats {
        let mut pred = vec![0; ds.len()];
        let mut scores = vec![Vec::new(); ds.len()];
        for out in &outputs[r * folds..(r + 1) * folds] {
            for (i, p, s) in out {
                pred[*i] = *p;
                scores[*i] = s.clone();
                votes[*i][*p] += 1.0;
            }
        }
        per_repeat.push(metrics(&ds.labels, &pred, &scores, k)?);
    }
    let consensus: Vec<usize> = votes.iter().map(|v| argmax(v)).collect();
    let confusion = super::confusion_matrix(&ds.labels, &consensus, k);
    let confusion_pct = confusion
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter().map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 }).collect()
        })
        .collect();

    let stat = |f: &dyn Fn(&Metrics) -> f64| mean_std(&per_repeat.iter().map(f).collect::<Vec<_>>());
    let per_class = (0..k)
        .map(|c| {
            let (precision, precision_std) = stat(&|m| m.per_class[c].precision);
            let (recall, recall_std) = stat(&|m| m.per_class[c].recall);
            let (f1, f1_std) = stat(&|m| m.per_class[c].f1);
            let (auc, auc_std) = stat(&|m| m.per_class[c].auc);
            ClassSummary {
                name: ds.class_names[c].clone(),
                support: per_repeat[0].per_class[c].support,
                precision,
                recall,
                f1,
                auc,
                precision_std,
                recall_std,
                f1_std,
                auc_std,
            }
        })
        .collect();
    let (precision, precision_std) = stat(&|m| m.weighted.precision);
    let (recall, recall_std) = stat(&|m| m.weighted.recall);
    let (f1, f1_std) = stat(&|m| m.weighted.f1);
    let (auc, auc_std) = stat(&|m| m.weighted.auc);
    let (accuracy, accuracy_std) = stat(&|m| m.accuracy);
    Ok(EvalReport {
        learner: learner.name(),
        setup: None,
        class_names: ds.class_names.clone(),
        n_instances: ds.len(),
        repeats,
        folds,
        seed: params.seed,
        per_class,
        weighted: WeightedSummary {
            precision,
            recall,
            f1,
            auc,
            accuracy,
            precision_std,
            recall_std,
            f1_std,
            auc_std,
            accuracy_std,
        },
        confusion,
        confusion_pct,
        feature_ranking: Vec::new(),
        consensus,
    })
}

impl EvalReport {
    /// Aligned plain-text rendering of the report.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let title = match &self.setup {
            Some(setup) => format!("{} on {setup}", self.learner),
            None => self.learner.clone(),
        };
        let _ = writeln!(
            s,
            "{title}: {} instances, {}x{}-fold CV, seed {}",
            self.n_instances, self.repeats, self.folds, self.seed
        );
        let width = self.class_names.iter().map(String::len).max().unwrap_or(5).max(8);
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}",
            "class", "support", "prec", "rec", "F1", "AUC"
        );
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<width$}  {:>7}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}",
                c.name, c.support, c.precision, c.recall, c.f1, c.auc
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}",
            "weighted", self.n_instances, w.precision, w.recall, w.f1, w.auc
        );
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}",
            "(std)", "", w.precision_std, w.recall_std, w.f1_std, w.auc_std
        );
        let _ = writeln!(s, "accuracy {:.3} (std {:.3})", w.accuracy, w.accuracy_std);
        let _ = writeln!(s, "\nconfusion (rows true, columns predicted):");
        let _ = write!(s, "{:<width$}", "");
        for name in &self.class_names {
            let _ = write!(s, "  {name:>width$}");
        }
        let _ = writeln!(s);
        for (name, (row, pct)) in self.class_names.iter().zip(self.confusion.iter().zip(&self.confusion_pct)) {
            let _ = write!(s, "{name:<width$}");
            for (c, p) in row.iter().zip(pct) {
                let cell = format!("{c} ({p:.1}%)");
                let _ = write!(s, "  {cell:>width$}");
            }
            let _ = writeln!(s);
        }
        if !self.feature_ranking.is_empty() {
            let _ = writeln!(s, "\nfeature ranking (information gain %):");
            for (i, (name, gain)) in self.feature_ranking.iter().enumerate() {
                let _ = writeln!(s, "{:>3}. {name:<28} {gain:>6.2}", i + 1);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{LearnerKind, LearnerSpec, RfParams};
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let c = (i % 2) as f64;
                vec![c * 10.0 + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
            })
            .collect();
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new(vec!["x".into(), "noise".into()], rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    fn small_rf() -> LearnerSpec {
        LearnerSpec {
            forest: RfParams {
                n_trees: 15,
                ..RfParams::default()
            },
            ..LearnerSpec::new(LearnerKind::RandomForest)
        }
    }

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<usize> = (0..53).map(|i| usize::from(i % 5 == 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = stratified_folds(&labels, 2, 10, &mut rng);
        let sizes: Vec<usize> = (0..10).map(|f| a.iter().filter(|&&x| x == f).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in 0..10 {
            let minority = (0..53).filter(|&i| a[i] == f && labels[i] == 1).count();
            assert!((1..=2).contains(&minority));
        }
    }

    #[test]
    fn separable_data_scores_high() {
        let ds = separable(120, 1);
        let p = CvParams {
            repeats: 3,
            folds: 5,
            seed: 4,
            ..CvParams::default()
        };
        for learner in [small_rf(), LearnerSpec::new(LearnerKind::NaiveBayes)] {
            let r = repeated_cv(&ds, &learner, &p).unwrap();
            assert!(r.weighted.f1 >= 0.99, "{}", r.render_text());
            for (row, c) in r.confusion.iter().zip(&r.per_class) {
                assert_eq!(row.iter().sum::<u64>() as usize, c.support);
            }
        }
    }

    #[test]
    fn shuffled_labels_fall_to_majority_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let labels: Vec<usize> = (0..300).map(|i| usize::from(i % 4 == 0)).collect();
        let ds = Dataset::new(vec!["u".into(), "v".into()], rows, labels, vec!["maj".into(), "min".into()]).unwrap();
        let p = CvParams {
            repeats: 2,
            folds: 5,
            seed: 1,
            ..CvParams::default()
        };
        let r = repeated_cv(&ds, &small_rf(), &p).unwrap();
        // random forests on noise sit slightly below the majority rate; allow the stated band
        assert!((r.weighted.accuracy - 0.75).abs() <= 0.1, "{}", r.weighted.accuracy);
    }

    #[test]
    fn deterministic_and_policy_independent() {
        let ds = separable(60, 2);
        let mut p = CvParams {
            repeats: 2,
            folds: 3,
            seed: 5,
            exec: Execution::Sequential,
        };
        let a = repeated_cv(&ds, &small_rf(), &p).unwrap();
        assert_eq!(a, repeated_cv(&ds, &small_rf(), &p).unwrap());
        p.exec = Execution::Parallel;
        assert_eq!(a, repeated_cv(&ds, &small_rf(), &p).unwrap());
    }

    #[test]
    fn tiny_class_is_rejected() {
        let ds = Dataset::new(
            vec!["x".into()],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            repeated_cv(&ds, &small_rf(), &CvParams::default()),
            Err(MlError::TooFewInstances { count: 1, .. })
        ));
    }

    #[test]
    fn text_rendering_mentions_every_class() {
        let ds = separable(40, 3);
        let p = CvParams {
            repeats: 1,
            folds: 4,
            ..CvParams::default()
        };
        let r = repeated_cv(&ds, &LearnerSpec::new(LearnerKind::NaiveBayes), &p).unwrap();
        let t = r.render_text();
        assert!(t.contains("weighted") && t.contains(" a ") && t.contains("confusion"));
        assert_eq!(r.weighted.accuracy_std, 0.0);
    }
}
