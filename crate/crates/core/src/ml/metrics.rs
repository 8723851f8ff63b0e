use serde::Serialize;

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages of the per-class values.
    pub weighted: ClassMetrics,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    m
}

/// One-vs-rest AUC of `class` via the Mann-Whitney statistic with average ranks for
/// ties. Returns 0.5 when the class or its complement is absent.
pub fn auc_one_vs_rest(y_true: &[usize], scores: &[f64], class: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    let pos = y_true.iter().filter(|&&y| y == class).count() as f64;
    let neg = y_true.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    let rank_sum: f64 = y_true.iter().zip(&ranks).filter(|(&y, _)| y == class).map(|(_, r)| r).sum();
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F1 and one-vs-rest AUC per class; `y_scores[i][k]` is the
/// score of instance `i` for class `k`.
pub fn metrics(y_true: &[usize], y_pred: &[usize], y_scores: &[Vec<f64>], n_classes: usize) -> Result<Metrics, MlError> {
    if y_true.len() != y_pred.len() {
        return Err(MlError::LengthMismatch {
            what: "y_true vs y_pred",
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.len() != y_scores.len() {
        return Err(MlError::LengthMismatch {
            what: "y_true vs y_scores",
            left: y_true.len(),
            right: y_scores.len(),
        });
    }
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&c| c >= n_classes) {
        return Err(MlError::LabelOutOfRange(bad));
    }
    let confusion = confusion_matrix(y_true, y_pred, n_classes);
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let support: u64 = confusion[k].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted as f64);
            let recall = ratio(tp, support as f64);
            let f1 = ratio(2.0 * precision * recall, precision + recall);
            let scores: Vec<f64> = y_scores.iter().map(|s| s[k]).collect();
            ClassMetrics {
                precision,
                recall,
                f1,
                auc: auc_one_vs_rest(y_true, &scores, k),
                support: support as usize,
            }
        })
        .collect();
    let n = y_true.len() as f64;
    let weigh = |f: fn(&ClassMetrics) -> f64| ratio(per_class.iter().map(|m| m.support as f64 * f(m)).sum(), n);
    let weighted = ClassMetrics {
        precision: weigh(|m| m.precision),
        recall: weigh(|m| m.recall),
        f1: weigh(|m| m.f1),
        auc: weigh(|m| m.auc),
        support: y_true.len(),
    };
    let correct: u64 = (0..n_classes).map(|k| confusion[k][k]).sum();
    Ok(Metrics {
        per_class,
        weighted,
        accuracy: ratio(correct as f64, n),
        confusion,
    })
}
