use super::Dataset;

/// Shannon entropy in bits of a count vector.
pub fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

/// Equal-frequency bin per value. Features with at most `bins` distinct values get
/// one bin per value; equal values always share a bin.
fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut distinct = 0;
    for w in order.windows(2) {
        if values[w[0]] != values[w[1]] {
            distinct += 1;
        }
    }
    let distinct = if values.is_empty() { 0 } else { distinct + 1 };
    let mut out = vec![0; values.len()];
    let n = values.len();
    let mut bin = 0;
    let mut value_rank = 0;
    for (pos, &i) in order.iter().enumerate() {
        let new_value = pos == 0 || values[i] != values[order[pos - 1]];
        if new_value {
            bin = if distinct <= bins {
                value_rank
            } else {
                pos * bins.max(1) / n
            };
            value_rank += 1;
        }
        out[i] = bin;
    }
    out
}

/// `H(Y) - H(Y | X)` in bits, with `X` discretized into `bins` equal-frequency bins.
pub fn info_gain(values: &[f64], labels: &[usize], n_classes: usize, bins: usize) -> f64 {
    let binned = discretize(values, bins);
    let n_bins = binned.iter().copied().max().map_or(0, |b| b + 1);
    let mut joint = vec![vec![0.0; n_classes]; n_bins];
    let mut marginal = vec![0.0; n_classes];
    for (&b, &y) in binned.iter().zip(labels) {
        joint[b][y] += 1.0;
        marginal[y] += 1.0;
    }
    let n = labels.len() as f64;
    let conditional: f64 = joint.iter().map(|row| row.iter().sum::<f64>() / n * entropy(row)).sum();
    (entropy(&marginal) - conditional).max(0.0)
}

/// Features ranked by information gain, each as a percentage of the summed gain;
/// equal gains keep column order.
pub fn info_gain_ranking(ds: &Dataset, bins: usize) -> Vec<(String, f64)> {
    let gains: Vec<f64> = (0..ds.n_features())
        .map(|j| info_gain(&ds.column(j), &ds.labels, ds.n_classes(), bins))
        .collect();
    let total: f64 = gains.iter().sum();
    let mut ranked: Vec<(String, f64)> = ds
        .features
        .iter()
        .zip(&gains)
        .map(|(f, &g)| (f.clone(), if total > 0.0 { 100.0 * g / total } else { 0.0 }))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}
