//! CART trees with Gini impurity and random forests of them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, Classifier, Dataset, MlError};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct RfParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means `ceil(sqrt(F))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub exec: Execution,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: None,
            mtry: None,
            bootstrap: true,
            exec: Execution::default(),
        }
    }
}

impl RfParams {
    fn mtry_for(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn class_counts(ds: &Dataset, idx: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; ds.n_classes()];
    for &i in idx {
        c[ds.labels[i]] += 1.0;
    }
    c
}

/// Best threshold on one feature, or `None` if the feature is constant on `idx`.
/// `order` is scratch space.
fn best_split_on(
    ds: &Dataset,
    idx: &[usize],
    feature: usize,
    total: &[f64],
    order: &mut Vec<(f64, usize)>,
) -> Option<SplitChoice> {
    order.clear();
    order.extend(idx.iter().map(|&i| (ds.rows[i][feature], ds.labels[i])));
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if order[0].0 == order[order.len() - 1].0 {
        return None;
    }
    let n = order.len() as f64;
    let mut left = vec![0.0; total.len()];
    // sums of squared class counts on each side; counts are integers, so these are exact
    let mut left_sq = 0.0;
    let mut right_sq: f64 = total.iter().map(|c| c * c).sum();
    let mut best: Option<SplitChoice> = None;
    for i in 0..order.len() - 1 {
        let c = order[i].1;
        let r = total[c] - left[c];
        left_sq += 2.0 * left[c] + 1.0;
        right_sq -= 2.0 * r - 1.0;
        left[c] += 1.0;
        let (here, next) = (order[i].0, order[i + 1].0);
        if here == next {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = n - nl;
        let score = (nl - left_sq / nl) + (nr - right_sq / nr);
        if best.as_ref().is_none_or(|b| score < b.score) {
            let mid = here + (next - here) / 2.0;
            let threshold = if mid < next { mid } else { here };
            best = Some(SplitChoice {
                feature,
                threshold,
                score,
            });
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on the rows `idx` of `ds` (duplicates allowed).
    pub fn fit(ds: &Dataset, idx: &[usize], params: &RfParams, rng: &mut ChaCha8Rng) -> Self {
        let k = ds.n_classes();
        let mtry = params.mtry_for(ds.n_features());
        let mut nodes = vec![Node::Leaf(Vec::new())];
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, idx.to_vec(), 0)];
        let mut features: Vec<usize> = (0..ds.n_features()).collect();
        let mut order = Vec::with_capacity(idx.len());
        while let Some((slot, rows, depth)) = stack.pop() {
            let counts = class_counts(ds, &rows);
            let n = rows.len() as f64;
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            let depth_ok = params.max_depth.is_none_or(|d| depth < d);
            let mut chosen: Option<SplitChoice> = None;
            if !pure && rows.len() >= 2 && depth_ok {
                features.shuffle(rng);
                let mut tried = 0;
                for &f in &features {
                    if tried == mtry {
                        break;
                    }
                    if let Some(s) = best_split_on(ds, &rows, f, &counts, &mut order) {
                        tried += 1;
                        if chosen.as_ref().is_none_or(|c| s.score < c.score) {
                            chosen = Some(s);
                        }
                    }
                }
            }
            match chosen {
                None => {
                    let dist = if n > 0.0 {
                        counts.iter().map(|c| c / n).collect()
                    } else {
                        vec![1.0 / k as f64; k]
                    };
                    nodes[slot] = Node::Leaf(dist);
                }
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| ds.rows[i][s.feature] <= s.threshold);
                    let (li, ri) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: li,
                        right: ri,
                    };
                    stack.push((ri, r, depth + 1));
                    stack.push((li, l, depth + 1));
                }
            }
        }
        DecisionTree { nodes, n_classes: k }
    }

    fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(d) => return d,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.leaf(x).to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    n_classes: usize,
}

/// Bootstrap-sampled trees, each seeded from a stream derived from `seed`, so the
/// forest is identical under either execution policy.
pub fn train_rf(ds: &Dataset, params: &RfParams, seed: u64) -> Result<RandomForest, MlError> {
    ds.require_two_classes()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..params.n_trees.max(1)).map(|_| master.random()).collect();
    let n = ds.len();
    let trees = params.exec.map(&seeds, |&s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        DecisionTree::fit(ds, &idx, params, &mut rng)
    });
    Ok(RandomForest {
        trees,
        n_classes: ds.n_classes(),
    })
}

impl Classifier for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Fraction of trees voting for each class.
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[argmax(t.leaf(x))] += 1.0;
        }
        let total = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};

    fn xor(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            rows.push(vec![x, y]);
            labels.push(usize::from((x > 0.0) != (y > 0.0)));
        }
        Dataset::new(vec!["x".into(), "y".into()], rows, labels, vec!["same".into(), "diff".into()]).unwrap()
    }

    fn accuracy(m: &dyn Classifier, ds: &Dataset) -> f64 {
        ds.rows.iter().zip(&ds.labels).filter(|(r, &l)| m.predict(r) == l).count() as f64 / ds.len() as f64
    }

    /// 1-nearest-neighbour leave-one-out accuracy: a model-free check that the
    /// data is locally separable, so a high training accuracy is attainable.
    fn nn_loo_accuracy(ds: &Dataset) -> f64 {
        let mut hit = 0;
        for i in 0..ds.len() {
            let nearest = (0..ds.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let d = |j: usize| ds.rows[i].iter().zip(&ds.rows[j]).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                    d(a).total_cmp(&d(b))
                })
                .unwrap();
            hit += usize::from(ds.labels[nearest] == ds.labels[i]);
        }
        hit as f64 / ds.len() as f64
    }

    #[test]
    fn xor_is_learned() {
        let ds = xor(400, 1);
        assert!(nn_loo_accuracy(&ds) > 0.9);
        let rf = train_rf(&ds, &RfParams::default(), 5).unwrap();
        assert!(accuracy(&rf, &ds) >= 0.95);
    }

    #[test]
    fn single_feature_split_is_exact() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let ds = Dataset::new(vec!["x".into()], rows, labels, vec!["lo".into(), "hi".into()]).unwrap();
        let rf = train_rf(&ds, &RfParams::default(), 0).unwrap();
        assert_eq!(accuracy(&rf, &ds), 1.0);
        let stump = DecisionTree::fit(&ds, &(0..20).collect::<Vec<_>>(), &RfParams::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(stump.depth(), 1);
        assert_eq!(stump.node_count(), 3);
    }

    #[test]
    fn deterministic_and_policy_independent() {
        let ds = xor(200, 2);
        let seq = RfParams {
            exec: Execution::Sequential,
            ..RfParams::default()
        };
        let par = RfParams {
            exec: Execution::Parallel,
            ..RfParams::default()
        };
        let a = train_rf(&ds, &seq, 9).unwrap();
        assert_eq!(a, train_rf(&ds, &seq, 9).unwrap());
        assert_eq!(a, train_rf(&ds, &par, 9).unwrap());
        assert_ne!(a, train_rf(&ds, &seq, 10).unwrap());
    }

    #[test]
    fn max_depth_is_respected() {
        let ds = xor(200, 3);
        let p = RfParams {
            n_trees: 5,
            max_depth: Some(2),
            ..RfParams::default()
        };
        let rf = train_rf(&ds, &p, 1).unwrap();
        assert!(rf.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn duplicate_points_with_conflicting_labels() {
        let ds = Dataset::new(
            vec!["x".into()],
            vec![vec![1.0], vec![1.0], vec![2.0]],
            vec![0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let t = DecisionTree::fit(&ds, &[0, 1, 2], &RfParams::default(), &mut ChaCha8Rng::seed_from_u64(0));
        let p = t.predict_proba(&[1.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(t.predict(&[1.0]), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn forest_probabilities_are_vote_fractions(seed in 0u64..1000, n in 10usize..60) {
            let ds = xor(n, seed);
            prop_assume!(ds.present_classes() == 2);
            let p = RfParams { n_trees: 7, ..RfParams::default() };
            let rf = train_rf(&ds, &p, seed).unwrap();
            for r in &ds.rows {
                let pr = rf.predict_proba(r);
                prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(pr.iter().all(|&v| (v * 7.0 - (v * 7.0).round()).abs() < 1e-9));
            }
        }
    }
}
