//! Latent Dirichlet allocation fitted by online stochastic variational inference.
//!
//! Each mini-batch runs a local E-step (per-document variational Dirichlet `gamma`)
//! against the current global topic parameters `lambda`, then blends the batch
//! estimate into `lambda` with step size `rho_t = (tau0 + t)^(-kappa)`.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::digamma;

use crate::exec::Execution;

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("invalid LDA configuration: {0}")]
    Config(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no token occurs at least {min_count} times")]
    EmptyVocabulary { min_count: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub n_topics: usize,
    pub batch_size: usize,
    pub kappa: f64,
    pub tau0: f64,
    pub epochs: usize,
    pub seed: u64,
    pub min_count: usize,
    /// Document-topic prior; `None` means `1/K`.
    pub alpha: Option<f64>,
    /// Topic-word prior; `None` means `1/K`.
    pub eta: Option<f64>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 5,
            batch_size: 256,
            kappa: 0.6,
            tau0: 1.0,
            epochs: 10,
            seed: 0,
            min_count: 2,
            alpha: None,
            eta: None,
        }
    }
}

impl LdaConfig {
    pub fn validate(&self) -> Result<(), TopicError> {
        let bad = |m: &str| Err(TopicError::Config(m.to_string()));
        if self.n_topics < 2 {
            return bad("n_topics must be at least 2");
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0.5, 1]");
        }
        if self.tau0.is_nan() || self.tau0 < 0.0 {
            return bad("tau0 must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be positive");
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.n_topics as f64)
    }

    fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.n_topics as f64)
    }
}

/// Sorted vocabulary of tokens that occur at least `min_count` times in total.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build(docs: &[Vec<String>], min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for d in docs {
            for t in d {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        Self::from_words(counts.into_iter().filter(|&(_, c)| c >= min_count).map(|(w, _)| w.to_string()).collect())
    }

    fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Sparse bag of words, ids ascending; out-of-vocabulary tokens are dropped.
    pub fn bag(&self, doc: &[String]) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            if let Some(id) = self.id(t) {
                *counts.entry(id).or_default() += 1.0;
            }
        }
        counts.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// K rows over the vocabulary.
    pub topic_word: Vec<Vec<f64>>,
    /// One row of K topic proportions per training document.
    pub doc_topic: Vec<Vec<f64>>,
    pub vocabulary: Vec<String>,
    /// Training-corpus perplexity after each epoch.
    pub perplexity: Vec<f64>,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.topic_word.len()
    }

    pub fn write_topic_word_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["topic".to_string()];
        header.extend(self.vocabulary.iter().cloned());
        out.write_record(&header)?;
        for (k, row) in self.topic_word.iter().enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|p| format!("{p:.12}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_doc_topic_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["doc".to_string()];
        header.extend((0..self.n_topics()).map(|k| format!("topic_{k}")));
        out.write_record(&header)?;
        for (d, row) in self.doc_topic.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|p| format!("{p:.12}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_vocabulary(&self, mut w: impl Write) -> io::Result<()> {
        for word in &self.vocabulary {
            writeln!(w, "{word}")?;
        }
        Ok(())
    }
}

/// Streaming SVI state. [`fit_lda`] drives it for `cfg.epochs` passes.
#[derive(Debug, Clone)]
pub struct OnlineLda {
    cfg: LdaConfig,
    vocab: Vocabulary,
    lambda: Vec<Vec<f64>>,
    updates: usize,
    rng: ChaCha8Rng,
}

const E_STEP_MAX_ITER: usize = 100;
const E_STEP_TOL: f64 = 1e-4;

fn gamma_init(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
    (0..n).map(|_| g.sample(rng)).collect()
}

fn exp_dirichlet_expectation(v: &[f64]) -> Vec<f64> {
    let total = digamma(v.iter().sum());
    v.iter().map(|&x| (digamma(x) - total).exp()).collect()
}

fn normalize_row(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

impl OnlineLda {
    pub fn new(docs: &[Vec<String>], cfg: LdaConfig) -> Result<Self, TopicError> {
        cfg.validate()?;
        if docs.is_empty() {
            return Err(TopicError::EmptyCorpus);
        }
        let vocab = Vocabulary::build(docs, cfg.min_count);
        if vocab.is_empty() {
            return Err(TopicError::EmptyVocabulary { min_count: cfg.min_count });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let lambda = (0..cfg.n_topics).map(|_| gamma_init(&mut rng, vocab.len())).collect();
        Ok(OnlineLda {
            cfg,
            vocab,
            lambda,
            updates: 0,
            rng,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn exp_elog_beta(&self) -> Vec<Vec<f64>> {
        self.lambda.iter().map(|row| exp_dirichlet_expectation(row)).collect()
    }

    /// Local E-step for one document; returns `gamma` and, if requested,
    /// accumulates sufficient statistics (before the final `exp_elog_beta` scaling).
    fn e_step(
        &self,
        bag: &[(usize, f64)],
        elog_beta: &[Vec<f64>],
        mut gamma: Vec<f64>,
        sstats: Option<&mut [Vec<f64>]>,
    ) -> Vec<f64> {
        let k = self.cfg.n_topics;
        let alpha = self.cfg.alpha();
        if bag.is_empty() {
            return vec![alpha; k];
        }
        let phinorm = |theta: &[f64]| -> Vec<f64> {
            bag.iter()
                .map(|&(w, _)| (0..k).map(|t| theta[t] * elog_beta[t][w]).sum::<f64>() + 1e-100)
                .collect()
        };
        let mut theta = exp_dirichlet_expectation(&gamma);
        let mut norm = phinorm(&theta);
        for _ in 0..E_STEP_MAX_ITER {
            let next: Vec<f64> = (0..k)
                .map(|t| {
                    alpha
                        + theta[t]
                            * bag
                                .iter()
                                .zip(&norm)
                                .map(|(&(w, c), n)| c / n * elog_beta[t][w])
                                .sum::<f64>()
                })
                .collect();
            let change = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
            gamma = next;
            theta = exp_dirichlet_expectation(&gamma);
            norm = phinorm(&theta);
            if change < E_STEP_TOL {
                break;
            }
        }
        if let Some(ss) = sstats {
            for t in 0..k {
                for (&(w, c), n) in bag.iter().zip(&norm) {
                    ss[t][w] += theta[t] * c / n;
                }
            }
        }
        gamma
    }

    /// One SVI update from a mini-batch of documents drawn from a corpus of `corpus_size`.
    fn update(&mut self, batch: &[Vec<(usize, f64)>], corpus_size: usize) {
        let k = self.cfg.n_topics;
        let v = self.vocab.len();
        let elog_beta = self.exp_elog_beta();
        let mut sstats = vec![vec![0.0; v]; k];
        for bag in batch {
            let init = gamma_init(&mut self.rng, k);
            self.e_step(bag, &elog_beta, init, Some(&mut sstats));
        }
        let rho = (self.cfg.tau0 + self.updates as f64).powf(-self.cfg.kappa);
        let scale = corpus_size as f64 / batch.len() as f64;
        let eta = self.cfg.eta();
        for t in 0..k {
            for w in 0..v {
                let batch_est = eta + scale * sstats[t][w] * elog_beta[t][w];
                self.lambda[t][w] = (1.0 - rho) * self.lambda[t][w] + rho * batch_est;
            }
        }
        self.updates += 1;
    }

    /// One pass over `docs` in a seeded random order, in mini-batches of `batch_size`.
    pub fn run_epoch(&mut self, docs: &[Vec<String>]) {
        let bags: Vec<_> = docs.iter().map(|d| self.vocab.bag(d)).collect();
        let mut order: Vec<usize> = (0..bags.len()).collect();
        order.shuffle(&mut self.rng);
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| bags[i].clone()).collect();
            self.update(&batch, bags.len());
        }
    }

    /// Topic proportions for new documents under the current topics.
    /// Each document's initial `gamma` comes from a generator seeded by its position,
    /// so results do not depend on the execution policy.
    pub fn infer(&self, docs: &[Vec<String>], exec: Execution) -> Vec<Vec<f64>> {
        let elog_beta = self.exp_elog_beta();
        let k = self.cfg.n_topics;
        exec.map_range(docs.len(), |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let bag = self.vocab.bag(&docs[i]);
            normalize_row(&self.e_step(&bag, &elog_beta, gamma_init(&mut rng, k), None))
        })
    }

    pub fn topic_word(&self) -> Vec<Vec<f64>> {
        self.lambda.iter().map(|r| normalize_row(r)).collect()
    }

    /// Per-word perplexity of `docs` using point estimates of both distributions.
    /// Documents without in-vocabulary tokens are ignored.
    pub fn perplexity(&self, docs: &[Vec<String>]) -> f64 {
        let beta = self.topic_word();
        let theta = self.infer(docs, Execution::Sequential);
        let mut loglik = 0.0;
        let mut n = 0.0;
        for (doc, th) in docs.iter().zip(&theta) {
            for (w, c) in self.vocab.bag(doc) {
                let p: f64 = th.iter().zip(&beta).map(|(t, b)| t * b[w]).sum();
                loglik += c * p.ln();
                n += c;
            }
        }
        if n == 0.0 {
            f64::NAN
        } else {
            (-loglik / n).exp()
        }
    }

    pub fn finish(self, docs: &[Vec<String>], perplexity: Vec<f64>) -> TopicModel {
        TopicModel {
            topic_word: self.topic_word(),
            doc_topic: self.infer(docs, Execution::Sequential),
            vocabulary: self.vocab.words.clone(),
            perplexity,
        }
    }
}

pub fn fit_lda(docs: &[Vec<String>], cfg: &LdaConfig) -> Result<TopicModel, TopicError> {
    let mut lda = OnlineLda::new(docs, cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        lda.run_epoch(docs);
        let p = lda.perplexity(docs);
        log::debug!("lda epoch {}: perplexity {p:.4}", epoch + 1);
        trace.push(p);
    }
    Ok(lda.finish(docs, trace))
}

/// The `k` most probable words per topic, descending, ties broken lexicographically.
pub fn top_words(model: &TopicModel, k: usize) -> Vec<Vec<(String, f64)>> {
    model
        .topic_word
        .iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| model.vocabulary[a].cmp(&model.vocabulary[b])));
            idx.into_iter().take(k).map(|i| (model.vocabulary[i].clone(), row[i])).collect()
        })
        .collect()
}

/// One document per line, whitespace-separated tokens; blank lines are empty documents.
pub fn read_docs(r: impl BufRead) -> io::Result<Vec<Vec<String>>> {
    r.lines()
        .map(|l| l.map(|l| l.split_whitespace().map(str::to_string).collect()))
        .collect()
}

pub fn write_docs(mut w: impl Write, docs: &[Vec<String>]) -> io::Result<()> {
    for d in docs {
        writeln!(w, "{}", d.join(" "))?;
    }
    Ok(())
}
