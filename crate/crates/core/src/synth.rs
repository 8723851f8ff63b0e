//! Deterministic synthetic corpus with class-conditional behavior.
//!
//! Every random draw comes from one ChaCha generator seeded with `SynthConfig::seed`,
//! in this order: class assignment, then per user (in id order) the profile and the
//! timeline, then the follow graph, the crowd annotations, the account statuses and
//! finally the embedding vectors. Only ordinal relations between classes are meant
//! to be relied upon: spammers post many hashtags or near-duplicate text, bullies
//! post in faster bursts, use more negative and capitalized words and attract fewer
//! followers than normal users.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal, Poisson};

use crate::corpus::{write_records_to, Tweet, UserProfile};
use crate::graph::write_edge_list;
use crate::label::Label;
use crate::lexicon::{Embeddings, LexiconSet, PosTag};
use crate::sessions::{build_sessions, make_batches, write_annotations, Annotation, DEFAULT_SESSION_GAP_SECS};
use crate::status::{CODE_DELETED, CODE_SUSPENDED};

/// 2016-06-01T00:00:00Z.
pub const DEFAULT_START: i64 = 1_464_739_200;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("bad class counts {0:?}; expected e.g. bully=58,aggressor=43,spammer=415,normal=787")]
    Counts(String),
    #[error("at least two users are needed")]
    TooFewUsers,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Behavior knobs for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    /// Mean hashtags per tweet.
    pub hashtag_rate: f64,
    /// Probability that a user of this class posts near-duplicate text.
    pub duplication_rate: f64,
    /// Probability of a negative word at each position.
    pub negative_rate: f64,
    /// Probability of a positive word at each position.
    pub positive_rate: f64,
    pub curse_rate: f64,
    /// Probability of writing a word in capitals.
    pub uppercase_rate: f64,
    /// Mean gap between tweets of one session, seconds.
    pub gap_mean_secs: f64,
    /// Probability of following back.
    pub reciprocity_bias: f64,
    /// Relative chance of being followed.
    pub follower_scale: f64,
    /// Range of accounts followed.
    pub friends_range: (usize, usize),
    /// Median of the posting-volume counter.
    pub statuses_median: f64,
    pub lists_median: f64,
    pub age_days_median: f64,
    pub mention_rate: f64,
    pub url_rate: f64,
    /// Probability of the status suspended / deleted at the snapshot.
    pub suspended_rate: f64,
    pub deleted_rate: f64,
}

impl ClassProfile {
    pub fn default_for(label: Label) -> Self {
        match label {
            Label::Bully => ClassProfile {
                hashtag_rate: 0.3,
                duplication_rate: 0.0,
                negative_rate: 0.35,
                positive_rate: 0.02,
                curse_rate: 0.08,
                uppercase_rate: 0.3,
                gap_mean_secs: 600.0,
                reciprocity_bias: 0.1,
                follower_scale: 0.3,
                friends_range: (4, 10),
                statuses_median: 9000.0,
                lists_median: 3.0,
                age_days_median: 400.0,
                mention_rate: 0.8,
                url_rate: 0.05,
                suspended_rate: 0.55,
                deleted_rate: 0.40,
            },
            Label::Aggressor => ClassProfile {
                hashtag_rate: 0.5,
                duplication_rate: 0.0,
                negative_rate: 0.22,
                positive_rate: 0.05,
                curse_rate: 0.12,
                uppercase_rate: 0.15,
                gap_mean_secs: 1800.0,
                reciprocity_bias: 0.2,
                follower_scale: 0.6,
                friends_range: (6, 14),
                statuses_median: 5000.0,
                lists_median: 8.0,
                age_days_median: 700.0,
                mention_rate: 0.5,
                url_rate: 0.1,
                suspended_rate: 0.51,
                deleted_rate: 0.23,
            },
            Label::Spammer => ClassProfile {
                hashtag_rate: 7.0,
                duplication_rate: 0.5,
                negative_rate: 0.01,
                positive_rate: 0.12,
                curse_rate: 0.0,
                uppercase_rate: 0.1,
                gap_mean_secs: 900.0,
                reciprocity_bias: 0.6,
                follower_scale: 0.5,
                friends_range: (25, 45),
                statuses_median: 25000.0,
                lists_median: 1.0,
                age_days_median: 200.0,
                mention_rate: 0.3,
                url_rate: 0.9,
                suspended_rate: 0.39,
                deleted_rate: 0.12,
            },
            Label::Normal => ClassProfile {
                hashtag_rate: 0.6,
                duplication_rate: 0.0,
                negative_rate: 0.02,
                positive_rate: 0.2,
                curse_rate: 0.005,
                uppercase_rate: 0.02,
                gap_mean_secs: 5400.0,
                reciprocity_bias: 0.45,
                follower_scale: 3.0,
                friends_range: (8, 20),
                statuses_median: 3000.0,
                lists_median: 30.0,
                age_days_median: 1500.0,
                mention_rate: 0.2,
                url_rate: 0.15,
                suspended_rate: 0.22,
                deleted_rate: 0.09,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub class_counts: BTreeMap<Label, usize>,
    pub profiles: BTreeMap<Label, ClassProfile>,
    /// Timestamp of the first session.
    pub start: i64,
    /// Range of sessions per user.
    pub sessions_per_user: (usize, usize),
    /// Range of tweets per session; keep within 5..=15 so every session yields batches of 5-10.
    pub session_tweets: (usize, usize),
    pub workers: usize,
    /// Control batches per label shown to every worker.
    pub control_batches: usize,
    /// Probability that a worker labels a control batch correctly.
    pub worker_accuracy: f64,
    pub embedding_dim: usize,
}

pub const DEFAULT_COUNTS: [(Label, usize); 4] =
    [(Label::Bully, 58), (Label::Aggressor, 43), (Label::Spammer, 415), (Label::Normal, 787)];

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            class_counts: DEFAULT_COUNTS.into_iter().collect(),
            profiles: Label::ALL.into_iter().map(|l| (l, ClassProfile::default_for(l))).collect(),
            start: DEFAULT_START,
            sessions_per_user: (2, 4),
            session_tweets: (5, 15),
            workers: 20,
            control_batches: 2,
            worker_accuracy: 0.85,
            embedding_dim: 8,
        }
    }
}

/// Parses `bully=58,aggressor=43,...`; labels left out get 0.
pub fn parse_counts(s: &str) -> Result<BTreeMap<Label, usize>, SynthError> {
    let bad = || SynthError::Counts(s.to_string());
    let mut out: BTreeMap<Label, usize> = Label::ALL.into_iter().map(|l| (l, 0)).collect();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        let label: Label = k.trim().parse().map_err(|_| bad())?;
        out.insert(label, v.trim().parse().map_err(|_| bad())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub users: Vec<UserProfile>,
    /// Sorted by user, then time.
    pub tweets: Vec<Tweet>,
    pub edges: Vec<(String, String)>,
    pub annotations: Vec<Annotation>,
    pub gold: BTreeMap<String, Label>,
    /// Provider reply per user: `200`, `50` or `63`.
    pub status_codes: BTreeMap<String, u32>,
    pub lexicons: LexiconSet,
    pub embeddings: Embeddings,
}

const NEUTRAL: [&str; 30] = [
    "game", "team", "match", "player", "news", "video", "music", "today", "weekend", "coffee", "city", "movie", "phone",
    "school", "work", "friend", "night", "morning", "season", "story", "photo", "food", "travel", "book", "show", "art",
    "sport", "league", "score", "stream",
];
const VERBS: [&str; 8] = ["play", "watch", "read", "go", "think", "know", "see", "make"];
const ADVERBS: [&str; 5] = ["really", "very", "always", "never", "totally"];
const POSITIVE: [(&str, i32); 10] = [
    ("love", 3),
    ("great", 3),
    ("awesome", 4),
    ("happy", 3),
    ("nice", 2),
    ("fun", 2),
    ("beautiful", 3),
    ("win", 2),
    ("amazing", 4),
    ("thanks", 2),
];
const NEGATIVE: [(&str, i32); 10] = [
    ("hate", -3),
    ("stupid", -2),
    ("ugly", -3),
    ("loser", -3),
    ("idiot", -3),
    ("pathetic", -3),
    ("disgusting", -3),
    ("worst", -3),
    ("trash", -2),
    ("dumb", -2),
];
const CURSES: [&str; 4] = ["damn", "crap", "wtf", "bloody"];
const HATE: [(&str, f64); 5] = [("loser", 40.0), ("idiot", 55.0), ("trash", 30.0), ("scum", 80.0), ("freak", 60.0)];
const SPAM_WORDS: [&str; 10] = ["free", "click", "offer", "deal", "giveaway", "follow", "prize", "bonus", "cash", "link"];
const HASHTAGS: [&str; 12] = [
    "gamergate", "nba", "bbc", "music", "news", "giveaway", "win", "free", "follow", "sale", "sports", "tv",
];
const HAPPY_EMOTICONS: [&str; 3] = [":)", ":D", "<3"];
const ANGRY_EMOTICONS: [&str; 2] = [":(", ">:("];

fn lexicons() -> LexiconSet {
    let mut lex = LexiconSet::default();
    for (w, s) in POSITIVE.iter().chain(&NEGATIVE) {
        lex.sentiment.insert(w.to_string(), *s);
    }
    // anger, disgust, fear, joy, sadness, surprise
    for (w, _) in &NEGATIVE {
        lex.emotion.insert(w.to_string(), [0.8, 0.6, 0.1, 0.0, 0.3, 0.1]);
    }
    for (w, _) in &POSITIVE {
        lex.emotion.insert(w.to_string(), [0.0, 0.0, 0.0, 0.9, 0.0, 0.3]);
    }
    for (w, s) in &HATE {
        lex.hate.insert(w.to_string(), *s);
    }
    lex.curse.extend(CURSES.iter().map(|w| w.to_string()));
    lex.emoticons.extend(HAPPY_EMOTICONS.iter().chain(&ANGRY_EMOTICONS).map(|w| w.to_string()));
    for w in NEUTRAL.iter().chain(&SPAM_WORDS) {
        lex.pos.insert(w.to_string(), PosTag::Noun);
    }
    for w in VERBS {
        lex.pos.insert(w.to_string(), PosTag::Verb);
    }
    for w in ADVERBS {
        lex.pos.insert(w.to_string(), PosTag::Adverb);
    }
    for (w, _) in POSITIVE.iter().chain(&NEGATIVE) {
        lex.pos.entry(w.to_string()).or_insert(PosTag::Adjective);
    }
    lex
}

fn vocabulary() -> BTreeSet<&'static str> {
    NEUTRAL
        .iter()
        .chain(&VERBS)
        .chain(&ADVERBS)
        .chain(&CURSES)
        .chain(&SPAM_WORDS)
        .copied()
        .chain(POSITIVE.iter().chain(&NEGATIVE).map(|(w, _)| *w))
        .chain(HATE.iter().map(|(w, _)| *w))
        .collect()
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
}

fn lognormal(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> f64 {
    LogNormal::new(median.ln(), sigma).expect("valid lognormal").sample(rng)
}

impl Generator<'_> {
    fn word(&mut self, p: &ClassProfile, spammer: bool) -> String {
        let r: f64 = self.rng.random();
        let w = if r < p.negative_rate {
            NEGATIVE.choose(&mut self.rng).expect("nonempty").0
        } else if r < p.negative_rate + p.positive_rate {
            POSITIVE.choose(&mut self.rng).expect("nonempty").0
        } else if r < p.negative_rate + p.positive_rate + p.curse_rate {
            CURSES.choose(&mut self.rng).expect("nonempty")
        } else if r < p.negative_rate + p.positive_rate + p.curse_rate + 0.08 {
            ADVERBS.choose(&mut self.rng).expect("nonempty")
        } else if r < p.negative_rate + p.positive_rate + p.curse_rate + 0.2 {
            VERBS.choose(&mut self.rng).expect("nonempty")
        } else if spammer {
            SPAM_WORDS.choose(&mut self.rng).expect("nonempty")
        } else {
            NEUTRAL.choose(&mut self.rng).expect("nonempty")
        };
        if self.rng.random_bool(p.uppercase_rate) {
            w.to_uppercase()
        } else {
            w.to_string()
        }
    }

    fn sentence(&mut self, p: &ClassProfile, spammer: bool, len: usize) -> String {
        let mut words = Vec::with_capacity(len);
        for i in 0..len {
            let mut w = self.word(p, spammer);
            if i + 1 < len && self.rng.random_bool(0.12) {
                w.push('.');
            }
            words.push(w);
        }
        words.join(" ")
    }

    #[allow(clippy::too_many_arguments)]
    fn tweet(
        &mut self,
        label: Label,
        p: &ClassProfile,
        user_id: &str,
        n: usize,
        timestamp: i64,
        template: Option<(&str, &[String])>,
        hashtag_rate: f64,
        mention_pool: &[String],
    ) -> Tweet {
        let spammer = label == Label::Spammer;
        let body = match template {
            Some((t, _)) => {
                // one word of the template is replaced, keeping the text near-identical
                let mut words: Vec<String> = t.split(' ').map(str::to_string).collect();
                let i = self.rng.random_range(0..words.len());
                words[i] = SPAM_WORDS.choose(&mut self.rng).expect("nonempty").to_string();
                words.join(" ")
            }
            None => {
                let len = match label {
                    Label::Bully => self.rng.random_range(5..=9),
                    Label::Aggressor => self.rng.random_range(6..=10),
                    Label::Spammer => self.rng.random_range(8..=12),
                    Label::Normal => self.rng.random_range(8..=14),
                };
                self.sentence(p, spammer, len)
            }
        };
        let mut mentions = Vec::new();
        if template.is_none() && !mention_pool.is_empty() && self.rng.random_bool(p.mention_rate) {
            let k = self.rng.random_range(1..=2);
            for _ in 0..k {
                let m = mention_pool.choose(&mut self.rng).expect("nonempty").clone();
                if m != user_id && !mentions.contains(&m) {
                    mentions.push(m);
                }
            }
        }
        let hashtags: Vec<String> = match template {
            Some((_, tags)) => tags.to_vec(),
            None => {
                let n_tags = if hashtag_rate > 0.0 {
                    Poisson::new(hashtag_rate).expect("positive rate").sample(&mut self.rng) as usize
                } else {
                    0
                };
                (0..n_tags).map(|_| HASHTAGS.choose(&mut self.rng).expect("nonempty").to_string()).collect()
            }
        };
        let urls = u32::from(self.rng.random_bool(p.url_rate));
        let emoticon = match label {
            _ if template.is_some() => None,
            Label::Bully | Label::Aggressor if self.rng.random_bool(0.25) => ANGRY_EMOTICONS.choose(&mut self.rng).copied(),
            Label::Normal | Label::Spammer if self.rng.random_bool(0.3) => HAPPY_EMOTICONS.choose(&mut self.rng).copied(),
            _ => None,
        };
        let is_retweet = self.rng.random_bool(if spammer { 0.3 } else { 0.1 });
        let is_reply = !mentions.is_empty() && self.rng.random_bool(0.5);
        let mut text = String::new();
        for m in &mentions {
            text.push('@');
            text.push_str(m);
            text.push(' ');
        }
        text.push_str(&body);
        for h in &hashtags {
            text.push_str(" #");
            text.push_str(h);
        }
        if urls > 0 {
            text.push_str(&format!(" http://t.example/{user_id}{n}"));
        }
        if let Some(e) = emoticon {
            text.push(' ');
            text.push_str(e);
        }
        Tweet {
            id: format!("{user_id}-{n:04}"),
            user_id: user_id.to_string(),
            timestamp,
            text,
            hashtags,
            mentions,
            urls,
            is_retweet,
            is_reply,
        }
    }

    fn timeline(&mut self, label: Label, user_id: &str, mention_pool: &[String]) -> Vec<Tweet> {
        let p = self.cfg.profiles[&label].clone();
        let duplicator = label == Label::Spammer && self.rng.random_bool(p.duplication_rate);
        let hashtag_rate = if label == Label::Spammer && !duplicator && self.rng.random_bool(0.16) {
            // a few spammers stay under both cutoffs
            self.rng.random_range(2.5..4.0)
        } else {
            p.hashtag_rate
        };
        // near-duplicate posters repeat one text with a fixed tag set; a few of them also tag heavily
        let template = duplicator.then(|| {
            let text = self.sentence(&p, true, 12).replace('.', "").to_lowercase();
            let n_tags = if self.rng.random_bool(0.1) { self.rng.random_range(6..=8) } else { self.rng.random_range(0..=2) };
            let tags: Vec<String> = (0..n_tags).map(|_| HASHTAGS.choose(&mut self.rng).expect("nonempty").to_string()).collect();
            (text, tags)
        });
        let (smin, smax) = self.cfg.sessions_per_user;
        let (tmin, tmax) = self.cfg.session_tweets;
        let n_sessions = self.rng.random_range(smin..=smax);
        let gap = Exp::new(1.0 / p.gap_mean_secs).expect("positive mean");
        let pause = Exp::new(1.0 / (1.5 * 86_400.0)).expect("positive mean");
        let mut t = self.cfg.start + self.rng.random_range(0..7 * 86_400);
        let mut out = Vec::new();
        for s in 0..n_sessions {
            if s > 0 {
                t += DEFAULT_SESSION_GAP_SECS + 3600 + pause.sample(&mut self.rng) as i64;
            }
            let n_tweets = self.rng.random_range(tmin..=tmax);
            for k in 0..n_tweets {
                if k > 0 {
                    let g: f64 = gap.sample(&mut self.rng);
                    t += (g as i64).clamp(1, DEFAULT_SESSION_GAP_SECS - 3600);
                }
                let tw = self.tweet(label, &p, user_id, out.len(), t, template.as_ref().map(|(t, g)| (t.as_str(), g.as_slice())), hashtag_rate, mention_pool);
                out.push(tw);
            }
        }
        out
    }

    fn profile(&mut self, label: Label, user_id: &str, last_tweet: i64) -> UserProfile {
        let p = self.cfg.profiles[&label].clone();
        let age_days = lognormal(&mut self.rng, p.age_days_median, 0.3);
        let description_len = self.rng.random_range(0..8);
        let description = (description_len > 0).then(|| self.sentence(&p, label == Label::Spammer, description_len));
        UserProfile {
            user_id: user_id.to_string(),
            created_at: self.cfg.start - (age_days * 86_400.0) as i64,
            statuses_count: lognormal(&mut self.rng, p.statuses_median, 0.35).round() as u64,
            followers_count: 0,
            friends_count: 0,
            listed_count: lognormal(&mut self.rng, p.lists_median, 0.4).round() as u64,
            favourites_count: lognormal(&mut self.rng, 500.0, 1.0).round() as u64,
            verified: label == Label::Normal && self.rng.random_bool(0.02),
            default_profile_image: self.rng.random_bool(match label {
                Label::Spammer => 0.4,
                Label::Bully => 0.2,
                _ => 0.05,
            }),
            location: self
                .rng
                .random_bool(if label == Label::Normal { 0.7 } else { 0.3 })
                .then(|| ["london", "new york", "athens", "barcelona"].choose(&mut self.rng).expect("nonempty").to_string()),
            description: description.filter(|_| last_tweet >= self.cfg.start),
        }
    }

    fn edges(&mut self, ids: &[String], labels: &[Label]) -> Vec<(String, String)> {
        let n = ids.len();
        let weights: Vec<f64> = labels.iter().map(|l| self.cfg.profiles[l].follower_scale).collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (u, label) in labels.iter().enumerate() {
            let (lo, hi) = self.cfg.profiles[label].friends_range;
            let k = self.rng.random_range(lo..=hi).min(n - 1);
            let mut chosen = BTreeSet::new();
            let mut attempts = 0;
            while chosen.len() < k && attempts < 50 * k.max(1) {
                let v = dist.sample(&mut self.rng);
                if v != u {
                    chosen.insert(v);
                }
                attempts += 1;
            }
            set.extend(chosen.into_iter().map(|v| (u, v)));
        }
        let forward: Vec<(usize, usize)> = set.iter().copied().collect();
        for (u, v) in forward {
            if self.rng.random_bool(self.cfg.profiles[&labels[v]].reciprocity_bias) {
                set.insert((v, u));
            }
        }
        set.into_iter().map(|(u, v)| (ids[u].clone(), ids[v].clone())).collect()
    }

    fn annotations(&mut self, tweets: &BTreeMap<String, Vec<Tweet>>, gold: &BTreeMap<String, Label>) -> Vec<Annotation> {
        let workers: Vec<String> = (0..self.cfg.workers.max(5)).map(|w| format!("w{w:02}")).collect();
        let mut out = Vec::new();
        for (user, timeline) in tweets {
            let sessions = build_sessions(timeline, DEFAULT_SESSION_GAP_SECS).expect("generated timelines are sorted");
            for batch in make_batches(&sessions) {
                let truth = gold[user];
                // at least three of five agree with the truth, so the majority is always defined
                let correct = *[5usize, 5, 5, 5, 5, 4, 4, 4, 3, 3].choose(&mut self.rng).expect("nonempty");
                let panel: Vec<&String> = workers.choose_multiple(&mut self.rng, 5).collect();
                let mut labels: Vec<Label> = vec![truth; correct];
                while labels.len() < 5 {
                    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != truth).collect();
                    labels.push(*others.choose(&mut self.rng).expect("nonempty"));
                }
                labels.shuffle(&mut self.rng);
                for (w, l) in panel.into_iter().zip(labels) {
                    out.push(Annotation {
                        batch_id: batch.id.clone(),
                        worker_id: w.clone(),
                        label: l,
                        is_control: false,
                        gold_label: None,
                    });
                }
            }
        }
        for label in Label::ALL {
            for c in 0..self.cfg.control_batches {
                for w in &workers {
                    let answer = if self.rng.random_bool(self.cfg.worker_accuracy) {
                        label
                    } else {
                        **Label::ALL.iter().filter(|&&l| l != label).collect::<Vec<_>>().choose(&mut self.rng).expect("nonempty")
                    };
                    out.push(Annotation {
                        batch_id: format!("control:{}:{c}", label.as_str()),
                        worker_id: w.clone(),
                        label: answer,
                        is_control: true,
                        gold_label: Some(label),
                    });
                }
            }
        }
        out
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    let total: usize = cfg.class_counts.values().sum();
    if total < 2 {
        return Err(SynthError::TooFewUsers);
    }
    let mut g = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut labels: Vec<Label> = Label::ALL
        .into_iter()
        .flat_map(|l| std::iter::repeat_n(l, cfg.class_counts.get(&l).copied().unwrap_or(0)))
        .collect();
    labels.shuffle(&mut g.rng);
    let width = total.to_string().len().max(4);
    let ids: Vec<String> = (0..total).map(|i| format!("u{i:0width$}")).collect();
    let gold: BTreeMap<String, Label> = ids.iter().cloned().zip(labels.iter().copied()).collect();
    let targets: Vec<String> = ids.iter().zip(&labels).filter(|(_, &l)| l == Label::Normal).map(|(i, _)| i.clone()).collect();
    let everyone = ids.clone();

    let mut users = Vec::with_capacity(total);
    let mut timelines: BTreeMap<String, Vec<Tweet>> = BTreeMap::new();
    for (id, &label) in ids.iter().zip(&labels) {
        // offensive users mostly address normal users
        let pool = if matches!(label, Label::Bully | Label::Aggressor) && !targets.is_empty() {
            &targets
        } else {
            &everyone
        };
        let tl = g.timeline(label, id, pool);
        let last = tl.last().map_or(cfg.start, |t| t.timestamp);
        users.push(g.profile(label, id, last));
        timelines.insert(id.clone(), tl);
    }
    let edges = g.edges(&ids, &labels);
    let mut followers: BTreeMap<&str, u64> = BTreeMap::new();
    let mut friends: BTreeMap<&str, u64> = BTreeMap::new();
    for (u, v) in &edges {
        *friends.entry(u).or_default() += 1;
        *followers.entry(v).or_default() += 1;
    }
    for u in &mut users {
        u.followers_count = followers.get(u.user_id.as_str()).copied().unwrap_or(0);
        u.friends_count = friends.get(u.user_id.as_str()).copied().unwrap_or(0);
    }
    let annotations = g.annotations(&timelines, &gold);
    let status_codes = ids
        .iter()
        .zip(&labels)
        .map(|(id, l)| {
            let p = &cfg.profiles[l];
            let r: f64 = g.rng.random();
            let code = if r < p.suspended_rate {
                CODE_SUSPENDED
            } else if r < p.suspended_rate + p.deleted_rate {
                CODE_DELETED
            } else {
                200
            };
            (id.clone(), code)
        })
        .collect();
    let mut embeddings = Embeddings::new(cfg.embedding_dim);
    for w in vocabulary() {
        let v: Vec<f64> = (0..cfg.embedding_dim).map(|_| g.rng.random_range(-1.0..1.0)).collect();
        embeddings.insert(w, v).expect("fixed dimension");
    }
    Ok(SynthData {
        users,
        tweets: timelines.into_values().flatten().collect(),
        edges,
        annotations,
        gold,
        status_codes,
        lexicons: lexicons(),
        embeddings,
    })
}

/// File names written by [`SynthData::write_dir`].
pub mod files {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const EDGES: &str = "edges.tsv";
    pub const LEXICONS: &str = "lexicons";
    pub const EMBEDDINGS: &str = "lexicons/embeddings.txt";
    pub const ANNOTATIONS: &str = "annotations.csv";
    pub const GOLD: &str = "gold_labels.csv";
    pub const STATUSES: &str = "statuses.csv";
    pub const USER_IDS: &str = "user_ids.txt";
}

impl SynthData {
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut w = io::BufWriter::new(fs::File::create(dir.join(files::CORPUS))?);
        write_records_to(&mut w, &self.tweets, &self.users)?;
        w.flush()?;
        write_edge_list(io::BufWriter::new(fs::File::create(dir.join(files::EDGES))?), &self.edges)?;
        self.lexicons.write_dir(dir.join(files::LEXICONS))?;
        self.embeddings.write(io::BufWriter::new(fs::File::create(dir.join(files::EMBEDDINGS))?))?;
        write_annotations(fs::File::create(dir.join(files::ANNOTATIONS))?, &self.annotations).map_err(io::Error::other)?;
        let mut gold = String::from("user_id,label\n");
        for (u, l) in &self.gold {
            gold.push_str(&format!("{u},{l}\n"));
        }
        fs::write(dir.join(files::GOLD), gold)?;
        let mut codes = String::from("user_id,code\n");
        for (u, c) in &self.status_codes {
            codes.push_str(&format!("{u},{c}\n"));
        }
        fs::write(dir.join(files::STATUSES), codes)?;
        let ids: String = self.gold.keys().map(|u| format!("{u}\n")).collect();
        fs::write(dir.join(files::USER_IDS), ids)?;
        Ok(())
    }

    pub fn timelines(&self) -> BTreeMap<String, Vec<Tweet>> {
        crate::corpus::group_by_user(&self.tweets)
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut c: BTreeMap<Label, usize> = Label::ALL.into_iter().map(|l| (l, 0)).collect();
        for l in self.gold.values() {
            *c.get_mut(l).expect("all labels present") += 1;
        }
        c
    }
}
