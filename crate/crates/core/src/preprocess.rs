//! Text cleaning and spam-user removal.
//!
//! A user is treated as a spammer when either the average number of hashtags per
//! raw tweet or the average pairwise similarity of their cleaned tweets is strictly
//! above its cutoff. Pairwise similarity is `1 - lev(a, b) / max(|a|, |b|)` over the
//! space-joined cleaned tokens, with two empty strings counting as identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::exec::Execution;

pub const DEFAULT_HASHTAG_CUTOFF: f64 = 5.0;
pub const DEFAULT_SIMILARITY_CUTOFF: f64 = 0.8;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl StopWords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// English list shipped with the crate.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One term per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedTweet {
    pub id: String,
    pub tokens: Vec<String>,
}

impl CleanedTweet {
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

fn is_url(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

/// Lowercases, drops mentions and links, strips digits and punctuation from
/// every token, then drops empty tokens and stop words.
pub fn clean_text(text: &str, stopwords: &StopWords) -> Vec<String> {
    text.split_whitespace()
        .filter(|tok| !tok.starts_with('@') && !is_url(tok))
        .filter_map(|tok| {
            let cleaned: String = tok
                .chars()
                .filter(|c| c.is_alphabetic())
                .flat_map(char::to_lowercase)
                .collect();
            (!cleaned.is_empty() && !stopwords.contains(&cleaned)).then_some(cleaned)
        })
        .collect()
}

pub fn clean_tweet(tweet: &Tweet, stopwords: &StopWords) -> CleanedTweet {
    CleanedTweet {
        id: tweet.id.clone(),
        tokens: clean_text(&tweet.text, stopwords),
    }
}

/// Edit distance over Unicode scalar values, computed row by row.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b, &mut Vec::new())
}

/// `row` is scratch space reused across calls.
fn levenshtein_chars(a: &[char], b: &[char], row: &mut Vec<usize>) -> usize {
    // a shared prefix or suffix never changes the distance
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    // keep the shorter string along the row
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    row.clear();
    row.extend(0..=short.len());
    for (i, lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let next = (diag + usize::from(lc != sc)).min(row[j + 1] + 1).min(row[j] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[short.len()]
}

pub fn similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b, &mut Vec::new())
}

fn similarity_chars(a: &[char], b: &[char], row: &mut Vec<usize>) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(a, b, row) as f64 / longest as f64
}

/// Mean pairwise similarity over all `x(x-1)/2` unordered pairs; 0 below two tweets.
pub fn intra_similarity(tweets: &[CleanedTweet]) -> f64 {
    let joined: Vec<String> = tweets.iter().map(CleanedTweet::joined).collect();
    intra_similarity_joined(&joined)
}

fn intra_similarity_joined(texts: &[String]) -> f64 {
    let x = texts.len();
    if x < 2 {
        return 0.0;
    }
    let chars: Vec<Vec<char>> = texts.iter().map(|t| t.chars().collect()).collect();
    let mut row = Vec::new();
    let mut total = 0.0;
    for i in 0..x {
        for j in i + 1..x {
            total += similarity_chars(&chars[i], &chars[j], &mut row);
        }
    }
    total / (x * (x - 1) / 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpamReason {
    Hashtags,
    Duplication,
    Both,
    None,
}

impl SpamReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SpamReason::Hashtags => "hashtags",
            SpamReason::Duplication => "duplication",
            SpamReason::Both => "both",
            SpamReason::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamVerdict {
    pub user_id: String,
    pub avg_hashtags: f64,
    pub avg_intra_similarity: f64,
    pub is_spam: bool,
    pub reason: SpamReason,
}

#[derive(Debug, Clone)]
pub struct SpamFilter {
    pub hashtag_cutoff: f64,
    pub similarity_cutoff: f64,
    pub stopwords: StopWords,
    pub exec: Execution,
}

impl Default for SpamFilter {
    fn default() -> Self {
        Self {
            hashtag_cutoff: DEFAULT_HASHTAG_CUTOFF,
            similarity_cutoff: DEFAULT_SIMILARITY_CUTOFF,
            stopwords: StopWords::english(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SpamFilterOutput {
    pub kept: BTreeMap<String, Vec<Tweet>>,
    /// One verdict per input user, ordered by user id.
    pub verdicts: Vec<SpamVerdict>,
}

impl SpamFilter {
    pub fn verdict(&self, user_id: &str, tweets: &[Tweet]) -> SpamVerdict {
        let avg_hashtags = if tweets.is_empty() {
            0.0
        } else {
            tweets.iter().map(|t| t.hashtags.len()).sum::<usize>() as f64 / tweets.len() as f64
        };
        let cleaned: Vec<String> = tweets
            .iter()
            .map(|t| clean_text(&t.text, &self.stopwords).join(" "))
            .collect();
        let avg_intra_similarity = intra_similarity_joined(&cleaned);
        let by_tags = avg_hashtags > self.hashtag_cutoff;
        let by_dup = avg_intra_similarity > self.similarity_cutoff;
        let reason = match (by_tags, by_dup) {
            (true, true) => SpamReason::Both,
            (true, false) => SpamReason::Hashtags,
            (false, true) => SpamReason::Duplication,
            (false, false) => SpamReason::None,
        };
        SpamVerdict {
            user_id: user_id.to_string(),
            avg_hashtags,
            avg_intra_similarity,
            is_spam: by_tags || by_dup,
            reason,
        }
    }

    pub fn apply(&self, users: &BTreeMap<String, Vec<Tweet>>) -> SpamFilterOutput {
        let entries: Vec<(&String, &Vec<Tweet>)> = users.iter().collect();
        let verdicts = self.exec.map(&entries, |(id, tweets)| self.verdict(id, tweets));
        let kept = verdicts
            .iter()
            .filter(|v| !v.is_spam)
            .map(|v| (v.user_id.clone(), users[&v.user_id].clone()))
            .collect();
        SpamFilterOutput { kept, verdicts }
    }
}

pub fn spam_filter(
    users: &BTreeMap<String, Vec<Tweet>>,
    hashtag_cutoff: f64,
    similarity_cutoff: f64,
) -> SpamFilterOutput {
    SpamFilter {
        hashtag_cutoff,
        similarity_cutoff,
        ..SpamFilter::default()
    }
    .apply(users)
}

pub fn write_verdicts_csv(w: impl io::Write, verdicts: &[SpamVerdict]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user_id", "avg_hashtags", "avg_sim", "is_spam", "reason"])?;
    for v in verdicts {
        out.write_record([
            v.user_id.clone(),
            v.avg_hashtags.to_string(),
            v.avg_intra_similarity.to_string(),
            v.is_spam.to_string(),
            v.reason.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
