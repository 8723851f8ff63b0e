//! Tweets, user profiles, line-delimited record files and the dynamic keyword filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid keyword list: {0}")]
    Keywords(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub user_id: String,
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub urls: u32,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub is_reply: bool,
}

impl Tweet {
    fn validate(&self) -> Result<(), String> {
        if self.timestamp <= 0 {
            return Err(format!("tweet {}: timestamp must be positive", self.id));
        }
        for tag in &self.hashtags {
            if tag.starts_with('#') || tag.chars().any(char::is_whitespace) || tag.is_empty() {
                return Err(format!("tweet {}: malformed hashtag '{tag}'", self.id));
            }
            if tag.chars().any(char::is_uppercase) {
                return Err(format!("tweet {}: hashtag '{tag}' is not lowercase", self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub created_at: i64,
    #[serde(default)]
    pub statuses_count: u64,
    #[serde(default)]
    pub followers_count: u64,
    #[serde(default)]
    pub friends_count: u64,
    #[serde(default)]
    pub listed_count: u64,
    #[serde(default)]
    pub favourites_count: u64,
    #[serde(default)]
    pub verified: bool,
    #[serde(default)]
    pub default_profile_image: bool,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
}

/// One line of a record file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Tweet(Tweet),
    User(UserProfile),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub tweets: Vec<Tweet>,
    pub users: Vec<UserProfile>,
    pub skipped: usize,
}

impl Corpus {
    /// Tweets grouped per user, each timeline sorted by `(timestamp, id)`.
    pub fn timelines(&self) -> BTreeMap<String, Vec<Tweet>> {
        group_by_user(&self.tweets)
    }

    pub fn profiles(&self) -> BTreeMap<String, UserProfile> {
        self.users
            .iter()
            .map(|u| (u.user_id.clone(), u.clone()))
            .collect()
    }
}

pub fn group_by_user(tweets: &[Tweet]) -> BTreeMap<String, Vec<Tweet>> {
    let mut out: BTreeMap<String, Vec<Tweet>> = BTreeMap::new();
    for t in tweets {
        out.entry(t.user_id.clone()).or_default().push(t.clone());
    }
    for timeline in out.values_mut() {
        sort_timeline(timeline);
    }
    out
}

pub fn sort_timeline(tweets: &mut [Tweet]) {
    tweets.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
}

fn parse_line(line: &str) -> Result<Record, String> {
    let record: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if let Record::Tweet(t) = &record {
        t.validate()?;
    }
    Ok(record)
}

/// Reads a line-delimited record file. Blank lines are ignored.
///
/// In strict mode the first malformed line aborts with its 1-based line number;
/// otherwise malformed lines are counted in `skipped`.
pub fn load_records(path: impl AsRef<Path>, strict: bool) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_records(BufReader::new(file), strict).map_err(|e| match e {
        CorpusError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn read_records(reader: impl BufRead, strict: bool) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(Record::Tweet(t)) => corpus.tweets.push(t),
            Ok(Record::User(u)) => corpus.users.push(u),
            Err(message) if strict => {
                return Err(CorpusError::Parse {
                    line: idx + 1,
                    message,
                })
            }
            Err(message) => {
                log::debug!("skipping line {}: {message}", idx + 1);
                corpus.skipped += 1;
            }
        }
    }
    Ok(corpus)
}

/// Writes users first, then tweets, one JSON object per line.
pub fn write_records(
    path: impl AsRef<Path>,
    tweets: &[Tweet],
    users: &[UserProfile],
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_records_to(&mut w, tweets, users)?;
    w.flush()
}

pub fn write_records_to(
    w: &mut impl Write,
    tweets: &[Tweet],
    users: &[UserProfile],
) -> io::Result<()> {
    for u in users {
        serde_json::to_writer(&mut *w, &Record::User(u.clone()))?;
        w.write_all(b"\n")?;
    }
    for t in tweets {
        serde_json::to_writer(&mut *w, &Record::Tweet(t.clone()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Lowercased tokens split on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '_') || is_unicode_punct(c))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn is_unicode_punct(c: char) -> bool {
    !c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace()
}

/// Filter state `L(t_i)`: the fixed seed terms plus the top-N terms of the last period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordList {
    seeds: BTreeSet<String>,
    dynamic: Vec<String>,
    n_top: usize,
    period_secs: i64,
}

impl KeywordList {
    pub fn new<I, S>(seeds: I, n_top: usize, period_secs: i64) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let seeds: BTreeSet<String> = seeds
            .into_iter()
            .map(|s| s.as_ref().trim().trim_start_matches('#').to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        if seeds.is_empty() {
            return Err(CorpusError::Keywords("at least one seed is required".into()));
        }
        if n_top == 0 {
            return Err(CorpusError::Keywords("top-N must be positive".into()));
        }
        if period_secs <= 0 {
            return Err(CorpusError::Keywords("period must be positive".into()));
        }
        Ok(Self {
            seeds,
            dynamic: Vec::new(),
            n_top,
            period_secs,
        })
    }

    pub fn seeds(&self) -> &BTreeSet<String> {
        &self.seeds
    }

    pub fn dynamic(&self) -> &[String] {
        &self.dynamic
    }

    pub fn n_top(&self) -> usize {
        self.n_top
    }

    pub fn period_secs(&self) -> i64 {
        self.period_secs
    }

    pub fn contains(&self, term: &str) -> bool {
        self.seeds.contains(term) || self.dynamic.iter().any(|d| d == term)
    }

    /// Replaces the dynamic part with the top-N terms by count, ties broken lexicographically.
    pub fn updated(&self, term_counts: &HashMap<String, u64>) -> KeywordList {
        let mut ranked: Vec<(&String, u64)> = term_counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(t, &c)| (t, c))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        KeywordList {
            seeds: self.seeds.clone(),
            dynamic: ranked
                .into_iter()
                .take(self.n_top)
                .map(|(t, _)| t.clone())
                .collect(),
            n_top: self.n_top,
            period_secs: self.period_secs,
        }
    }

    pub fn matches(&self, tweet: &Tweet) -> bool {
        tweet.hashtags.iter().any(|h| self.contains(h))
            || tokenize(&tweet.text).iter().any(|t| self.contains(t))
    }
}

pub fn update_keyword_list(list: &KeywordList, term_counts: &HashMap<String, u64>) -> KeywordList {
    list.updated(term_counts)
}

/// Tweets whose hashtags or tokens hit `seeds ∪ dynamic`, in input order.
pub fn filter_by_keywords(tweets: &[Tweet], list: &KeywordList) -> Vec<Tweet> {
    tweets.iter().filter(|t| list.matches(t)).cloned().collect()
}

/// Result of running the collection filter over consecutive periods.
#[derive(Debug, Clone)]
pub struct CollectionRun {
    pub kept: Vec<Tweet>,
    /// Keyword list in force at the start of each period.
    pub history: Vec<Vec<String>>,
    pub final_list: KeywordList,
}

/// Snowball collection: the tweets of period `i` are filtered with `L(t_i)`, and
/// the hashtags co-occurring in the matched tweets (seeds excluded) rank `L(t_{i+1})`.
/// Periods start at the earliest timestamp. Output keeps the input order.
pub fn collect_dynamic(tweets: &[Tweet], initial: &KeywordList) -> CollectionRun {
    let mut list = initial.clone();
    let mut history = Vec::new();
    let Some(start) = tweets.iter().map(|t| t.timestamp).min() else {
        return CollectionRun {
            kept: Vec::new(),
            history,
            final_list: list,
        };
    };
    let period = initial.period_secs;
    let period_of = |t: &Tweet| (t.timestamp - start) / period;

    let mut by_period: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, t) in tweets.iter().enumerate() {
        by_period.entry(period_of(t)).or_default().push(i);
    }

    let mut keep = vec![false; tweets.len()];
    let last = by_period.keys().next_back().copied().unwrap_or(0);
    for p in 0..=last {
        history.push(list.dynamic.clone());
        let mut counts: HashMap<String, u64> = HashMap::new();
        for &i in by_period.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
            if list.matches(&tweets[i]) {
                keep[i] = true;
                for h in &tweets[i].hashtags {
                    if !list.seeds.contains(h) {
                        *counts.entry(h.clone()).or_default() += 1;
                    }
                }
            }
        }
        list = list.updated(&counts);
    }

    CollectionRun {
        kept: tweets
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(t, _)| t.clone())
            .collect(),
        history,
        final_list: list,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tweet(id: &str, ts: i64, text: &str, tags: &[&str]) -> Tweet {
        Tweet {
            id: id.into(),
            user_id: "u".into(),
            timestamp: ts,
            text: text.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: vec![],
            urls: 0,
            is_retweet: false,
            is_reply: false,
        }
    }

    fn counts(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn empty_input_loads_nothing() {
        let c = read_records(Cursor::new(""), true).unwrap();
        assert_eq!(c, Corpus::default());
    }

    #[test]
    fn truncated_line_is_skipped_or_fatal() {
        let good = serde_json::to_string(&Record::Tweet(tweet("1", 10, "hi", &[]))).unwrap();
        let good2 = serde_json::to_string(&Record::Tweet(tweet("2", 11, "yo", &[]))).unwrap();
        let input = format!("{good}\n{}\n{good2}\n", &good[..good.len() / 2]);
        let c = read_records(Cursor::new(input.clone()), false).unwrap();
        assert_eq!(c.tweets.len(), 2);
        assert_eq!(c.skipped, 1);
        match read_records(Cursor::new(input), true) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_tweet_fields_rejected() {
        let mut t = tweet("1", 10, "hi", &["#bad"]);
        assert!(t.validate().is_err());
        t.hashtags = vec!["ok".into()];
        t.timestamp = 0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn top_n_direct() {
        let l = KeywordList::new(["gg"], 2, 3600).unwrap();
        let u = l.updated(&counts(&[("a", 3), ("b", 2), ("c", 1)]));
        assert_eq!(u.dynamic(), ["a", "b"]);
        assert!(u.seeds().contains("gg"));
        assert!(l.updated(&HashMap::new()).dynamic().is_empty());
    }

    #[test]
    fn top_n_tie_break_matches_exhaustive_oracle() {
        // Oracle: enumerate both orderings of the two terms and keep the one that is
        // sorted by (count desc, term asc).
        let l = KeywordList::new(["gg"], 1, 3600).unwrap();
        let c = counts(&[("a", 2), ("b", 2)]);
        let orders = [["a", "b"], ["b", "a"]];
        let valid: Vec<_> = orders
            .iter()
            .filter(|o| {
                let (x, y) = (o[0], o[1]);
                c[x] > c[y] || (c[x] == c[y] && x < y)
            })
            .collect();
        assert_eq!(valid.len(), 1);
        assert_eq!(l.updated(&c).dynamic(), &[valid[0][0]]);
    }

    #[test]
    fn filter_matches_brute_force() {
        let mut l = KeywordList::new(["gamergate"], 3, 3600).unwrap();
        l = l.updated(&counts(&[("feminism", 4)]));
        let tweets = vec![
            tweet("1", 1, "nothing here", &[]),
            tweet("2", 2, "look", &["gamergate"]),
            tweet("3", 3, "plain", &["nba"]),
            tweet("4", 4, "Talking about Feminism!", &[]),
            tweet("5", 5, "gamer gate", &[]),
        ];
        let out = filter_by_keywords(&tweets, &l);
        let terms: BTreeSet<String> = l
            .seeds()
            .iter()
            .cloned()
            .chain(l.dynamic().iter().cloned())
            .collect();
        let oracle: Vec<&Tweet> = tweets
            .iter()
            .filter(|t| {
                let mut set: BTreeSet<String> = t.hashtags.iter().cloned().collect();
                set.extend(tokenize(&t.text));
                !set.is_disjoint(&terms)
            })
            .collect();
        assert_eq!(out.iter().map(|t| &t.id).collect::<Vec<_>>(), ["2", "4"]);
        assert_eq!(out.iter().collect::<Vec<_>>(), oracle);
    }

    #[test]
    fn dynamic_collection_snowballs() {
        let l = KeywordList::new(["gg"], 1, 100).unwrap();
        let tweets = vec![
            tweet("1", 1000, "x", &["gg", "ethics"]),
            tweet("2", 1050, "ethics only", &["ethics"]),
            tweet("3", 1150, "later", &["ethics"]),
            tweet("4", 1160, "unrelated", &["cats"]),
        ];
        let run = collect_dynamic(&tweets, &l);
        let ids: Vec<_> = run.kept.iter().map(|t| t.id.as_str()).collect();
        // Period 0 only knows the seed; period 1 has learned "ethics".
        assert_eq!(ids, ["1", "3"]);
        assert_eq!(run.history, vec![Vec::<String>::new(), vec!["ethics".to_string()]]);
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(tokenize("Hello, #World! it's"), ["hello", "world", "it", "s"]);
    }
}
