//! User-, text- and network-based features and their assembly into one vector.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::lexicon::{LexiconSet, PosTag, EMOTIONS};
use crate::preprocess::CleanedTweet;
use crate::sessions::Session;
use crate::stats;

const SECS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("unknown feature name '{0}'")]
    UnknownFeature(String),
    #[error("reference time {now} precedes account creation {created_at}")]
    ClockSkew { now: i64, created_at: i64 },
}

macro_rules! feature_names {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// The 38 named features, in canonical column order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum FeatureName { $($variant),* }

        impl FeatureName {
            pub const ALL: [FeatureName; 38] = [$(FeatureName::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(FeatureName::$variant => $name),* }
            }
        }

        impl FromStr for FeatureName {
            type Err = FeatureError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($name => Ok(FeatureName::$variant),)*
                    other => Err(FeatureError::UnknownFeature(other.to_string())),
                }
            }
        }
    };
}

feature_names! {
    AvgPosts => "avg_posts",
    AccountAgeDays => "account_age_days",
    Verified => "verified",
    SubscribedLists => "subscribed_lists",
    Interarrival => "interarrival_median",
    DefaultProfileImage => "default_profile_image",
    SessionCount => "session_count",
    SessionSizeAvg => "session_size_avg",
    SessionSizeMedian => "session_size_median",
    SessionSizeStd => "session_size_std",
    HasLocation => "has_location",
    DescriptionLength => "description_length",
    AvgHashtags => "avg_hashtags",
    AvgEmoticons => "avg_emoticons",
    AvgUppercase => "avg_uppercase",
    AvgUrls => "avg_urls",
    AvgSentiment => "avg_sentiment",
    Emotion => "emotion",
    HateScore => "hate_score",
    Embedding => "embedding",
    CurseRate => "curse_rate",
    Pos => "pos",
    Mentions => "mentions",
    UniqueMentions => "unique_mentions",
    Retweets => "retweets",
    WordsPerSentence => "words_per_sentence",
    WordLength => "word_length",
    Friends => "friends",
    Followers => "followers",
    Hub => "hub",
    FollowerFriendRatio => "follower_friend_ratio",
    Authority => "authority",
    PowerDifference => "power_difference",
    ClusteringCoefficient => "clustering_coefficient",
    Reciprocity => "reciprocity",
    Eigenvector => "eigenvector",
    Closeness => "closeness",
    LouvainCommunity => "louvain_community",
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The features left out of modeling by default: those that did not separate the
/// classes significantly. "Statistics on sessions" covers all four session features.
pub const DEFAULT_EXCLUSIONS: [FeatureName; 17] = [
    FeatureName::Verified,
    FeatureName::DefaultProfileImage,
    FeatureName::SessionCount,
    FeatureName::SessionSizeAvg,
    FeatureName::SessionSizeMedian,
    FeatureName::SessionSizeStd,
    FeatureName::HasLocation,
    FeatureName::DescriptionLength,
    FeatureName::Emotion,
    FeatureName::HateScore,
    FeatureName::Embedding,
    FeatureName::CurseRate,
    FeatureName::Mentions,
    FeatureName::UniqueMentions,
    FeatureName::Retweets,
    FeatureName::Closeness,
    FeatureName::LouvainCommunity,
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusions(BTreeSet<FeatureName>);

impl Exclusions {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn default_list() -> Self {
        Exclusions(DEFAULT_EXCLUSIONS.into_iter().collect())
    }

    /// `"paper-default"`, `"none"`, or a comma-separated list of feature names.
    /// `session_stats` expands to the four session features.
    pub fn parse(spec: &str) -> Result<Self, FeatureError> {
        match spec.trim() {
            "paper-default" | "default" => return Ok(Self::default_list()),
            "" | "none" => return Ok(Self::none()),
            _ => {}
        }
        let mut set = BTreeSet::new();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if name == "session_stats" {
                set.extend([
                    FeatureName::SessionCount,
                    FeatureName::SessionSizeAvg,
                    FeatureName::SessionSizeMedian,
                    FeatureName::SessionSizeStd,
                ]);
            } else {
                set.insert(name.parse()?);
            }
        }
        Ok(Exclusions(set))
    }

    pub fn contains(&self, f: FeatureName) -> bool {
        self.0.contains(&f)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextFeatures {
    pub avg_hashtags: f64,
    pub avg_emoticons: f64,
    pub avg_uppercase: f64,
    pub avg_urls: f64,
    pub avg_sentiment: f64,
    pub emotion_scores: [f64; 6],
    pub hate_score: f64,
    pub curse_flag_rate: f64,
    pub embedding_avg: Vec<f64>,
    /// Adjectives, adverbs, nouns, verbs per tweet.
    pub pos_counts: [f64; 4],
    pub mentions_total: f64,
    pub mentions_unique: f64,
    pub retweets: f64,
    pub avg_words_per_sentence: f64,
    pub avg_word_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub avg_posts: f64,
    pub account_age_days: f64,
    pub verified: f64,
    pub subscribed_lists: f64,
    pub interarrival_median_secs: f64,
    pub default_profile_image: f64,
    pub session_count: f64,
    pub session_size_avg: f64,
    pub session_size_median: f64,
    pub session_size_std: f64,
    pub has_location: f64,
    pub description_length: f64,
}

/// Per-node network measurements; see the `graph` module for how each is computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkFeatures {
    pub friends: f64,
    pub followers: f64,
    pub hub: f64,
    pub ratio: f64,
    pub authority: f64,
    pub power_difference: f64,
    pub clustering: f64,
    pub reciprocity: f64,
    pub eigenvector: f64,
    pub closeness: f64,
    pub community: f64,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-tweet sum of term scores clamped to `[-4, 4]`, averaged over tweets.
pub fn sentiment_score(tweets: &[CleanedTweet], lex: &LexiconSet) -> f64 {
    mean(tweets.iter().map(|t| {
        let s: i64 = t
            .tokens
            .iter()
            .filter_map(|w| lex.sentiment.get(w))
            .map(|&v| v as i64)
            .sum();
        s.clamp(-4, 4) as f64
    }))
}

/// Per-tweet mean of matched emotion vectors (zero when nothing matches), averaged over tweets.
pub fn emotion_scores(tweets: &[CleanedTweet], lex: &LexiconSet) -> [f64; 6] {
    let mut acc = [0.0; 6];
    if tweets.is_empty() {
        return acc;
    }
    for t in tweets {
        let hits: Vec<&[f64; 6]> = t.tokens.iter().filter_map(|w| lex.emotion.get(w)).collect();
        if hits.is_empty() {
            continue;
        }
        for v in &hits {
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                *a += x / hits.len() as f64;
            }
        }
    }
    acc.map(|a| a / tweets.len() as f64)
}

/// Mean hate score over every matched term of the user; 0 without matches.
pub fn hate_score(tweets: &[CleanedTweet], lex: &LexiconSet) -> f64 {
    mean(
        tweets
            .iter()
            .flat_map(|t| t.tokens.iter())
            .filter_map(|w| lex.hate.get(w).copied()),
    )
}

/// Share of tweets containing at least one curse word.
pub fn curse_flag_rate(tweets: &[CleanedTweet], lex: &LexiconSet) -> f64 {
    mean(
        tweets
            .iter()
            .map(|t| f64::from(u8::from(t.tokens.iter().any(|w| lex.curse.contains(w))))),
    )
}

fn sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split(['.', '!', '?'])
}

/// Uppercase characters, not counting the first character of each sentence.
pub fn uppercase_count(text: &str) -> usize {
    sentences(text)
        .map(|s| {
            s.trim_start()
                .chars()
                .skip(1)
                .filter(|c| c.is_uppercase())
                .count()
        })
        .sum()
}

/// Mean vector over all in-vocabulary tokens; zero vector when nothing is in vocabulary.
pub fn embedding_avg(tweets: &[CleanedTweet], lex: &LexiconSet) -> Vec<f64> {
    let dim = lex.embeddings.dim();
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for w in tweets.iter().flat_map(|t| t.tokens.iter()) {
        if let Some(v) = lex.embeddings.get(w) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

/// Average adjective/adverb/noun/verb counts per tweet.
pub fn pos_counts(tweets: &[CleanedTweet], lex: &LexiconSet) -> [f64; 4] {
    let mut acc = [0.0; 4];
    if tweets.is_empty() {
        return acc;
    }
    for w in tweets.iter().flat_map(|t| t.tokens.iter()) {
        let slot = match lex.pos.get(w) {
            Some(PosTag::Adjective) => 0,
            Some(PosTag::Adverb) => 1,
            Some(PosTag::Noun) => 2,
            Some(PosTag::Verb) => 3,
            _ => continue,
        };
        acc[slot] += 1.0;
    }
    acc.map(|a| a / tweets.len() as f64)
}

fn words(sentence: &str) -> impl Iterator<Item = &str> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
}

/// `(average words per sentence, average word length)` over all the user's text.
pub fn stylistic<'a>(texts: impl IntoIterator<Item = &'a str>) -> (f64, f64) {
    let mut per_sentence = Vec::new();
    let mut lengths = Vec::new();
    for text in texts {
        for s in sentences(text) {
            let ws: Vec<&str> = words(s).collect();
            if ws.is_empty() {
                continue;
            }
            per_sentence.push(ws.len() as f64);
            lengths.extend(ws.iter().map(|w| w.chars().count() as f64));
        }
    }
    (mean(per_sentence), mean(lengths))
}

pub fn emoticon_count(text: &str, lex: &LexiconSet) -> usize {
    if lex.emoticons.is_empty() {
        return 0;
    }
    text.split_whitespace()
        .filter(|tok| lex.emoticons.contains(*tok))
        .count()
}

/// Text features of one user; `raw` and `cleaned` describe the same tweets.
pub fn text_features(raw: &[Tweet], cleaned: &[CleanedTweet], lex: &LexiconSet) -> TextFeatures {
    let per_tweet = |f: &dyn Fn(&Tweet) -> f64| mean(raw.iter().map(f));
    let distinct: HashSet<&String> = raw.iter().flat_map(|t| t.mentions.iter()).collect();
    let (wps, wl) = stylistic(raw.iter().map(|t| t.text.as_str()));
    TextFeatures {
        avg_hashtags: per_tweet(&|t| t.hashtags.len() as f64),
        avg_emoticons: per_tweet(&|t| emoticon_count(&t.text, lex) as f64),
        avg_uppercase: per_tweet(&|t| uppercase_count(&t.text) as f64),
        avg_urls: per_tweet(&|t| t.urls as f64),
        avg_sentiment: sentiment_score(cleaned, lex),
        emotion_scores: emotion_scores(cleaned, lex),
        hate_score: hate_score(cleaned, lex),
        curse_flag_rate: curse_flag_rate(cleaned, lex),
        embedding_avg: embedding_avg(cleaned, lex),
        pos_counts: pos_counts(cleaned, lex),
        mentions_total: per_tweet(&|t| t.mentions.len() as f64),
        mentions_unique: if raw.is_empty() {
            0.0
        } else {
            distinct.len() as f64 / raw.len() as f64
        },
        retweets: per_tweet(&|t| f64::from(u8::from(t.is_retweet))),
        avg_words_per_sentence: wps,
        avg_word_length: wl,
    }
}

/// Profile- and activity-based features. `tweets` must be time-sorted.
pub fn user_features(
    profile: &crate::corpus::UserProfile,
    tweets: &[Tweet],
    sessions: &[Session],
    now: i64,
) -> Result<UserFeatures, FeatureError> {
    if now < profile.created_at {
        return Err(FeatureError::ClockSkew {
            now,
            created_at: profile.created_at,
        });
    }
    let gaps: Vec<f64> = tweets
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp) as f64)
        .collect();
    let sizes: Vec<f64> = sessions.iter().map(|s| s.len() as f64).collect();
    let (size_avg, size_median, size_std) = if sizes.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let d = stats::describe(&sizes).expect("nonempty");
        (d.mean, d.median, d.std)
    };
    let flag = |b: bool| f64::from(u8::from(b));
    Ok(UserFeatures {
        // statuses_count stands in for the average posting volume
        avg_posts: profile.statuses_count as f64,
        account_age_days: (now - profile.created_at) as f64 / SECS_PER_DAY,
        verified: flag(profile.verified),
        subscribed_lists: profile.listed_count as f64,
        interarrival_median_secs: if gaps.is_empty() {
            0.0
        } else {
            stats::median(&gaps)
        },
        default_profile_image: flag(profile.default_profile_image),
        session_count: sizes.len() as f64,
        session_size_avg: size_avg,
        session_size_median: size_median,
        session_size_std: size_std,
        has_location: flag(profile.location.as_deref().is_some_and(|l| !l.trim().is_empty())),
        description_length: profile
            .description
            .as_deref()
            .map_or(0.0, |d| d.chars().count() as f64),
    })
}

/// One user's full feature set with an exclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub user_id: String,
    values: Vec<(FeatureName, Vec<f64>)>,
    excluded: Exclusions,
}

fn column_names(name: FeatureName, width: usize) -> Vec<String> {
    match name {
        FeatureName::Emotion => EMOTIONS.iter().map(|e| format!("emotion_{e}")).collect(),
        FeatureName::Pos => ["adjectives", "adverbs", "nouns", "verbs"]
            .iter()
            .map(|p| format!("pos_{p}"))
            .collect(),
        FeatureName::Embedding => (0..width).map(|i| format!("embedding_{i}")).collect(),
        other => vec![other.as_str().to_string()],
    }
}

impl FeatureVector {
    pub fn get(&self, name: FeatureName) -> &[f64] {
        &self.values[name as usize].1
    }

    pub fn is_active(&self, name: FeatureName) -> bool {
        !self.excluded.contains(name)
    }

    /// Named features that survive the exclusion mask.
    pub fn active_features(&self) -> Vec<FeatureName> {
        FeatureName::ALL
            .into_iter()
            .filter(|&f| self.is_active(f))
            .collect()
    }

    /// Flattened `(column name, value)` pairs of the active features. Multi-valued
    /// features (emotion, POS, embedding) expand into one column per component.
    pub fn columns(&self) -> Vec<(String, f64)> {
        self.values
            .iter()
            .filter(|(f, _)| self.is_active(*f))
            .flat_map(|(f, v)| column_names(*f, v.len()).into_iter().zip(v.iter().copied()))
            .collect()
    }
}

pub fn assemble_vector(
    user_id: &str,
    uf: &UserFeatures,
    tf: &TextFeatures,
    nf: &NetworkFeatures,
    exclusions: &Exclusions,
) -> FeatureVector {
    use FeatureName::*;
    let one = |x: f64| vec![x];
    let values: Vec<(FeatureName, Vec<f64>)> = FeatureName::ALL
        .into_iter()
        .map(|f| {
            let v = match f {
                AvgPosts => one(uf.avg_posts),
                AccountAgeDays => one(uf.account_age_days),
                Verified => one(uf.verified),
                SubscribedLists => one(uf.subscribed_lists),
                Interarrival => one(uf.interarrival_median_secs),
                DefaultProfileImage => one(uf.default_profile_image),
                SessionCount => one(uf.session_count),
                SessionSizeAvg => one(uf.session_size_avg),
                SessionSizeMedian => one(uf.session_size_median),
                SessionSizeStd => one(uf.session_size_std),
                HasLocation => one(uf.has_location),
                DescriptionLength => one(uf.description_length),
                AvgHashtags => one(tf.avg_hashtags),
                AvgEmoticons => one(tf.avg_emoticons),
                AvgUppercase => one(tf.avg_uppercase),
                AvgUrls => one(tf.avg_urls),
                AvgSentiment => one(tf.avg_sentiment),
                Emotion => tf.emotion_scores.to_vec(),
                HateScore => one(tf.hate_score),
                Embedding => tf.embedding_avg.clone(),
                CurseRate => one(tf.curse_flag_rate),
                Pos => tf.pos_counts.to_vec(),
                Mentions => one(tf.mentions_total),
                UniqueMentions => one(tf.mentions_unique),
                Retweets => one(tf.retweets),
                WordsPerSentence => one(tf.avg_words_per_sentence),
                WordLength => one(tf.avg_word_length),
                Friends => one(nf.friends),
                Followers => one(nf.followers),
                Hub => one(nf.hub),
                FollowerFriendRatio => one(nf.ratio),
                Authority => one(nf.authority),
                PowerDifference => one(nf.power_difference),
                ClusteringCoefficient => one(nf.clustering),
                Reciprocity => one(nf.reciprocity),
                Eigenvector => one(nf.eigenvector),
                Closeness => one(nf.closeness),
                LouvainCommunity => one(nf.community),
            };
            (f, v)
        })
        .collect();
    FeatureVector {
        user_id: user_id.to_string(),
        values,
        excluded: exclusions.clone(),
    }
}
