//! Sessionization, annotation batches and crowd-label aggregation.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::label::Label;

/// Default interarrival threshold: 8 hours.
pub const DEFAULT_SESSION_GAP_SECS: i64 = 8 * 3600;
pub const MIN_BATCH: usize = 5;
pub const MAX_BATCH: usize = 10;
pub const VOTES_PER_BATCH: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("timeline of {user_id} is not sorted by (timestamp, id) at position {position}")]
    Unsorted { user_id: String, position: usize },
    #[error("batch {batch_id}: expected {expected} annotations, got {got}")]
    VoteCount {
        batch_id: String,
        expected: usize,
        got: usize,
    },
    #[error("annotations for batch {batch_id} include batch {other}")]
    MixedBatches { batch_id: String, other: String },
    #[error("no labeled batches for user")]
    NoBatches,
    #[error("annotation file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub user_id: String,
    pub index: usize,
    pub tweets: Vec<Tweet>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub id: String,
    pub user_id: String,
    pub session_index: usize,
    pub tweets: Vec<Tweet>,
}

/// Export shape: a batch with its ordered tweet ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: String,
    pub user_id: String,
    pub session_index: usize,
    pub tweet_ids: Vec<String>,
}

impl From<&Batch> for BatchRecord {
    fn from(b: &Batch) -> Self {
        BatchRecord {
            batch_id: b.id.clone(),
            user_id: b.user_id.clone(),
            session_index: b.session_index,
            tweet_ids: b.tweets.iter().map(|t| t.id.clone()).collect(),
        }
    }
}

/// Drops users with fewer than `min_tweets` tweets in `[start, end)`.
pub fn filter_low_activity(
    users: &BTreeMap<String, Vec<Tweet>>,
    min_tweets: usize,
    window: (i64, i64),
) -> BTreeMap<String, Vec<Tweet>> {
    let (start, end) = window;
    users
        .iter()
        .filter(|(_, tweets)| {
            tweets
                .iter()
                .filter(|t| t.timestamp >= start && t.timestamp < end)
                .count()
                >= min_tweets
        })
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Splits one user's timeline wherever the gap between consecutive tweets exceeds `gap_secs`.
pub fn build_sessions(tweets: &[Tweet], gap_secs: i64) -> Result<Vec<Session>, SessionError> {
    for (i, w) in tweets.windows(2).enumerate() {
        if (w[1].timestamp, &w[1].id) < (w[0].timestamp, &w[0].id) {
            return Err(SessionError::Unsorted {
                user_id: w[1].user_id.clone(),
                position: i + 1,
            });
        }
    }
    let mut sessions: Vec<Session> = Vec::new();
    for t in tweets {
        match sessions.last_mut() {
            Some(s) if t.timestamp - s.tweets.last().expect("nonempty session").timestamp <= gap_secs => {
                s.tweets.push(t.clone())
            }
            _ => sessions.push(Session {
                user_id: t.user_id.clone(),
                index: sessions.len(),
                tweets: vec![t.clone()],
            }),
        }
    }
    Ok(sessions)
}

/// Chunk sizes for a session of `n` tweets: nothing below 5, one chunk up to 10,
/// otherwise `ceil(n/10)` near-equal chunks with the larger ones first.
pub fn batch_sizes(n: usize) -> Vec<usize> {
    if n < MIN_BATCH {
        return Vec::new();
    }
    let k = n.div_ceil(MAX_BATCH);
    let (base, extra) = (n / k, n % k);
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

pub fn make_batches(sessions: &[Session]) -> Vec<Batch> {
    let mut out = Vec::new();
    for s in sessions {
        let mut offset = 0;
        for (chunk, size) in batch_sizes(s.len()).into_iter().enumerate() {
            out.push(Batch {
                id: format!("{}:{}:{}", s.user_id, s.index, chunk),
                user_id: s.user_id.clone(),
                session_index: s.index,
                tweets: s.tweets[offset..offset + size].to_vec(),
            });
            offset += size;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub batch_id: String,
    pub worker_id: String,
    pub label: Label,
    pub is_control: bool,
    #[serde(default)]
    pub gold_label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorityStrength {
    /// 5 of 5.
    Absolute,
    /// 4 of 5.
    Strong,
    /// 3 of 5.
    Basic,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedLabel {
    pub batch_id: String,
    pub label: Option<Label>,
    pub votes: BTreeMap<Label, usize>,
    pub strength: MajorityStrength,
}

/// Majority vote over the five regular annotations of one batch.
pub fn aggregate_annotations(annotations: &[Annotation]) -> Result<AggregatedLabel, SessionError> {
    let regular: Vec<&Annotation> = annotations.iter().filter(|a| !a.is_control).collect();
    let batch_id = regular
        .first()
        .map(|a| a.batch_id.clone())
        .unwrap_or_default();
    if regular.len() != VOTES_PER_BATCH {
        return Err(SessionError::VoteCount {
            batch_id,
            expected: VOTES_PER_BATCH,
            got: regular.len(),
        });
    }
    if let Some(other) = regular.iter().find(|a| a.batch_id != batch_id) {
        return Err(SessionError::MixedBatches {
            batch_id,
            other: other.batch_id.clone(),
        });
    }
    let mut votes: BTreeMap<Label, usize> = BTreeMap::new();
    for a in &regular {
        *votes.entry(a.label).or_default() += 1;
    }
    let top = votes.iter().find(|(_, &n)| n >= 3).map(|(&l, &n)| (l, n));
    let strength = match top.map(|(_, n)| n) {
        Some(5) => MajorityStrength::Absolute,
        Some(4) => MajorityStrength::Strong,
        Some(3) => MajorityStrength::Basic,
        _ => MajorityStrength::None,
    };
    Ok(AggregatedLabel {
        batch_id,
        label: top.map(|(l, _)| l),
        votes,
        strength,
    })
}

/// Aggregates every batch in an annotation set. Batches are ordered by id.
pub fn aggregate_all(annotations: &[Annotation]) -> Result<Vec<AggregatedLabel>, SessionError> {
    let mut by_batch: BTreeMap<&str, Vec<Annotation>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| !a.is_control) {
        by_batch.entry(&a.batch_id).or_default().push(a.clone());
    }
    by_batch.values().map(|v| aggregate_annotations(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserLabel {
    pub label: Label,
    /// Set when the user's batches disagreed.
    pub conflict: bool,
    pub batches: usize,
}

/// Plurality over a user's batch labels; ties go to the most severe label.
pub fn user_label(batch_labels: &[Label]) -> Result<UserLabel, SessionError> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in batch_labels {
        *counts.entry(l).or_default() += 1;
    }
    let best = counts.values().copied().max().ok_or(SessionError::NoBatches)?;
    // BTreeMap iterates in severity order, so the first hit is the most severe.
    let label = counts
        .iter()
        .find(|(_, &c)| c == best)
        .map(|(&l, _)| l)
        .expect("max exists");
    Ok(UserLabel {
        label,
        conflict: counts.len() > 1,
        batches: batch_labels.len(),
    })
}

/// Resolves a per-user label from aggregated batches (batch ids carry the user id prefix).
pub fn user_labels(
    aggregated: &[AggregatedLabel],
    batch_owner: &BTreeMap<String, String>,
) -> BTreeMap<String, UserLabel> {
    let mut per_user: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    for a in aggregated {
        if let (Some(label), Some(user)) = (a.label, batch_owner.get(&a.batch_id)) {
            per_user.entry(user.clone()).or_default().push(label);
        }
    }
    per_user
        .into_iter()
        .filter_map(|(u, labels)| user_label(&labels).ok().map(|l| (u, l)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlAccuracy {
    pub overall: f64,
    pub per_label: BTreeMap<Label, f64>,
    pub total: usize,
}

/// Share of control annotations that match their gold label.
pub fn control_accuracy(annotations: &[Annotation]) -> ControlAccuracy {
    let mut hits: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.is_control) {
        let Some(gold) = a.gold_label else { continue };
        let e = hits.entry(gold).or_default();
        e.0 += usize::from(a.label == gold);
        e.1 += 1;
    }
    let (correct, total) = hits
        .values()
        .fold((0, 0), |(c, t), &(hc, ht)| (c + hc, t + ht));
    ControlAccuracy {
        overall: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        per_label: hits
            .into_iter()
            .map(|(l, (c, t))| (l, c as f64 / t as f64))
            .collect(),
        total,
    }
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    batch_id: String,
    worker_id: String,
    label: String,
    is_control: String,
    #[serde(default)]
    gold_label: Option<String>,
}

fn parse_bool(s: &str) -> Result<bool, SessionError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        other => Err(SessionError::Parse(format!("bad boolean '{other}'"))),
    }
}

/// CSV with header `batch_id,worker_id,label,is_control,gold_label`.
pub fn read_annotations(r: impl io::Read) -> Result<Vec<Annotation>, SessionError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<AnnotationRow>().enumerate() {
        let row = row.map_err(|e| SessionError::Parse(format!("row {}: {e}", i + 1)))?;
        let label = row
            .label
            .parse()
            .map_err(|e| SessionError::Parse(format!("row {}: {e}", i + 1)))?;
        let gold_label = match row.gold_label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(g) => Some(
                g.parse()
                    .map_err(|e| SessionError::Parse(format!("row {}: {e}", i + 1)))?,
            ),
        };
        out.push(Annotation {
            batch_id: row.batch_id,
            worker_id: row.worker_id,
            label,
            is_control: parse_bool(&row.is_control)?,
            gold_label,
        });
    }
    Ok(out)
}

pub fn write_annotations(w: impl io::Write, annotations: &[Annotation]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["batch_id", "worker_id", "label", "is_control", "gold_label"])?;
    for a in annotations {
        out.write_record([
            a.batch_id.as_str(),
            a.worker_id.as_str(),
            a.label.as_str(),
            if a.is_control { "true" } else { "false" },
            a.gold_label.map(Label::as_str).unwrap_or(""),
        ])?;
    }
    out.flush()?;
    Ok(())
}
