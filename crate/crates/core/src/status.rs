//! Account-status retrieval and analysis.
//!
//! A provider answers per user with either success or an error code; code 63 means
//! the account is suspended and 50 that it was deleted. Any other code is reported
//! as an error instead of being guessed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

use crate::features::FeatureVector;
use crate::label::Label;
use crate::ml::{repeated_cv, train_rf, CvParams, Dataset, EvalReport, MlError, RandomForest, RfParams};

pub const CODE_SUSPENDED: u32 = 63;
pub const CODE_DELETED: u32 = 50;

#[derive(Debug, thiserror::Error)]
pub enum StatusError {
    #[error("unknown status code {code} for user {user_id}")]
    UnknownCode { user_id: String, code: u32 },
    #[error("no status known for user {0}")]
    NotFound(String),
    #[error("user {0} has no group")]
    MissingGroup(String),
    #[error("snapshots cover different users; only in {left}: {only_left:?}; only in {right}: {only_right:?}")]
    UniverseMismatch {
        left: String,
        right: String,
        only_left: Vec<String>,
        only_right: Vec<String>,
    },
    #[error("at least two snapshots are required")]
    TooFewSnapshots,
    #[error("unknown snapshot {0:?}")]
    UnknownSnapshot(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("http: {0}")]
    Http(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Deleted,
    Suspended,
}

impl Status {
    pub const ALL: [Status; 3] = [Status::Active, Status::Deleted, Status::Suspended];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Deleted => "deleted",
            Status::Suspended => "suspended",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Status::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountStatus {
    pub user_id: String,
    pub status: Status,
    pub snapshot: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderReply {
    Success,
    Error(u32),
}

impl FromStr for ProviderReply {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "ok" | "success" | "200" | "0" => Ok(ProviderReply::Success),
            _ => t.parse::<u32>().map(ProviderReply::Error).map_err(|_| format!("bad status code {t:?}")),
        }
    }
}

pub fn resolve_status(user_id: &str, reply: ProviderReply) -> Result<Status, StatusError> {
    match reply {
        ProviderReply::Success => Ok(Status::Active),
        ProviderReply::Error(CODE_SUSPENDED) => Ok(Status::Suspended),
        ProviderReply::Error(CODE_DELETED) => Ok(Status::Deleted),
        ProviderReply::Error(code) => Err(StatusError::UnknownCode {
            user_id: user_id.to_string(),
            code,
        }),
    }
}

pub trait StatusProvider: Sync {
    fn lookup(&self, user_id: &str) -> Result<ProviderReply, StatusError>;
}

/// File-backed provider: CSV `user_id,code` where the code is an error number or
/// one of `ok`, `success`, `200`, `0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockProvider {
    replies: HashMap<String, ProviderReply>,
}

impl MockProvider {
    pub fn new(replies: HashMap<String, ProviderReply>) -> Self {
        MockProvider { replies }
    }

    pub fn read(r: impl Read) -> Result<Self, StatusError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut replies = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let (Some(user), Some(code)) = (rec.get(0), rec.get(1)) else {
                return Err(StatusError::Parse {
                    line: i + 2,
                    message: "expected user_id,code".into(),
                });
            };
            let reply = code.parse().map_err(|message| StatusError::Parse { line: i + 2, message })?;
            replies.insert(user.to_string(), reply);
        }
        Ok(MockProvider { replies })
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl StatusProvider for MockProvider {
    fn lookup(&self, user_id: &str) -> Result<ProviderReply, StatusError> {
        self.replies.get(user_id).copied().ok_or_else(|| StatusError::NotFound(user_id.to_string()))
    }
}

/// HTTP provider: `GET {base_url}/{user_id}`. A 2xx response is success; otherwise
/// the error code is taken from a JSON body `{"errors":[{"code":N}]}`, falling back
/// to the HTTP status.
pub struct LiveProvider {
    base_url: String,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        LiveProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }
}

#[derive(serde::Deserialize)]
struct ApiErrors {
    errors: Vec<ApiError>,
}

#[derive(serde::Deserialize)]
struct ApiError {
    code: u32,
}

impl StatusProvider for LiveProvider {
    fn lookup(&self, user_id: &str) -> Result<ProviderReply, StatusError> {
        let url = format!("{}/{}", self.base_url, user_id);
        let mut resp = self.agent.get(&url).call().map_err(|e| StatusError::Http(e.to_string()))?;
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            return Ok(ProviderReply::Success);
        }
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        let code = serde_json::from_str::<ApiErrors>(&body)
            .ok()
            .and_then(|e| e.errors.first().map(|e| e.code))
            .unwrap_or(u32::from(status));
        Ok(ProviderReply::Error(code))
    }
}

/// Looks up every user with at most `max_in_flight` concurrent requests. Results are
/// sorted by user id; the first failing user (in id order) determines the error.
pub fn fetch_statuses(
    provider: &dyn StatusProvider,
    user_ids: &[String],
    snapshot: &str,
    max_in_flight: usize,
) -> Result<Vec<AccountStatus>, StatusError> {
    let mut ids: Vec<&String> = user_ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    ids.sort();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Status, StatusError>>>> = Mutex::new((0..ids.len()).map(|_| None).collect());
    let workers = max_in_flight.clamp(1, ids.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= ids.len() {
                    break;
                }
                let r = provider.lookup(ids[i]).and_then(|reply| resolve_status(ids[i], reply));
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    ids.iter()
        .zip(results.into_inner().expect("result lock"))
        .map(|(id, r)| {
            r.expect("every id is looked up").map(|status| AccountStatus {
                user_id: id.to_string(),
                status,
                snapshot: snapshot.to_string(),
            })
        })
        .collect()
}

/// Percentages of each status within a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatusShares {
    pub total: usize,
    pub active: f64,
    pub deleted: f64,
    pub suspended: f64,
}

impl StatusShares {
    fn from_counts(c: [usize; 3]) -> Self {
        let total: usize = c.iter().sum();
        let pct = |x: usize| if total == 0 { 0.0 } else { 100.0 * x as f64 / total as f64 };
        StatusShares {
            total,
            active: pct(c[0]),
            deleted: pct(c[1]),
            suspended: pct(c[2]),
        }
    }

    pub fn get(&self, s: Status) -> f64 {
        match s {
            Status::Active => self.active,
            Status::Deleted => self.deleted,
            Status::Suspended => self.suspended,
        }
    }

    pub fn row_sum(&self) -> f64 {
        self.active + self.deleted + self.suspended
    }
}

/// Groups in display order: behavior labels by severity first, then the rest alphabetically.
fn ordered_groups<'a>(groups: impl Iterator<Item = &'a String>) -> Vec<String> {
    let set: BTreeSet<&String> = groups.collect();
    let rank = |g: &str| g.parse::<Label>().map_or(usize::MAX, Label::index);
    let mut out: Vec<String> = set.into_iter().cloned().collect();
    out.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    out
}

pub type StatusTable = Vec<(String, StatusShares)>;

/// Per-group status percentages; every user must have a group.
pub fn status_distribution(
    statuses: &[AccountStatus],
    groups: &BTreeMap<String, String>,
) -> Result<StatusTable, StatusError> {
    let mut counts: BTreeMap<&String, [usize; 3]> = BTreeMap::new();
    for s in statuses {
        let g = groups.get(&s.user_id).ok_or_else(|| StatusError::MissingGroup(s.user_id.clone()))?;
        counts.entry(g).or_default()[s.status as usize] += 1;
    }
    Ok(ordered_groups(counts.keys().copied())
        .into_iter()
        .map(|g| {
            let c = counts[&g];
            (g, StatusShares::from_counts(c))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotTable {
    pub snapshot: String,
    pub rows: StatusTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotDelta {
    pub from: String,
    pub to: String,
    /// Percentage-point change per group: (group, active, deleted, suspended).
    pub rows: Vec<(String, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatusSnapshotDiff {
    pub tables: Vec<SnapshotTable>,
    /// Changes between consecutive snapshots.
    pub deltas: Vec<SnapshotDelta>,
}

impl StatusSnapshotDiff {
    fn table(&self, snapshot: &str) -> Result<&StatusTable, StatusError> {
        self.tables
            .iter()
            .find(|t| t.snapshot == snapshot)
            .map(|t| &t.rows)
            .ok_or_else(|| StatusError::UnknownSnapshot(snapshot.to_string()))
    }

    /// Percentage-point change between any two snapshots.
    pub fn delta(&self, from: &str, to: &str) -> Result<SnapshotDelta, StatusError> {
        let a = self.table(from)?;
        let b = self.table(to)?;
        Ok(SnapshotDelta {
            from: from.to_string(),
            to: to.to_string(),
            rows: a
                .iter()
                .zip(b)
                .map(|((g, x), (_, y))| (g.clone(), y.active - x.active, y.deleted - x.deleted, y.suspended - x.suspended))
                .collect(),
        })
    }

    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        for t in &self.tables {
            let _ = writeln!(s, "{}", t.snapshot);
            let _ = writeln!(s, "{:<12} {:>9} {:>9} {:>9}", "", "active", "deleted", "suspended");
            for (g, r) in &t.rows {
                let _ = writeln!(s, "{g:<12} {:>8.2}% {:>8.2}% {:>8.2}%", r.active, r.deleted, r.suspended);
            }
            let _ = writeln!(s);
        }
        for d in &self.deltas {
            let _ = writeln!(s, "{} -> {} (points)", d.from, d.to);
            for (g, a, de, su) in &d.rows {
                let _ = writeln!(s, "{g:<12} {a:>+9.2} {de:>+9.2} {su:>+9.2}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Per-label status tables for each snapshot plus consecutive deltas. All snapshots
/// must cover the same users.
pub fn snapshot_compare(
    snapshots: &[Vec<AccountStatus>],
    labels: &BTreeMap<String, String>,
) -> Result<StatusSnapshotDiff, StatusError> {
    if snapshots.len() < 2 {
        return Err(StatusError::TooFewSnapshots);
    }
    let name = |s: &[AccountStatus], i: usize| s.first().map_or_else(|| format!("snapshot_{i}"), |a| a.snapshot.clone());
    let universe = |s: &[AccountStatus]| s.iter().map(|a| a.user_id.clone()).collect::<BTreeSet<_>>();
    let base = universe(&snapshots[0]);
    for (i, s) in snapshots.iter().enumerate().skip(1) {
        let u = universe(s);
        if u != base {
            return Err(StatusError::UniverseMismatch {
                left: name(&snapshots[0], 0),
                right: name(s, i),
                only_left: base.difference(&u).cloned().collect(),
                only_right: u.difference(&base).cloned().collect(),
            });
        }
    }
    // every label group appears in every table, even when empty
    let all_groups: BTreeMap<String, String> = labels.iter().filter(|(u, _)| base.contains(*u)).map(|(u, g)| (u.clone(), g.clone())).collect();
    let groups = ordered_groups(all_groups.values());
    let tables = snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let dist: BTreeMap<String, StatusShares> = status_distribution(s, labels)?.into_iter().collect();
            Ok(SnapshotTable {
                snapshot: name(s, i),
                rows: groups
                    .iter()
                    .map(|g| (g.clone(), dist.get(g).copied().unwrap_or(StatusShares::from_counts([0; 3]))))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>, StatusError>>()?;
    let mut diff = StatusSnapshotDiff {
        tables,
        deltas: Vec::new(),
    };
    diff.deltas = diff
        .tables
        .windows(2)
        .map(|w| diff.delta(&w[0].snapshot, &w[1].snapshot))
        .collect::<Result<_, _>>()?;
    Ok(diff)
}

/// Random forest over the per-user feature vectors with the three statuses as labels,
/// plus its repeated cross-validation report.
pub fn train_status_classifier(
    features: &[FeatureVector],
    statuses: &[AccountStatus],
    forest: &RfParams,
    cv: &CvParams,
) -> Result<(RandomForest, EvalReport), StatusError> {
    let by_user: HashMap<&str, Status> = statuses.iter().map(|s| (s.user_id.as_str(), s.status)).collect();
    let mut rows = Vec::new();
    let mut names = Vec::new();
    let mut ids = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    for fv in features {
        let Some(&st) = by_user.get(fv.user_id.as_str()) else {
            continue;
        };
        let cols = fv.columns();
        if columns.is_empty() {
            columns = cols.iter().map(|(n, _)| n.clone()).collect();
        }
        rows.push(cols.into_iter().map(|(_, v)| v).collect());
        names.push(st.as_str().to_string());
        ids.push(fv.user_id.clone());
    }
    let present: BTreeSet<Status> = names.iter().filter_map(|n| n.parse().ok()).collect();
    if present.len() < 2 {
        return Err(MlError::SingleClass.into());
    }
    let order: Vec<&str> = present.iter().map(|s| s.as_str()).collect();
    let ds = Dataset::from_named(columns, rows, &names, &order)?.with_ids(ids)?;
    let model = train_rf(&ds, forest, cv.seed)?;
    let mut report = repeated_cv(&ds, forest, cv)?;
    report.setup = Some("status".to_string());
    Ok((model, report))
}

/// One user id per line; blank lines and a `user_id` header are skipped.
pub fn read_user_ids(r: impl BufRead) -> io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let id = line.split(',').next().unwrap_or("").trim();
        if !id.is_empty() && id != "user_id" {
            out.push(id.to_string());
        }
    }
    Ok(out)
}

/// CSV `user_id,status,snapshot`.
pub fn write_statuses(w: impl Write, statuses: &[AccountStatus]) -> Result<(), StatusError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user_id", "status", "snapshot"])?;
    for s in statuses {
        out.write_record([s.user_id.as_str(), s.status.as_str(), s.snapshot.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_statuses(r: impl Read) -> Result<Vec<AccountStatus>, StatusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("").to_string();
        let status = field(1).parse().map_err(|message| StatusError::Parse { line: i + 2, message })?;
        out.push(AccountStatus {
            user_id: field(0),
            status,
            snapshot: field(2),
        });
    }
    Ok(out)
}

/// CSV `user_id,label` (any header); returns user to group.
pub fn read_groups(r: impl Read) -> Result<BTreeMap<String, String>, StatusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let (Some(u), Some(g)) = (rec.get(0), rec.get(1)) {
            out.insert(u.to_string(), g.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(user: &str, status: Status, snap: &str) -> AccountStatus {
        AccountStatus {
            user_id: user.into(),
            status,
            snapshot: snap.into(),
        }
    }

    #[test]
    fn codes_resolve() {
        assert_eq!(resolve_status("u", ProviderReply::Error(63)).unwrap(), Status::Suspended);
        assert_eq!(resolve_status("u", ProviderReply::Error(50)).unwrap(), Status::Deleted);
        assert_eq!(resolve_status("u", ProviderReply::Success).unwrap(), Status::Active);
        for code in [0, 34, 64, 88, 404] {
            assert!(matches!(resolve_status("u", ProviderReply::Error(code)), Err(StatusError::UnknownCode { .. })));
        }
        assert_eq!("ok".parse::<ProviderReply>().unwrap(), ProviderReply::Success);
        assert_eq!("63".parse::<ProviderReply>().unwrap(), ProviderReply::Error(63));
        assert!("x".parse::<ProviderReply>().is_err());
    }

    #[test]
    fn mock_fetch_is_sorted_and_capped() {
        let p = MockProvider::read("user_id,code\nb,63\na,200\nc,50\n".as_bytes()).unwrap();
        let ids: Vec<String> = ["c", "a", "b", "a"].iter().map(|s| s.to_string()).collect();
        for cap in [1, 2, 8] {
            let out = fetch_statuses(&p, &ids, "now", cap).unwrap();
            assert_eq!(out, vec![st("a", Status::Active, "now"), st("b", Status::Suspended, "now"), st("c", Status::Deleted, "now")]);
        }
        let bad = MockProvider::read("user_id,code\na,99\n".as_bytes()).unwrap();
        assert!(matches!(fetch_statuses(&bad, &["a".into()], "x", 2), Err(StatusError::UnknownCode { code: 99, .. })));
        assert!(matches!(fetch_statuses(&p, &["zz".into()], "x", 2), Err(StatusError::NotFound(_))));
    }

    #[test]
    fn distributions() {
        let groups: BTreeMap<String, String> = ["a", "b", "c", "d"].iter().map(|u| (u.to_string(), "g".to_string())).collect();
        let all_active: Vec<_> = ["a", "b"].iter().map(|u| st(u, Status::Active, "s")).collect();
        let t = status_distribution(&all_active, &groups).unwrap();
        assert_eq!((t[0].1.active, t[0].1.deleted, t[0].1.suspended), (100.0, 0.0, 0.0));
        let mixed = vec![
            st("a", Status::Active, "s"),
            st("b", Status::Active, "s"),
            st("c", Status::Suspended, "s"),
            st("d", Status::Deleted, "s"),
        ];
        let t = status_distribution(&mixed, &groups).unwrap();
        assert_eq!((t[0].1.active, t[0].1.deleted, t[0].1.suspended), (50.0, 25.0, 25.0));
        assert!(matches!(
            status_distribution(&[st("zz", Status::Active, "s")], &groups),
            Err(StatusError::MissingGroup(_))
        ));
    }

    #[test]
    fn compare_snapshots() {
        let labels: BTreeMap<String, String> =
            [("u1", "bully"), ("u2", "normal")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let s1 = vec![st("u1", Status::Active, "t1"), st("u2", Status::Active, "t1")];
        let s2 = vec![st("u1", Status::Suspended, "t2"), st("u2", Status::Active, "t2")];
        let same = snapshot_compare(&[s1.clone(), s1.clone()], &labels).unwrap();
        assert!(same.deltas[0].rows.iter().all(|r| r.1 == 0.0 && r.2 == 0.0 && r.3 == 0.0));
        let d = snapshot_compare(&[s1.clone(), s2.clone()], &labels).unwrap();
        assert_eq!(d.tables[0].rows[0].0, "bully");
        assert_eq!(d.deltas[0].rows[0], ("bully".to_string(), -100.0, 0.0, 100.0));
        let back = d.delta("t2", "t1").unwrap();
        for (f, b) in d.deltas[0].rows.iter().zip(&back.rows) {
            assert_eq!((f.1, f.2, f.3), (-b.1, -b.2, -b.3));
        }
        assert!(d.render_text().contains("+100.00"));
        let short = vec![st("u1", Status::Active, "t3")];
        match snapshot_compare(&[s1, short], &labels) {
            Err(StatusError::UniverseMismatch { only_left, only_right, .. }) => {
                assert_eq!(only_left, vec!["u2"]);
                assert!(only_right.is_empty());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(snapshot_compare(&[s2], &labels), Err(StatusError::TooFewSnapshots)));
    }

    #[test]
    fn csv_roundtrips() {
        let s = vec![st("a", Status::Deleted, "sept"), st("b", Status::Active, "sept")];
        let mut buf = Vec::new();
        write_statuses(&mut buf, &s).unwrap();
        assert_eq!(read_statuses(&buf[..]).unwrap(), s);
        assert_eq!(read_user_ids("user_id\nx\n\ny,foo\n".as_bytes()).unwrap(), vec!["x", "y"]);
        let g = read_groups("user_id,label\nx,bully\n".as_bytes()).unwrap();
        assert_eq!(g["x"], "bully");
    }
}
