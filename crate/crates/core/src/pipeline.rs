//! End-to-end run over a corpus bundle, driven by a TOML run manifest.
//!
//! Stages run in a fixed order: ingest, preprocess, sessions, graph, features,
//! stats, topics, ml, status. Each stage writes its products under its own
//! subdirectory of the output directory and hands in-memory results to later
//! stages; nothing is read back from disk, so a disabled stage is never consulted.
//! `report.json` and `report.txt` summarize the run. No timings or absolute paths
//! are recorded, so identical inputs and configuration give byte-identical output.
//!
//! ```toml
//! [input]
//! bundle = "synth"          # directory laid out like `synth generate` output
//!
//! [stages]
//! topics = false
//!
//! [params]
//! seed = 7
//! setups = ["four_class", "two_offensive"]
//!
//! [output]
//! dir = "run"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{collect_dynamic, load_records, write_records_to, KeywordList, Tweet, UserProfile};
use crate::exec::Execution;
use crate::features::{assemble_vector, text_features, user_features, Exclusions, FeatureVector, NetworkFeatures};
use crate::graph::{analyze, read_edge_list, write_scores_csv, GraphAnalysis, SocialGraph};
use crate::label::Label;
use crate::lexicon::{Embeddings, LexiconSet};
use crate::ml::{run_setup, CvParams, Dataset, LearnerKind, LearnerSpec, RfParams, Setup};
use crate::preprocess::{clean_tweet, write_verdicts_csv, SpamFilter, StopWords};
use crate::sessions::{
    aggregate_all, build_sessions, control_accuracy, make_batches, read_annotations, user_labels, BatchRecord,
};
use crate::stats::{describe, fleiss_kappa, ks_two_sample};
use crate::status::{fetch_statuses, status_distribution, train_status_classifier, write_statuses, MockProvider};
use crate::synth::files;
use crate::topics::{fit_lda, top_words, LdaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Preprocess,
    Sessions,
    Graph,
    Features,
    Stats,
    Topics,
    Ml,
    Status,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Sessions => "sessions",
            Stage::Graph => "graph",
            Stage::Features => "features",
            Stage::Stats => "stats",
            Stage::Topics => "topics",
            Stage::Ml => "ml",
            Stage::Status => "status",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type BoxError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {what}: {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: BoxError,
    },
}

impl PipelineError {
    /// 2 for problems found before any stage runs, 1 for a failing stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingInput { .. } => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

fn stage_err(stage: Stage) -> impl Fn(BoxError) -> PipelineError {
    move |source| PipelineError::Stage { stage, source }
}

/// Input files. `bundle` supplies defaults for every other entry using the synth
/// file layout; explicit entries win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub bundle: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// CSV `user_id,label`, used when the sessions stage is off.
    pub labels: Option<PathBuf>,
    /// Mock provider replies, CSV `user_id,code`.
    pub statuses: Option<PathBuf>,
    /// One stop word per line; the built-in English list otherwise.
    pub stopwords: Option<PathBuf>,
}

impl InputConfig {
    fn resolve(&self, explicit: &Option<PathBuf>, bundle_name: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.bundle.as_ref().map(|b| b.join(bundle_name)))
    }

    pub fn corpus_path(&self) -> Option<PathBuf> {
        self.resolve(&self.corpus, files::CORPUS)
    }
    pub fn edges_path(&self) -> Option<PathBuf> {
        self.resolve(&self.edges, files::EDGES)
    }
    pub fn lexicons_path(&self) -> Option<PathBuf> {
        self.resolve(&self.lexicons, files::LEXICONS)
    }
    pub fn embeddings_path(&self) -> Option<PathBuf> {
        self.resolve(&self.embeddings, files::EMBEDDINGS)
    }
    pub fn annotations_path(&self) -> Option<PathBuf> {
        self.resolve(&self.annotations, files::ANNOTATIONS)
    }
    pub fn labels_path(&self) -> Option<PathBuf> {
        self.resolve(&self.labels, files::GOLD)
    }
    pub fn statuses_path(&self) -> Option<PathBuf> {
        self.resolve(&self.statuses, files::STATUSES)
    }

    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.bundle,
            &mut self.corpus,
            &mut self.edges,
            &mut self.lexicons,
            &mut self.embeddings,
            &mut self.annotations,
            &mut self.labels,
            &mut self.statuses,
            &mut self.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub preprocess: bool,
    pub sessions: bool,
    pub graph: bool,
    pub features: bool,
    pub stats: bool,
    pub topics: bool,
    pub ml: bool,
    pub status: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            preprocess: true,
            sessions: true,
            graph: true,
            features: true,
            stats: true,
            topics: true,
            ml: true,
            status: true,
        }
    }
}

impl StageToggles {
    pub fn enabled(&self, stage: Stage) -> bool {
        match stage {
            Stage::Ingest => true,
            Stage::Preprocess => self.preprocess,
            Stage::Sessions => self.sessions,
            Stage::Graph => self.graph,
            Stage::Features => self.features,
            Stage::Stats => self.stats,
            Stage::Topics => self.topics,
            Stage::Ml => self.ml,
            Stage::Status => self.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub seed: u64,
    pub parallel: bool,
    /// Abort on malformed corpus lines instead of skipping them.
    pub strict_input: bool,
    /// Seed keywords for the collection filter; empty keeps the whole corpus.
    pub keywords: Vec<String>,
    pub keyword_top_n: usize,
    pub keyword_period_secs: i64,
    pub hashtag_cutoff: f64,
    pub similarity_cutoff: f64,
    /// Drop users flagged by the spam filter before sessionization.
    pub remove_spam: bool,
    pub session_gap_hours: f64,
    /// Reference time for account age; the latest timestamp in the corpus otherwise.
    pub reference_time: Option<i64>,
    /// Feature names to leave out; `None` means the default exclusion list.
    pub exclusions: Option<Vec<String>>,
    pub graph_tol: f64,
    pub graph_max_iter: usize,
    pub alpha: f64,
    pub learners: Vec<String>,
    pub setups: Vec<String>,
    pub n_trees: usize,
    pub boost_rounds: usize,
    pub cv_repeats: usize,
    pub cv_folds: usize,
    pub top_words: usize,
    pub snapshot: String,
    pub max_in_flight: usize,
    pub lda: LdaConfig,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            seed: 42,
            parallel: true,
            strict_input: false,
            keywords: Vec::new(),
            keyword_top_n: 10,
            keyword_period_secs: 86_400,
            hashtag_cutoff: crate::preprocess::DEFAULT_HASHTAG_CUTOFF,
            similarity_cutoff: crate::preprocess::DEFAULT_SIMILARITY_CUTOFF,
            remove_spam: true,
            session_gap_hours: 8.0,
            reference_time: None,
            exclusions: None,
            graph_tol: crate::graph::DEFAULT_TOL,
            graph_max_iter: crate::graph::DEFAULT_MAX_ITER,
            alpha: crate::stats::DEFAULT_ALPHA,
            learners: vec!["rf".into()],
            setups: Setup::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            n_trees: 100,
            boost_rounds: 10,
            cv_repeats: 10,
            cv_folds: 10,
            top_words: 10,
            snapshot: "snapshot".into(),
            max_in_flight: 8,
            lda: LdaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub stages: StageToggles,
    pub params: Params,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a manifest; relative paths in it are taken relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput {
            what: "config",
            path: path.to_path_buf(),
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.input.rebase(base);
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    /// Checks values and stage dependencies; touches no files.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let p = &self.params;
        if p.hashtag_cutoff.is_nan() || p.hashtag_cutoff < 0.0 || !(0.0..=1.0).contains(&p.similarity_cutoff) {
            return bad("cutoffs must be non-negative and the similarity cutoff at most 1".into());
        }
        if p.session_gap_hours.is_nan() || p.session_gap_hours <= 0.0 {
            return bad("session_gap_hours must be positive".into());
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", p.alpha));
        }
        if p.n_trees == 0 || p.cv_repeats == 0 || p.cv_folds < 2 || p.boost_rounds == 0 {
            return bad("n_trees, cv_repeats and boost_rounds must be positive and cv_folds at least 2".into());
        }
        if p.keyword_period_secs <= 0 {
            return bad("keyword_period_secs must be positive".into());
        }
        self.learner_kinds()?;
        self.setup_list()?;
        self.exclusions()?;
        p.lda.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let s = &self.stages;
        let needs = |stage: &str, on: bool, what: &str, have: bool| {
            if on && !have {
                bad(format!("stage {stage} needs {what}"))
            } else {
                Ok(())
            }
        };
        let labels = s.sessions || self.input.labels_path().is_some();
        needs("stats", s.stats, "the features stage", s.features)?;
        needs("stats", s.stats, "labels (sessions stage or input.labels)", labels)?;
        needs("ml", s.ml, "the features stage", s.features)?;
        needs("ml", s.ml, "labels (sessions stage or input.labels)", labels)?;
        needs("status", s.status, "labels (sessions stage or input.labels)", labels)?;
        Ok(())
    }

    fn learner_kinds(&self) -> Result<Vec<LearnerKind>, PipelineError> {
        self.params
            .learners
            .iter()
            .map(|l| l.parse().map_err(|e: crate::ml::MlError| PipelineError::Config(e.to_string())))
            .collect()
    }

    fn setup_list(&self) -> Result<Vec<Setup>, PipelineError> {
        self.params
            .setups
            .iter()
            .map(|s| s.parse().map_err(|e: crate::ml::MlError| PipelineError::Config(e.to_string())))
            .collect()
    }

    fn exclusions(&self) -> Result<Exclusions, PipelineError> {
        match &self.params.exclusions {
            None => Ok(Exclusions::default_list()),
            Some(list) => Exclusions::parse(&list.join(",")).map_err(|e| PipelineError::Config(e.to_string())),
        }
    }

    fn exec(&self) -> Execution {
        if self.params.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// Every input file the enabled stages will open, with its role.
    fn required_inputs(&self) -> Result<Vec<(&'static str, PathBuf)>, PipelineError> {
        let s = &self.stages;
        let i = &self.input;
        let mut out = Vec::new();
        let mut need = |what: &'static str, on: bool, path: Option<PathBuf>| {
            if on {
                match path {
                    Some(p) => out.push((what, p)),
                    None => return Err(PipelineError::Config(format!("input.{what} is not set"))),
                }
            }
            Ok(())
        };
        need("corpus", true, i.corpus_path())?;
        need("annotations", s.sessions, i.annotations_path())?;
        need("labels", !s.sessions && (s.ml || s.stats || s.status), i.labels_path())?;
        need("edges", s.graph, i.edges_path())?;
        need("lexicons", s.features, i.lexicons_path())?;
        need("statuses", s.status, i.statuses_path())?;
        if let Some(p) = &i.stopwords {
            out.push(("stopwords", p.clone()));
        }
        if s.features && (i.embeddings.is_some() || i.bundle.as_ref().is_some_and(|b| b.join(files::EMBEDDINGS).exists())) {
            out.push(("embeddings", i.embeddings_path().expect("set")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub ran: bool,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub params: Params,
    pub stages: Vec<StageReport>,
}

impl PipelineReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for st in &self.stages {
            s.push_str(&format!("[{}] {}\n", st.stage, if st.ran { "ran" } else { "skipped" }));
            if let serde_json::Value::Object(map) = &st.summary {
                for (k, v) in map {
                    s.push_str(&format!("  {k}: {v}\n"));
                }
            }
            for o in &st.outputs {
                s.push_str(&format!("  -> {o}\n"));
            }
        }
        s
    }
}

struct Out {
    root: PathBuf,
    written: Vec<String>,
}

impl Out {
    fn path(&mut self, rel: &str) -> io::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    fn file(&mut self, rel: &str) -> io::Result<BufWriter<fs::File>> {
        Ok(BufWriter::new(fs::File::create(self.path(rel)?)?))
    }

    fn text(&mut self, rel: &str, contents: &str) -> io::Result<()> {
        fs::write(self.path(rel)?, contents)
    }

    fn json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), BoxError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        Ok(self.text(rel, &s)?)
    }

    fn take(&mut self) -> Vec<String> {
        std::mem::take(&mut self.written)
    }
}

/// Products carried between stages.
#[derive(Default)]
struct State {
    timelines: BTreeMap<String, Vec<Tweet>>,
    profiles: BTreeMap<String, UserProfile>,
    now: i64,
    labels: Option<BTreeMap<String, Label>>,
    graph: Option<(SocialGraph, GraphAnalysis)>,
    features: Option<Vec<FeatureVector>>,
}

fn check_inputs(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    for (what, path) in cfg.required_inputs()? {
        if !path.exists() {
            return Err(PipelineError::MissingInput { what, path });
        }
    }
    Ok(())
}

/// Runs every enabled stage and writes `report.json` / `report.txt`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    check_inputs(cfg)?;
    let exclusions = cfg.exclusions()?;
    let learners = cfg.learner_kinds()?;
    let setups = cfg.setup_list()?;
    let mut out = Out {
        root: cfg.output.dir.clone(),
        written: Vec::new(),
    };
    fs::create_dir_all(&out.root).map_err(|e| stage_err(Stage::Ingest)(e.into()))?;
    let mut state = State::default();
    let mut reports = Vec::new();

    let stages = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Sessions,
        Stage::Graph,
        Stage::Features,
        Stage::Stats,
        Stage::Topics,
        Stage::Ml,
        Stage::Status,
    ];
    for stage in stages {
        if !cfg.stages.enabled(stage) {
            log::info!("stage {stage}: disabled");
            reports.push(StageReport {
                stage,
                ran: false,
                outputs: Vec::new(),
                summary: serde_json::Value::Null,
            });
            continue;
        }
        log::info!("stage {stage}: running");
        let summary = match stage {
            Stage::Ingest => ingest(cfg, &mut state, &mut out),
            Stage::Preprocess => preprocess(cfg, &mut state, &mut out),
            Stage::Sessions => sessions(cfg, &mut state, &mut out),
            Stage::Graph => graph(cfg, &mut state, &mut out),
            Stage::Features => features(cfg, &exclusions, &mut state, &mut out),
            Stage::Stats => stats(cfg, &state, &mut out),
            Stage::Topics => topics(cfg, &state, &mut out),
            Stage::Ml => ml(cfg, &learners, &setups, &state, &mut out),
            Stage::Status => status(cfg, &state, &mut out),
        }
        .map_err(stage_err(stage))?;
        reports.push(StageReport {
            stage,
            ran: true,
            outputs: out.take(),
            summary,
        });
    }
    let report = PipelineReport {
        params: cfg.params.clone(),
        stages: reports,
    };
    let finish = |out: &mut Out| -> Result<(), BoxError> {
        out.json("report.json", &report)?;
        out.text("report.txt", &report.render_text())?;
        Ok(())
    };
    finish(&mut out).map_err(stage_err(Stage::Status))?;
    Ok(report)
}

fn ingest(cfg: &PipelineConfig, st: &mut State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let path = cfg.input.corpus_path().expect("checked");
    let corpus = load_records(&path, cfg.params.strict_input)?;
    let loaded = corpus.tweets.len();
    let tweets = if cfg.params.keywords.is_empty() {
        corpus.tweets
    } else {
        let list = KeywordList::new(cfg.params.keywords.iter(), cfg.params.keyword_top_n, cfg.params.keyword_period_secs)?;
        let run = collect_dynamic(&corpus.tweets, &list);
        let mut w = out.file("ingest/keyword_history.csv")?;
        writeln!(w, "period,dynamic_keywords")?;
        for (i, h) in run.history.iter().enumerate() {
            writeln!(w, "{i},{}", h.join(" "))?;
        }
        w.flush()?;
        run.kept
    };
    st.profiles = corpus.users.iter().map(|u| (u.user_id.clone(), u.clone())).collect();
    st.timelines = crate::corpus::group_by_user(&tweets);
    let latest_tweet = tweets.iter().map(|t| t.timestamp).max().unwrap_or(0);
    let latest_account = corpus.users.iter().map(|u| u.created_at).max().unwrap_or(0);
    st.now = cfg.params.reference_time.unwrap_or(latest_tweet.max(latest_account));
    let users: Vec<UserProfile> = st.profiles.values().cloned().collect();
    let all: Vec<Tweet> = st.timelines.values().flatten().cloned().collect();
    let mut w = out.file("ingest/corpus.jsonl")?;
    write_records_to(&mut w, &all, &users)?;
    w.flush()?;
    Ok(json!({
        "tweets_loaded": loaded,
        "tweets_kept": all.len(),
        "lines_skipped": corpus.skipped,
        "profiles": users.len(),
        "users_with_tweets": st.timelines.len(),
        "reference_time": st.now,
    }))
}

fn stopwords(cfg: &PipelineConfig) -> io::Result<StopWords> {
    match &cfg.input.stopwords {
        Some(p) => StopWords::load(p),
        None => Ok(StopWords::english()),
    }
}

fn preprocess(cfg: &PipelineConfig, st: &mut State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let filter = SpamFilter {
        hashtag_cutoff: cfg.params.hashtag_cutoff,
        similarity_cutoff: cfg.params.similarity_cutoff,
        stopwords: stopwords(cfg)?,
        exec: cfg.exec(),
    };
    let result = filter.apply(&st.timelines);
    write_verdicts_csv(out.file("preprocess/spam_verdicts.csv")?, &result.verdicts)?;
    let flagged = result.verdicts.iter().filter(|v| v.is_spam).count();
    let users = st.timelines.len();
    if cfg.params.remove_spam {
        st.timelines = result.kept;
    }
    let kept: String = st.timelines.keys().map(|u| format!("{u}\n")).collect();
    out.text("preprocess/kept_users.txt", &kept)?;
    Ok(json!({
        "users": users,
        "flagged": flagged,
        "kept": st.timelines.len(),
        "hashtag_cutoff": cfg.params.hashtag_cutoff,
        "similarity_cutoff": cfg.params.similarity_cutoff,
    }))
}

fn gap_secs(cfg: &PipelineConfig) -> i64 {
    (cfg.params.session_gap_hours * 3600.0).round() as i64
}

fn sessions(cfg: &PipelineConfig, st: &mut State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let gap = gap_secs(cfg);
    let entries: Vec<(&String, &Vec<Tweet>)> = st.timelines.iter().collect();
    let per_user = cfg.exec().try_map(&entries, |(_, tl)| build_sessions(tl, gap))?;
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    let mut w = out.file("sessions/batches.jsonl")?;
    let mut n_sessions = 0;
    for sessions in &per_user {
        n_sessions += sessions.len();
        for b in make_batches(sessions) {
            owner.insert(b.id.clone(), b.user_id.clone());
            serde_json::to_writer(&mut w, &BatchRecord::from(&b))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    let path = cfg.input.annotations_path().expect("checked");
    let annotations = read_annotations(fs::File::open(path)?)?;
    let relevant: Vec<_> = annotations
        .iter()
        .filter(|a| a.is_control || owner.contains_key(&a.batch_id))
        .cloned()
        .collect();
    let aggregated = aggregate_all(&relevant)?;
    let mut w = out.file("sessions/aggregated.csv")?;
    writeln!(w, "batch_id,label,strength,{}", Label::ALL.map(|l| format!("votes_{l}")).join(","))?;
    for a in &aggregated {
        let votes: Vec<String> = Label::ALL.iter().map(|l| a.votes.get(l).copied().unwrap_or(0).to_string()).collect();
        let strength = serde_json::to_value(a.strength)?;
        writeln!(
            w,
            "{},{},{},{}",
            a.batch_id,
            a.label.map_or("", Label::as_str),
            strength.as_str().unwrap_or(""),
            votes.join(",")
        )?;
    }
    w.flush()?;
    let labels = user_labels(&aggregated, &owner);
    let mut w = out.file("sessions/user_labels.csv")?;
    writeln!(w, "user_id,label,conflict,batches")?;
    for (u, l) in &labels {
        writeln!(w, "{u},{},{},{}", l.label, l.conflict, l.batches)?;
    }
    w.flush()?;
    let ratings: Vec<Vec<u64>> = aggregated
        .iter()
        .map(|a| Label::ALL.iter().map(|l| a.votes.get(l).copied().unwrap_or(0) as u64).collect())
        .collect();
    let kappa = if ratings.is_empty() { None } else { Some(fleiss_kappa(&ratings)?) };
    let control = control_accuracy(&relevant);
    out.json("sessions/agreement.json", &json!({ "fleiss_kappa": kappa, "control_accuracy": control }))?;
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels.values() {
        *counts.entry(l.label).or_default() += 1;
    }
    st.labels = Some(labels.into_iter().map(|(u, l)| (u, l.label)).collect());
    Ok(json!({
        "sessions": n_sessions,
        "batches": owner.len(),
        "labeled_users": counts.values().sum::<usize>(),
        "class_counts": counts.iter().map(|(l, c)| (l.as_str(), *c)).collect::<BTreeMap<_, _>>(),
        "fleiss_kappa": kappa.map(|k| k.kappa),
        "control_accuracy": control.overall,
    }))
}

fn labels_from_file(cfg: &PipelineConfig, st: &State) -> Result<BTreeMap<String, Label>, BoxError> {
    let path = cfg.input.labels_path().expect("checked");
    let groups = crate::status::read_groups(fs::File::open(path)?)?;
    let mut out = BTreeMap::new();
    for (u, g) in groups {
        if st.timelines.contains_key(&u) {
            out.insert(u, g.parse::<Label>()?);
        }
    }
    Ok(out)
}

fn graph(cfg: &PipelineConfig, st: &mut State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let path = cfg.input.edges_path().expect("checked");
    let edges = read_edge_list(io::BufReader::new(fs::File::open(path)?))?;
    let g = SocialGraph::from_edges(&edges);
    let analysis = analyze(&g, cfg.params.graph_tol, cfg.params.graph_max_iter)?;
    write_scores_csv(out.file("graph/scores.csv")?, &analysis.scores)?;
    out.json(
        "graph/communities.json",
        &json!({
            "communities": analysis.partition.community_count(),
            "modularity": analysis.partition.modularity,
            "history": analysis.partition.history,
        }),
    )?;
    let summary = json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "communities": analysis.partition.community_count(),
        "modularity": analysis.partition.modularity,
    });
    st.graph = Some((g, analysis));
    Ok(summary)
}

fn features(
    cfg: &PipelineConfig,
    exclusions: &Exclusions,
    st: &mut State,
    out: &mut Out,
) -> Result<serde_json::Value, BoxError> {
    let dir = cfg.input.lexicons_path().expect("checked");
    let mut lex = LexiconSet::load_dir(&dir)?;
    if let Some((_, p)) = cfg.required_inputs()?.into_iter().find(|(w, _)| *w == "embeddings") {
        lex = lex.with_embeddings(Embeddings::load(p)?);
    }
    let stop = stopwords(cfg)?;
    let gap = gap_secs(cfg);
    let missing = st.timelines.keys().filter(|u| !st.profiles.contains_key(*u)).count();
    if missing > 0 {
        log::warn!("{missing} users have tweets but no profile; skipped");
    }
    let graph = st.graph.as_ref().map(|(g, a)| (g, a));
    let inputs = FeatureInputs {
        lexicons: &lex,
        stopwords: &stop,
        session_gap_secs: gap,
        now: st.now,
        graph,
        exclusions,
    };
    let vectors = extract_features(&st.timelines, &st.profiles, &inputs, cfg.exec())?;
    let mut w = out.file("features/features.csv")?;
    if let Some(first) = vectors.first() {
        let header: Vec<String> = first.columns().into_iter().map(|(n, _)| n).collect();
        writeln!(w, "user_id,{}", header.join(","))?;
    }
    for v in &vectors {
        let vals: Vec<String> = v.columns().into_iter().map(|(_, x)| x.to_string()).collect();
        writeln!(w, "{},{}", v.user_id, vals.join(","))?;
    }
    w.flush()?;
    let summary = json!({
        "users": vectors.len(),
        "skipped_without_profile": missing,
        "active_features": vectors.first().map(|v| v.active_features().len()).unwrap_or(0),
        "columns": vectors.first().map(|v| v.columns().len()).unwrap_or(0),
        "network_features": graph.is_some(),
    });
    st.features = Some(vectors);
    Ok(summary)
}

/// Shared inputs of [`extract_features`].
pub struct FeatureInputs<'a> {
    pub lexicons: &'a LexiconSet,
    pub stopwords: &'a StopWords,
    pub session_gap_secs: i64,
    /// Reference time for account age.
    pub now: i64,
    /// Network features are zero without a graph.
    pub graph: Option<(&'a SocialGraph, &'a GraphAnalysis)>,
    pub exclusions: &'a Exclusions,
}

/// One feature vector per user with a profile, in user-id order. Timelines must be
/// time-sorted; users without a profile are skipped.
pub fn extract_features(
    timelines: &BTreeMap<String, Vec<Tweet>>,
    profiles: &BTreeMap<String, UserProfile>,
    inputs: &FeatureInputs<'_>,
    exec: Execution,
) -> Result<Vec<FeatureVector>, BoxError> {
    let entries: Vec<(&String, &Vec<Tweet>)> = timelines.iter().filter(|(u, _)| profiles.contains_key(*u)).collect();
    exec.try_map(&entries, |(u, tl)| -> Result<FeatureVector, BoxError> {
        let sessions = build_sessions(tl, inputs.session_gap_secs)?;
        let cleaned: Vec<_> = tl.iter().map(|t| clean_tweet(t, inputs.stopwords)).collect();
        let tf = text_features(tl, &cleaned, inputs.lexicons);
        let uf = user_features(&profiles[*u], tl, &sessions, inputs.now)?;
        let mentioned: Vec<String> = tl
            .iter()
            .flat_map(|t| t.mentions.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let nf = inputs
            .graph
            .map_or_else(NetworkFeatures::default, |(g, a)| a.network_features(g, u, &mentioned));
        Ok(assemble_vector(u, &uf, &tf, &nf, inputs.exclusions))
    })
}

fn labels<'a>(cfg: &PipelineConfig, st: &'a State) -> Result<std::borrow::Cow<'a, BTreeMap<String, Label>>, BoxError> {
    match &st.labels {
        Some(l) => Ok(std::borrow::Cow::Borrowed(l)),
        None => Ok(std::borrow::Cow::Owned(labels_from_file(cfg, st)?)),
    }
}

fn labeled_vectors(cfg: &PipelineConfig, st: &State) -> Result<(Vec<FeatureVector>, Vec<Label>), BoxError> {
    let labels = labels(cfg, st)?;
    let mut vs = Vec::new();
    let mut ls = Vec::new();
    for v in st.features.as_ref().expect("features stage ran") {
        if let Some(&l) = labels.get(&v.user_id) {
            vs.push(v.clone());
            ls.push(l);
        }
    }
    Ok((vs, ls))
}

fn stats(cfg: &PipelineConfig, st: &State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let (vectors, labels) = labeled_vectors(cfg, st)?;
    let ds = Dataset::from_feature_vectors(&vectors, &labels)?;
    let mut summary_w = out.file("stats/summary.csv")?;
    writeln!(summary_w, "feature,label,n,mean,median,std")?;
    let mut ks_w = out.file("stats/ks.csv")?;
    writeln!(ks_w, "feature,group,reference,n,m,d_statistic,critical_value,reject_null")?;
    let mut rejected = 0;
    let mut tests = 0;
    for (j, name) in ds.features.iter().enumerate() {
        let col = ds.column(j);
        let by_class: Vec<Vec<f64>> = (0..ds.n_classes())
            .map(|c| col.iter().zip(&ds.labels).filter(|(_, &l)| l == c).map(|(&x, _)| x).collect())
            .collect();
        for (c, sample) in by_class.iter().enumerate() {
            if let Ok(d) = describe(sample) {
                writeln!(summary_w, "{name},{},{},{},{},{}", ds.class_names[c], sample.len(), d.mean, d.median, d.std)?;
            }
        }
        let normal = &by_class[Label::Normal.index()];
        for l in [Label::Bully, Label::Aggressor, Label::Spammer] {
            let sample = &by_class[l.index()];
            if sample.is_empty() || normal.is_empty() {
                continue;
            }
            let r = ks_two_sample(sample, normal, cfg.params.alpha)?;
            tests += 1;
            rejected += usize::from(r.reject_null);
            writeln!(
                ks_w,
                "{name},{l},normal,{},{},{},{},{}",
                r.n, r.m, r.d_statistic, r.critical_value, r.reject_null
            )?;
        }
    }
    summary_w.flush()?;
    ks_w.flush()?;
    Ok(json!({ "ks_tests": tests, "rejected_at_alpha": rejected, "alpha": cfg.params.alpha }))
}

fn topics(cfg: &PipelineConfig, st: &State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let stop = stopwords(cfg)?;
    let labels = if cfg.stages.sessions || cfg.input.labels_path().is_some_and(|p| p.exists()) {
        Some(labels(cfg, st)?)
    } else {
        None
    };
    let mut groups: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (u, tl) in &st.timelines {
        let group = match &labels {
            Some(l) => match l.get(u) {
                Some(label) => label.as_str().to_string(),
                None => continue,
            },
            None => "all".to_string(),
        };
        let docs = groups.entry(group).or_default();
        docs.extend(tl.iter().map(|t| clean_tweet(t, &stop).tokens).filter(|d| !d.is_empty()));
    }
    let mut lda = cfg.params.lda.clone();
    lda.seed = cfg.params.seed;
    let mut summary = serde_json::Map::new();
    for (group, docs) in &groups {
        let model = match fit_lda(docs, &lda) {
            Ok(m) => m,
            Err(e @ (crate::topics::TopicError::EmptyCorpus | crate::topics::TopicError::EmptyVocabulary { .. })) => {
                log::warn!("topics for {group} skipped: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        model.write_topic_word_csv(out.file(&format!("topics/{group}/topic_word.csv"))?)?;
        model.write_doc_topic_csv(out.file(&format!("topics/{group}/doc_topic.csv"))?)?;
        model.write_vocabulary(out.file(&format!("topics/{group}/vocabulary.txt"))?)?;
        let top = top_words(&model, cfg.params.top_words);
        let mut w = out.file(&format!("topics/{group}/top_words.csv"))?;
        writeln!(w, "topic,rank,word,probability")?;
        for (k, words) in top.iter().enumerate() {
            for (r, (word, p)) in words.iter().enumerate() {
                writeln!(w, "{k},{},{word},{p}", r + 1)?;
            }
        }
        w.flush()?;
        summary.insert(
            group.clone(),
            json!({
                "documents": docs.len(),
                "vocabulary": model.vocabulary.len(),
                "final_perplexity": model.perplexity.last(),
                "top_words": top.iter().map(|ws| ws.iter().take(5).map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ")).collect::<Vec<_>>(),
            }),
        );
    }
    Ok(serde_json::Value::Object(summary))
}

fn forest_params(cfg: &PipelineConfig) -> RfParams {
    RfParams {
        n_trees: cfg.params.n_trees,
        exec: cfg.exec(),
        ..RfParams::default()
    }
}

fn cv_params(cfg: &PipelineConfig) -> CvParams {
    CvParams {
        repeats: cfg.params.cv_repeats,
        folds: cfg.params.cv_folds,
        seed: cfg.params.seed,
        exec: cfg.exec(),
    }
}

fn ml(
    cfg: &PipelineConfig,
    learners: &[LearnerKind],
    setups: &[Setup],
    st: &State,
    out: &mut Out,
) -> Result<serde_json::Value, BoxError> {
    let (vectors, labels) = labeled_vectors(cfg, st)?;
    let ds = Dataset::from_feature_vectors(&vectors, &labels)?;
    ds.write_csv(out.file("ml/dataset.csv")?)?;
    let mut summary = serde_json::Map::new();
    for &setup in setups {
        for &kind in learners {
            let spec = LearnerSpec {
                kind,
                forest: forest_params(cfg),
                boost_rounds: cfg.params.boost_rounds,
            };
            let report = run_setup(&ds, setup, &spec, &cv_params(cfg))?;
            out.json(&format!("ml/{setup}/{kind}.json"), &report)?;
            out.text(&format!("ml/{setup}/{kind}.txt"), &report.render_text())?;
            summary.insert(
                format!("{setup}/{kind}"),
                json!({
                    "instances": report.n_instances,
                    "precision": report.weighted.precision,
                    "recall": report.weighted.recall,
                    "f1": report.weighted.f1,
                    "auc": report.weighted.auc,
                    "accuracy": report.weighted.accuracy,
                }),
            );
        }
    }
    Ok(serde_json::Value::Object(summary))
}

fn status(cfg: &PipelineConfig, st: &State, out: &mut Out) -> Result<serde_json::Value, BoxError> {
    let labels = labels(cfg, st)?;
    let provider = MockProvider::read(fs::File::open(cfg.input.statuses_path().expect("checked"))?)?;
    let ids: Vec<String> = labels.keys().cloned().collect();
    let statuses = fetch_statuses(&provider, &ids, &cfg.params.snapshot, cfg.params.max_in_flight)?;
    write_statuses(out.file("status/statuses.csv")?, &statuses)?;
    let groups: BTreeMap<String, String> = labels.iter().map(|(u, l)| (u.clone(), l.to_string())).collect();
    let table = status_distribution(&statuses, &groups)?;
    let mut w = out.file("status/distribution.csv")?;
    writeln!(w, "group,total,active,deleted,suspended")?;
    for (g, s) in &table {
        writeln!(w, "{g},{},{:.2},{:.2},{:.2}", s.total, s.active, s.deleted, s.suspended)?;
    }
    w.flush()?;
    let mut summary = serde_json::Map::new();
    summary.insert("users".into(), json!(statuses.len()));
    summary.insert(
        "distribution".into(),
        json!(table.iter().map(|(g, s)| (g.clone(), [s.active, s.deleted, s.suspended])).collect::<BTreeMap<_, _>>()),
    );
    if let Some(features) = &st.features {
        let (_, report) = train_status_classifier(features, &statuses, &forest_params(cfg), &cv_params(cfg))?;
        out.json("status/classifier.json", &report)?;
        out.text("status/classifier.txt", &report.render_text())?;
        summary.insert("classifier_accuracy".into(), json!(report.weighted.accuracy));
        summary.insert("classifier_f1".into(), json!(report.weighted.f1));
    }
    Ok(serde_json::Value::Object(summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documentation() {
        let cfg = PipelineConfig::parse("").unwrap();
        assert_eq!(cfg.params.session_gap_hours, 8.0);
        assert_eq!(cfg.params.hashtag_cutoff, 5.0);
        assert_eq!(cfg.params.similarity_cutoff, 0.8);
        assert_eq!(cfg.params.alpha, 0.01);
        assert_eq!(cfg.params.n_trees, 100);
        assert_eq!((cfg.params.cv_repeats, cfg.params.cv_folds), (10, 10));
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["[params]\nsed = 3\n", "[stagez]\n", "[stages]\nml = true\nfoo = 1\n", "[params.lda]\nk = 3\n"] {
            assert!(matches!(PipelineConfig::parse(text), Err(PipelineError::Config(_))), "{text}");
        }
        assert!(PipelineConfig::parse("[params]\nlearners = [\"svm\"]\n").is_err());
        assert!(PipelineConfig::parse("[params]\nsetups = [\"five\"]\n").is_err());
        assert!(PipelineConfig::parse("[params]\nexclusions = [\"nope\"]\n").is_err());
        assert!(PipelineConfig::parse("[params]\nalpha = 1.5\n").is_err());
    }

    #[test]
    fn stage_dependencies_checked() {
        let e = PipelineConfig::parse("[stages]\nfeatures = false\n").unwrap_err();
        assert!(e.to_string().contains("stage stats needs the features stage"), "{e}");
        let ok = "[stages]\nfeatures = false\nstats = false\nml = false\nstatus = false\n";
        assert!(PipelineConfig::parse(ok).is_ok());
    }

    #[test]
    fn missing_input_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.input.bundle = Some(dir.path().join("nope"));
        cfg.output.dir = dir.path().join("out");
        let e = run_pipeline(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(!cfg.output.dir.exists());
    }

    #[test]
    fn bundle_paths_resolve_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("run.toml");
        fs::write(&manifest, "[input]\nbundle = \"data\"\ncorpus = \"/abs/c.jsonl\"\n[output]\ndir = \"o\"\n").unwrap();
        let cfg = PipelineConfig::load(&manifest).unwrap();
        assert_eq!(cfg.input.edges_path().unwrap(), dir.path().join("data").join(files::EDGES));
        assert_eq!(cfg.input.corpus_path().unwrap(), PathBuf::from("/abs/c.jsonl"));
        assert_eq!(cfg.output.dir, dir.path().join("o"));
    }
}
