use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use twabuse::corpus::{collect_dynamic, load_records, write_records, KeywordList};
use twabuse::features::Exclusions;
use twabuse::graph::{analyze, read_edge_list, write_scores_csv, SocialGraph};
use twabuse::label::Label;
use twabuse::lexicon::{Embeddings, LexiconSet};
use twabuse::ml::{run_setup, CvParams, Dataset, LearnerKind, LearnerSpec, RfParams, Setup};
use twabuse::pipeline::{extract_features, run_pipeline, FeatureInputs, PipelineConfig, PipelineError};
use twabuse::preprocess::{write_verdicts_csv, SpamFilter, StopWords};
use twabuse::sessions::{
    aggregate_all, build_sessions, control_accuracy, filter_low_activity, make_batches, read_annotations,
    user_labels, BatchRecord,
};
use twabuse::stats::{fleiss_kappa, ks_two_sample};
use twabuse::status::{
    fetch_statuses, read_groups, read_statuses, read_user_ids, snapshot_compare, write_statuses, LiveProvider,
    MockProvider, StatusProvider,
};
use twabuse::synth::{generate, parse_counts, SynthConfig};
use twabuse::topics::{fit_lda, read_docs, top_words, LdaConfig};
use twabuse::Execution;

#[derive(Parser)]
#[command(name = "twabuse", version, about = "Abusive-behavior detection toolkit for Twitter-like data")]
struct Cli {
    /// Run manifest (TOML) for `pipeline`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keyword-driven corpus collection filter.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Spam removal by hashtag and duplicate-content cutoffs.
    Preprocess(PreprocessArgs),
    /// Sessionization, batching and crowd-label aggregation.
    #[command(subcommand)]
    Sessions(SessionsCmd),
    /// User, text and network feature extraction.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Centrality scores and Louvain communities of the follow graph.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Kolmogorov-Smirnov tests and Fleiss' kappa.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Online LDA topic summaries.
    #[command(subcommand)]
    Topics(TopicsCmd),
    /// Cross-validated classification under the four label setups.
    #[command(subcommand)]
    Ml(MlCmd),
    /// Account-status lookup and snapshot comparison.
    #[command(subcommand)]
    Status(StatusCmd),
    /// Synthetic input bundle generator.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Run the whole pipeline described by `--config`.
    Pipeline,
}

#[derive(Subcommand)]
enum CorpusCmd {
    Filter {
        /// Comma-separated seed keywords.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value_t = 86_400)]
        period_secs: i64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort on malformed lines.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    hashtag_cutoff: f64,
    #[arg(long, default_value_t = 0.8)]
    sim_cutoff: f64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verdicts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SessionsCmd {
    /// Split timelines into sessions and export annotation batches.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        t_l_hours: f64,
        /// Drop users with fewer tweets than this.
        #[arg(long, default_value_t = 5)]
        min_tweets: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Majority-vote batch labels, per-user labels and agreement statistics.
    Aggregate {
        #[arg(long)]
        annotations: PathBuf,
        /// Batch export from `sessions build`; batch ids prefixed by user otherwise.
        #[arg(long)]
        batches: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FeaturesCmd {
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lexicons: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// `paper-default`, `none` or a comma-separated list of feature names.
        #[arg(long, default_value = "paper-default")]
        exclude: String,
        /// Edge list for the network features; zeros without it.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// CSV `user_id,label`; adds a label column and keeps labeled users only.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = 8.0)]
        t_l_hours: f64,
        /// Reference time for account age; the latest corpus timestamp otherwise.
        #[arg(long)]
        now: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    Analyze {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Two-sample Kolmogorov-Smirnov test.
    Ks {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Fleiss' kappa over an items x categories count matrix.
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
    },
}

#[derive(Subcommand)]
enum TopicsCmd {
    Fit {
        /// One document per line, whitespace-separated tokens.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 256)]
        batch: usize,
        #[arg(long, default_value_t = 0.6)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Subcommand)]
enum MlCmd {
    /// Repeated stratified cross-validation of one learner on one setup.
    Run {
        /// Dataset CSV: feature columns, optional `id`, and `label`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "four_class")]
        setup: String,
        #[arg(long, default_value = "rf")]
        learner: String,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 10)]
        boost_rounds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StatusCmd {
    Fetch {
        #[arg(long, value_parser = ["mock", "live"])]
        provider: String,
        /// User ids, one per line.
        #[arg(long = "in")]
        input: PathBuf,
        /// Mock replies, CSV `user_id,code`.
        #[arg(long)]
        mock: Option<PathBuf>,
        /// Base URL of the live endpoint; users are looked up at `{url}/{id}`.
        #[arg(long)]
        url: Option<String>,
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
        #[arg(long, default_value_t = 8)]
        max_in_flight: usize,
        #[arg(long, default_value = "snapshot")]
        snapshot: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Compare {
        /// Status CSVs (`user_id,status,snapshot`), oldest first.
        #[arg(long, num_args = 2.., required = true)]
        snapshots: Vec<PathBuf>,
        /// CSV `user_id,label`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    Generate {
        /// e.g. `bully=58,aggressor=43,spammer=415,normal=787`.
        #[arg(long)]
        counts: Option<String>,
    },
}

/// A named input path that does not exist.
#[derive(Debug)]
struct MissingInput(PathBuf);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

fn input(p: &Path) -> Result<&Path> {
    if p.exists() {
        Ok(p)
    } else {
        Err(MissingInput(p.to_path_buf()).into())
    }
}

fn open(p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(input(p)?).with_context(|| format!("opening {}", p.display()))?))
}

struct Ctx {
    out_dir: PathBuf,
    seed: u64,
    exec: Execution,
}

impl Ctx {
    fn out_path(&self, explicit: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let p = explicit.unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    fn create(&self, explicit: Option<PathBuf>, default_name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let p = self.out_path(explicit, default_name)?;
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok((p, BufWriter::new(f)))
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(v)?))
}

/// Numbers from the first column of a CSV; a non-numeric first row is a header.
fn read_sample(p: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let text = fs::read_to_string(input(p)?)?;
    for (i, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if i == 0 => {}
            Err(_) => bail!("{}:{}: not a number: {cell:?}", p.display(), i + 1),
        }
    }
    Ok(out)
}

fn read_label_map(p: &Path) -> Result<BTreeMap<String, Label>> {
    let groups = read_groups(open(p)?)?;
    groups
        .into_iter()
        .map(|(u, g)| Ok((u, g.parse::<Label>()?)))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if let Some(p) = e.downcast_ref::<PipelineError>() {
                p.exit_code()
            } else if e.downcast_ref::<MissingInput>().is_some() {
                2
            } else {
                1
            };
            ExitCode::from(code as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        out_dir: cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed.unwrap_or(42),
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    if cli.config.is_some() && !matches!(cli.command, Command::Pipeline) {
        log::warn!("--config is only read by `pipeline`");
    }
    match cli.command {
        Command::Corpus(CorpusCmd::Filter {
            seeds,
            top_n,
            period_secs,
            input: path,
            out,
            strict,
        }) => {
            let corpus = load_records(input(&path)?, strict)?;
            let list = KeywordList::new(seeds.split(','), top_n, period_secs)?;
            let run = collect_dynamic(&corpus.tweets, &list);
            let kept_users: std::collections::BTreeSet<&str> = run.kept.iter().map(|t| t.user_id.as_str()).collect();
            let users: Vec<_> = corpus.users.iter().filter(|u| kept_users.contains(u.user_id.as_str())).cloned().collect();
            let out = ctx.out_path(out, "filtered.jsonl")?;
            write_records(&out, &run.kept, &users)?;
            print_json(&serde_json::json!({
                "tweets_in": corpus.tweets.len(),
                "tweets_kept": run.kept.len(),
                "lines_skipped": corpus.skipped,
                "keyword_history": run.history,
                "final_dynamic": run.final_list.dynamic(),
            }))
        }
        Command::Preprocess(a) => {
            let corpus = load_records(input(&a.input)?, false)?;
            let stopwords = match &a.stopwords {
                Some(p) => StopWords::load(input(p)?)?,
                None => StopWords::english(),
            };
            let filter = SpamFilter {
                hashtag_cutoff: a.hashtag_cutoff,
                similarity_cutoff: a.sim_cutoff,
                stopwords,
                exec: ctx.exec,
            };
            let result = filter.apply(&corpus.timelines());
            let (_, w) = ctx.create(a.verdicts, "spam_verdicts.csv")?;
            write_verdicts_csv(w, &result.verdicts)?;
            let tweets: Vec<_> = result.kept.values().flatten().cloned().collect();
            let users: Vec<_> = corpus.users.iter().filter(|u| result.kept.contains_key(&u.user_id)).cloned().collect();
            write_records(ctx.out_path(a.out, "preprocessed.jsonl")?, &tweets, &users)?;
            print_json(&serde_json::json!({
                "users": result.verdicts.len(),
                "flagged": result.verdicts.iter().filter(|v| v.is_spam).count(),
                "kept": result.kept.len(),
            }))
        }
        Command::Sessions(SessionsCmd::Build {
            input: path,
            t_l_hours,
            min_tweets,
            out,
        }) => {
            let corpus = load_records(input(&path)?, false)?;
            let users = filter_low_activity(&corpus.timelines(), min_tweets, (i64::MIN, i64::MAX));
            let gap = (t_l_hours * 3600.0).round() as i64;
            let (_, mut w) = ctx.create(out, "batches.jsonl")?;
            let (mut n_sessions, mut n_batches) = (0, 0);
            for tl in users.values() {
                let sessions = build_sessions(tl, gap)?;
                n_sessions += sessions.len();
                for b in make_batches(&sessions) {
                    n_batches += 1;
                    serde_json::to_writer(&mut w, &BatchRecord::from(&b))?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            print_json(&serde_json::json!({ "users": users.len(), "sessions": n_sessions, "batches": n_batches }))
        }
        Command::Sessions(SessionsCmd::Aggregate { annotations, batches, out }) => {
            let ann = read_annotations(open(&annotations)?)?;
            let aggregated = aggregate_all(&ann)?;
            let owner: BTreeMap<String, String> = match batches {
                Some(p) => {
                    let text = fs::read_to_string(input(&p)?)?;
                    text.lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(|l| serde_json::from_str::<BatchRecord>(l).map(|b| (b.batch_id, b.user_id)))
                        .collect::<Result<_, _>>()?
                }
                None => aggregated
                    .iter()
                    .map(|a| (a.batch_id.clone(), a.batch_id.split(':').next().unwrap_or("").to_string()))
                    .collect(),
            };
            let labels = user_labels(&aggregated, &owner);
            let (_, mut w) = ctx.create(out, "user_labels.csv")?;
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
            print_json(&serde_json::json!({
                "batches": aggregated.len(),
                "unresolved_batches": aggregated.iter().filter(|a| a.label.is_none()).count(),
                "users": labels.len(),
                "fleiss_kappa": kappa,
                "control_accuracy": control_accuracy(&ann),
            }))
        }
        Command::Features(FeaturesCmd::Extract {
            input: path,
            lexicons,
            embeddings,
            exclude,
            edges,
            labels,
            stopwords,
            t_l_hours,
            now,
            out,
        }) => {
            let corpus = load_records(input(&path)?, false)?;
            let mut lex = LexiconSet::load_dir(input(&lexicons)?)?;
            if let Some(p) = embeddings {
                lex = lex.with_embeddings(Embeddings::load(input(&p)?)?);
            }
            let stop = match &stopwords {
                Some(p) => StopWords::load(input(p)?)?,
                None => StopWords::english(),
            };
            let exclusions = Exclusions::parse(&exclude)?;
            let graph = match &edges {
                Some(p) => {
                    let g = SocialGraph::from_edges(&read_edge_list(open(p)?)?);
                    let a = analyze(&g, twabuse::graph::DEFAULT_TOL, twabuse::graph::DEFAULT_MAX_ITER)?;
                    Some((g, a))
                }
                None => None,
            };
            let label_map = labels.as_deref().map(read_label_map).transpose()?;
            let mut timelines = corpus.timelines();
            if let Some(l) = &label_map {
                timelines.retain(|u, _| l.contains_key(u));
            }
            let latest = corpus
                .tweets
                .iter()
                .map(|t| t.timestamp)
                .chain(corpus.users.iter().map(|u| u.created_at))
                .max()
                .unwrap_or(0);
            let inputs = FeatureInputs {
                lexicons: &lex,
                stopwords: &stop,
                session_gap_secs: (t_l_hours * 3600.0).round() as i64,
                now: now.unwrap_or(latest),
                graph: graph.as_ref().map(|(g, a)| (g, a)),
                exclusions: &exclusions,
            };
            let vectors = extract_features(&timelines, &corpus.profiles(), &inputs, ctx.exec).map_err(|e| anyhow::anyhow!(e))?;
            let (_, mut w) = ctx.create(out, "features.csv")?;
            match &label_map {
                Some(l) => {
                    let ls: Vec<Label> = vectors.iter().map(|v| l[&v.user_id]).collect();
                    Dataset::from_feature_vectors(&vectors, &ls)?.write_csv(&mut w)?;
                }
                None => {
                    if let Some(first) = vectors.first() {
                        let names: Vec<String> = first.columns().into_iter().map(|(n, _)| n).collect();
                        writeln!(w, "id,{}", names.join(","))?;
                    }
                    for v in &vectors {
                        let vals: Vec<String> = v.columns().into_iter().map(|(_, x)| x.to_string()).collect();
                        writeln!(w, "{},{}", v.user_id, vals.join(","))?;
                    }
                }
            }
            w.flush()?;
            print_json(&serde_json::json!({
                "users": vectors.len(),
                "columns": vectors.first().map_or(0, |v| v.columns().len()),
            }))
        }
        Command::Graph(GraphCmd::Analyze { edges, tol, max_iter, out }) => {
            let g = SocialGraph::from_edges(&read_edge_list(open(&edges)?)?);
            let a = analyze(&g, tol, max_iter)?;
            let (_, w) = ctx.create(out, "graph_scores.csv")?;
            write_scores_csv(w, &a.scores)?;
            print_json(&serde_json::json!({
                "nodes": g.node_count(),
                "edges": g.edge_count(),
                "communities": a.partition.community_count(),
                "modularity": a.partition.modularity,
            }))
        }
        Command::Stats(StatsCmd::Ks { a, b, alpha }) => {
            print_json(&ks_two_sample(&read_sample(&a)?, &read_sample(&b)?, alpha)?)
        }
        Command::Stats(StatsCmd::Kappa { ratings }) => {
            let text = fs::read_to_string(input(&ratings)?)?;
            let mut rows = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let parsed: Result<Vec<u64>, _> = line.split(',').map(|c| c.trim().parse::<u64>()).collect();
                match parsed {
                    Ok(r) => rows.push(r),
                    Err(_) if i == 0 => {}
                    Err(e) => bail!("{}:{}: {e}", ratings.display(), i + 1),
                }
            }
            print_json(&fleiss_kappa(&rows)?)
        }
        Command::Topics(TopicsCmd::Fit {
            input: path,
            k,
            batch,
            kappa,
            tau0,
            epochs,
            top,
        }) => {
            let docs = read_docs(open(&path)?)?;
            let cfg = LdaConfig {
                n_topics: k,
                batch_size: batch,
                kappa,
                tau0,
                epochs,
                seed: ctx.seed,
                ..LdaConfig::default()
            };
            let model = fit_lda(&docs, &cfg)?;
            model.write_topic_word_csv(ctx.create(None, "topic_word.csv")?.1)?;
            model.write_doc_topic_csv(ctx.create(None, "doc_topic.csv")?.1)?;
            let (_, mut w) = ctx.create(None, "vocabulary.txt")?;
            model.write_vocabulary(&mut w)?;
            w.flush()?;
            let tops = top_words(&model, top);
            let (_, mut w) = ctx.create(None, "top_words.csv")?;
            writeln!(w, "topic,rank,word,probability")?;
            for (t, words) in tops.iter().enumerate() {
                for (r, (word, p)) in words.iter().enumerate() {
                    writeln!(w, "{t},{},{word},{p}", r + 1)?;
                }
            }
            w.flush()?;
            print_json(&serde_json::json!({
                "documents": docs.len(),
                "vocabulary": model.vocabulary.len(),
                "perplexity": model.perplexity,
                "top_words": tops.iter().map(|ws| ws.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }))
        }
        Command::Ml(MlCmd::Run {
            data,
            setup,
            learner,
            repeats,
            folds,
            trees,
            boost_rounds,
            out,
        }) => {
            let setup: Setup = setup.parse()?;
            let kind: LearnerKind = learner.parse()?;
            let raw: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
            let ds = Dataset::read_csv(open(&data)?, Some(&raw))?;
            let spec = LearnerSpec {
                kind,
                forest: RfParams {
                    n_trees: trees,
                    exec: ctx.exec,
                    ..RfParams::default()
                },
                boost_rounds,
            };
            let params = CvParams {
                repeats,
                folds,
                seed: ctx.seed,
                exec: ctx.exec,
            };
            let report = run_setup(&ds, setup, &spec, &params)?;
            let (path, mut w) = ctx.create(out, &format!("{setup}_{kind}.json"))?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            fs::write(path.with_extension("txt"), report.render_text())?;
            emit(&report.render_text())?;
            Ok(())
        }
        Command::Status(StatusCmd::Fetch {
            provider,
            input: path,
            mock,
            url,
            timeout_secs,
            max_in_flight,
            snapshot,
            out,
        }) => {
            let ids = read_user_ids(open(&path)?)?;
            let provider: Box<dyn StatusProvider> = match provider.as_str() {
                "mock" => {
                    let Some(m) = mock else { bail!("--provider mock needs --mock <csv>") };
                    Box::new(MockProvider::read(open(&m)?)?)
                }
                _ => {
                    let Some(u) = url else { bail!("--provider live needs --url <base>") };
                    Box::new(LiveProvider::new(&u, Duration::from_secs(timeout_secs)))
                }
            };
            let statuses = fetch_statuses(provider.as_ref(), &ids, &snapshot, max_in_flight)?;
            let (_, w) = ctx.create(out, "statuses.csv")?;
            write_statuses(w, &statuses)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for s in &statuses {
                *counts.entry(s.status.as_str()).or_default() += 1;
            }
            print_json(&counts)
        }
        Command::Status(StatusCmd::Compare { snapshots, labels, out }) => {
            let snaps = snapshots
                .iter()
                .map(|p| Ok(read_statuses(open(p)?)?))
                .collect::<Result<Vec<_>>>()?;
            let groups = read_groups(open(&labels)?)?;
            let diff = snapshot_compare(&snaps, &groups)?;
            let (path, mut w) = ctx.create(out, "status_compare.json")?;
            serde_json::to_writer_pretty(&mut w, &diff)?;
            writeln!(w)?;
            w.flush()?;
            fs::write(path.with_extension("txt"), diff.render_text())?;
            emit(&diff.render_text())?;
            Ok(())
        }
        Command::Synth(SynthCmd::Generate { counts }) => {
            let mut cfg = SynthConfig {
                seed: ctx.seed,
                ..SynthConfig::default()
            };
            if let Some(c) = counts {
                cfg.class_counts = parse_counts(&c)?;
            }
            let data = generate(&cfg)?;
            data.write_dir(&ctx.out_dir)?;
            print_json(&serde_json::json!({
                "users": data.users.len(),
                "tweets": data.tweets.len(),
                "edges": data.edges.len(),
                "annotations": data.annotations.len(),
                "class_counts": data.class_counts().iter().map(|(l, c)| (l.as_str(), *c)).collect::<BTreeMap<_, _>>(),
            }))
        }
        Command::Pipeline => {
            let Some(path) = cli.config else {
                bail!(PipelineError::Config("pipeline needs --config <path>".into()))
            };
            let mut cfg = PipelineConfig::load(&path)?;
            if let Some(d) = cli.out_dir {
                cfg.output.dir = d;
            }
            if let Some(s) = cli.seed {
                cfg.params.seed = s;
            }
            if cli.sequential {
                cfg.params.parallel = false;
            }
            let report = run_pipeline(&cfg)?;
            emit(&report.render_text())?;
            io::stdout().flush()?;
            Ok(())
        }
    }
}
