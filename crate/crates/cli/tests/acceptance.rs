//! Acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twabuse::corpus::Tweet;
use twabuse::features::Exclusions;
use twabuse::graph::{analyze, build_graph, eigenvector_centrality, hits, louvain, SocialGraph};
use twabuse::ml::{auc_one_vs_rest, repeated_cv, CvParams, Dataset, EvalReport, RfParams, Setup};
use twabuse::pipeline::{extract_features, FeatureInputs};
use twabuse::preprocess::{clean_text, levenshtein, SpamFilter, StopWords};
use twabuse::sessions::{build_sessions, make_batches};
use twabuse::stats::{fleiss_kappa, ks_critical_value, ks_statistic};
use twabuse::status::{fetch_statuses, read_groups, snapshot_compare, status_distribution, MockProvider};
use twabuse::synth::{generate, parse_counts, SynthConfig, SynthData};
use twabuse::topics::{fit_lda, top_words, LdaConfig};
use twabuse::{Execution, Label};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1. Levenshtein

fn lev_oracle(a: &[u8], b: &[u8]) -> usize {
    match (a.split_last(), b.split_last()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = lev_oracle(ra, rb) + usize::from(x != y);
            sub.min(lev_oracle(ra, b) + 1).min(lev_oracle(a, rb) + 1)
        }
    }
}

fn all_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| [format!("{s}a"), format!("{s}b")])
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn levenshtein_oracle() -> Outcome {
    let start = Instant::now();
    let strings = all_strings(6);
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    for a in &strings {
        for b in &strings {
            pairs += 1;
            if levenshtein(a, b) != lev_oracle(a.as_bytes(), b.as_bytes()) {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 10.0,
        format!("{pairs} pairs, {mismatches} mismatches, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 2. KS

fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

fn ks_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let m = rng.random_range(1..=50);
        // a coarse grid forces ties within and across samples
        let mut sample = |k: usize| -> Vec<f64> { (0..k).map(|_| f64::from(rng.random_range(0..20u8)) / 4.0).collect() };
        let (a, b) = (sample(n), sample(m));
        if ks_statistic(&a, &b).unwrap() != ks_brute(&a, &b) {
            mismatches += 1;
        }
    }
    let crit = ks_critical_value(100, 100, 0.01);
    check(
        mismatches == 0 && (crit - 0.21460).abs() <= 1e-4,
        format!("1000 pairs, {mismatches} mismatches; c(0.01, 100, 100) = {crit:.5}"),
    )
}

// ---------------------------------------------------------------- 3. Fleiss

fn kappa_checks() -> Outcome {
    let full = fleiss_kappa(&[vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 5], vec![5, 0, 0]]).unwrap().kappa;
    let hand = fleiss_kappa(&[vec![3, 2], vec![2, 3]]).unwrap().kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<u64>> = (0..10_000)
        .map(|_| {
            let mut r = vec![0u64; 4];
            for _ in 0..5 {
                r[rng.random_range(0..4)] += 1;
            }
            r
        })
        .collect();
    let random = fleiss_kappa(&rows).unwrap().kappa;
    check(
        full == 1.0 && hand == -0.2 && random.abs() < 0.05,
        format!("complete {full}, hand 2x2 {hand}, uniform random {random:.4}"),
    )
}

// ---------------------------------------------------------------- 4. Graph

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..m.len()).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

fn power(m: &[Vec<f64>], mut x: Vec<f64>) -> Vec<f64> {
    normalize(&mut x);
    for _ in 0..1_000_000 {
        let mut next = mat_vec(m, &x);
        normalize(&mut next);
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// Dense adjacency in node-index order: `a[u][v] = 1` when u follows v.
fn dense(g: &SocialGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (u, row) in a.iter_mut().enumerate() {
        for &v in g.friends(u) {
            row[v] = 1.0;
        }
    }
    a
}

fn random_graph(rng: &mut ChaCha8Rng) -> SocialGraph {
    let n = rng.random_range(2..=100);
    let p = rng.random_range(0.02..0.2);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                edges.push((format!("n{u:03}"), format!("n{v:03}")));
            }
        }
    }
    let nodes: Vec<String> = (0..n).map(|i| format!("n{i:03}")).collect();
    SocialGraph::with_nodes(nodes, &edges)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn centrality_checks() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let g = random_graph(&mut rng);
        let n = g.node_count();
        let a = dense(&g);
        let at = transpose(&a);
        let ata: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| (0..n).map(|k| at[r][k] * a[k][c]).sum()).collect()).collect();
        let auth = power(&ata, mat_vec(&at, &vec![1.0; n]));
        let mut hub = mat_vec(&a, &auth);
        normalize(&mut hub);
        let mut shifted: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| a[r][c].max(a[c][r])).collect()).collect();
        for (r, row) in shifted.iter_mut().enumerate() {
            row[r] += 1.0;
        }
        let eig = power(&shifted, vec![1.0; n]);
        let h = hits(&g, 1e-13, 1_000_000).map_err(|e| format!("graph {i}: {e}"))?;
        let e = eigenvector_centrality(&g, 1e-13, 1_000_000).map_err(|e| format!("graph {i}: {e}"))?;
        worst = worst
            .max(max_diff(&h.authority, &auth))
            .max(max_diff(&h.hub, &hub))
            .max(max_diff(&e, &eig));
    }
    Ok(worst)
}

fn modularity_oracle(a: &[Vec<f64>], comm: &[usize]) -> f64 {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if comm[i] == comm[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `n` elements as a restricted growth string.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            rec(i + 1, max.max(c), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

fn louvain_check() -> Result<String, String> {
    let mut edges = Vec::new();
    for side in ["a", "b"] {
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((format!("{side}{i}"), format!("{side}{j}")));
            }
        }
    }
    edges.push(("a3".to_string(), "b0".to_string()));
    let g = build_graph(&edges);
    let p = louvain(&g);
    let a: Vec<Vec<f64>> = {
        let d = dense(&g);
        (0..8).map(|r| (0..8).map(|c| d[r][c].max(d[c][r])).collect()).collect()
    };
    let parts = set_partitions(8);
    let best = parts.iter().map(|c| modularity_oracle(&a, c)).fold(f64::NEG_INFINITY, f64::max);
    let cliques = p.community[..4].iter().all(|&c| c == p.community[0])
        && p.community[4..].iter().all(|&c| c == p.community[4])
        && p.community[0] != p.community[4];
    let detail = format!(
        "{} partitions searched, optimum {best:.6}, louvain {:.6}, cliques recovered: {cliques}",
        parts.len(),
        p.modularity
    );
    if cliques && (p.modularity - best).abs() < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn graph_checks() -> Outcome {
    let worst = centrality_checks()?;
    let lv = louvain_check()?;
    check(worst <= 1e-6, format!("50 random graphs, max deviation {worst:.2e}; {lv}"))
}

// ---------------------------------------------------------------- 5. Spam filter

fn lev_dp(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = (d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]))
                .min(d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn tweet(user: &str, n: usize, ts: i64, text: &str, hashtags: usize) -> Tweet {
    Tweet {
        id: format!("{user}-{n:04}"),
        user_id: user.to_string(),
        timestamp: ts,
        text: text.to_string(),
        hashtags: (0..hashtags).map(|i| format!("tag{i}")).collect(),
        mentions: Vec::new(),
        urls: 0,
        is_retweet: false,
        is_reply: false,
    }
}

fn spam_checks() -> Outcome {
    let data = generate(&SynthConfig {
        seed: 5,
        class_counts: parse_counts("bully=20,aggressor=20,spammer=150,normal=150").unwrap(),
        ..SynthConfig::default()
    })
    .unwrap();
    let mut timelines = data.timelines();
    // boundary cases: exactly at each cutoff is kept, just above is removed
    let planted: [(&str, Vec<(&str, usize)>); 4] = [
        ("zz_tags_at_cutoff", vec![("one thing", 5), ("another thing", 5)]),
        ("zz_tags_above", vec![("one thing", 5), ("another thing", 6)]),
        ("zz_copies", vec![("buy cheap watches now", 0); 3]),
        ("zz_distinct", vec![("morning coffee", 0), ("late game tonight", 0)]),
    ];
    for (user, rows) in planted {
        let tl = rows.iter().enumerate().map(|(i, (text, h))| tweet(user, i, 1_000 + i as i64, text, *h)).collect();
        timelines.insert(user.to_string(), tl);
    }
    let filter = SpamFilter::default();
    let out = filter.apply(&timelines);
    let stop = StopWords::english();
    let mut wrong = Vec::new();
    for v in &out.verdicts {
        let tl = &timelines[&v.user_id];
        let avg_tags = tl.iter().map(|t| t.hashtags.len()).sum::<usize>() as f64 / tl.len() as f64;
        let docs: Vec<Vec<char>> = tl.iter().map(|t| clean_text(&t.text, &stop).join(" ").chars().collect()).collect();
        let mut sims = Vec::new();
        for i in 0..docs.len() {
            for j in i + 1..docs.len() {
                let longest = docs[i].len().max(docs[j].len());
                sims.push(if longest == 0 { 1.0 } else { 1.0 - lev_dp(&docs[i], &docs[j]) as f64 / longest as f64 });
            }
        }
        let sim = if sims.is_empty() { 0.0 } else { sims.iter().sum::<f64>() / sims.len() as f64 };
        let expected = avg_tags > 5.0 || sim > 0.8;
        if expected != v.is_spam || (out.kept.contains_key(&v.user_id) == expected) {
            wrong.push(v.user_id.clone());
        }
    }
    let removed = out.verdicts.iter().filter(|v| v.is_spam).count();
    check(
        wrong.is_empty() && out.verdicts.len() == timelines.len(),
        format!("{} users, {removed} removed, {} disagreements with the oracle", out.verdicts.len(), wrong.len()),
    )
}

// ---------------------------------------------------------------- 6. Sessions

fn session_checks() -> Outcome {
    const GAP: i64 = 8 * 3600;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    let mut sessions_seen = 0;
    let mut batches_seen = 0;
    for u in 0..1000 {
        let user = format!("u{u}");
        let n = rng.random_range(1..=120);
        let mut ts = 1_500_000_000i64;
        let mut tl = Vec::with_capacity(n);
        for i in 0..n {
            tl.push(tweet(&user, i, ts, "x", 0));
            ts += match rng.random_range(0..10) {
                0 => GAP,
                1 => GAP + 1,
                2..=3 => rng.random_range(GAP..10 * GAP),
                _ => rng.random_range(0..GAP),
            };
        }
        let sessions = build_sessions(&tl, GAP).unwrap();
        sessions_seen += sessions.len();
        let flat: Vec<&Tweet> = sessions.iter().flat_map(|s| &s.tweets).collect();
        let mut ok = flat.len() == tl.len() && flat.iter().zip(&tl).all(|(a, b)| *a == b);
        for s in &sessions {
            ok &= s.tweets.windows(2).all(|w| w[1].timestamp - w[0].timestamp <= GAP);
        }
        for w in sessions.windows(2) {
            ok &= w[1].tweets[0].timestamp - w[0].tweets.last().unwrap().timestamp > GAP;
        }
        let batches = make_batches(&sessions);
        batches_seen += batches.len();
        ok &= batches.iter().all(|b| (5..=10).contains(&b.tweets.len()));
        for s in sessions.iter().filter(|s| s.len() >= 5) {
            let joined: Vec<&Tweet> = batches.iter().filter(|b| b.session_index == s.index).flat_map(|b| &b.tweets).collect();
            ok &= joined.len() == s.len() && joined.iter().zip(&s.tweets).all(|(a, b)| *a == b);
        }
        failures += usize::from(!ok);
    }
    check(
        failures == 0,
        format!("1000 timelines, {sessions_seen} sessions, {batches_seen} batches, {failures} violations"),
    )
}

// ---------------------------------------------------------------- 7. Fixture arithmetic

fn gold_dataset(data: &SynthData) -> Dataset {
    let lex = data.lexicons.clone().with_embeddings(data.embeddings.clone());
    let stop = StopWords::english();
    let timelines = data.timelines();
    let profiles = data.users.iter().map(|u| (u.user_id.clone(), u.clone())).collect();
    let g = build_graph(&data.edges);
    let analysis = analyze(&g, 1e-8, 1000).unwrap();
    let now = data.tweets.iter().map(|t| t.timestamp).max().unwrap();
    let exclusions = Exclusions::default_list();
    let inputs = FeatureInputs {
        lexicons: &lex,
        stopwords: &stop,
        session_gap_secs: 8 * 3600,
        now,
        graph: Some((&g, &analysis)),
        exclusions: &exclusions,
    };
    let vectors = extract_features(&timelines, &profiles, &inputs, Execution::default()).unwrap();
    let labels: Vec<Label> = vectors.iter().map(|v| data.gold[&v.user_id]).collect();
    Dataset::from_feature_vectors(&vectors, &labels).unwrap()
}

fn fixture_checks(data: &SynthData, ds: &Dataset) -> Outcome {
    let counts: Vec<usize> = data.class_counts().values().copied().collect();
    let no_spam = Setup::ThreeNoSpam.apply(ds).map_err(|e| e.to_string())?;
    let offensive = Setup::ThreeOffensive.apply(ds).map_err(|e| e.to_string())?;
    let n_offensive = offensive.class_counts()[0];
    check(
        counts == [58, 43, 415, 787] && no_spam.len() == 888 && n_offensive == 101,
        format!("classes {counts:?}, three_no_spam rows {}, offensive {n_offensive}", no_spam.len()),
    )
}

// ---------------------------------------------------------------- 8. Classifier

fn cv(ds: &Dataset, exec: Execution) -> Result<EvalReport, String> {
    let forest = RfParams {
        exec,
        ..RfParams::default()
    };
    let params = CvParams {
        repeats: 10,
        folds: 10,
        seed: 42,
        exec,
    };
    repeated_cv(ds, &forest, &params).map_err(|e| e.to_string())
}

fn classifier_checks(ds: &Dataset, reports: &mut Vec<EvalReport>) -> Outcome {
    let start = Instant::now();
    let real = cv(ds, Execution::Parallel)?;
    let again = cv(ds, Execution::Sequential)?;
    let mut shuffled = ds.clone();
    shuffled.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let noise = cv(&shuffled, Execution::default())?;
    let majority = *ds.class_counts().iter().max().unwrap() as f64 / ds.len() as f64;
    let deterministic = real == again;
    let f1 = real.weighted.f1;
    let acc = noise.weighted.accuracy;
    let secs = start.elapsed().as_secs_f64();
    reports.extend([real, noise]);
    check(
        f1 >= 0.90 && (acc - majority).abs() <= 0.05 && deterministic,
        format!(
            "weighted F1 {f1:.4}; shuffled accuracy {acc:.4} vs majority {majority:.4}; deterministic: {deterministic}; {secs:.1}s"
        ),
    )
}

// ---------------------------------------------------------------- 9. Metrics

fn metric_checks(reports: &[EvalReport]) -> Outcome {
    let y: Vec<usize> = (0..40).map(|i| i % 3).collect();
    let mut worst_perfect: f64 = 1.0;
    let mut worst_reversed: f64 = 0.0;
    for c in 0..3 {
        let perfect: Vec<f64> = y.iter().enumerate().map(|(i, &l)| if l == c { 10.0 + i as f64 } else { i as f64 / 100.0 }).collect();
        let reversed: Vec<f64> = perfect.iter().map(|s| -s).collect();
        worst_perfect = worst_perfect.min(auc_one_vs_rest(&y, &perfect, c));
        worst_reversed = worst_reversed.max(auc_one_vs_rest(&y, &reversed, c));
    }
    let rows_ok = reports.iter().all(|r| {
        r.confusion
            .iter()
            .zip(&r.per_class)
            .all(|(row, c)| row.iter().sum::<u64>() as usize == c.support)
            && r.per_class.iter().map(|c| c.support).sum::<usize>() == r.n_instances
    });
    check(
        worst_perfect == 1.0 && worst_reversed == 0.0 && rows_ok && !reports.is_empty(),
        format!(
            "perfect AUC {worst_perfect}, reversed AUC {worst_reversed}, confusion rows match supports in {} reports: {rows_ok}",
            reports.len()
        ),
    )
}

// ---------------------------------------------------------------- 10. Status

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/status")
}

fn mock_snapshot(file: &str, users: &[String]) -> Result<Vec<twabuse::status::AccountStatus>, String> {
    let provider = MockProvider::read(fs::File::open(fixtures().join(format!("{file}.csv"))).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    fetch_statuses(&provider, users, file, 8).map_err(|e| e.to_string())
}

fn ids_of(file: &str) -> Vec<String> {
    let text = fs::read_to_string(fixtures().join(format!("{file}.csv"))).unwrap();
    text.lines().skip(1).filter_map(|l| l.split(',').next()).map(str::to_string).collect()
}

fn status_checks() -> Outcome {
    let baseline_ids = ids_of("baseline");
    let baseline = mock_snapshot("baseline", &baseline_ids)?;
    let groups: BTreeMap<String, String> = baseline_ids.iter().map(|u| (u.clone(), "baseline".to_string())).collect();
    let row = status_distribution(&baseline, &groups).map_err(|e| e.to_string())?[0].1;
    let labels = read_groups(fs::File::open(fixtures().join("labels.csv")).unwrap()).map_err(|e| e.to_string())?;
    let users: Vec<String> = labels.keys().cloned().collect();
    let snaps = ["nov2016", "dec2017", "sept2018"]
        .iter()
        .map(|s| mock_snapshot(s, &users))
        .collect::<Result<Vec<_>, _>>()?;
    let diff = snapshot_compare(&snaps, &labels).map_err(|e| e.to_string())?;
    let delta = diff.delta("nov2016", "sept2018").map_err(|e| e.to_string())?;
    let bully = delta.rows.iter().find(|r| r.0 == "bully").map(|r| r.3).unwrap_or(f64::NAN);
    let ok = (row.active - 65.71).abs() <= 0.01
        && (row.deleted - 25.86).abs() <= 0.01
        && (row.suspended - 8.43).abs() <= 0.01
        && (bully - 55.17).abs() <= 0.01;
    check(
        ok,
        format!(
            "baseline {:.2}/{:.2}/{:.2}; bully suspended nov2016 -> sept2018 {bully:+.2}",
            row.active, row.deleted, row.suspended
        ),
    )
}

// ---------------------------------------------------------------- 11. LDA

fn lda_checks() -> Outcome {
    let start = Instant::now();
    let vocab: [Vec<String>; 2] = [
        (0..25).map(|i| format!("sport{i}")).collect(),
        (0..25).map(|i| format!("cook{i}")).collect(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs: Vec<Vec<String>> = (0..200)
        .map(|d| {
            let main = d % 2;
            (0..40)
                .map(|_| {
                    let t = if rng.random_bool(0.9) { main } else { 1 - main };
                    // skewed word frequencies inside each topic
                    let w = (rng.random_range(0.0f64..1.0).powi(2) * 25.0) as usize;
                    vocab[t][w.min(24)].clone()
                })
                .collect()
        })
        .collect();
    let cfg = LdaConfig {
        n_topics: 2,
        batch_size: 32,
        epochs: 20,
        seed: 7,
        min_count: 1,
        ..LdaConfig::default()
    };
    let model = fit_lda(&docs, &cfg).map_err(|e| e.to_string())?;
    let purity: Vec<f64> = top_words(&model, 10)
        .iter()
        .map(|words| {
            let sport = words.iter().filter(|(w, _)| w.starts_with("sport")).count();
            sport.max(words.len() - sport) as f64 / words.len() as f64
        })
        .collect();
    let rows = model.topic_word.iter().chain(&model.doc_topic);
    let worst_sum = rows.map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let topics_differ = {
        let lead: BTreeSet<bool> = top_words(&model, 1).iter().map(|w| w[0].0.starts_with("sport")).collect();
        lead.len() == 2
    };
    let secs = start.elapsed().as_secs_f64();
    check(
        purity.iter().all(|&p| p >= 0.8) && topics_differ && worst_sum <= 1e-9 && secs < 30.0,
        format!("purity {purity:?}, distinct topics: {topics_differ}, max row-sum error {worst_sum:.1e}, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 12. End to end

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn twabuse(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_twabuse"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundle = dir.path().join("bundle");
    let bundle_s = bundle.display().to_string();
    twabuse(&["--out-dir", &bundle_s, "synth", "generate"])?;
    // full stage list, lighter forest and cross-validation than the defaults
    let config = dir.path().join("pipeline.toml");
    fs::write(
        &config,
        format!(
            "[input]\nbundle = {bundle_s:?}\n\n[params]\nn_trees = 20\ncv_repeats = 2\ncv_folds = 5\nlearners = [\"rf\", \"nb\"]\n\n[params.lda]\nepochs = 3\n"
        ),
    )
    .map_err(|e| e.to_string())?;
    let config_s = config.display().to_string();
    let runs = ["run1", "run2"].map(|r| dir.path().join(r));
    for r in &runs {
        twabuse(&["--config", &config_s, "--out-dir", &r.display().to_string(), "pipeline"])?;
    }
    let (a, b) = (read_tree(&runs[0]), read_tree(&runs[1]));
    let differing: Vec<&String> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    check(
        a.len() == b.len() && differing.is_empty() && !a.is_empty(),
        format!("exit 0 twice, {} files, {} differ", a.len(), differing.len()),
    )
}

fn control_accuracy_check() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/control_annotations.csv");
    let ann = twabuse::sessions::read_annotations(fs::File::open(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let acc = twabuse::sessions::control_accuracy(&ann);
    check((acc.overall - 0.67).abs() <= 0.005, format!("overall {:.4}", acc.overall))
}

fn main() -> ExitCode {
    let suite = Instant::now();
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let r = f();
        results.push((name, r, t.elapsed()));
        let (n, (name, r, d)) = (results.len(), results.last().unwrap());
        match r {
            Ok(detail) => println!("PASS [{n:>2}] {name}: {detail} ({:.1}s)", d.as_secs_f64()),
            Err(detail) => println!("FAIL [{n:>2}] {name}: {detail} ({:.1}s)", d.as_secs_f64()),
        }
    };
    run("levenshtein matches recursive oracle", &mut levenshtein_oracle);
    run("ks statistic and critical value", &mut ks_checks);
    run("fleiss kappa", &mut kappa_checks);
    run("graph centrality and louvain", &mut graph_checks);
    run("spam filter exactness", &mut spam_checks);
    run("sessionization", &mut session_checks);

    let data = generate(&SynthConfig::default()).expect("default synth");
    let ds = gold_dataset(&data);
    let mut reports = Vec::new();
    run("fixture arithmetic", &mut || fixture_checks(&data, &ds));
    run("classifier sanity", &mut || classifier_checks(&ds, &mut reports));
    run("metrics", &mut || metric_checks(&reports));
    run("status tables", &mut status_checks);
    run("lda planted topics", &mut lda_checks);
    run("pipeline end to end", &mut end_to_end);

    let control = control_accuracy_check();
    match &control {
        Ok(d) => println!("     control-case accuracy fixture: {d}"),
        Err(d) => println!("     control-case accuracy fixture FAILED: {d}"),
    }
    let failed = results.iter().filter(|r| r.1.is_err()).count() + usize::from(control.is_err());
    let secs = suite.elapsed().as_secs_f64();
    println!(
        "acceptance: {} of {} criteria passed in {secs:.1}s",
        results.len() - results.iter().filter(|r| r.1.is_err()).count(),
        results.len()
    );
    if failed == 0 && secs < 300.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
