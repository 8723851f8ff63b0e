//! Directed follower/friend graph and per-user network analytics.
//!
//! An edge `u -> v` means `u` follows `v`: it is one of `u`'s friends and `u` is one
//! of `v`'s followers. Undirected measures (eigenvector, closeness, clustering,
//! communities) run on the same edge set with directions dropped.

mod centrality;
mod louvain;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

pub use centrality::{eigenvector_centrality, hits, Hits};
pub use louvain::{louvain, modularity, Partition};

use crate::features::NetworkFeatures;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("graph has no nodes")]
    Empty,
    #[error("{algorithm} did not converge within {iterations} iterations")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
        /// Last iterate, indexed like the graph's nodes.
        last: Vec<f64>,
    },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    /// Sorted, deduplicated successor lists (friends).
    out_adj: Vec<Vec<usize>>,
    /// Sorted predecessor lists (followers).
    in_adj: Vec<Vec<usize>>,
    /// Sorted neighbor lists of the undirected view.
    und_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl SocialGraph {
    /// Builds a graph from `(follower, followee)` pairs. Nodes are indexed in sorted id
    /// order; duplicate edges collapse and self-loops are dropped.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Self {
        Self::with_nodes(std::iter::empty::<&str>(), edges)
    }

    /// Like [`from_edges`](Self::from_edges) but also registers isolated nodes.
    pub fn with_nodes<I, N, S>(nodes: I, edges: &[(S, S)]) -> Self
    where
        I: IntoIterator<Item = N>,
        N: AsRef<str>,
        S: AsRef<str>,
    {
        let mut names: BTreeSet<String> = nodes.into_iter().map(|n| n.as_ref().to_string()).collect();
        for (a, b) in edges {
            names.insert(a.as_ref().to_string());
            names.insert(b.as_ref().to_string());
        }
        let ids: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let n = ids.len();
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (a, b) in edges {
            let (u, v) = (index[a.as_ref()], index[b.as_ref()]);
            if u != v {
                pairs.insert((u, v));
            }
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut und: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(u, v) in &pairs {
            out_adj[u].push(v);
            in_adj[v].push(u);
            und[u].insert(v);
            und[v].insert(u);
        }
        in_adj.iter_mut().for_each(|l| l.sort_unstable());
        SocialGraph {
            ids,
            index,
            out_adj,
            in_adj,
            und_adj: und.into_iter().map(|s| s.into_iter().collect()).collect(),
            edge_count: pairs.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn node(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn friends(&self, u: usize) -> &[usize] {
        &self.out_adj[u]
    }

    pub fn followers(&self, u: usize) -> &[usize] {
        &self.in_adj[u]
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.und_adj[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_adj[u].binary_search(&v).is_ok()
    }

    /// `(u, v)` pairs of the undirected view with `u < v`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.und_adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    /// `followers / max(friends, 1)`.
    pub fn ratio(&self, u: usize) -> f64 {
        self.in_adj[u].len() as f64 / self.out_adj[u].len().max(1) as f64
    }

    /// Share of `u`'s friends that follow `u` back; 0 without friends.
    pub fn reciprocity(&self, u: usize) -> f64 {
        let friends = &self.out_adj[u];
        if friends.is_empty() {
            return 0.0;
        }
        let back = friends.iter().filter(|&&v| self.has_edge(v, u)).count();
        back as f64 / friends.len() as f64
    }

    /// Harmonic closeness on the undirected view, normalized by `n - 1`.
    pub fn closeness(&self, u: usize) -> f64 {
        let n = self.node_count();
        if n < 2 {
            return 0.0;
        }
        let mut dist = vec![usize::MAX; n];
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        let mut total = 0.0;
        while let Some(x) = queue.pop_front() {
            for &y in &self.und_adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    total += 1.0 / dist[y] as f64;
                    queue.push_back(y);
                }
            }
        }
        total / (n - 1) as f64
    }

    /// Local clustering coefficient on the undirected view; 0 below two neighbors.
    pub fn clustering_coefficient(&self, u: usize) -> f64 {
        let ns = &self.und_adj[u];
        let k = ns.len();
        if k < 2 {
            return 0.0;
        }
        let mut links = 0usize;
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                if self.und_adj[a].binary_search(&b).is_ok() {
                    links += 1;
                }
            }
        }
        links as f64 / (k * (k - 1) / 2) as f64
    }
}

pub fn build_graph<S: AsRef<str>>(edges: &[(S, S)]) -> SocialGraph {
    SocialGraph::from_edges(edges)
}

pub fn reciprocity(g: &SocialGraph, id: &str) -> Result<f64, GraphError> {
    Ok(g.reciprocity(g.node(id)?))
}

pub fn closeness(g: &SocialGraph, id: &str) -> Result<f64, GraphError> {
    Ok(g.closeness(g.node(id)?))
}

pub fn clustering_coefficient(g: &SocialGraph, id: &str) -> Result<f64, GraphError> {
    Ok(g.clustering_coefficient(g.node(id)?))
}

/// A user's follower/friend ratio minus the mean ratio of the users they mention.
pub fn power_difference(user_ratio: f64, mentioned_ratios: &[f64]) -> f64 {
    if mentioned_ratios.is_empty() {
        return 0.0;
    }
    user_ratio - mentioned_ratios.iter().sum::<f64>() / mentioned_ratios.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores {
    pub node: String,
    pub in_degree: usize,
    pub out_degree: usize,
    pub ratio: f64,
    pub reciprocity: f64,
    pub hub: f64,
    pub authority: f64,
    pub eigenvector: f64,
    pub closeness: f64,
    pub clustering: f64,
    pub community: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphAnalysis {
    pub scores: Vec<CentralityScores>,
    pub partition: Partition,
}

impl GraphAnalysis {
    pub fn by_node(&self) -> BTreeMap<&str, &CentralityScores> {
        self.scores.iter().map(|s| (s.node.as_str(), s)).collect()
    }

    /// Network features for one user. `mentioned` lists the ids the user mentioned;
    /// ids not in the graph are ignored. Users absent from the graph get zeros.
    pub fn network_features(&self, g: &SocialGraph, user: &str, mentioned: &[String]) -> NetworkFeatures {
        let Ok(u) = g.node(user) else {
            return NetworkFeatures::default();
        };
        let s = &self.scores[u];
        let ratios: Vec<f64> = mentioned
            .iter()
            .filter_map(|m| g.node(m).ok())
            .map(|v| self.scores[v].ratio)
            .collect();
        NetworkFeatures {
            friends: s.out_degree as f64,
            followers: s.in_degree as f64,
            hub: s.hub,
            ratio: s.ratio,
            authority: s.authority,
            power_difference: power_difference(s.ratio, &ratios),
            clustering: s.clustering,
            reciprocity: s.reciprocity,
            eigenvector: s.eigenvector,
            closeness: s.closeness,
            community: s.community as f64,
        }
    }
}

pub fn analyze(g: &SocialGraph, tol: f64, max_iter: usize) -> Result<GraphAnalysis, GraphError> {
    let h = hits(g, tol, max_iter)?;
    let eig = eigenvector_centrality(g, tol, max_iter)?;
    let partition = louvain(g);
    let scores = (0..g.node_count())
        .map(|u| CentralityScores {
            node: g.ids[u].clone(),
            in_degree: g.in_adj[u].len(),
            out_degree: g.out_adj[u].len(),
            ratio: g.ratio(u),
            reciprocity: g.reciprocity(u),
            hub: h.hub[u],
            authority: h.authority[u],
            eigenvector: eig[u],
            closeness: g.closeness(u),
            clustering: g.clustering_coefficient(u),
            community: partition.community[u],
        })
        .collect();
    Ok(GraphAnalysis { scores, partition })
}

/// `src<TAB>dst` per line; blank lines and `#` comments are skipped.
pub fn read_edge_list(r: impl BufRead) -> Result<Vec<(String, String)>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| GraphError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                out.push((a.to_string(), b.to_string()))
            }
            _ => {
                return Err(GraphError::Parse {
                    line: i + 1,
                    message: "expected 'src<TAB>dst'".into(),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_edge_list(mut w: impl Write, edges: &[(String, String)]) -> io::Result<()> {
    for (a, b) in edges {
        writeln!(w, "{a}\t{b}")?;
    }
    Ok(())
}

pub fn write_scores_csv(w: impl Write, scores: &[CentralityScores]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in scores {
        out.serialize(s)?;
    }
    out.flush()?;
    Ok(())
}
