//! Louvain community detection on the undirected view.
//!
//! Local moving visits nodes in ascending index order and only moves a node on a
//! strictly positive gain, preferring the lowest community id among equal gains.
//! That makes the result a pure function of the graph.

use super::SocialGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Community id per node; ids are numbered by first appearance in node order.
    pub community: Vec<usize>,
    pub modularity: f64,
    /// Modularity after each aggregation level, starting with the singleton partition.
    pub history: Vec<f64>,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.community.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Weighted symmetric graph; `adj[i]` holds `(j, w)` with `j != i`, `self_w[i]` is
/// the diagonal entry `A_ii` (twice the internal edge weight of an aggregated node).
#[derive(Debug, Clone)]
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
}

impl Level {
    fn from_graph(g: &SocialGraph) -> Self {
        let adj = (0..g.node_count())
            .map(|u| g.neighbors(u).iter().map(|&v| (v, 1.0)).collect())
            .collect();
        Level {
            adj,
            self_w: vec![0.0; g.node_count()],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.self_w[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    fn modularity(&self, comm: &[usize]) -> f64 {
        let n = self.len();
        let degrees: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let m2: f64 = degrees.iter().sum();
        if m2 == 0.0 {
            return 0.0;
        }
        let k = comm.iter().copied().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for i in 0..n {
            tot[comm[i]] += degrees[i];
            inside[comm[i]] += self.self_w[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == comm[i] {
                    inside[comm[i]] += w;
                }
            }
        }
        inside
            .iter()
            .zip(&tot)
            .map(|(&sin, &t)| sin / m2 - (t / m2).powi(2))
            .sum()
    }

    /// Repeated local-moving passes. Returns the community per node and whether anything moved.
    fn local_moves(&self) -> (Vec<usize>, bool) {
        let n = self.len();
        let degrees: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let m2: f64 = degrees.iter().sum();
        let mut comm: Vec<usize> = (0..n).collect();
        if m2 == 0.0 {
            return (comm, false);
        }
        let mut tot = degrees.clone();
        let mut moved_any = false;
        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        loop {
            let mut moved = false;
            for i in 0..n {
                let own = comm[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if links[c] == 0.0 {
                        touched.push(c);
                    }
                    links[c] += w;
                }
                tot[own] -= degrees[i];
                let gain = |c: usize, l: f64| l - tot[c] * degrees[i] / m2;
                let mut best = own;
                let mut best_gain = gain(own, links[own]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, links[c]);
                    if g > best_gain + 1e-12 {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += degrees[i];
                if best != own {
                    comm[i] = best;
                    moved = true;
                    moved_any = true;
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (renumber(&comm), moved_any)
    }

    fn aggregate(&self, comm: &[usize]) -> Level {
        let k = comm.iter().copied().max().map_or(0, |m| m + 1);
        let mut self_w = vec![0.0; k];
        let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for i in 0..self.len() {
            self_w[comm[i]] += self.self_w[i];
            for &(j, w) in &self.adj[i] {
                let (a, b) = (comm[i], comm[j]);
                if a == b {
                    self_w[a] += w;
                } else {
                    *dense[a].entry(b).or_default() += w;
                }
            }
        }
        Level {
            adj: dense.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_w,
        }
    }
}

fn renumber(comm: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    comm.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Newman modularity of `community` on the undirected view of `g`.
pub fn modularity(g: &SocialGraph, community: &[usize]) -> f64 {
    Level::from_graph(g).modularity(&renumber(community))
}

pub fn louvain(g: &SocialGraph) -> Partition {
    let mut level = Level::from_graph(g);
    let mut membership: Vec<usize> = (0..g.node_count()).collect();
    let mut history = vec![level.modularity(&membership)];
    loop {
        let (comm, moved) = level.local_moves();
        if !moved {
            break;
        }
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        level = level.aggregate(&comm);
        history.push(level.modularity(&(0..level.len()).collect::<Vec<_>>()));
    }
    let community = renumber(&membership);
    Partition {
        modularity: modularity(g, &community),
        community,
        history,
    }
}
