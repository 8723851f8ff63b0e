use super::{GraphError, SocialGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct Hits {
    pub hub: Vec<f64>,
    pub authority: Vec<f64>,
    pub iterations: usize,
}

/// Scales `v` to unit L2 norm; a zero vector becomes the uniform unit vector.
fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else if !v.is_empty() {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Hub and authority scores by alternating updates from the uniform vector:
/// authority(v) sums the hubs pointing at v, hub(u) sums the authorities u points at,
/// each normalized to unit L2 norm per round.
pub fn hits(g: &SocialGraph, tol: f64, max_iter: usize) -> Result<Hits, GraphError> {
    let n = g.node_count();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let start = 1.0 / (n as f64).sqrt();
    let mut hub = vec![start; n];
    let mut auth = vec![start; n];
    for it in 1..=max_iter {
        let mut next_auth: Vec<f64> = (0..n)
            .map(|v| g.followers(v).iter().map(|&u| hub[u]).sum())
            .collect();
        normalize(&mut next_auth);
        let mut next_hub: Vec<f64> = (0..n)
            .map(|u| g.friends(u).iter().map(|&v| next_auth[v]).sum())
            .collect();
        normalize(&mut next_hub);
        let delta = max_change(&next_auth, &auth).max(max_change(&next_hub, &hub));
        auth = next_auth;
        hub = next_hub;
        if delta < tol {
            return Ok(Hits {
                hub,
                authority: auth,
                iterations: it,
            });
        }
    }
    Err(GraphError::NoConvergence {
        algorithm: "hits",
        iterations: max_iter,
        last: auth,
    })
}

/// Principal eigenvector of the undirected adjacency, by power iteration on `A + I`.
/// The shift leaves the eigenvectors unchanged and keeps bipartite graphs from oscillating.
pub fn eigenvector_centrality(g: &SocialGraph, tol: f64, max_iter: usize) -> Result<Vec<f64>, GraphError> {
    let n = g.node_count();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..max_iter {
        let mut next: Vec<f64> = (0..n)
            .map(|u| x[u] + g.neighbors(u).iter().map(|&v| x[v]).sum::<f64>())
            .collect();
        normalize(&mut next);
        let delta = max_change(&next, &x);
        x = next;
        if delta < tol {
            return Ok(x);
        }
    }
    Err(GraphError::NoConvergence {
        algorithm: "eigenvector",
        iterations: max_iter,
        last: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(&str, &str)]) -> SocialGraph {
        SocialGraph::from_edges(edges)
    }

    #[test]
    fn hits_sink() {
        let gr = g(&[("a", "c"), ("b", "c")]);
        let h = hits(&gr, 1e-12, 100).unwrap();
        let c = gr.node("c").unwrap();
        assert!((h.authority[c] - 1.0).abs() < 1e-12);
        assert_eq!(h.hub[0], h.hub[1]);
        assert!((h.hub[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(h.hub[c], 0.0);
    }

    #[test]
    fn hits_degenerate_and_symmetric() {
        let single = SocialGraph::with_nodes(["x"], &[] as &[(&str, &str)]);
        let h = hits(&single, 1e-12, 10).unwrap();
        assert_eq!((h.hub.clone(), h.authority.clone()), (vec![1.0], vec![1.0]));
        let edgeless = SocialGraph::with_nodes(["x", "y", "z"], &[] as &[(&str, &str)]);
        let h = hits(&edgeless, 1e-12, 10).unwrap();
        assert!(h.hub.iter().all(|&v| v == h.hub[0]));
        let cyc = g(&[("a", "b"), ("b", "a")]);
        let h = hits(&cyc, 1e-12, 100).unwrap();
        assert_eq!(h.hub[0], h.hub[1]);
        assert_eq!(h.authority[0], h.authority[1]);
        assert!(hits(&SocialGraph::default(), 1e-12, 10).is_err());
    }

    #[test]
    fn eigenvector_symmetry() {
        let tri = g(&[("a", "b"), ("b", "c"), ("c", "a")]);
        let e = eigenvector_centrality(&tri, 1e-12, 1000).unwrap();
        assert!((e[0] - e[1]).abs() < 1e-12 && (e[1] - e[2]).abs() < 1e-12);
        let star = g(&[("c", "x"), ("c", "y"), ("z", "c")]);
        let e = eigenvector_centrality(&star, 1e-12, 10_000).unwrap();
        let c = star.node("c").unwrap();
        let leaves: Vec<f64> = ["x", "y", "z"].iter().map(|l| e[star.node(l).unwrap()]).collect();
        assert!(leaves.iter().all(|&l| l < e[c]));
        assert!((leaves[0] - leaves[1]).abs() < 1e-9 && (leaves[1] - leaves[2]).abs() < 1e-9);
        // K1,3: principal eigenvector is (sqrt3, 1, 1, 1)/sqrt6
        assert!((e[c] - (0.5f64).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_carries_iterate() {
        let path = g(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]);
        match eigenvector_centrality(&path, 1e-15, 2) {
            Err(GraphError::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.len(), 5);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
