//! Synthetic influence graphs. All generators return graphs with uniform
//! in-weights (`1/indeg`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InfluenceGraph;

fn uniform(n: usize, pairs: Vec<(usize, usize)>) -> InfluenceGraph {
    InfluenceGraph::from_unweighted(n, pairs)
        .expect("generated arcs are in range")
        .with_uniform_in_weights()
}

/// Every ordered pair of distinct nodes.
pub fn clique(n: usize) -> InfluenceGraph {
    let pairs = (0..n)
        .flat_map(|v| (0..n).filter(move |&u| u != v).map(move |u| (v, u)))
        .collect();
    uniform(n, pairs)
}

/// Node 0 points to every other node.
pub fn oriented_star(n: usize) -> InfluenceGraph {
    uniform(n, (1..n).map(|leaf| (0, leaf)).collect())
}

/// `0 -> 1 -> ... -> n-1`.
pub fn path(n: usize) -> InfluenceGraph {
    uniform(n, (1..n).map(|i| (i - 1, i)).collect())
}

/// Directed Erdős–Rényi graph: each ordered pair of distinct nodes is an arc
/// with probability `p`.
pub fn random_digraph(n: usize, p: f64, seed: u64) -> InfluenceGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for v in 0..n {
        for u in 0..n {
            if u != v && rng.random::<f64>() < p {
                pairs.push((v, u));
            }
        }
    }
    uniform(n, pairs)
}

/// Like [`random_digraph`] but every node is guaranteed at least one in-arc
/// and one out-arc (extra arcs are added where needed).
pub fn random_digraph_without_dangling(n: usize, p: f64, seed: u64) -> InfluenceGraph {
    assert!(n >= 2, "need at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    fn add(v: usize, u: usize, pairs: &mut Vec<(usize, usize)>, outdeg: &mut [usize], indeg: &mut [usize]) {
        pairs.push((v, u));
        outdeg[v] += 1;
        indeg[u] += 1;
    }
    for v in 0..n {
        for u in 0..n {
            if u != v && rng.random::<f64>() < p {
                add(v, u, &mut pairs, &mut outdeg, &mut indeg);
            }
        }
    }
    for u in 0..n {
        if indeg[u] == 0 {
            let v = (u + 1 + rng.random_range(0..n - 1)) % n;
            add(v, u, &mut pairs, &mut outdeg, &mut indeg);
        }
        if outdeg[u] == 0 {
            let w = (u + 1 + rng.random_range(0..n - 1)) % n;
            add(u, w, &mut pairs, &mut outdeg, &mut indeg);
        }
    }
    uniform(n, pairs)
}

/// Growing preferential-attachment digraph.
///
/// Starts from a clique on `links + 1` nodes. Every later node `u` follows
/// `links` distinct earlier nodes, each chosen with probability proportional
/// to its current follower count plus one; the resulting arcs point from the
/// followed node to `u`, so early hubs end up with large out-degree.
pub fn preferential_attachment(n: usize, links: usize, seed: u64) -> InfluenceGraph {
    assert!(links >= 1, "need at least one link per node");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = (links + 1).min(n);
    let mut pairs = Vec::new();
    // Each node appears once for the "+1" and once per follower.
    let mut urn: Vec<usize> = Vec::new();
    for v in 0..core {
        urn.push(v);
        for u in 0..core {
            if u != v {
                pairs.push((v, u));
                urn.push(v);
            }
        }
    }
    let mut chosen = Vec::with_capacity(links);
    for u in core..n {
        chosen.clear();
        while chosen.len() < links {
            let v = urn[rng.random_range(0..urn.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for &v in &chosen {
            pairs.push((v, u));
            urn.push(v);
        }
        urn.push(u);
    }
    uniform(n, pairs)
}
