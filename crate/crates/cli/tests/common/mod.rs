//! Helpers shared by the CLI and acceptance tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recmarket::graph::{generators, Arc, InfluenceGraph};
use recmarket::model::{sample_histories, sample_preferences};
use recmarket::{MarketModel, PreferenceSpec};

/// `L = (I - AM)^{-1}(I - A)` by dense LU.
pub fn dense_l(model: &MarketModel) -> DMatrix<f64> {
    let n = model.users();
    let mut lhs = DMatrix::<f64>::identity(n, n);
    for u in 0..n {
        let (src, w) = model.graph.in_arcs(u);
        for (&v, &w) in src.iter().zip(w) {
            lhs[(u, v)] -= model.alpha[u] * w;
        }
    }
    let rhs = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - model.alpha[i] } else { 0.0 });
    lhs.lu().solve(&rhs).expect("I - AM is nonsingular")
}

/// `f^T L`.
pub fn dense_gamma(model: &MarketModel, l: &DMatrix<f64>) -> Vec<f64> {
    let n = model.users();
    (0..n)
        .map(|v| (0..n).map(|u| model.rates[u] * l[(u, v)]).sum())
        .collect()
}

/// `||(I - AM)x - (I - A)b||_inf`, evaluated directly.
pub fn steady_state_residual(model: &MarketModel, b: &[f64], x: &[f64]) -> f64 {
    (0..model.users())
        .map(|u| {
            let a = model.alpha[u];
            let (src, w) = model.graph.in_arcs(u);
            let mx: f64 = src.iter().zip(w).map(|(&v, &w)| w * x[v]).sum();
            (x[u] - a * mx - (1.0 - a) * b[u]).abs()
        })
        .fold(0.0, f64::max)
}

/// Random arc weights, rates and damping (`U[0, 0.9)`, 0 on dangling users)
/// on a sparse random digraph with about three in-arcs per node.
pub fn random_model(n: usize, products: usize, seed: u64) -> MarketModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (3.0 / n as f64).min(1.0);
    let skeleton = generators::random_digraph(n, p, seed);
    let arcs: Vec<Arc> = skeleton
        .arcs()
        .map(|a| Arc {
            weight: rng.random_range(0.1..2.0),
            ..a
        })
        .collect();
    let g = InfluenceGraph::from_arcs(n, arcs)
        .unwrap()
        .normalize_in_weights()
        .unwrap();
    let alpha = (0..n)
        .map(|u| if g.indegree(u) > 0 { rng.random_range(0.0..0.9) } else { 0.0 })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let rates = raw.iter().map(|r| r / total).collect();
    let prefs = sample_preferences(n, products, &PreferenceSpec::default(), seed).unwrap();
    let hist = sample_histories(&prefs, seed);
    MarketModel::new(g, alpha, rates, prefs, hist).unwrap()
}

/// Writes `graph` as an unweighted `source target` edge list.
pub fn write_edge_list(path: &Path, graph: &InfluenceGraph) {
    let mut s = String::new();
    for a in graph.arcs() {
        writeln!(s, "{} {}", a.source, a.target).unwrap();
    }
    std::fs::write(path, s).unwrap();
}
