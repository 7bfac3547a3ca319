use crate::graph::InfluenceGraph;

use super::{check_tolerance, AnalysisError};

/// Personalized PageRank on the transposed graph `G^T`.
///
/// `p^T = (1 - alpha) r^T sum_i (alpha W)^i` where `W[u][v] = 1/outdeg(u)` in
/// `G^T`, i.e. `1/indeg(u)` for every in-neighbor `v` of `u` in `G`. Arc
/// weights are ignored. The series is truncated once its tail mass drops to
/// `epsilon`.
pub fn personalized_pagerank(
    g: &InfluenceGraph,
    alpha: f64,
    r: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>, AnalysisError> {
    check_tolerance(epsilon)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(AnalysisError::InvalidAlpha(alpha));
    }
    let n = g.node_count();
    if r.len() != n {
        return Err(AnalysisError::Dimension(format!("r has {} entries for {n} nodes", r.len())));
    }
    if let Some(node) = (0..n).find(|&u| g.indegree(u) == 0) {
        return Err(AnalysisError::DanglingInTranspose { node });
    }

    let mut p = vec![0.0; n];
    let mut walk = r.to_vec();
    let mut next = vec![0.0; n];
    let mut mass: f64 = walk.iter().sum();
    while mass > epsilon {
        for (pi, wi) in p.iter_mut().zip(&walk) {
            *pi += (1.0 - alpha) * wi;
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for (u, &wu) in walk.iter().enumerate() {
            if wu == 0.0 {
                continue;
            }
            let (src, _) = g.in_arcs(u);
            let share = alpha * wu / src.len() as f64;
            for &v in src {
                next[v] += share;
            }
        }
        std::mem::swap(&mut walk, &mut next);
        mass = walk.iter().sum();
    }
    Ok(p)
}
