//! Closed-form steady state of the purchasing process and the quantities
//! derived from it.
//!
//! With `A = diag(alpha)` and `M[u][v] = w_vu`, the limit of the expected
//! recommendation probabilities is `x = L b` with `L = (I - A M)^{-1} (I - A)`.
//! `L` is never formed: the steady state is a fixed-point iteration and the
//! influence vector `gamma^T = f^T L` is a truncated Neumann series, both
//! costing `O(|V| + |E|)` per sweep.

mod pagerank;
mod shapley;

use serde::Serialize;
use thiserror::Error;

use crate::model::{MarketModel, ModelError};

pub use pagerank::personalized_pagerank;
pub use shapley::{shapley_bruteforce, MAX_SHAPLEY_PLAYERS};

/// Default additive error for influence and PageRank vectors. The distortion
/// computed from a truncated influence vector is off by up to the missing mass
/// over `f . b`, so this sits well below 1e-9.
pub const DEFAULT_EPSILON: f64 = 1e-10;
/// Default fixed-point tolerance for steady states.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("product {product} out of range for {products} products")]
    ProductOutOfRange { product: usize, products: usize },
    #[error("user {user} out of range for {users} users")]
    UserOutOfRange { user: usize, users: usize },
    #[error("tolerance must be a positive finite number, got {0}")]
    InvalidTolerance(f64),
    #[error("fixed-point iteration did not reach residual {tol} within {cap} iterations (residual {residual})")]
    IterationCap { cap: usize, tol: f64, residual: f64 },
    #[error("focus product has zero base share; market distortion is undefined")]
    UndefinedDistortion,
    #[error("node {node} is dangling in the transposed graph (it has no in-arcs)")]
    DanglingInTranspose { node: usize },
    #[error("{n} players exceed the brute-force limit of {max}")]
    TooManyPlayers { n: usize, max: usize },
    #[error("{0}")]
    Dimension(String),
    #[error("damping {0} outside [0, 1)")]
    InvalidAlpha(f64),
}

/// Limit of the expected recommendation probabilities for one product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub x_infinity: Vec<f64>,
    /// Sup-norm of `x - ((I - A) b + A M x)` at the returned `x`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaMax {
    pub user: usize,
    pub value: f64,
}

/// Influence vector `gamma^T = f^T L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceVector {
    pub gamma: Vec<f64>,
    /// Certified bound on the additive error of every entry (the mass left in
    /// the truncated tail of the series).
    pub epsilon: f64,
    pub gamma_max: GammaMax,
    /// Number of series terms summed.
    pub iterations: usize,
}

/// Row `user` of `L`: entry `v` times `b_v` is the contribution of `v` to
/// `x_user`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceSlice {
    pub user: usize,
    pub contributions: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
}

pub(crate) fn check_tolerance(tol: f64) -> Result<(), AnalysisError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidTolerance(tol))
    }
}

fn check_product(model: &MarketModel, product: usize) -> Result<(), AnalysisError> {
    if product < model.products {
        Ok(())
    } else {
        Err(AnalysisError::ProductOutOfRange {
            product,
            products: model.products,
        })
    }
}

/// `y = A M x`, i.e. `y_u = alpha_u * sum_v w_vu x_v`.
fn apply_am(model: &MarketModel, x: &[f64], y: &mut [f64]) {
    for (u, yu) in y.iter_mut().enumerate() {
        let a = model.alpha[u];
        if a == 0.0 {
            *yu = 0.0;
            continue;
        }
        let (src, w) = model.graph.in_arcs(u);
        let s: f64 = src.iter().zip(w).map(|(&v, &w)| w * x[v]).sum();
        *yu = a * s;
    }
}

/// `y^T = v^T A M`, i.e. `y_w = sum_u v_u alpha_u w_wu`. Accumulation order is
/// fixed (ascending `u`), so results do not depend on scheduling.
fn apply_am_transposed(model: &MarketModel, v: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|x| *x = 0.0);
    for (u, &vu) in v.iter().enumerate() {
        let a = model.alpha[u];
        if a == 0.0 || vu == 0.0 {
            continue;
        }
        let (src, w) = model.graph.in_arcs(u);
        for (&s, &w) in src.iter().zip(w) {
            y[s] += vu * a * w;
        }
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iteration cap for the fixed point: enough sweeps for `alpha_max^k <= tol`
/// plus slack.
fn fixed_point_cap(alpha_max: f64, tol: f64) -> usize {
    if alpha_max == 0.0 {
        return 10;
    }
    (tol.ln() / alpha_max.ln()).ceil().max(0.0) as usize + 10
}

/// Number of series terms that guarantee a tail mass below `eps`.
fn series_terms(alpha_max: f64, eps: f64) -> usize {
    if alpha_max == 0.0 {
        return 1;
    }
    ((1.0 / eps).ln() / (1.0 / alpha_max).ln()).ceil().max(1.0) as usize
}

/// Solves `x = (I - A) b + A M x` for an arbitrary preference vector `b`
/// by fixed-point iteration from `x = b`.
pub fn solve_for_preferences(model: &MarketModel, b: &[f64], tol: f64) -> Result<SteadyState, AnalysisError> {
    check_tolerance(tol)?;
    let n = model.users();
    if b.len() != n {
        return Err(AnalysisError::Dimension(format!("b has {} entries for {n} users", b.len())));
    }
    let base: Vec<f64> = b.iter().zip(&model.alpha).map(|(b, a)| (1.0 - a) * b).collect();
    let cap = fixed_point_cap(model.alpha_max(), tol);
    let mut x = b.to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iterations in 0..=cap {
        apply_am(model, &x, &mut next);
        for (y, c) in next.iter_mut().zip(&base) {
            *y += c;
        }
        residual = sup_distance(&next, &x);
        if residual <= tol {
            return Ok(SteadyState {
                x_infinity: x,
                residual,
                iterations,
            });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Err(AnalysisError::IterationCap { cap, tol, residual })
}

/// Steady state for `product` (its preference column plays the role of `b`;
/// every other product is aggregated).
pub fn solve_steady_state(model: &MarketModel, product: usize, tol: f64) -> Result<SteadyState, AnalysisError> {
    model.ensure_valid()?;
    check_product(model, product)?;
    solve_for_preferences(model, &model.focus_preferences(product), tol)
}

/// Steady states for every product, solved independently.
pub fn solve_all_products(model: &MarketModel, tol: f64) -> Result<Vec<SteadyState>, AnalysisError> {
    model.ensure_valid()?;
    (0..model.products)
        .map(|p| solve_for_preferences(model, &model.focus_preferences(p), tol))
        .collect()
}

/// Sums `start^T sum_i (A M)^i (I - A)` until the remaining mass drops to
/// `eps` or the a-priori term count is reached. Returns the sum, the tail
/// mass and the number of terms.
fn influence_series(model: &MarketModel, start: Vec<f64>, eps: f64) -> (Vec<f64>, f64, usize) {
    let n = model.users();
    let max_terms = series_terms(model.alpha_max(), eps);
    let mut acc = vec![0.0; n];
    let mut v = start;
    let mut next = vec![0.0; n];
    let mut terms = 0;
    let mut mass: f64 = v.iter().sum();
    while terms < max_terms && mass > eps {
        for ((a, vu), alpha) in acc.iter_mut().zip(&v).zip(&model.alpha) {
            *a += vu * (1.0 - alpha);
        }
        apply_am_transposed(model, &v, &mut next);
        std::mem::swap(&mut v, &mut next);
        terms += 1;
        mass = v.iter().sum();
    }
    (acc, mass, terms)
}

/// Entry and index of the maximum, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> GammaMax {
    let mut best = GammaMax {
        user: 0,
        value: f64::NEG_INFINITY,
    };
    for (u, &x) in values.iter().enumerate() {
        if x > best.value {
            best = GammaMax { user: u, value: x };
        }
    }
    best
}

/// Influence vector `gamma^T = f^T sum_i (A M)^i (I - A)`, every entry within
/// `epsilon` of the exact value.
pub fn compute_influence(model: &MarketModel, epsilon: f64) -> Result<InfluenceVector, AnalysisError> {
    model.ensure_valid()?;
    check_tolerance(epsilon)?;
    let (gamma, tail, iterations) = influence_series(model, model.rates.clone(), epsilon);
    Ok(InfluenceVector {
        gamma_max: argmax(&gamma),
        gamma,
        epsilon: tail,
        iterations,
    })
}

/// Row `user` of `L`, by the same series started from the indicator of `user`.
pub fn influence_slice(model: &MarketModel, user: usize, epsilon: f64) -> Result<InfluenceSlice, AnalysisError> {
    model.ensure_valid()?;
    check_tolerance(epsilon)?;
    let n = model.users();
    if user >= n {
        return Err(AnalysisError::UserOutOfRange { user, users: n });
    }
    let mut start = vec![0.0; n];
    start[user] = 1.0;
    let (contributions, tail, iterations) = influence_series(model, start, epsilon);
    Ok(InfluenceSlice {
        user,
        contributions,
        epsilon: tail,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Market distortion `(gamma . b) / (f . b)`: equilibrium market share of
/// `product` over its share without recommendations.
pub fn market_distortion(model: &MarketModel, gamma: &InfluenceVector, product: usize) -> Result<f64, AnalysisError> {
    check_product(model, product)?;
    if gamma.gamma.len() != model.users() {
        return Err(AnalysisError::Dimension(format!(
            "gamma has {} entries for {} users",
            gamma.gamma.len(),
            model.users()
        )));
    }
    let b = model.focus_preferences(product);
    let base = dot(&model.rates, &b);
    if base <= 0.0 {
        return Err(AnalysisError::UndefinedDistortion);
    }
    Ok(dot(&gamma.gamma, &b) / base)
}

/// The same ratio from a steady state: `(f . x) / (f . b)`.
pub fn distortion_from_steady_state(
    model: &MarketModel,
    steady: &SteadyState,
    product: usize,
) -> Result<f64, AnalysisError> {
    check_product(model, product)?;
    let b = model.focus_preferences(product);
    let base = dot(&model.rates, &b);
    if base <= 0.0 {
        return Err(AnalysisError::UndefinedDistortion);
    }
    Ok(dot(&model.rates, &steady.x_infinity) / base)
}



#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::graph::generators;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_alpha_returns_b_exactly() {
        let m = basic(&generators::random_digraph(30, 0.1, 1), 0.0, 1);
        let s = solve_steady_state(&m, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.x_infinity, m.focus_preferences(0));
        assert_eq!(s.residual, 0.0);
        let g = compute_influence(&m, DEFAULT_EPSILON).unwrap();
        assert_eq!(g.gamma, m.rates);
        assert_eq!(g.iterations, 1);
        assert_eq!(market_distortion(&m, &g, 0).unwrap(), 1.0);
    }

    #[test]
    fn two_node_steady_state() {
        // (I - AM) x = (I - A) b  =>  x_u = 1, x_v - 0.5 x_u = 0.
        let m = two_node();
        let s = solve_steady_state(&m, 0, 1e-12).unwrap();
        assert_abs_diff_eq!(s.x_infinity[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x_infinity[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_node_slice() {
        // L = (I - AM)^{-1}(I - A) = [[1, 0], [0.5, 0.5]].
        let m = two_node();
        let s = influence_slice(&m, 1, 1e-12).unwrap();
        assert_abs_diff_eq!(s.contributions[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.contributions[1], 0.5, epsilon = 1e-12);
        let s = influence_slice(&m, 0, 1e-12).unwrap();
        assert_eq!(s.contributions, vec![1.0, 0.0]);
    }

    #[test]
    fn clique_aggregate_share_preserved() {
        let m = basic(&generators::clique(4), 0.2, 3);
        let s = solve_steady_state(&m, 0, 1e-13).unwrap();
        let b = m.focus_preferences(0);
        assert_abs_diff_eq!(dot(&m.rates, &s.x_infinity), dot(&m.rates, &b), epsilon = 1e-12);
    }

    #[test]
    fn clique_gamma_uniform() {
        let m = basic(&generators::clique(10), 0.2, 1);
        let g = compute_influence(&m, DEFAULT_EPSILON).unwrap();
        // the missing tail mass is spread evenly by symmetry
        for x in &g.gamma {
            assert!(*x <= 0.1 && 0.1 - x <= g.epsilon / 10.0 + 1e-16);
        }
        let g = compute_influence(&m, 1e-14).unwrap();
        for x in &g.gamma {
            assert_abs_diff_eq!(*x, 0.1, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(market_distortion(&m, &g, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn star_closed_form() {
        // gamma_center = 1/5 + (4/5) 0.2, gamma_leaf = (1/5) 0.8
        let m = basic(&generators::oriented_star(5), 0.2, 1);
        let g = compute_influence(&m, 1e-12).unwrap();
        assert_abs_diff_eq!(g.gamma[0], 0.36, epsilon = 1e-12);
        for leaf in 1..5 {
            assert_abs_diff_eq!(g.gamma[leaf], 0.16, epsilon = 1e-12);
        }
        assert_eq!(g.gamma_max.user, 0);

        let mut m = m;
        m.preferences = crate::model::PreferenceMatrix::from_rows(
            std::iter::once(vec![1.0, 0.0]).chain(std::iter::repeat(vec![0.0, 1.0]).take(4)).collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(market_distortion(&m, &g, 0).unwrap(), 1.8, epsilon = 1e-10);
    }

    #[test]
    fn argmax_prefers_lowest_id() {
        assert_eq!(argmax(&[0.1, 0.3, 0.3]).user, 1);
    }

    #[test]
    fn distortion_undefined_for_zero_share() {
        let mut m = two_node();
        m.preferences = crate::model::PreferenceMatrix::from_rows(vec![vec![0.0, 1.0]; 2]).unwrap();
        let g = compute_influence(&m, DEFAULT_EPSILON).unwrap();
        assert_eq!(market_distortion(&m, &g, 0), Err(AnalysisError::UndefinedDistortion));
    }

    #[test]
    fn errors_on_bad_inputs() {
        let m = two_node();
        assert_eq!(solve_steady_state(&m, 0, 0.0), Err(AnalysisError::InvalidTolerance(0.0)));
        assert!(matches!(solve_steady_state(&m, 2, 1e-9), Err(AnalysisError::ProductOutOfRange { .. })));
        assert!(matches!(influence_slice(&m, 2, 1e-9), Err(AnalysisError::UserOutOfRange { .. })));
        let mut bad = m.clone();
        bad.alpha[0] = 0.3;
        assert!(matches!(compute_influence(&bad, 1e-9), Err(AnalysisError::Model(_))));
    }

    #[test]
    fn multi_product_steady_states_sum_to_one() {
        let m = random_general(40, 5);
        let all = solve_all_products(&m, 1e-12).unwrap();
        for u in 0..40 {
            let s: f64 = all.iter().map(|s| s.x_infinity[u]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn l_is_row_stochastic_and_matches_series(n in 2usize..60, seed in any::<u64>()) {
            let m = random_general(n, seed);
            let l = dense::l_matrix(&m);
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    prop_assert!(l[(i, j)] >= -1e-12);
                    s += l[(i, j)];
                }
                prop_assert!((s - 1.0).abs() <= 1e-9);
            }
            let eps = 1e-9;
            let g = compute_influence(&m, eps).unwrap();
            let exact = dense::gamma(&m);
            for (a, b) in g.gamma.iter().zip(&exact) {
                prop_assert!((a - b).abs() <= eps);
            }
            let total: f64 = g.gamma.iter().sum();
            prop_assert!((total - 1.0).abs() <= n as f64 * eps + 1e-12);

            let user = seed as usize % n;
            let slice = influence_slice(&m, user, eps).unwrap();
            let row_sum: f64 = slice.contributions.iter().sum();
            prop_assert!((row_sum - 1.0).abs() <= n as f64 * eps);
            for v in 0..n {
                prop_assert!((slice.contributions[v] - l[(user, v)]).abs() <= eps);
            }
        }

        #[test]
        fn steady_state_certificate(n in 2usize..60, seed in any::<u64>(), tol in 1e-12f64..1e-6) {
            let m = random_general(n, seed);
            let s = solve_steady_state(&m, 1, tol).unwrap();
            let b = m.focus_preferences(1);
            let mut amx = vec![0.0; n];
            apply_am(&m, &s.x_infinity, &mut amx);
            let res = (0..n)
                .map(|u| (s.x_infinity[u] - amx[u] - (1.0 - m.alpha[u]) * b[u]).abs())
                .fold(0.0, f64::max);
            prop_assert!(res <= (1.0 + m.alpha_max()) * tol);
            prop_assert!(s.x_infinity.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn distortion_is_one_without_recommendations(n in 2usize..40, seed in any::<u64>()) {
            let m = random_general(n, seed).with_uniform_alpha(0.0).unwrap();
            let g = compute_influence(&m, DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(market_distortion(&m, &g, 0).unwrap(), 1.0);
        }
    }
}
