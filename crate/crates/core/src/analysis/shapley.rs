use crate::model::MarketModel;

use super::{check_product, solve_for_preferences, AnalysisError};

/// Coalitions are enumerated exhaustively, so the player count is capped.
pub const MAX_SHAPLEY_PLAYERS: usize = 20;

/// Exact Shapley values of the preference-withdrawal game, by enumeration of
/// all `2^n` coalitions.
///
/// A coalition `S` keeps the focus preferences `b_u` of its members and sets
/// everyone else's to zero; its value is the equilibrium market share
/// `f . x(S)` of `product`. Each coalition is solved to tolerance `tol`.
pub fn shapley_bruteforce(model: &MarketModel, product: usize, tol: f64) -> Result<Vec<f64>, AnalysisError> {
    model.ensure_valid()?;
    check_product(model, product)?;
    let n = model.users();
    if n > MAX_SHAPLEY_PLAYERS {
        return Err(AnalysisError::TooManyPlayers {
            n,
            max: MAX_SHAPLEY_PLAYERS,
        });
    }
    let b = model.focus_preferences(product);

    let coalitions = 1usize << n;
    let mut value = vec![0.0; coalitions];
    let mut masked = vec![0.0; n];
    for (s, v) in value.iter_mut().enumerate().skip(1) {
        for (u, x) in masked.iter_mut().enumerate() {
            *x = if s & (1 << u) != 0 { b[u] } else { 0.0 };
        }
        let steady = solve_for_preferences(model, &masked, tol)?;
        *v = model.rates.iter().zip(&steady.x_infinity).map(|(f, x)| f * x).sum();
    }

    // weight(s) = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
    let mut weight = vec![0.0; n];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }

    let mut phi = vec![0.0; n];
    for (u, phi_u) in phi.iter_mut().enumerate() {
        let bit = 1usize << u;
        for s in (0..coalitions).filter(|s| s & bit == 0) {
            let size = s.count_ones() as usize;
            *phi_u += weight[size] * (value[s | bit] - value[s]);
        }
    }
    Ok(phi)
}
