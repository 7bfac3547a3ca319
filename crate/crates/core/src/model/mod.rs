//! Market models: an influence graph plus per-user damping, purchase rates,
//! personal preferences and initial purchase histories.

mod preferences;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, InfluenceGraph, SupernodePolicy};

pub use preferences::{sample_preferences, PreferenceFamily, PreferenceSpec, Truncation};

/// Tolerance on the sums of rates and of preference rows.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("preference row {row} is not a probability distribution")]
    NonStochasticRow { row: usize },
    #[error("alpha {0} outside [0, 1)")]
    InvalidAlpha(f64),
    #[error("invalid preference spec: {0}")]
    InvalidSpec(String),
    #[error("preference row {row} summed to zero in {attempts} consecutive draws")]
    DegenerateRow { row: usize, attempts: usize },
    #[error("model violates {} invariant(s): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Dense row-major `users x products` matrix of personal preferences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PreferenceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(ModelError::Dimension("preference matrix needs at least one column".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(ModelError::Dimension(format!(
                "preference row {r} has {} entries, expected {cols}",
                rows[r].len()
            )));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub(crate) fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn users(&self) -> usize {
        self.rows
    }

    pub fn products(&self) -> usize {
        self.cols
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.cols..(u + 1) * self.cols]
    }

    pub fn get(&self, u: usize, p: usize) -> f64 {
        self.data[u * self.cols + p]
    }

    /// The preference of every user for product `p` (the vector `b`).
    pub fn column(&self, p: usize) -> Vec<f64> {
        (0..self.rows).map(|u| self.get(u, p)).collect()
    }

    /// Appends a user.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|u| self.row(u).to_vec()).collect()
    }
}

/// Complete market model.
///
/// Fields are public so that models can be assembled freely; [`MarketModel::validate`]
/// reports every broken invariant and the analysis and simulation entry points
/// refuse invalid models.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub graph: InfluenceGraph,
    pub products: usize,
    pub alpha: Vec<f64>,
    pub rates: Vec<f64>,
    pub preferences: PreferenceMatrix,
    pub initial_histories: Vec<Vec<usize>>,
}

/// A broken model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "invariant", rename_all = "snake_case")]
pub enum Violation {
    Dimensions { detail: String },
    GraphNotNormalized { user: usize, in_weight_sum: f64 },
    RatesSum { sum: f64 },
    RateNonPositive { user: usize, rate: f64 },
    PreferenceRowSum { user: usize, sum: f64 },
    PreferenceNegative { user: usize, product: usize, value: f64 },
    AlphaRange { user: usize, alpha: f64 },
    AlphaOnDangling { user: usize, alpha: f64 },
    EmptyHistory { user: usize },
    HistoryProduct { user: usize, product: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions { detail } => write!(f, "dimensions: {detail}"),
            Violation::GraphNotNormalized { user, in_weight_sum } => {
                write!(f, "in-weights of user {user} sum to {in_weight_sum}")
            }
            Violation::RatesSum { sum } => write!(f, "rates sum to {sum}, expected 1"),
            Violation::RateNonPositive { user, rate } => write!(f, "rate of user {user} is {rate}"),
            Violation::PreferenceRowSum { user, sum } => {
                write!(f, "preference row {user} sums to {sum}")
            }
            Violation::PreferenceNegative { user, product, value } => {
                write!(f, "preference of user {user} for product {product} is {value}")
            }
            Violation::AlphaRange { user, alpha } => {
                write!(f, "alpha of user {user} is {alpha}, outside [0, 1)")
            }
            Violation::AlphaOnDangling { user, alpha } => {
                write!(f, "user {user} has no in-arcs but alpha {alpha}")
            }
            Violation::EmptyHistory { user } => write!(f, "user {user} has an empty initial history"),
            Violation::HistoryProduct { user, product } => {
                write!(f, "initial history of user {user} names unknown product {product}")
            }
        }
    }
}

impl MarketModel {
    /// Assembles a model and validates it.
    pub fn new(
        graph: InfluenceGraph,
        alpha: Vec<f64>,
        rates: Vec<f64>,
        preferences: PreferenceMatrix,
        initial_histories: Vec<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            products: preferences.products(),
            graph,
            alpha,
            rates,
            preferences,
            initial_histories,
        };
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn users(&self) -> usize {
        self.graph.node_count()
    }

    /// Largest damping value over all users.
    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().copied().fold(0.0, f64::max)
    }

    /// The focus column `b` of the preference matrix.
    pub fn focus_preferences(&self, product: usize) -> Vec<f64> {
        self.preferences.column(product)
    }

    /// Lists every broken invariant. Empty iff the model is valid.
    ///
    /// A rate of zero is accepted for users without in-arcs: such users never
    /// buy and act purely as broadcasters (this is how an injected supernode is
    /// represented).
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.users();
        let mut out = Vec::new();
        let dims = [
            ("alpha", self.alpha.len()),
            ("rates", self.rates.len()),
            ("preference rows", self.preferences.users()),
            ("initial histories", self.initial_histories.len()),
        ];
        for (name, len) in dims {
            if len != n {
                out.push(Violation::Dimensions {
                    detail: format!("{name} has length {len}, graph has {n} users"),
                });
            }
        }
        if self.preferences.products() != self.products {
            out.push(Violation::Dimensions {
                detail: format!(
                    "preference matrix has {} products, model declares {}",
                    self.preferences.products(),
                    self.products
                ),
            });
        }
        if !out.is_empty() {
            return out;
        }

        for u in 0..n {
            if self.graph.indegree(u) > 0 {
                let s = self.graph.in_weight_sum(u);
                if (s - 1.0).abs() > crate::graph::IN_WEIGHT_TOLERANCE {
                    out.push(Violation::GraphNotNormalized { user: u, in_weight_sum: s });
                }
            }
        }

        let sum: f64 = self.rates.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            out.push(Violation::RatesSum { sum });
        }
        for (u, &r) in self.rates.iter().enumerate() {
            let passive = r == 0.0 && self.graph.indegree(u) == 0;
            if !(r > 0.0 || passive) || !r.is_finite() {
                out.push(Violation::RateNonPositive { user: u, rate: r });
            }
        }

        for u in 0..n {
            let row = self.preferences.row(u);
            for (p, &x) in row.iter().enumerate() {
                if !(x >= 0.0) {
                    out.push(Violation::PreferenceNegative { user: u, product: p, value: x });
                }
            }
            let s: f64 = row.iter().sum();
            if !((s - 1.0).abs() <= STOCHASTIC_TOLERANCE) {
                out.push(Violation::PreferenceRowSum { user: u, sum: s });
            }
        }

        for (u, &a) in self.alpha.iter().enumerate() {
            if !(0.0..1.0).contains(&a) {
                out.push(Violation::AlphaRange { user: u, alpha: a });
            } else if a != 0.0 && self.graph.indegree(u) == 0 {
                out.push(Violation::AlphaOnDangling { user: u, alpha: a });
            }
        }

        for (u, h) in self.initial_histories.iter().enumerate() {
            if h.is_empty() {
                out.push(Violation::EmptyHistory { user: u });
            }
            if let Some(&p) = h.iter().find(|&&p| p >= self.products) {
                out.push(Violation::HistoryProduct { user: u, product: p });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    /// Adds a node that every user follows and that always recommends
    /// `product`: no in-arcs, damping 0, rate 0, preference row and history
    /// both equal to `product`. Returns the model and the new node's id.
    pub fn with_supernode(&self, policy: SupernodePolicy, product: usize) -> Result<(Self, usize), ModelError> {
        if product >= self.products {
            return Err(ModelError::InvalidSpec(format!(
                "product {product} out of range for {} products",
                self.products
            )));
        }
        let (graph, sup) = self.graph.inject_supernode(policy)?;
        let mut alpha = self.alpha.clone();
        alpha.push(0.0);
        let mut rates = self.rates.clone();
        rates.push(0.0);
        let mut preferences = self.preferences.clone();
        let mut row = vec![0.0; self.products];
        row[product] = 1.0;
        preferences.push_row(&row);
        let mut histories = self.initial_histories.clone();
        histories.push(vec![product]);
        Ok((Self::new(graph, alpha, rates, preferences, histories)?, sup))
    }

    /// Returns a copy with every user's damping replaced by `alpha` (dangling
    /// users keep 0).
    pub fn with_uniform_alpha(&self, alpha: f64) -> Result<Self, ModelError> {
        check_alpha(alpha)?;
        let mut m = self.clone();
        m.alpha = basic_alpha(&m.graph, alpha);
        Ok(m)
    }
}

fn check_alpha(alpha: f64) -> Result<(), ModelError> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ModelError::InvalidAlpha(alpha))
    }
}

fn basic_alpha(g: &InfluenceGraph, alpha: f64) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| if g.indegree(u) > 0 { alpha } else { 0.0 })
        .collect()
}

/// Builds the basic scenario on `graph`: uniform purchase rates, the same
/// damping for every user with in-arcs, and uniform recommender choice
/// (in-weights are reset to `1/indeg` whatever the input weights are).
pub fn build_basic_scenario(
    graph: &InfluenceGraph,
    alpha: f64,
    preferences: PreferenceMatrix,
    histories: Vec<Vec<usize>>,
) -> Result<MarketModel, ModelError> {
    check_alpha(alpha)?;
    let n = graph.node_count();
    if n == 0 {
        return Err(ModelError::Dimension("graph has no users".into()));
    }
    if preferences.users() != n {
        return Err(ModelError::Dimension(format!(
            "{} preference rows for {n} users",
            preferences.users()
        )));
    }
    if histories.len() != n {
        return Err(ModelError::Dimension(format!(
            "{} initial histories for {n} users",
            histories.len()
        )));
    }
    for u in 0..n {
        let s: f64 = preferences.row(u).iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOLERANCE || preferences.row(u).iter().any(|&x| !(x >= 0.0)) {
            return Err(ModelError::NonStochasticRow { row: u });
        }
    }
    let graph = graph.with_uniform_in_weights();
    let alpha = basic_alpha(&graph, alpha);
    MarketModel::new(graph, alpha, vec![1.0 / n as f64; n], preferences, histories)
}

/// One initial purchase per user, drawn from that user's preference row.
pub fn sample_histories(preferences: &PreferenceMatrix, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..preferences.users())
        .map(|u| vec![sample_index(preferences.row(u), &mut rng)])
        .collect()
}

/// Draws an index with probability proportional to `weights` (which must have
/// a positive sum).
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    // rounding: fall back to the last positive entry
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
