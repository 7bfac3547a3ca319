//! Popularity-based recommender markets over social influence graphs.
//!
//! Users buy products one at a time. With probability `1 - alpha_u` a buyer
//! follows its own preferences, otherwise it asks an in-neighbor for a
//! recommendation drawn from that neighbor's purchase history. Whenever the
//! weight of old purchases fades away, the expected recommendation
//! probabilities converge to `x = (I - A M)^{-1} (I - A) b`, which makes the
//! long-run market computable without simulation.
//!
//! - [`graph`]: loading, normalizing and editing influence graphs.
//! - [`model`]: market models and preference sampling.
//! - [`analysis`]: steady state, influence vector, distortion, and the
//!   PageRank and Shapley correspondences.
//! - [`simulation`]: the stochastic purchasing process.
//! - [`metrics`]: inequality, rankings and convergence diagnostics.

pub mod analysis;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod simulation;

pub use graph::{InfluenceGraph, SupernodePolicy};
pub use model::{build_basic_scenario, MarketModel, PreferenceMatrix, PreferenceSpec};
