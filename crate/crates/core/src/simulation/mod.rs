//! The purchasing process, one purchase per step.
//!
//! At every step a buyer `u` is drawn with probability `f_u`. With probability
//! `1 - alpha_u` it buys from its own preferences; otherwise it picks an
//! in-neighbor `v` with probability `w_vu` and buys whatever `v`'s history
//! recommends under the active [`RecommendationRule`].

mod rule;
mod table;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;
use thiserror::Error;

use crate::model::{sample_index, MarketModel, ModelError};

pub use rule::{ParseRuleError, RecommendationRule};
pub use table::{mean_tables, TrajectoryTable};

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("sample_every must be at least 1")]
    NoSampling,
    #[error("product {product} out of range for {products} products")]
    ProductOutOfRange { product: usize, products: usize },
    #[error("{0}")]
    Rule(String),
}

/// One purchase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PurchaseEvent {
    pub buyer: usize,
    pub product: usize,
    pub via_recommendation: bool,
    pub recommender: Option<usize>,
}

/// Per-user purchase histories at some point of the process.
#[derive(Debug, Clone)]
pub struct SimulationState {
    t: u64,
    products: usize,
    window: usize,
    /// Purchase counts per (user, product), initial history included.
    counts: Vec<u64>,
    /// Counts of the initial history alone.
    initial_counts: Vec<u64>,
    initial_len: Vec<u64>,
    totals: Vec<u64>,
    recent: Vec<VecDeque<u32>>,
    rng: ChaCha8Rng,
}

impl SimulationState {
    /// Fresh state holding only the initial histories. `window` is the number
    /// of recent purchases remembered per user.
    pub fn new(model: &MarketModel, window: usize, seed: u64) -> Self {
        let n = model.users();
        let m = model.products;
        let mut counts = vec![0u64; n * m];
        let mut recent = Vec::with_capacity(n);
        for (u, hist) in model.initial_histories.iter().enumerate() {
            for &p in hist {
                counts[u * m + p] += 1;
            }
            let keep = hist.len().saturating_sub(window);
            recent.push(hist[keep..].iter().map(|&p| p as u32).collect::<VecDeque<_>>());
        }
        let initial_len: Vec<u64> = model.initial_histories.iter().map(|h| h.len() as u64).collect();
        Self {
            t: 0,
            products: m,
            window,
            initial_counts: counts.clone(),
            counts,
            totals: initial_len.clone(),
            initial_len,
            recent,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Steps taken so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn users(&self) -> usize {
        self.totals.len()
    }

    fn counts_of(&self, u: usize) -> &[u64] {
        &self.counts[u * self.products..(u + 1) * self.products]
    }

    fn initial_of(&self, u: usize) -> &[u64] {
        &self.initial_counts[u * self.products..(u + 1) * self.products]
    }

    /// Purchase counts of `u` since the process started (initial history excluded).
    pub fn purchases_since_start(&self, u: usize) -> Vec<u64> {
        self.counts_of(u).iter().zip(self.initial_of(u)).map(|(c, i)| c - i).collect()
    }

    /// Total purchases of `u` including the initial history.
    pub fn total_purchases(&self, u: usize) -> u64 {
        self.totals[u]
    }

    /// Recent purchases of `u`, oldest first.
    pub fn recent(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.recent[u].iter().map(|&p| p as usize)
    }

    fn record(&mut self, u: usize, p: usize) {
        self.counts[u * self.products + p] += 1;
        self.totals[u] += 1;
        if self.window > 0 {
            let buf = &mut self.recent[u];
            if buf.len() == self.window {
                buf.pop_front();
            }
            buf.push_back(p as u32);
        }
    }

    /// Probability that `user`, acting as recommender on the next step,
    /// recommends each product.
    pub fn recommendation_distribution(&self, rule: &RecommendationRule, user: usize) -> Vec<f64> {
        let m = self.products;
        let mut out = vec![0.0; m];
        match *rule {
            RecommendationRule::UniformAll => {
                let total = self.totals[user] as f64;
                for (o, &c) in out.iter_mut().zip(self.counts_of(user)) {
                    *o = c as f64 / total;
                }
            }
            RecommendationRule::Window(_) => {
                let buf = &self.recent[user];
                let share = 1.0 / buf.len() as f64;
                for &p in buf {
                    out[p as usize] += share;
                }
            }
            RecommendationRule::FixedPast => {
                let k = self.initial_len[user] as f64;
                for (o, &c) in out.iter_mut().zip(self.initial_of(user)) {
                    *o = c as f64 / k;
                }
            }
            RecommendationRule::Periodic { a, b } => {
                out[if (self.t + 1) % 2 == 1 { a } else { b }] = 1.0;
            }
            RecommendationRule::Superlinear(beta) => {
                let total = self.totals[user] as f64;
                for (o, &c) in out.iter_mut().zip(self.counts_of(user)) {
                    *o = (c as f64 / total).powf(beta);
                }
                let s: f64 = out.iter().sum();
                out.iter_mut().for_each(|x| *x /= s);
            }
            RecommendationRule::Always(p) => out[p] = 1.0,
        }
        out
    }

    fn sample_recommendation(&mut self, rule: &RecommendationRule, v: usize, scratch: &mut Vec<f64>) -> usize {
        match *rule {
            RecommendationRule::UniformAll => {
                let r = self.rng.random_range(0..self.totals[v]);
                pick_by_count(&self.counts[v * self.products..(v + 1) * self.products], r)
            }
            RecommendationRule::Window(_) => {
                let buf = &self.recent[v];
                buf[self.rng.random_range(0..buf.len())] as usize
            }
            RecommendationRule::FixedPast => {
                let r = self.rng.random_range(0..self.initial_len[v]);
                pick_by_count(&self.initial_counts[v * self.products..(v + 1) * self.products], r)
            }
            RecommendationRule::Periodic { a, b } => {
                if (self.t + 1) % 2 == 1 {
                    a
                } else {
                    b
                }
            }
            RecommendationRule::Superlinear(beta) => {
                let total = self.totals[v] as f64;
                scratch.clear();
                scratch.extend(
                    self.counts[v * self.products..(v + 1) * self.products]
                        .iter()
                        .map(|&c| (c as f64 / total).powf(beta)),
                );
                sample_index(scratch, &mut self.rng)
            }
            RecommendationRule::Always(p) => p,
        }
    }
}

fn pick_by_count(counts: &[u64], mut r: u64) -> usize {
    for (p, &c) in counts.iter().enumerate() {
        if r < c {
            return p;
        }
        r -= c;
    }
    unreachable!("draw exceeds total count")
}

/// Local market share of `product` for every user: the fraction of `u`'s
/// purchases since the start that are `product`, or 0 if `u` has not bought yet.
pub fn local_market_shares(state: &SimulationState, product: usize) -> Vec<f64> {
    (0..state.users())
        .map(|u| {
            let bought = state.totals[u] - state.initial_len[u];
            if bought == 0 {
                0.0
            } else {
                (state.counts_of(u)[product] - state.initial_of(u)[product]) as f64 / bought as f64
            }
        })
        .collect()
}

/// Share of `product` among all of `u`'s purchases, initial history included.
pub fn local_market_shares_with_history(state: &SimulationState, product: usize) -> Vec<f64> {
    (0..state.users())
        .map(|u| state.counts_of(u)[product] as f64 / state.totals[u] as f64)
        .collect()
}

/// Precomputed samplers for one model, shared read-only between runs.
#[derive(Debug)]
pub struct Simulator<'a> {
    model: &'a MarketModel,
    buyers: Option<WeightedAliasIndex<f64>>,
    recommender_cdf: Vec<Vec<f64>>,
}

/// Parameters of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub steps: u64,
    pub seed: u64,
    pub sample_every: u64,
    /// Product whose recommendation probabilities and shares are recorded.
    pub product: usize,
    /// Keep every purchase event in the trajectory.
    pub record_events: bool,
}

impl RunConfig {
    pub fn new(steps: u64, seed: u64, sample_every: u64) -> Self {
        Self {
            steps,
            seed,
            sample_every,
            product: 0,
            record_events: false,
        }
    }
}

/// Snapshots of a run at its sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub rule: RecommendationRule,
    pub product: usize,
    pub times: Vec<u64>,
    /// Recommendation probability of the focus product, per user.
    pub x: Vec<Vec<f64>>,
    /// Local market share of the focus product since the start, per user.
    pub z: Vec<Vec<f64>>,
    /// Probability that the next purchase is each product.
    pub aggregate: Vec<Vec<f64>>,
    /// Users that had not bought anything yet (their `z` entry is 0 by convention).
    pub unstarted: Vec<usize>,
    pub events: Option<Vec<PurchaseEvent>>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a MarketModel) -> Result<Self, SimulationError> {
        model.ensure_valid()?;
        let buyers = if model.users() > 1 {
            Some(WeightedAliasIndex::new(model.rates.clone()).map_err(|e| SimulationError::Rule(e.to_string()))?)
        } else {
            None
        };
        let recommender_cdf = (0..model.users())
            .map(|u| {
                let mut acc = 0.0;
                model
                    .graph
                    .in_arcs(u)
                    .1
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            model,
            buyers,
            recommender_cdf,
        })
    }

    pub fn model(&self) -> &MarketModel {
        self.model
    }

    /// Fresh state for `rule`.
    pub fn initial_state(&self, rule: &RecommendationRule, seed: u64) -> SimulationState {
        SimulationState::new(self.model, rule.window_bound(), seed)
    }

    /// Performs one purchase and advances the clock.
    pub fn step(&self, state: &mut SimulationState, rule: &RecommendationRule) -> PurchaseEvent {
        let mut scratch = Vec::new();
        self.step_with(state, rule, &mut scratch)
    }

    fn step_with(&self, state: &mut SimulationState, rule: &RecommendationRule, scratch: &mut Vec<f64>) -> PurchaseEvent {
        let model = self.model;
        let buyer = match &self.buyers {
            Some(alias) => alias.sample(&mut state.rng),
            None => 0,
        };
        let alpha = model.alpha[buyer];
        let follow = alpha > 0.0 && state.rng.random::<f64>() < alpha;
        let event = if follow {
            let cdf = &self.recommender_cdf[buyer];
            assert!(!cdf.is_empty(), "user {buyer} follows a recommendation without in-neighbors");
            let r = state.rng.random::<f64>() * cdf[cdf.len() - 1];
            let idx = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
            let recommender = model.graph.in_arcs(buyer).0[idx];
            let product = state.sample_recommendation(rule, recommender, scratch);
            PurchaseEvent {
                buyer,
                product,
                via_recommendation: true,
                recommender: Some(recommender),
            }
        } else {
            PurchaseEvent {
                buyer,
                product: sample_index(model.preferences.row(buyer), &mut state.rng),
                via_recommendation: false,
                recommender: None,
            }
        };
        state.record(buyer, event.product);
        state.t += 1;
        event
    }

    fn check(&self, rule: &RecommendationRule, config: &RunConfig) -> Result<(), SimulationError> {
        let products = self.model.products;
        if config.steps == 0 {
            return Err(SimulationError::NoSteps);
        }
        if config.sample_every == 0 {
            return Err(SimulationError::NoSampling);
        }
        if config.product >= products {
            return Err(SimulationError::ProductOutOfRange {
                product: config.product,
                products,
            });
        }
        rule.check(products).map_err(SimulationError::Rule)
    }

    /// Runs `config.steps` purchases from a fresh state and calls `on_sample`
    /// every `config.sample_every` steps (and after the last step). Nothing is
    /// kept between samples; `config.record_events` is ignored.
    pub fn run_with<F>(
        &self,
        rule: &RecommendationRule,
        config: &RunConfig,
        mut on_sample: F,
    ) -> Result<SimulationState, SimulationError>
    where
        F: FnMut(Snapshot<'_>),
    {
        self.drive(rule, config, |_| {}, &mut on_sample)
    }

    /// Like [`Simulator::run_with`] but stores every snapshot (and, if asked,
    /// every purchase event) in a [`Trajectory`].
    pub fn run(
        &self,
        rule: &RecommendationRule,
        config: &RunConfig,
    ) -> Result<(Trajectory, SimulationState), SimulationError> {
        let samples = (config.steps / config.sample_every.max(1) + 1) as usize;
        let mut traj = Trajectory {
            seed: config.seed,
            rule: *rule,
            product: config.product,
            times: Vec::with_capacity(samples),
            x: Vec::with_capacity(samples),
            z: Vec::with_capacity(samples),
            aggregate: Vec::with_capacity(samples),
            unstarted: Vec::with_capacity(samples),
            events: None,
        };
        let mut events = config.record_events.then(Vec::new);
        let state = self.drive(
            rule,
            config,
            |e| {
                if let Some(ev) = events.as_mut() {
                    ev.push(e);
                }
            },
            &mut |s: Snapshot<'_>| {
                traj.times.push(s.time);
                traj.x.push(s.x.to_vec());
                traj.z.push(s.z.to_vec());
                traj.aggregate.push(s.aggregate.to_vec());
                traj.unstarted.push(s.unstarted);
            },
        )?;
        traj.events = events;
        Ok((traj, state))
    }

    fn drive<E, F>(
        &self,
        rule: &RecommendationRule,
        config: &RunConfig,
        mut on_event: E,
        on_sample: &mut F,
    ) -> Result<SimulationState, SimulationError>
    where
        E: FnMut(PurchaseEvent),
        F: FnMut(Snapshot<'_>),
    {
        self.check(rule, config)?;
        let mut state = self.initial_state(rule, config.seed);
        let mut scratch = Vec::with_capacity(self.model.products);
        let mut buf = SnapshotBuffers::default();
        for t in 1..=config.steps {
            let event = self.step_with(&mut state, rule, &mut scratch);
            on_event(event);
            if t % config.sample_every == 0 || t == config.steps {
                self.snapshot(&state, rule, config.product, &mut buf);
                on_sample(Snapshot {
                    time: state.t,
                    x: &buf.x,
                    z: &buf.z,
                    aggregate: &buf.aggregate,
                    unstarted: buf.unstarted,
                });
            }
        }
        Ok(state)
    }

    fn snapshot(&self, state: &SimulationState, rule: &RecommendationRule, product: usize, buf: &mut SnapshotBuffers) {
        let model = self.model;
        let n = model.users();
        let m = model.products;
        let dists: Vec<Vec<f64>> = (0..n).map(|u| state.recommendation_distribution(rule, u)).collect();
        buf.aggregate.clear();
        buf.aggregate.resize(m, 0.0);
        for u in 0..n {
            let f = model.rates[u];
            if f == 0.0 {
                continue;
            }
            let a = model.alpha[u];
            let (src, w) = model.graph.in_arcs(u);
            for (p, agg) in buf.aggregate.iter_mut().enumerate() {
                let rec: f64 = src.iter().zip(w).map(|(&v, &w)| w * dists[v][p]).sum();
                *agg += f * ((1.0 - a) * model.preferences.get(u, p) + a * rec);
            }
        }
        buf.x.clear();
        buf.x.extend(dists.iter().map(|d| d[product]));
        buf.z = local_market_shares(state, product);
        buf.unstarted = (0..n).filter(|&u| state.totals[u] == state.initial_len[u]).count();
    }
}

#[derive(Debug, Default)]
struct SnapshotBuffers {
    x: Vec<f64>,
    z: Vec<f64>,
    aggregate: Vec<f64>,
    unstarted: usize,
}

/// View of the state at a sample time.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'s> {
    pub time: u64,
    /// Recommendation probability of the focus product, per user.
    pub x: &'s [f64],
    /// Local market share of the focus product since the start, per user.
    pub z: &'s [f64],
    /// Probability that the next purchase is each product.
    pub aggregate: &'s [f64],
    /// Users that had not bought anything yet.
    pub unstarted: usize,
}

/// Convenience wrapper: builds a [`Simulator`] and runs once.
pub fn run(
    model: &MarketModel,
    rule: &RecommendationRule,
    config: &RunConfig,
) -> Result<(Trajectory, SimulationState), SimulationError> {
    Simulator::new(model)?.run(rule, config)
}
