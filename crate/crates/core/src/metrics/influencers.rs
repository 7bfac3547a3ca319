use std::collections::BTreeMap;

use serde::Serialize;

use super::{descending_ranks, MetricsError};
use crate::graph::InfluenceGraph;

/// Structural reason a user may be influential. Followers of `u` are the
/// targets of its out-arcs; a user's followed-count is its in-degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfluencerTag {
    /// Out-degree at least the follower threshold.
    ManyFollowers,
    /// At least `dedicated_min_group` followers who each follow at most
    /// `dedicated_max_followed` users.
    DedicatedCommunity,
    /// Followed by a top-influence user who follows at most
    /// `confidant_max_followed` users.
    ConfidantOfInfluencer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifierThresholds {
    /// Follower count for `ManyFollowers`; `None` uses the 99.9th percentile
    /// of out-degrees.
    pub min_followers: Option<usize>,
    pub dedicated_max_followed: usize,
    pub dedicated_min_group: usize,
    pub confidant_max_followed: usize,
    /// Fraction of users, by influence, considered top users.
    pub top_fraction: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            min_followers: None,
            dedicated_max_followed: 3,
            dedicated_min_group: 30,
            confidant_max_followed: 10,
            top_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// Follower threshold actually used.
    pub min_followers: usize,
    /// Top users by influence, in rank order.
    pub top_users: Vec<usize>,
    /// Tags of every tagged user.
    pub tags: BTreeMap<usize, Vec<InfluencerTag>>,
    /// Users carrying each tag.
    pub by_tag: BTreeMap<InfluencerTag, Vec<usize>>,
    /// Fraction of top users carrying at least one tag.
    pub coverage: f64,
}

/// Nearest-rank percentile of the out-degrees (`q` in (0, 1]).
fn outdegree_percentile(graph: &InfluenceGraph, q: f64) -> usize {
    let mut d = graph.outdegrees();
    d.sort_unstable();
    if d.is_empty() {
        return 0;
    }
    let idx = ((q * d.len() as f64).ceil() as usize).clamp(1, d.len()) - 1;
    d[idx]
}

pub fn classify_influencers(
    graph: &InfluenceGraph,
    gamma: &[f64],
    thresholds: &ClassifierThresholds,
) -> Result<Classification, MetricsError> {
    let n = graph.node_count();
    if gamma.len() != n {
        return Err(MetricsError::Dimension(format!("{} influence values for {n} users", gamma.len())));
    }
    let q = thresholds.top_fraction;
    if !(q > 0.0 && q <= 1.0) {
        return Err(MetricsError::InvalidFraction(q));
    }
    let min_followers = thresholds
        .min_followers
        .unwrap_or_else(|| outdegree_percentile(graph, 0.999))
        .max(1);
    let indeg = graph.indegrees();

    let top_k = ((q * n as f64).ceil() as usize).min(n);
    let ranks = descending_ranks(gamma);
    let mut top_users = vec![0; n];
    for (u, &r) in ranks.iter().enumerate() {
        top_users[r - 1] = u;
    }
    top_users.truncate(top_k);

    let mut tags: BTreeMap<usize, Vec<InfluencerTag>> = BTreeMap::new();
    for u in 0..n {
        let followers = graph.out_arcs(u).0;
        let real = followers.iter().filter(|&&w| w != u);
        let mut t = Vec::new();
        if real.clone().count() >= min_followers {
            t.push(InfluencerTag::ManyFollowers);
        }
        if real.filter(|&&w| indeg[w] <= thresholds.dedicated_max_followed).count() >= thresholds.dedicated_min_group {
            t.push(InfluencerTag::DedicatedCommunity);
        }
        if !t.is_empty() {
            tags.insert(u, t);
        }
    }
    for &v in &top_users {
        if indeg[v] > thresholds.confidant_max_followed {
            continue;
        }
        for &u in graph.in_arcs(v).0 {
            if u == v {
                continue;
            }
            let t = tags.entry(u).or_default();
            if !t.contains(&InfluencerTag::ConfidantOfInfluencer) {
                t.push(InfluencerTag::ConfidantOfInfluencer);
            }
        }
    }

    let mut by_tag: BTreeMap<InfluencerTag, Vec<usize>> = BTreeMap::new();
    for (&u, t) in &tags {
        for &tag in t {
            by_tag.entry(tag).or_default().push(u);
        }
    }
    let covered = top_users.iter().filter(|u| tags.contains_key(u)).count();
    let coverage = if top_users.is_empty() {
        0.0
    } else {
        covered as f64 / top_users.len() as f64
    };
    Ok(Classification {
        min_followers,
        top_users,
        tags,
        by_tag,
        coverage,
    })
}
