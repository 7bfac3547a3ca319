//! Weighted directed influence graphs.
//!
//! An arc `v -> u` with weight `w` means that `v` can influence `u`: when `u`
//! follows a recommendation it picks `v` as recommender with probability `w`.
//! After normalization the weights entering every node with in-arcs sum to one.
//!
//! Storage is a pair of CSR indices (in-neighbors and out-neighbors) built once
//! at construction; graphs are immutable afterwards.

pub mod generators;
mod parse;

use serde::Serialize;
use thiserror::Error;

pub use parse::{parse_edge_list, ParsedGraph};

/// Tolerance on the in-weight sum of a normalized node.
pub const IN_WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("node count overflow: more than {max} distinct node ids")]
    NodeCountOverflow { max: usize },
    #[error("node {node} has in-arcs but all of them carry zero weight")]
    ZeroInWeight { node: usize },
    #[error("arc {source_node}->{target} references a node outside [0, {node_count})")]
    NodeOutOfRange {
        source_node: usize,
        target: usize,
        node_count: usize,
    },
    #[error("invalid weight {weight} on arc {source_node}->{target}")]
    InvalidWeight {
        source_node: usize,
        target: usize,
        weight: f64,
    },
    #[error("fixed supernode share must lie in (0, 1), got {0}")]
    InvalidShare(f64),
}

/// A weighted arc `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    nodes: Vec<usize>,
    weights: Vec<f64>,
}

impl Csr {
    /// Groups arcs by `key`, keeping `other` as the neighbor. Neighbors are
    /// sorted by id inside each group.
    fn build(
        node_count: usize,
        arcs: &[Arc],
        key: impl Fn(&Arc) -> usize,
        other: impl Fn(&Arc) -> usize,
    ) -> Self {
        let mut offsets = vec![0usize; node_count + 1];
        for a in arcs {
            offsets[key(a) + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut nodes = vec![0usize; arcs.len()];
        let mut weights = vec![0.0; arcs.len()];
        for a in arcs {
            let k = key(a);
            nodes[cursor[k]] = other(a);
            weights[cursor[k]] = a.weight;
            cursor[k] += 1;
        }
        for i in 0..node_count {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            let mut pairs: Vec<(usize, f64)> = nodes[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (j, (n, w)) in pairs.into_iter().enumerate() {
                nodes[lo + j] = n;
                weights[lo + j] = w;
            }
        }
        Self {
            offsets,
            nodes,
            weights,
        }
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.nodes[lo..hi], &self.weights[lo..hi])
    }

    fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Weighted directed graph among users.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    node_count: usize,
    incoming: Csr,
    outgoing: Csr,
}

/// JSON summary of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub arcs: usize,
    pub max_indegree: usize,
    pub max_outdegree: usize,
    pub dangling_count: usize,
}

/// How the supernode's arc is weighted against a node's existing in-arcs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupernodePolicy {
    /// The supernode arc counts as one more in-arc: it gets `1/(indeg+1)` and
    /// every prior weight is scaled by `indeg/(indeg+1)`.
    UniformRenormalize,
    /// The supernode arc gets weight `share`, prior weights are scaled by
    /// `1 - share`. Nodes without in-arcs get a single arc of weight 1.
    FixedShare(f64),
}

impl Default for SupernodePolicy {
    fn default() -> Self {
        SupernodePolicy::UniformRenormalize
    }
}

impl InfluenceGraph {
    /// Builds a graph from raw arcs. Duplicate arcs are merged by summing their
    /// weights; weights are kept as given (see [`InfluenceGraph::normalize_in_weights`]).
    pub fn from_arcs(node_count: usize, arcs: impl IntoIterator<Item = Arc>) -> Result<Self, GraphError> {
        let mut arcs: Vec<Arc> = arcs.into_iter().collect();
        for a in &arcs {
            if a.source >= node_count || a.target >= node_count {
                return Err(GraphError::NodeOutOfRange {
                    source_node: a.source,
                    target: a.target,
                    node_count,
                });
            }
            if !a.weight.is_finite() || a.weight < 0.0 {
                return Err(GraphError::InvalidWeight {
                    source_node: a.source,
                    target: a.target,
                    weight: a.weight,
                });
            }
        }
        arcs.sort_by_key(|a| (a.target, a.source));
        let mut merged: Vec<Arc> = Vec::with_capacity(arcs.len());
        for a in arcs {
            match merged.last_mut() {
                Some(last) if last.source == a.source && last.target == a.target => {
                    last.weight += a.weight
                }
                _ => merged.push(a),
            }
        }
        Ok(Self::from_merged(node_count, &merged))
    }

    /// Builds a graph with unit weights.
    pub fn from_unweighted(
        node_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::from_arcs(
            node_count,
            pairs.into_iter().map(|(source, target)| Arc {
                source,
                target,
                weight: 1.0,
            }),
        )
    }

    fn from_merged(node_count: usize, arcs: &[Arc]) -> Self {
        Self {
            node_count,
            incoming: Csr::build(node_count, arcs, |a| a.target, |a| a.source),
            outgoing: Csr::build(node_count, arcs, |a| a.source, |a| a.target),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.incoming.nodes.len()
    }

    /// In-neighbors of `u` and the weights `w_vu` of the arcs they send.
    pub fn in_arcs(&self, u: usize) -> (&[usize], &[f64]) {
        self.incoming.row(u)
    }

    /// Out-neighbors of `v` and the weights `w_vu` of the arcs to them.
    pub fn out_arcs(&self, v: usize) -> (&[usize], &[f64]) {
        self.outgoing.row(v)
    }

    pub fn indegree(&self, u: usize) -> usize {
        self.incoming.degree(u)
    }

    pub fn outdegree(&self, v: usize) -> usize {
        self.outgoing.degree(v)
    }

    pub fn indegrees(&self) -> Vec<usize> {
        (0..self.node_count).map(|u| self.indegree(u)).collect()
    }

    pub fn outdegrees(&self) -> Vec<usize> {
        (0..self.node_count).map(|v| self.outdegree(v)).collect()
    }

    /// Arcs in (target, source) order.
    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        (0..self.node_count).flat_map(move |u| {
            let (src, w) = self.in_arcs(u);
            src.iter().zip(w).map(move |(&v, &weight)| Arc {
                source: v,
                target: u,
                weight,
            })
        })
    }

    /// Sum of weights entering `u`.
    pub fn in_weight_sum(&self, u: usize) -> f64 {
        self.in_arcs(u).1.iter().sum()
    }

    /// True when every node with in-arcs has entering weights summing to one.
    pub fn is_normalized(&self) -> bool {
        (0..self.node_count).all(|u| {
            self.indegree(u) == 0 || (self.in_weight_sum(u) - 1.0).abs() <= IN_WEIGHT_TOLERANCE
        })
    }

    /// Scales the weights entering each node so they sum to one and drops
    /// zero-weight arcs. Nodes without in-arcs are left as they are.
    pub fn normalize_in_weights(&self) -> Result<Self, GraphError> {
        let mut arcs = Vec::with_capacity(self.arc_count());
        for u in 0..self.node_count {
            let (src, w) = self.in_arcs(u);
            if src.is_empty() {
                continue;
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(GraphError::ZeroInWeight { node: u });
            }
            arcs.extend(
                src.iter()
                    .zip(w)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&v, &w)| Arc {
                        source: v,
                        target: u,
                        weight: w / total,
                    }),
            );
        }
        Ok(Self::from_merged(self.node_count, &arcs))
    }

    /// Same arc set with weights `1/indeg(u)` on every arc entering `u`.
    pub fn with_uniform_in_weights(&self) -> Self {
        let arcs: Vec<Arc> = self
            .arcs()
            .map(|a| Arc {
                weight: 1.0 / self.indegree(a.target) as f64,
                ..a
            })
            .collect();
        Self::from_merged(self.node_count, &arcs)
    }

    /// Flips every arc and re-normalizes weights on the new in-sides.
    pub fn reverse(&self) -> Self {
        let arcs: Vec<Arc> = self
            .arcs()
            .filter(|a| a.weight > 0.0)
            .map(|a| Arc {
                source: a.target,
                target: a.source,
                weight: a.weight,
            })
            .collect();
        // Every surviving arc is strictly positive, so this cannot fail.
        Self::from_arcs(self.node_count, arcs)
            .and_then(|g| g.normalize_in_weights())
            .expect("positive arcs always normalize")
    }

    /// Adds a node with id `node_count` that points to every existing node.
    /// The new node has no in-arcs. The input is expected to be normalized.
    pub fn inject_supernode(&self, policy: SupernodePolicy) -> Result<(Self, usize), GraphError> {
        if let SupernodePolicy::FixedShare(beta) = policy {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(GraphError::InvalidShare(beta));
            }
        }
        let sup = self.node_count;
        let mut arcs = Vec::with_capacity(self.arc_count() + self.node_count);
        for u in 0..self.node_count {
            let (src, w) = self.in_arcs(u);
            let indeg = src.len();
            let (scale, share) = match policy {
                _ if indeg == 0 => (0.0, 1.0),
                SupernodePolicy::UniformRenormalize => {
                    let d = indeg as f64;
                    (d / (d + 1.0), 1.0 / (d + 1.0))
                }
                SupernodePolicy::FixedShare(beta) => (1.0 - beta, beta),
            };
            arcs.extend(src.iter().zip(w).map(|(&v, &w)| Arc {
                source: v,
                target: u,
                weight: w * scale,
            }));
            arcs.push(Arc {
                source: sup,
                target: u,
                weight: share,
            });
        }
        arcs.sort_by_key(|a| (a.target, a.source));
        Ok((Self::from_merged(self.node_count + 1, &arcs), sup))
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            nodes: self.node_count,
            arcs: self.arc_count(),
            max_indegree: (0..self.node_count).map(|u| self.indegree(u)).max().unwrap_or(0),
            max_outdegree: (0..self.node_count).map(|v| self.outdegree(v)).max().unwrap_or(0),
            dangling_count: (0..self.node_count).filter(|&u| self.indegree(u) == 0).count(),
        }
    }
}
