//! Model description files and their resolution into a [`MarketModel`].

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use serde::{Deserialize, Serialize};

use recmarket::graph::{parse_edge_list, InfluenceGraph};
use recmarket::model::{sample_histories, sample_preferences, PreferenceFamily};
use recmarket::{MarketModel, PreferenceMatrix, PreferenceSpec};

use crate::{usage, Failure, ModelArgs};

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_PRODUCTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformKeyword {
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampledKeyword {
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    /// Same damping for every user with in-arcs; 0 for the others.
    Uniform(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatesSpec {
    Named(UniformKeyword),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PreferenceSource {
    Sampled(PreferenceSpec),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistorySource {
    Named(SampledKeyword),
    Explicit(Vec<Vec<usize>>),
}

/// Contents of a `--model` JSON file. Every field is optional; command-line
/// flags take precedence. Per-user arrays are indexed by dense user id, i.e.
/// the order in which node labels first appear in the edge list.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    /// Edge list, relative to the model file's directory.
    pub graph_path: Option<PathBuf>,
    pub directed: Option<bool>,
    pub weighted: Option<bool>,
    /// The edge list names `follower followed` instead of `followed follower`.
    pub reverse: Option<bool>,
    pub alpha: Option<AlphaSpec>,
    pub rates: Option<RatesSpec>,
    pub products: Option<usize>,
    pub preferences: Option<PreferenceSource>,
    pub histories: Option<HistorySource>,
    pub seed: Option<u64>,
}

/// Fully resolved model description, echoed into `config.resolved.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedModel {
    pub graph_path: PathBuf,
    pub directed: bool,
    pub weighted: bool,
    pub reverse: bool,
    pub alpha: AlphaSpec,
    pub rates: RatesSpec,
    pub products: usize,
    pub preferences: PreferenceSource,
    pub histories: HistorySource,
    pub seed: u64,
}

/// A loaded model together with the original node labels.
#[derive(Debug)]
pub struct Loaded {
    pub resolved: ResolvedModel,
    pub model: MarketModel,
    pub labels: Vec<String>,
}

fn read_model_file(path: &Path) -> anyhow::Result<ModelFile> {
    let file = File::open(path).with_context(|| format!("cannot open model file {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("invalid model file {}", path.display()))
}

pub fn resolve(args: &ModelArgs) -> Result<ResolvedModel, Failure> {
    let file = match &args.model {
        Some(p) => read_model_file(p).map_err(usage)?,
        None => ModelFile::default(),
    };
    let base = args
        .model
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let graph_path = match (&args.graph, &file.graph_path) {
        (Some(g), _) => g.clone(),
        (None, Some(g)) => base.join(g),
        (None, None) => return Err(usage(anyhow!("no graph given: pass --graph or set graph_path in --model"))),
    };
    let products = args.products.or(file.products).unwrap_or(DEFAULT_PRODUCTS);
    let preferences = match (&args.preferences, args.imbalance, file.preferences) {
        (None, None, Some(p)) => p,
        (family, k, from_file) => {
            let mut spec = match from_file {
                Some(PreferenceSource::Sampled(s)) => s,
                Some(PreferenceSource::Matrix(_)) => {
                    return Err(usage(anyhow!(
                        "--preferences/--imbalance cannot override an explicit preference matrix"
                    )))
                }
                None => PreferenceSpec {
                    focus: args.product,
                    ..PreferenceSpec::default()
                },
            };
            if let Some(name) = family {
                spec.family = PreferenceFamily::from_name(name)
                    .ok_or_else(|| usage(anyhow!("unknown preference family `{name}`")))?;
            }
            if let Some(k) = k {
                spec.k = k;
            }
            PreferenceSource::Sampled(spec)
        }
    };
    let products = match &preferences {
        PreferenceSource::Matrix(rows) => rows.first().map_or(products, Vec::len),
        PreferenceSource::Sampled(_) => products,
    };
    Ok(ResolvedModel {
        graph_path,
        directed: !args.undirected && file.directed.unwrap_or(true),
        weighted: args.weighted || file.weighted.unwrap_or(false),
        reverse: args.reverse || file.reverse.unwrap_or(false),
        alpha: match args.alpha {
            Some(a) => AlphaSpec::Uniform(a),
            None => file.alpha.unwrap_or(AlphaSpec::Uniform(DEFAULT_ALPHA)),
        },
        rates: file.rates.unwrap_or(RatesSpec::Named(UniformKeyword::Uniform)),
        products,
        preferences,
        histories: file.histories.unwrap_or(HistorySource::Named(SampledKeyword::Sampled)),
        seed: args.seed.or(file.seed).unwrap_or(0),
    })
}

fn load_graph(r: &ResolvedModel) -> anyhow::Result<(InfluenceGraph, Vec<String>)> {
    let path = &r.graph_path;
    let file = File::open(path).with_context(|| format!("cannot open graph {}", path.display()))?;
    let parsed = parse_edge_list(BufReader::new(file), r.directed, r.weighted)
        .with_context(|| format!("malformed graph {}", path.display()))?;
    let mut graph = parsed.graph;
    if r.reverse {
        graph = graph.reverse();
    }
    let graph = if r.weighted {
        graph.normalize_in_weights()?
    } else {
        graph.with_uniform_in_weights()
    };
    Ok((graph, parsed.labels))
}

fn per_user<T: Clone>(name: &str, v: &[T], n: usize) -> anyhow::Result<Vec<T>> {
    if v.len() != n {
        bail!("{name} lists {} users, the graph has {n}", v.len());
    }
    Ok(v.to_vec())
}

/// Builds the model described by `r`. All failures are configuration errors.
pub fn build(r: ResolvedModel) -> Result<Loaded, Failure> {
    let (graph, labels) = load_graph(&r).map_err(usage)?;
    let n = graph.node_count();
    let model = (|| -> anyhow::Result<MarketModel> {
        if n == 0 {
            bail!("graph {} has no arcs", r.graph_path.display());
        }
        let alpha = match &r.alpha {
            AlphaSpec::Uniform(a) => {
                if !(0.0..1.0).contains(a) {
                    bail!("alpha {a} outside [0, 1)");
                }
                (0..n).map(|u| if graph.indegree(u) > 0 { *a } else { 0.0 }).collect()
            }
            AlphaSpec::PerUser(v) => per_user("alpha", v, n)?,
        };
        let rates = match &r.rates {
            RatesSpec::Named(UniformKeyword::Uniform) => vec![1.0 / n as f64; n],
            RatesSpec::PerUser(v) => per_user("rates", v, n)?,
        };
        let preferences = match &r.preferences {
            PreferenceSource::Sampled(spec) => sample_preferences(n, r.products, spec, r.seed)?,
            PreferenceSource::Matrix(rows) => PreferenceMatrix::from_rows(per_user("preferences", rows, n)?)?,
        };
        let histories = match &r.histories {
            HistorySource::Named(SampledKeyword::Sampled) => sample_histories(&preferences, r.seed.wrapping_add(1)),
            HistorySource::Explicit(h) => per_user("histories", h, n)?,
        };
        Ok(MarketModel::new(graph, alpha, rates, preferences, histories)?)
    })()
    .map_err(usage)?;
    Ok(Loaded {
        resolved: r,
        model,
        labels,
    })
}

pub fn load(args: &ModelArgs) -> Result<Loaded, Failure> {
    build(resolve(args)?)
}
