use std::io::Write;

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;

use recmarket::analysis::{
    compute_influence, distortion_from_steady_state, market_distortion, solve_steady_state, AnalysisError,
    InfluenceVector,
};
use recmarket::metrics::{
    classify_influencers, inequality_report, loglog_slope, rank_comparison, tail_stats, Classification,
    ClassifierThresholds, LogLogFit, MetricsError, TailStats,
};
use recmarket::simulation::{mean_tables, RunConfig, SimulationError, Simulator, TrajectoryTable};
use recmarket::{MarketModel, SupernodePolicy};

use crate::config::{self, AlphaSpec, Loaded, ResolvedModel};
use crate::output::{csv_field, write_user_column, OutDir};
use crate::{runtime, usage, AnalyzeArgs, Common, Failure, RankArgs, SimulateArgs, SupernodeArgs};

/// Input-dependent analysis failures are configuration errors; hitting an
/// iteration cap is a runtime failure.
fn analysis(e: AnalysisError) -> Failure {
    match e {
        AnalysisError::IterationCap { .. } => runtime(e),
        _ => usage(e),
    }
}

fn check_product(model: &MarketModel, product: usize) -> Result<(), Failure> {
    if product >= model.products {
        return Err(usage(anyhow!(
            "product {product} out of range for {} products",
            model.products
        )));
    }
    Ok(())
}

fn check_fraction(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(usage(anyhow!("{name} {v} must lie in (0, 1]")))
    }
}

fn setup(common: &Common) -> Result<(Loaded, OutDir), Failure> {
    for (name, v) in [("--epsilon", common.epsilon), ("--tol", common.tol)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(usage(anyhow!("{name} {v} must lie in (0, 1)")));
        }
    }
    let loaded = config::load(&common.model)?;
    check_product(&loaded.model, common.model.product)?;
    let out = OutDir::create(&common.out)?;
    Ok((loaded, out))
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    command: &'a str,
    model: &'a ResolvedModel,
    product: usize,
    epsilon: f64,
    tol: f64,
    #[serde(flatten)]
    extra: T,
}

fn write_resolved<T: Serialize>(out: &OutDir, command: &str, common: &Common, r: &ResolvedModel, extra: T) -> Result<(), Failure> {
    out.json(
        "config.resolved.json",
        &Resolved {
            command,
            model: r,
            product: common.model.product,
            epsilon: common.epsilon,
            tol: common.tol,
            extra,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct UserValue<'a> {
    user: usize,
    label: &'a str,
    value: f64,
}

fn user_value<'a>(labels: &'a [String], user: usize, value: f64) -> UserValue<'a> {
    UserValue {
        user,
        label: labels.get(user).map_or("supernode", String::as_str),
        value,
    }
}

#[derive(Serialize)]
struct DeltaReport<'a> {
    product: usize,
    /// Absent when the focus product has zero base share.
    delta: Option<f64>,
    delta_from_steady_state: Option<f64>,
    gamma_max: UserValue<'a>,
    /// Certified bound on the mass missing from the truncated influence series.
    epsilon: f64,
    iterations: usize,
    steady_state_residual: f64,
    steady_state_iterations: usize,
    graph: recmarket::graph::GraphSummary,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let common = &args.common;
    let (loaded, out) = setup(common)?;
    let Loaded { resolved, model, labels } = &loaded;
    let product = common.model.product;

    let steady = solve_steady_state(model, product, common.tol).map_err(analysis)?;
    let gamma = compute_influence(model, common.epsilon).map_err(analysis)?;
    let delta = match market_distortion(model, &gamma, product) {
        Ok(d) => Some(d),
        Err(AnalysisError::UndefinedDistortion) => {
            log::warn!("product {product} has zero base share; distortion is undefined");
            None
        }
        Err(e) => return Err(analysis(e)),
    };
    let report = DeltaReport {
        product,
        delta,
        delta_from_steady_state: distortion_from_steady_state(model, &steady, product).ok(),
        gamma_max: user_value(labels, gamma.gamma_max.user, gamma.gamma_max.value),
        epsilon: gamma.epsilon,
        iterations: gamma.iterations,
        steady_state_residual: steady.residual,
        steady_state_iterations: steady.iterations,
        graph: model.graph.summary(),
    };

    out.write("gamma.csv", |w| write_user_column(w, "gamma", labels, &gamma.gamma))?;
    out.write("x_infinity.csv", |w| write_user_column(w, "x_infinity", labels, &steady.x_infinity))?;
    out.json("delta.json", &report)?;
    write_resolved(&out, "analyze", common, resolved, ())?;
    println!(
        "delta = {}; gamma_max = {} (user {}, label {})",
        delta.map_or("undefined".to_string(), |d| d.to_string()),
        report.gamma_max.value,
        report.gamma_max.user,
        report.gamma_max.label
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationParams {
    rule: String,
    steps: u64,
    seeds: Vec<u64>,
    sample_every: u64,
    tail_fraction: f64,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    #[serde(flatten)]
    params: &'a SimulationParams,
    final_sup_norm_x: f64,
    final_sup_norm_z: f64,
    per_seed_final_sup_norm_z: Vec<f64>,
    loglog_sup_norm_x: Option<LogLogFit>,
    loglog_sup_norm_z: Option<LogLogFit>,
    tail_sup_norm_x: TailStats,
    tail_aggregate_share: TailStats,
    /// Absent when the focus product has zero base share.
    analytic_distortion: Option<f64>,
    simulated_distortion: Option<f64>,
    flags: Vec<&'static str>,
}

fn sim_error(e: SimulationError) -> Failure {
    match e {
        SimulationError::Rule(_) | SimulationError::ProductOutOfRange { .. } | SimulationError::Model(_) => usage(e),
        _ => runtime(e),
    }
}

fn fit(times: &[u64], values: &[f64], tail: f64) -> Option<LogLogFit> {
    let t: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    loglog_slope(&t, values, tail).ok()
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let common = &args.common;
    check_fraction("--tail-fraction", args.tail_fraction)?;
    let (loaded, out) = setup(common)?;
    let Loaded { resolved, model, .. } = &loaded;
    let product = common.model.product;
    let n = model.users() as u64;
    let params = SimulationParams {
        rule: args.rule.to_string(),
        steps: args.steps.unwrap_or(10_000 * n),
        seeds: (0..args.seeds).map(|i| resolved.seed.wrapping_add(i)).collect(),
        sample_every: args.sample_every.unwrap_or(n),
        tail_fraction: args.tail_fraction,
    };

    let steady = solve_steady_state(model, product, common.tol).map_err(analysis)?;
    let reference = &steady.x_infinity;
    let sim = Simulator::new(model).map_err(sim_error)?;
    let tables = params
        .seeds
        .par_iter()
        .map(|&seed| {
            let config = RunConfig {
                product,
                ..RunConfig::new(params.steps, seed, params.sample_every)
            };
            let mut table = TrajectoryTable::default();
            sim.run_with(&args.rule, &config, |s| table.push(s, reference))?;
            Ok(table)
        })
        .collect::<Result<Vec<_>, SimulationError>>()
        .map_err(sim_error)?;
    let mean = mean_tables(&tables).ok_or_else(|| runtime(anyhow!("runs disagree on sample times")))?;

    let focus_share: Vec<f64> = mean.aggregate.iter().map(|a| a[product]).collect();
    let tail = |v: &[f64]| tail_stats(v, args.tail_fraction).map_err(runtime);
    let tail_x = tail(&mean.sup_norm_x)?;
    let tail_share = tail(&focus_share)?;
    let b = model.focus_preferences(product);
    let base: f64 = model.rates.iter().zip(&b).map(|(f, b)| f * b).sum();
    let mut flags = Vec::new();
    if tail_x.range() <= 1e-12 && tail_x.mean > 1e-6 {
        flags.push("non-converging to x_infinity: constant gap");
    }
    if tail_share.range() > 0.1 {
        flags.push("oscillating aggregate share");
    }
    if !args.rule.fades() {
        flags.push("rule keeps old purchases at full weight; convergence to x_infinity is not guaranteed");
    }
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    let diagnostics = Diagnostics {
        params: &params,
        final_sup_norm_x: last(&mean.sup_norm_x),
        final_sup_norm_z: last(&mean.sup_norm_z),
        per_seed_final_sup_norm_z: tables.iter().map(|t| last(&t.sup_norm_z)).collect(),
        loglog_sup_norm_x: fit(&mean.times, &mean.sup_norm_x, args.tail_fraction),
        loglog_sup_norm_z: fit(&mean.times, &mean.sup_norm_z, args.tail_fraction),
        tail_sup_norm_x: tail_x,
        tail_aggregate_share: tail_share,
        analytic_distortion: distortion_from_steady_state(model, &steady, product).ok(),
        simulated_distortion: (base > 0.0).then(|| tail_share.mean / base),
        flags,
    };

    let comments = vec![
        format!("rule={}", params.rule),
        format!("seeds={}", join(&params.seeds)),
        format!("steps={} sample_every={} product={product}", params.steps, params.sample_every),
        "sup_norm columns are means over seeds of ||.-x_infinity||_inf".to_string(),
    ];
    out.write("trajectory.csv", |w| mean.write_csv(w, &comments))?;
    out.write("x_infinity.csv", |w| write_user_column(w, "x_infinity", &loaded.labels, reference))?;
    out.json("diagnostics.json", &diagnostics)?;
    write_resolved(&out, "simulate", common, resolved, &params)?;
    println!(
        "final sup-norm: x {} z {}{}",
        diagnostics.final_sup_norm_x,
        diagnostics.final_sup_norm_z,
        diagnostics.flags.iter().map(|f| format!("; {f}")).collect::<String>()
    );
    Ok(())
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct SupernodeReport<'a> {
    policy: String,
    product: usize,
    supernode: usize,
    gamma_supernode: f64,
    supernode_is_max: bool,
    gamma_max_before: UserValue<'a>,
    gamma_max_after: UserValue<'a>,
    delta_before: f64,
    delta_after: f64,
}

fn policy_name(p: SupernodePolicy) -> String {
    match p {
        SupernodePolicy::UniformRenormalize => "uniform".into(),
        SupernodePolicy::FixedShare(b) => format!("fixed:{b}"),
    }
}

pub fn supernode(args: &SupernodeArgs) -> Result<(), Failure> {
    let common = &args.common;
    let (loaded, out) = setup(common)?;
    let Loaded { resolved, model, labels } = &loaded;
    let product = common.model.product;

    let (mut after, sup) = model.with_supernode(args.supernode_policy, product).map_err(usage)?;
    // Users that had no in-arcs now follow the supernode; under a uniform
    // damping they pick up the common alpha like everyone else.
    if let AlphaSpec::Uniform(a) = resolved.alpha {
        after = after.with_uniform_alpha(a).map_err(usage)?;
    }
    let influence = |m: &MarketModel| -> Result<(InfluenceVector, f64), Failure> {
        let g = compute_influence(m, common.epsilon).map_err(analysis)?;
        let d = market_distortion(m, &g, product).map_err(analysis)?;
        Ok((g, d))
    };
    let (g0, d0) = influence(model)?;
    let (g1, d1) = influence(&after)?;
    let gamma_sup = g1.gamma[sup];
    let report = SupernodeReport {
        policy: policy_name(args.supernode_policy),
        product,
        supernode: sup,
        gamma_supernode: gamma_sup,
        supernode_is_max: g1.gamma[..sup].iter().all(|&g| g <= gamma_sup),
        gamma_max_before: user_value(labels, g0.gamma_max.user, g0.gamma_max.value),
        gamma_max_after: user_value(labels, g1.gamma_max.user, g1.gamma_max.value),
        delta_before: d0,
        delta_after: d1,
    };
    out.write("gamma.csv", |w| write_user_column(w, "gamma", labels, &g1.gamma))?;
    out.json("supernode.json", &report)?;
    #[derive(Serialize)]
    struct Extra {
        supernode_policy: String,
    }
    write_resolved(&out, "supernode", common, resolved, Extra { supernode_policy: report.policy.clone() })?;
    println!(
        "gamma(supernode) = {gamma_sup}; delta {d0} -> {d1}; supernode is max: {}",
        report.supernode_is_max
    );
    Ok(())
}

#[derive(Serialize)]
struct InequalitySummary {
    gini: f64,
    top_shares: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    thresholds: &'a ClassifierThresholds,
    gini: f64,
    #[serde(flatten)]
    classification: &'a Classification,
}

const TOP_QUANTILES: [f64; 3] = [0.001, 0.01, 0.1];

pub fn rank(args: &RankArgs) -> Result<(), Failure> {
    let common = &args.common;
    check_fraction("--top-fraction", args.top_fraction)?;
    let (loaded, out) = setup(common)?;
    let Loaded { resolved, model, labels } = &loaded;
    let n = model.users();
    if args.top_k > n {
        return Err(usage(anyhow!("--top-k {} exceeds the {n} users", args.top_k)));
    }

    let gamma = compute_influence(model, common.epsilon).map_err(analysis)?;
    let metric = |e: MetricsError| usage(e);
    let report = inequality_report(&gamma.gamma, &TOP_QUANTILES).map_err(metric)?;
    let outdeg = model.graph.outdegrees();
    let ranks = rank_comparison(&gamma.gamma, &outdeg, args.top_k).map_err(metric)?;
    let thresholds = ClassifierThresholds {
        min_followers: args.min_followers,
        top_fraction: args.top_fraction,
        ..ClassifierThresholds::default()
    };
    let classes = classify_influencers(&model.graph, &gamma.gamma, &thresholds).map_err(metric)?;

    out.write("gamma.csv", |w| write_user_column(w, "gamma", labels, &gamma.gamma))?;
    out.write("lorenz.csv", |w| {
        writeln!(w, "population,share")?;
        for p in &report.lorenz {
            writeln!(w, "{},{}", p.population, p.share)?;
        }
        Ok(())
    })?;
    out.write("ranks.csv", |w| {
        writeln!(w, "table,position,user,label,gamma,outdegree,gamma_rank,outdegree_rank")?;
        for (name, rows) in [("by_outdegree", &ranks.by_outdegree), ("by_gamma", &ranks.by_gamma)] {
            for (i, r) in rows.iter().enumerate() {
                writeln!(
                    w,
                    "{name},{},{},{},{},{},{},{}",
                    i + 1,
                    r.user,
                    csv_field(&labels[r.user]),
                    gamma.gamma[r.user],
                    outdeg[r.user],
                    r.gamma_rank,
                    r.outdegree_rank
                )?;
            }
        }
        Ok(())
    })?;
    out.json(
        "inequality.json",
        &InequalitySummary {
            gini: report.gini,
            top_shares: report.top_shares.clone(),
        },
    )?;
    out.json(
        "classify.json",
        &ClassifyReport {
            thresholds: &thresholds,
            gini: report.gini,
            classification: &classes,
        },
    )?;
    #[derive(Serialize)]
    struct Extra {
        top_k: usize,
    }
    write_resolved(&out, "rank", common, resolved, Extra { top_k: args.top_k })?;
    println!("gini = {}; coverage of top users = {}", report.gini, classes.coverage);
    Ok(())
}
