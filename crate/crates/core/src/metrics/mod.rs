//! Inequality, ranking and convergence diagnostics.

mod influencers;

use serde::Serialize;
use thiserror::Error;

use crate::model::MarketModel;
use crate::simulation::Trajectory;

pub use influencers::{classify_influencers, Classification, ClassifierThresholds, InfluencerTag};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("values sum to zero")]
    ZeroTotal,
    #[error("negative or non-finite value {value} at index {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("top-k of {k} exceeds the {n} available users")]
    TopKTooLarge { k: usize, n: usize },
    #[error("{0} must lie in (0, 1]")]
    InvalidFraction(f64),
    #[error("need at least two points with positive time to fit, got {0}")]
    TooFewPoints(usize),
    #[error("{0}")]
    Dimension(String),
}

/// Lorenz curve point: (population fraction, cumulative value fraction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorenzPoint {
    pub population: f64,
    pub share: f64,
}

fn checked_sorted(values: &[f64]) -> Result<(Vec<f64>, f64), MetricsError> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(MetricsError::InvalidValue { index, value });
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(MetricsError::ZeroTotal);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted, total))
}

/// Lorenz curve of `values`, from (0, 0) to (1, 1), one point per entry.
pub fn lorenz_curve(values: &[f64]) -> Result<Vec<LorenzPoint>, MetricsError> {
    let (sorted, total) = checked_sorted(values)?;
    let n = sorted.len() as f64;
    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push(LorenzPoint {
        population: 0.0,
        share: 0.0,
    });
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        points.push(LorenzPoint {
            population: (i + 1) as f64 / n,
            share: acc / total,
        });
    }
    // pin the endpoint against rounding
    if let Some(last) = points.last_mut() {
        last.share = 1.0;
    }
    Ok(points)
}

/// Gini index `sum_i (2i - n - 1) y_(i) / (n sum y)` over ascending `y`.
pub fn gini(values: &[f64]) -> Result<f64, MetricsError> {
    let (sorted, total) = checked_sorted(values)?;
    let n = sorted.len() as f64;
    let s: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, y)| (2.0 * (i + 1) as f64 - n - 1.0) * y)
        .sum();
    Ok(s / (n * total))
}

/// Twice the area between a Lorenz curve and the diagonal (trapezoid rule).
pub fn gini_from_lorenz(points: &[LorenzPoint]) -> f64 {
    let under: f64 = points
        .windows(2)
        .map(|w| (w[1].population - w[0].population) * (w[0].share + w[1].share) / 2.0)
        .sum();
    1.0 - 2.0 * under
}

/// Fraction of the total held by the top `q` fraction of entries (rounded up
/// to whole entries).
pub fn top_share(values: &[f64], q: f64) -> Result<f64, MetricsError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(MetricsError::InvalidFraction(q));
    }
    let (sorted, total) = checked_sorted(values)?;
    let k = ((q * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted.iter().rev().take(k).sum::<f64>() / total)
}

/// Lorenz curve, Gini index and top shares of a vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lorenz: Vec<LorenzPoint>,
    pub gini: f64,
    /// `(q, share held by the top q fraction)`.
    pub top_shares: Vec<(f64, f64)>,
}

pub fn inequality_report(values: &[f64], quantiles: &[f64]) -> Result<InequalityReport, MetricsError> {
    Ok(InequalityReport {
        lorenz: lorenz_curve(values)?,
        gini: gini(values)?,
        top_shares: quantiles
            .iter()
            .map(|&q| top_share(values, q).map(|s| (q, s)))
            .collect::<Result<_, _>>()?,
    })
}

/// 1-based ranks by descending value, ties broken by ascending index.
pub fn descending_ranks<T: PartialOrd + Copy>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; values.len()];
    for (r, &u) in order.iter().enumerate() {
        rank[u] = r + 1;
    }
    rank
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankRow {
    pub user: usize,
    pub gamma_rank: usize,
    pub outdegree_rank: usize,
}

/// Top-`k` users by out-degree with their influence rank, and top-`k` by
/// influence with their out-degree rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankComparison {
    pub by_outdegree: Vec<RankRow>,
    pub by_gamma: Vec<RankRow>,
}

pub fn rank_comparison(gamma: &[f64], outdegrees: &[usize], k: usize) -> Result<RankComparison, MetricsError> {
    let n = gamma.len();
    if outdegrees.len() != n {
        return Err(MetricsError::Dimension(format!(
            "{} out-degrees for {n} influence values",
            outdegrees.len()
        )));
    }
    if k > n {
        return Err(MetricsError::TopKTooLarge { k, n });
    }
    let gr = descending_ranks(gamma);
    let dr = descending_ranks(outdegrees);
    let table = |ranks: &[usize]| {
        let mut by_rank = vec![0; n];
        for (u, &r) in ranks.iter().enumerate() {
            by_rank[r - 1] = u;
        }
        by_rank[..k]
            .iter()
            .map(|&u| RankRow {
                user: u,
                gamma_rank: gr[u],
                outdegree_rank: dr[u],
            })
            .collect()
    };
    Ok(RankComparison {
        by_outdegree: table(&dr),
        by_gamma: table(&gr),
    })
}

/// Which per-user snapshot to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotField {
    /// Recommendation probabilities.
    X,
    /// Local market shares since the start.
    Z,
}

/// `||a - b||_inf`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `||snapshot - reference||_inf` at every sample of `traj`.
pub fn sup_norm_series(traj: &Trajectory, reference: &[f64], field: SnapshotField) -> Vec<f64> {
    let snaps = match field {
        SnapshotField::X => &traj.x,
        SnapshotField::Z => &traj.z,
    };
    snaps
        .iter()
        .map(|s| sup_distance(s, reference))
        .collect()
}

/// Least-squares line through `(ln t, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Tail values that were not positive and were raised to machine epsilon.
    pub floored: usize,
}

fn tail_start(len: usize, fraction: f64) -> Result<usize, MetricsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MetricsError::InvalidFraction(fraction));
    }
    let keep = ((fraction * len as f64).ceil() as usize).clamp(1.min(len), len);
    Ok(len - keep)
}

/// Fits `ln value = slope ln t + intercept` over the last `tail_fraction` of
/// the samples.
pub fn loglog_slope(times: &[f64], values: &[f64], tail_fraction: f64) -> Result<LogLogFit, MetricsError> {
    if times.len() != values.len() {
        return Err(MetricsError::Dimension(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    let start = tail_start(times.len(), tail_fraction)?;
    let mut floored = 0;
    let pts: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, &v)| {
            let v = if v > 0.0 {
                v
            } else {
                floored += 1;
                f64::EPSILON
            };
            (t.ln(), v.ln())
        })
        .collect();
    if floored > 0 {
        log::warn!("{floored} non-positive value(s) floored at machine epsilon before the log-log fit");
    }
    if pts.len() < 2 {
        return Err(MetricsError::TooFewPoints(pts.len()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        points: pts.len(),
        floored,
    })
}

/// Summary of the last `fraction` of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl TailStats {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

pub fn tail_stats(values: &[f64], fraction: f64) -> Result<TailStats, MetricsError> {
    let start = tail_start(values.len(), fraction)?;
    let tail = &values[start..];
    if tail.is_empty() {
        return Err(MetricsError::TooFewPoints(0));
    }
    let k = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / k;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    Ok(TailStats {
        mean,
        std: var.sqrt(),
        min: tail.iter().copied().fold(f64::INFINITY, f64::min),
        max: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Simulated market distortion: mean probability that the next purchase is
/// the trajectory's focus product over the last `fraction` of samples,
/// divided by the recommendation-free share `f . b`.
pub fn simulated_distortion(traj: &Trajectory, model: &MarketModel, fraction: f64) -> Result<f64, MetricsError> {
    let series: Vec<f64> = traj.aggregate.iter().map(|a| a[traj.product]).collect();
    let stats = tail_stats(&series, fraction)?;
    let b = model.focus_preferences(traj.product);
    let base: f64 = model.rates.iter().zip(&b).map(|(f, b)| f * b).sum();
    if !(base > 0.0) {
        return Err(MetricsError::ZeroTotal);
    }
    Ok(stats.mean / base)
}
