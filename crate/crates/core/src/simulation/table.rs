use std::io::{self, Write};

use crate::metrics::{sup_distance, sup_norm_series, SnapshotField};

use super::{Snapshot, Trajectory};

/// Per-sample convergence summary of one run, or the mean of several.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<u64>,
    pub sup_norm_x: Vec<f64>,
    pub sup_norm_z: Vec<f64>,
    /// `aggregate[i][p]`: probability that the next purchase is `p`.
    pub aggregate: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    /// Distances of `x` and `z` to `reference` (usually the analytic steady
    /// state) at every sample.
    pub fn from_trajectory(traj: &Trajectory, reference: &[f64]) -> Self {
        Self {
            times: traj.times.clone(),
            sup_norm_x: sup_norm_series(traj, reference, SnapshotField::X),
            sup_norm_z: sup_norm_series(traj, reference, SnapshotField::Z),
            aggregate: traj.aggregate.clone(),
        }
    }

    /// Appends one sample, measuring distances to `reference`. Meant as the
    /// body of a [`super::Simulator::run_with`] callback.
    pub fn push(&mut self, snapshot: Snapshot<'_>, reference: &[f64]) {
        self.times.push(snapshot.time);
        self.sup_norm_x.push(sup_distance(snapshot.x, reference));
        self.sup_norm_z.push(sup_distance(snapshot.z, reference));
        self.aggregate.push(snapshot.aggregate.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,sup_norm_x,sup_norm_z,aggregate_share_0,...`,
    /// preceded by `comments` as `# ` lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let products = self.aggregate.first().map_or(0, Vec::len);
        write!(w, "t,sup_norm_x,sup_norm_z")?;
        for p in 0..products {
            write!(w, ",aggregate_share_{p}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{},{},{}", self.times[i], self.sup_norm_x[i], self.sup_norm_z[i])?;
            for a in &self.aggregate[i] {
                write!(w, ",{a}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Entrywise mean of tables sharing the same sample times. Summation runs in
/// slice order.
pub fn mean_tables(tables: &[TrajectoryTable]) -> Option<TrajectoryTable> {
    let first = tables.first()?;
    if tables.iter().any(|t| t.times != first.times) {
        return None;
    }
    let k = tables.len() as f64;
    let mean = |get: &dyn Fn(&TrajectoryTable) -> &Vec<f64>| -> Vec<f64> {
        (0..first.len())
            .map(|i| tables.iter().map(|t| get(t)[i]).sum::<f64>() / k)
            .collect()
    };
    let products = first.aggregate.first().map_or(0, Vec::len);
    let aggregate = (0..first.len())
        .map(|i| {
            (0..products)
                .map(|p| tables.iter().map(|t| t.aggregate[i][p]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    Some(TrajectoryTable {
        times: first.times.clone(),
        sup_norm_x: mean(&|t| &t.sup_norm_x),
        sup_norm_z: mean(&|t| &t.sup_norm_z),
        aggregate,
    })
}
