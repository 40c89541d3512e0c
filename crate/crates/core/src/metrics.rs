//! Distances between output trajectories.
//!
//! Distances are extended reals: a mode mismatch under the hybrid point
//! metric yields `f64::INFINITY`, which propagates through max/min.

use alloc::format;

use crate::jlss::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// `sup_t d(yS_t, yM_t)` over the common grid.
    Sup,
    /// `sup_t inf_τ d(yS_t, yM_τ)`.
    DirectionalHausdorff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointMetric {
    Euclidean,
    /// `+∞` when the modes differ, Euclidean distance otherwise.
    HybridEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    pub point_metric: PointMetric,
}

impl DistanceSpec {
    pub const SUP_EUCLIDEAN: DistanceSpec =
        DistanceSpec { kind: DistanceKind::Sup, point_metric: PointMetric::Euclidean };
}

impl Default for DistanceSpec {
    fn default() -> Self {
        Self::SUP_EUCLIDEAN
    }
}

fn point_distance(metric: PointMetric, ys: &Trajectory, i: usize, ym: &Trajectory, j: usize) -> f64 {
    if metric == PointMetric::HybridEuclidean {
        // presence of modes is checked by the caller
        let (ms, mm) = (ys.mode.as_ref().unwrap(), ym.mode.as_ref().unwrap());
        if ms[i] != mm[j] {
            return f64::INFINITY;
        }
    }
    let mut acc = 0.0;
    for r in 0..ys.values.nrows() {
        let d = ys.values[(r, i)] - ym.values[(r, j)];
        acc += d * d;
    }
    libm::sqrt(acc)
}

pub fn distance(spec: DistanceSpec, ys: &Trajectory, ym: &Trajectory) -> Result<f64> {
    if ys.output_dim() != ym.output_dim() {
        return Err(Error::dim(format!(
            "system output has dimension {}, model output {}",
            ys.output_dim(),
            ym.output_dim()
        )));
    }
    if spec.point_metric == PointMetric::HybridEuclidean && (ys.mode.is_none() || ym.mode.is_none()) {
        return Err(Error::MissingModes);
    }
    if ys.is_empty() || ym.is_empty() {
        return Err(Error::Empty);
    }
    match spec.kind {
        DistanceKind::Sup => {
            if ys.grid != ym.grid {
                return Err(Error::GridMismatch("sup distance needs identical grids".into()));
            }
            Ok((0..ys.len()).map(|k| point_distance(spec.point_metric, ys, k, ym, k)).fold(0.0, f64::max))
        }
        DistanceKind::DirectionalHausdorff => Ok((0..ys.len())
            .map(|i| {
                (0..ym.len()).map(|j| point_distance(spec.point_metric, ys, i, ym, j)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)),
    }
}

/// Squared distance, the quantity bounded by an accuracy function.
pub fn squared_distance(spec: DistanceSpec, ys: &Trajectory, ym: &Trajectory) -> Result<f64> {
    distance(spec, ys, ym).map(|d| d * d)
}
