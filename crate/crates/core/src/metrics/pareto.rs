use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// One condition on the (detection accuracy, reasoning score) plane.
/// Both axes are maximised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub condition: String,
    pub x: f64,
    pub y: f64,
    pub dominated: bool,
}

impl ParetoPoint {
    pub fn new(condition: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            condition: condition.into(),
            x,
            y,
            dominated: false,
        }
    }
}

/// Copy of `points` with every `dominated` flag set, in input order.
///
/// Sort by x descending and sweep groups of equal x: inside a group only
/// the points at the group's best y survive, and they survive only if no
/// point with strictly larger x reaches that y.
pub fn mark_dominated(points: &[ParetoPoint]) -> Result<Vec<ParetoPoint>, MetricError> {
    if points.is_empty() {
        return Err(MetricError::EmptyInput("point set"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(MetricError::NonFinite("point set"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].x.total_cmp(&points[a].x));

    let mut out: Vec<ParetoPoint> = points.to_vec();
    let mut best_right = f64::NEG_INFINITY;
    let mut g = 0;
    while g < order.len() {
        let x = points[order[g]].x;
        let end = order[g..]
            .iter()
            .position(|&i| points[i].x != x)
            .map_or(order.len(), |p| g + p);
        let group_best = order[g..end]
            .iter()
            .map(|&i| points[i].y)
            .fold(f64::NEG_INFINITY, f64::max);
        for &i in &order[g..end] {
            out[i].dominated = points[i].y < group_best || group_best <= best_right;
        }
        best_right = best_right.max(group_best);
        g = end;
    }
    Ok(out)
}

/// The non-dominated points, ascending by x (ties: descending y, then
/// input order). Exact duplicates are all kept.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Result<Vec<ParetoPoint>, MetricError> {
    let mut frontier: Vec<ParetoPoint> = mark_dominated(points)?
        .into_iter()
        .filter(|p| !p.dominated)
        .collect();
    frontier.sort_by(|a, b| match a.x.total_cmp(&b.x) {
        Ordering::Equal => b.y.total_cmp(&a.y),
        other => other,
    });
    Ok(frontier)
}
