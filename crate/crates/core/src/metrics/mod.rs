//! Evaluation metrics: classification counts and scores, inter-rater
//! agreement, rating aggregation, relative improvement, Pareto frontiers
//! and the model-size series.

use alloc::string::String;

mod classification;
mod improvement;
mod kappa;
mod pareto;
mod ratings;
mod size_gain;

pub use classification::{classification_metrics, confusion, AbstainPolicy, ClassificationMetrics, ConfusionMatrix};
pub use improvement::{improvement, round_half_up, Improvement};
pub use kappa::{cohen_kappa, KappaResult};
pub use pareto::{mark_dominated, pareto_frontier, ParetoPoint};
pub use ratings::{
    aggregate_ratings, dimension_kappa, RaterScores, RatingError, RatingScale, ReasoningDimension,
    ReasoningScores,
};
pub use size_gain::{size_gain_series, ModelGain, ModelSize, SizeGainRow};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("paired inputs differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error(
        "chance agreement is 1 (both raters used one and the same category throughout); kappa is undefined"
    )]
    DegenerateAgreement,
    #[error("model `{0}` is not in the registry")]
    UnknownModel(String),
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
