use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::dataset::Label;
use crate::parser::Verdict;

/// How `Abstain` verdicts are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstainPolicy {
    /// Count as a miss: FN for an attack row, FP for a normal row.
    #[default]
    AsError,
    /// Leave out of the four cells; only `abstain_count` records them.
    Exclude,
}

impl AbstainPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            AbstainPolicy::AsError => "as_error",
            AbstainPolicy::Exclude => "exclude",
        }
    }
}

impl core::str::FromStr for AbstainPolicy {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_error" | "as-error" => Ok(AbstainPolicy::AsError),
            "exclude" => Ok(AbstainPolicy::Exclude),
            other => Err(alloc::format!("unknown abstain policy `{other}` (expected as_error or exclude)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub abstain_as_error: bool,
    pub abstain_count: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(verdicts: &[Verdict], labels: &[Label], policy: AbstainPolicy) -> Result<ConfusionMatrix, MetricError> {
    if verdicts.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            left: verdicts.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        abstain_as_error: policy == AbstainPolicy::AsError,
        ..ConfusionMatrix::default()
    };
    for (&verdict, &label) in verdicts.iter().zip(labels) {
        match (verdict, label) {
            (Verdict::Attack, Label::Attack) => cm.tp += 1,
            (Verdict::Normal, Label::Normal) => cm.tn += 1,
            (Verdict::Attack, Label::Normal) => cm.fp += 1,
            (Verdict::Normal, Label::Attack) => cm.fn_ += 1,
            (Verdict::Abstain, label) => {
                cm.abstain_count += 1;
                if policy == AbstainPolicy::AsError {
                    match label {
                        Label::Attack => cm.fn_ += 1,
                        Label::Normal => cm.fp += 1,
                    }
                }
            }
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy_pct: f64,
    /// TP + FP was zero, precision reported as 0.
    pub precision_undefined: bool,
    /// TP + FN was zero, recall reported as 0.
    pub recall_undefined: bool,
    pub support: u64,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics, MetricError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricError::EmptyInput("confusion matrix"));
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let accuracy = ratio(cm.tp + cm.tn, total);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
        accuracy_pct: accuracy * 100.0,
        precision_undefined: cm.tp + cm.fp == 0,
        recall_undefined: cm.tp + cm.fn_ == 0,
        support: total,
    })
}
