use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::prompt::Author;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSize {
    pub name: String,
    pub param_count_b: f64,
}

/// Framework-vs-no-framework gains for one (model, prompt author) pair,
/// as relative percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGain {
    pub model: String,
    pub author: Author,
    pub accuracy_gain: f64,
    pub reasoning_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeGainRow {
    pub param_count_b: f64,
    pub model: String,
    pub author: Author,
    pub accuracy_gain: f64,
    pub reasoning_gain: Option<f64>,
}

/// Rows ordered by parameter count (then model name, then author).
pub fn size_gain_series(results: &[ModelGain], registry: &[ModelSize]) -> Result<Vec<SizeGainRow>, MetricError> {
    let mut rows = results
        .iter()
        .map(|g| {
            let size = registry
                .iter()
                .find(|m| m.name == g.model)
                .ok_or_else(|| MetricError::UnknownModel(g.model.clone()))?;
            Ok(SizeGainRow {
                param_count_b: size.param_count_b,
                model: g.model.clone(),
                author: g.author,
                accuracy_gain: g.accuracy_gain,
                reasoning_gain: g.reasoning_gain,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    rows.sort_by(|a, b| {
        a.param_count_b
            .total_cmp(&b.param_count_b)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.author.cmp(&b.author))
    });
    Ok(rows)
}
