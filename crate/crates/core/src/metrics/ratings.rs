use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{cohen_kappa, compensated_sum, KappaResult, MetricError};

/// Human-rated reasoning quality dimensions. `Confidence` is optional and
/// off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningDimension {
    Evidence,
    Faithfulness,
    Structure,
    Taxonomy,
    Confidence,
}

impl ReasoningDimension {
    pub const DEFAULT: [ReasoningDimension; 4] = [
        ReasoningDimension::Evidence,
        ReasoningDimension::Faithfulness,
        ReasoningDimension::Structure,
        ReasoningDimension::Taxonomy,
    ];

    pub const ALL: [ReasoningDimension; 5] = [
        ReasoningDimension::Evidence,
        ReasoningDimension::Faithfulness,
        ReasoningDimension::Structure,
        ReasoningDimension::Taxonomy,
        ReasoningDimension::Confidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningDimension::Evidence => "evidence",
            ReasoningDimension::Faithfulness => "faithfulness",
            ReasoningDimension::Structure => "structure",
            ReasoningDimension::Taxonomy => "taxonomy",
            ReasoningDimension::Confidence => "confidence",
        }
    }
}

impl fmt::Display for ReasoningDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ReasoningDimension::ALL
            .into_iter()
            .find(|d| d.as_str() == lower)
            .ok_or_else(|| format!("unknown reasoning dimension `{s}`"))
    }
}

/// Inclusive integer rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: u8,
    pub max: u8,
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 0, max: 2 }
    }
}

impl RatingScale {
    pub fn contains(&self, v: u8) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

/// One rater's scores: sample key -> dimension -> score.
pub type RaterScores = BTreeMap<String, BTreeMap<ReasoningDimension, u8>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatingError {
    #[error("no rated samples")]
    NoSamples,
    #[error("rating coverage mismatch; missing cells: {}", fmt_cells(.missing))]
    Coverage { missing: Vec<(String, String, ReasoningDimension)> },
    #[error("rater {rater}, sample `{sample}`, {dimension}: score {value} is outside {min}..={max}")]
    OutOfScale {
        rater: String,
        sample: String,
        dimension: ReasoningDimension,
        value: u8,
        min: u8,
        max: u8,
    },
}

fn fmt_cells(cells: &[(String, String, ReasoningDimension)]) -> String {
    let mut out = String::new();
    for (i, (rater, sample, dim)) in cells.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{rater}:{sample}/{dim}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningScores {
    pub samples: usize,
    /// Mean over samples of the per-sample two-rater mean.
    pub means: BTreeMap<ReasoningDimension, f64>,
    pub rater_a_means: BTreeMap<ReasoningDimension, f64>,
    pub rater_b_means: BTreeMap<ReasoningDimension, f64>,
}

fn check_cells(
    name: &str,
    own: &RaterScores,
    other: &RaterScores,
    dims: &[ReasoningDimension],
    scale: RatingScale,
    missing: &mut Vec<(String, String, ReasoningDimension)>,
) -> Result<(), RatingError> {
    for sample in own.keys().chain(other.keys().filter(|k| !own.contains_key(*k))) {
        for &dim in dims {
            match own.get(sample).and_then(|row| row.get(&dim)) {
                None => missing.push((name.into(), sample.clone(), dim)),
                Some(&v) if !scale.contains(v) => {
                    return Err(RatingError::OutOfScale {
                        rater: name.into(),
                        sample: sample.clone(),
                        dimension: dim,
                        value: v,
                        min: scale.min,
                        max: scale.max,
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Average two raters' scores per dimension. Both raters must cover the
/// same samples and every requested dimension.
pub fn aggregate_ratings(
    rater_a: &RaterScores,
    rater_b: &RaterScores,
    dims: &[ReasoningDimension],
    scale: RatingScale,
) -> Result<ReasoningScores, RatingError> {
    if rater_a.is_empty() && rater_b.is_empty() {
        return Err(RatingError::NoSamples);
    }
    let mut missing = Vec::new();
    check_cells("A", rater_a, rater_b, dims, scale, &mut missing)?;
    check_cells("B", rater_b, rater_a, dims, scale, &mut missing)?;
    if !missing.is_empty() {
        return Err(RatingError::Coverage { missing });
    }
    let n = rater_a.len() as f64;
    let mut means = BTreeMap::new();
    let mut a_means = BTreeMap::new();
    let mut b_means = BTreeMap::new();
    for &dim in dims {
        let a = compensated_sum(rater_a.values().map(|r| f64::from(r[&dim])));
        let b = compensated_sum(rater_b.values().map(|r| f64::from(r[&dim])));
        let per_sample = compensated_sum(
            rater_a
                .iter()
                .map(|(k, r)| (f64::from(r[&dim]) + f64::from(rater_b[k][&dim])) / 2.0),
        );
        means.insert(dim, per_sample / n);
        a_means.insert(dim, a / n);
        b_means.insert(dim, b / n);
    }
    Ok(ReasoningScores {
        samples: rater_a.len(),
        means,
        rater_a_means: a_means,
        rater_b_means: b_means,
    })
}

/// Kappa for one dimension over the samples both raters scored.
pub fn dimension_kappa(
    rater_a: &RaterScores,
    rater_b: &RaterScores,
    dim: ReasoningDimension,
) -> Result<KappaResult<u8>, MetricError> {
    let (a, b): (Vec<u8>, Vec<u8>) = rater_a
        .iter()
        .filter_map(|(k, row)| Some((*row.get(&dim)?, *rater_b.get(k)?.get(&dim)?)))
        .unzip();
    cohen_kappa(&a, &b)
}
