//! Core of the structured chain-of-thought evaluation harness.
//!
//! Everything in this crate is pure and allocation-only: the sixteen
//! reasoning-control factors and their placement, deterministic prompt
//! composition from template packs, the tolerant response parser, dataset
//! sampling, and the evaluation metrics (confusion counts, accuracy /
//! precision / recall / F1, Cohen's kappa, rating aggregation, relative
//! improvement, Pareto frontiers and size-vs-gain series).
//!
//! File formats, HTTP transport and the CLI live in the `structcot` crate.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod digest;
pub mod factors;
pub mod metrics;
pub mod pack;
pub mod parser;
pub mod prompt;

pub use dataset::{
    sample_dataset, ColumnKind, ColumnSpec, DatasetError, DatasetSample, DatasetSchema,
    Feature, FeatureValue, FlowRecord, Label, LabelDistribution, SampleStrategy,
};
pub use factors::{catalog, Dimension, FactorId, FactorSet, FactorSpec, Placement};
pub use metrics::{
    aggregate_ratings, classification_metrics, cohen_kappa, confusion, improvement,
    pareto_frontier, size_gain_series, AbstainPolicy, ClassificationMetrics, ConfusionMatrix,
    Improvement, KappaResult, MetricError, ModelGain, ModelSize, ParetoPoint, RaterScores,
    RatingError, RatingScale, ReasoningDimension, ReasoningScores, SizeGainRow,
};
pub use pack::{PackError, TemplatePack};
pub use parser::{compliance_summary, parse_response, ComplianceRates, ParsedAnalysis, Verdict};
pub use prompt::{
    ablate, compose_prompt, render_record, Author, ComposedPrompt, PromptConfig, PromptError,
    Strategy, TraceEntry,
};
