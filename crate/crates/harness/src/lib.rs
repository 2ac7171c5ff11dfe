//! Experiment harness around `structcot_core`: CSV ingest, the
//! chat-completions gateway, manifests, the JSONL run store and runner,
//! blinded rating sheets and report tables.

pub mod error;
pub mod gateway;
pub mod ingest;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod sheets;
pub mod store;

pub use error::{Error, Result};
pub use gateway::{Gateway, GatewaySettings, ModelFamily, ModelResponse, ModelSpec, TransportStatus};
pub use manifest::{Condition, ExperimentManifest, Framework, KappaMode, Overrides, ResolvedManifest};
pub use runner::{prepare, run, Prepared, RunOptions, RunSummary};
pub use store::{RunRecord, RunStore};
