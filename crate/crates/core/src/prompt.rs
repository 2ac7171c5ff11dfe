//! Prompt configuration, ablation and deterministic composition.
//!
//! A composed prompt is a system/user pair. The strategy's base instruction
//! opens the system text and the task question opens the user text; enabled
//! factor fragments follow in ascending factor order inside the section
//! their placement dictates, separated by blank lines. The flow record is
//! rendered last in the user text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FlowRecord;
use crate::digest::sha256_fields;
use crate::factors::{FactorId, FactorSet, Placement};
use crate::pack::TemplatePack;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template pack `{pack}` has no fragment for enabled factor {factor}")]
    MissingFragment { pack: String, factor: FactorId },
    #[error("template pack `{pack}` has no base template for strategy `{strategy}`")]
    MissingStrategy { pack: String, strategy: Strategy },
    #[error("factor {factor} references feature `{feature}`, which row {row_id} does not have")]
    Grounding {
        factor: FactorId,
        feature: String,
        row_id: u64,
    },
    #[error("configuration expects pack `{expected}` but `{found}` was supplied")]
    PackMismatch { expected: String, found: String },
    #[error("invalid prompt configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("cannot ablate a configuration without the framework")]
    AblateWithoutFramework,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FreeCot,
    EvidenceLockedCot,
    StructuredSecurityReasoning,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::FreeCot,
        Strategy::EvidenceLockedCot,
        Strategy::StructuredSecurityReasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FreeCot => "free_cot",
            Strategy::EvidenceLockedCot => "evidence_locked_cot",
            Strategy::StructuredSecurityReasoning => "structured_security_reasoning",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// Who wrote the wording of a template pack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Author {
    Manual,
    Generated,
}

impl Author {
    pub const ALL: [Author; 2] = [Author::Manual, Author::Generated];

    pub fn as_str(self) -> &'static str {
        match self {
            Author::Manual => "manual",
            Author::Generated => "generated",
        }
    }
}

impl fmt::Display for Author {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Author {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Author::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown prompt author `{s}` (expected manual or generated)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub strategy: Strategy,
    pub framework_enabled: bool,
    pub enabled_factors: FactorSet,
    pub author: Author,
    pub template_pack_id: String,
}

impl PromptConfig {
    /// Unstructured prompt: strategy base and task only.
    pub fn without_framework(strategy: Strategy, author: Author, pack_id: impl Into<String>) -> Self {
        Self {
            strategy,
            framework_enabled: false,
            enabled_factors: FactorSet::EMPTY,
            author,
            template_pack_id: pack_id.into(),
        }
    }

    /// Full framework: all sixteen factors enabled.
    pub fn with_framework(strategy: Strategy, author: Author, pack_id: impl Into<String>) -> Self {
        Self {
            strategy,
            framework_enabled: true,
            enabled_factors: FactorSet::ALL,
            author,
            template_pack_id: pack_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if !self.framework_enabled && !self.enabled_factors.is_empty() {
            return Err(PromptError::InvalidConfig(
                "factors enabled while the framework is off",
            ));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let factors = self.enabled_factors.bits().to_le_bytes();
        sha256_fields([
            self.strategy.as_str().as_bytes(),
            &[u8::from(self.framework_enabled)],
            factors.as_slice(),
            self.author.as_str().as_bytes(),
            self.template_pack_id.as_bytes(),
        ])
    }
}

/// Remove `removed` from a framework configuration; everything else is kept.
pub fn ablate(config: &PromptConfig, removed: FactorSet) -> Result<PromptConfig, PromptError> {
    if !config.framework_enabled {
        return Err(PromptError::AblateWithoutFramework);
    }
    Ok(PromptConfig {
        enabled_factors: config.enabled_factors.difference(removed),
        ..config.clone()
    })
}

/// Where one factor's fragment landed: a byte range in the section text
/// named by `placement`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub factor: FactorId,
    pub placement: Placement,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    pub system_text: String,
    pub user_text: String,
    pub factor_trace: Vec<TraceEntry>,
    pub record_rendering: String,
    pub config_digest: String,
}

impl ComposedPrompt {
    pub fn section(&self, placement: Placement) -> &str {
        match placement {
            Placement::System => &self.system_text,
            Placement::User => &self.user_text,
        }
    }

    /// Emitted text of a traced factor, if it is in the trace.
    pub fn fragment_text(&self, factor: FactorId) -> Option<&str> {
        self.factor_trace
            .iter()
            .find(|e| e.factor == factor)
            .and_then(|e| self.section(e.placement).get(e.start..e.end))
    }
}

pub const WORKFLOW_HEADERS: [&str; 3] = ["Threat Detection", "Risk Analysis", "Action Recommendation"];

const SEPARATOR: &str = "\n\n";
const RECORD_HEADER: &str = "Flow record:\n";

/// One `name: value` line per feature in record order. The label is not
/// part of `FlowRecord::features`, so it can never be rendered.
pub fn render_record(record: &FlowRecord) -> String {
    let mut out = String::new();
    for feature in &record.features {
        let _ = writeln!(out, "{}: {}", feature.name, feature.value);
    }
    out
}

pub fn compose_prompt(
    config: &PromptConfig,
    record: &FlowRecord,
    pack: &TemplatePack,
) -> Result<ComposedPrompt, PromptError> {
    config.validate()?;
    if config.template_pack_id != pack.id {
        return Err(PromptError::PackMismatch {
            expected: config.template_pack_id.clone(),
            found: pack.id.clone(),
        });
    }
    let base = pack
        .strategy_base(config.strategy)
        .ok_or_else(|| PromptError::MissingStrategy {
            pack: pack.id.clone(),
            strategy: config.strategy,
        })?;

    let mut system_text = String::from(base);
    if config.strategy == Strategy::StructuredSecurityReasoning {
        system_text.push_str(SEPARATOR);
        system_text.push_str("Follow the security analysis workflow and use these section headers in order:");
        for (i, header) in WORKFLOW_HEADERS.iter().enumerate() {
            let _ = write!(system_text, "\n{}. {}", i + 1, header);
        }
    }
    let mut user_text = String::from(pack.task());

    let mut factor_trace = Vec::with_capacity(config.enabled_factors.len());
    for factor in config.enabled_factors.iter() {
        let raw = pack
            .fragment(factor)
            .ok_or_else(|| PromptError::MissingFragment {
                pack: pack.id.clone(),
                factor,
            })?;
        let fragment = ground_fragment(raw, factor, record)?;
        let placement = factor.placement();
        let target = match placement {
            Placement::System => &mut system_text,
            Placement::User => &mut user_text,
        };
        target.push_str(SEPARATOR);
        let start = target.len();
        target.push_str(&fragment);
        factor_trace.push(TraceEntry {
            factor,
            placement,
            start,
            end: target.len(),
        });
    }

    let record_rendering = render_record(record);
    user_text.push_str(SEPARATOR);
    user_text.push_str(RECORD_HEADER);
    user_text.push_str(&record_rendering);

    Ok(ComposedPrompt {
        system_text,
        user_text,
        factor_trace,
        record_rendering,
        config_digest: config.digest(),
    })
}

/// Substitute `{{feature:NAME}}` placeholders with the record's value.
fn ground_fragment(raw: &str, factor: FactorId, record: &FlowRecord) -> Result<String, PromptError> {
    const OPEN: &str = "{{feature:";
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find(OPEN) {
        let after = &rest[pos + OPEN.len()..];
        let Some(close) = after.find("}}") else {
            break;
        };
        let name = after[..close].trim();
        let value = record.feature(name).ok_or_else(|| PromptError::Grounding {
            factor,
            feature: name.to_string(),
            row_id: record.row_id,
        })?;
        out.push_str(&rest[..pos]);
        let _ = write!(out, "{value}");
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
