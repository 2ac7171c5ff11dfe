//! Template packs: the wording behind each factor and strategy.
//!
//! A pack is a plain-text file. Directives (`@id`, `@author`) come first,
//! then bracketed sections whose body runs until the next section:
//!
//! ```text
//! @id manual-v1
//! @author manual
//!
//! [strategy free_cot]
//! Reason through the problem step by step.
//!
//! [task]
//! Classify the flow below.
//!
//! [factor F1]
//! You are a security operations analyst.
//! ```
//!
//! Lines starting with `#` are comments. Leading and trailing blank lines of
//! a body are dropped; interior line breaks are kept verbatim.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::factors::FactorId;
use crate::prompt::{Author, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackError {
    #[error("pack line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("pack is missing the `@{0}` directive")]
    MissingDirective(&'static str),
    #[error("pack `{pack}` has no fragment for factor {factor}")]
    MissingFactor { pack: String, factor: FactorId },
    #[error("pack `{pack}` has no base template for strategy `{strategy}`")]
    MissingStrategy { pack: String, strategy: Strategy },
    #[error("pack `{0}` has no [task] section")]
    MissingTask(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePack {
    pub id: String,
    pub author: Author,
    factors: BTreeMap<FactorId, String>,
    strategies: BTreeMap<Strategy, String>,
    task: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Factor(FactorId),
    Strategy(Strategy),
    Task,
}

impl TemplatePack {
    /// Parse a pack and require every factor and strategy to be present.
    pub fn parse(text: &str) -> Result<TemplatePack, PackError> {
        let pack = Self::parse_partial(text)?;
        if let Some(&factor) = FactorId::ALL.iter().find(|f| !pack.factors.contains_key(f)) {
            return Err(PackError::MissingFactor {
                pack: pack.id,
                factor,
            });
        }
        if let Some(&strategy) = Strategy::ALL
            .iter()
            .find(|s| !pack.strategies.contains_key(s))
        {
            return Err(PackError::MissingStrategy {
                pack: pack.id,
                strategy,
            });
        }
        Ok(pack)
    }

    /// Parse without the completeness check; gaps surface when a prompt
    /// that needs them is composed.
    pub fn parse_partial(text: &str) -> Result<TemplatePack, PackError> {
        let mut id = None;
        let mut author = None;
        let mut sections: BTreeMap<Section, String> = BTreeMap::new();
        let mut current: Option<(Section, usize, Vec<&str>)> = None;

        let flush = |cur: Option<(Section, usize, Vec<&str>)>,
                         sections: &mut BTreeMap<Section, String>|
         -> Result<(), PackError> {
            if let Some((section, line, body)) = cur {
                let text = trim_blank_lines(&body);
                if text.is_empty() {
                    return Err(PackError::Syntax {
                        line,
                        message: "section body is empty".into(),
                    });
                }
                sections.insert(section, text);
            }
            Ok(())
        };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.trim_start().starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let section = parse_section(header).map_err(|message| PackError::Syntax {
                    line: line_no,
                    message,
                })?;
                if sections.contains_key(&section)
                    || current.as_ref().is_some_and(|(s, _, _)| *s == section)
                {
                    return Err(PackError::Syntax {
                        line: line_no,
                        message: format!("duplicate section [{header}]"),
                    });
                }
                flush(current.take(), &mut sections)?;
                current = Some((section, line_no, Vec::new()));
                continue;
            }
            match current.as_mut() {
                Some((_, _, body)) => body.push(line),
                None => {
                    let t = line.trim();
                    if t.is_empty() {
                        continue;
                    }
                    let (key, value) = t
                        .strip_prefix('@')
                        .and_then(|d| d.split_once(char::is_whitespace))
                        .map(|(k, v)| (k, v.trim()))
                        .ok_or_else(|| PackError::Syntax {
                            line: line_no,
                            message: format!("expected `@key value` or a [section], found `{t}`"),
                        })?;
                    match key {
                        "id" => id = Some(value.to_string()),
                        "author" => {
                            author = Some(value.parse::<Author>().map_err(|message| {
                                PackError::Syntax {
                                    line: line_no,
                                    message,
                                }
                            })?)
                        }
                        other => {
                            return Err(PackError::Syntax {
                                line: line_no,
                                message: format!("unknown directive `@{other}`"),
                            })
                        }
                    }
                }
            }
        }
        flush(current.take(), &mut sections)?;

        let id = id.ok_or(PackError::MissingDirective("id"))?;
        let author = author.ok_or(PackError::MissingDirective("author"))?;
        let mut factors = BTreeMap::new();
        let mut strategies = BTreeMap::new();
        let mut task = None;
        for (section, text) in sections {
            match section {
                Section::Factor(f) => {
                    factors.insert(f, text);
                }
                Section::Strategy(s) => {
                    strategies.insert(s, text);
                }
                Section::Task => task = Some(text),
            }
        }
        let task = task.ok_or_else(|| PackError::MissingTask(id.clone()))?;
        Ok(TemplatePack {
            id,
            author,
            factors,
            strategies,
            task,
        })
    }

    pub fn fragment(&self, factor: FactorId) -> Option<&str> {
        self.factors.get(&factor).map(String::as_str)
    }

    pub fn strategy_base(&self, strategy: Strategy) -> Option<&str> {
        self.strategies.get(&strategy).map(String::as_str)
    }

    pub fn task(&self) -> &str {
        &self.task
    }
}

fn parse_section(header: &str) -> Result<Section, String> {
    let mut parts = header.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("task"), None, _) => Ok(Section::Task),
        (Some("factor"), Some(id), None) => id.parse().map(Section::Factor),
        (Some("strategy"), Some(id), None) => id.parse().map(Section::Strategy),
        _ => Err(format!("unknown section [{header}]")),
    }
}

fn trim_blank_lines(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty());
    let end = lines.iter().rposition(|l| !l.trim().is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].join("\n"),
        _ => String::new(),
    }
}
