//! Verdict and reasoning extraction from raw model output.
//!
//! [`parse_response`] is total: any input, including empty or binary-ish
//! text, yields a [`ParsedAnalysis`]. Degradation shows up as `Abstain`,
//! false compliance flags and `parse_notes`, never as an error.
//!
//! Verdict precedence:
//! 1. `FINAL: ATTACK` / `FINAL: NORMAL` marker lines (case-insensitive, all
//!    markers must agree);
//! 2. an unambiguous classification keyword inside the Conclusion section;
//! 3. an unambiguous keyword anywhere in the text;
//! 4. otherwise `Abstain`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSchema;
use crate::metrics::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Attack,
    Normal,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    FinalMarker,
    Conclusion,
    FullText,
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub observation: Option<String>,
    pub evidence: Option<String>,
    pub conclusion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub feature: String,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compliance {
    pub has_all_sections: bool,
    pub section_order_ok: bool,
    pub verdict_in_conclusion: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnalysis {
    pub verdict: Verdict,
    pub verdict_source: VerdictSource,
    pub sections: Sections,
    pub cited_features: Vec<Citation>,
    pub confidence_statement: Option<String>,
    pub compliance: Compliance,
    pub parse_notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SectionKind {
    Observation,
    Evidence,
    Conclusion,
}

const HEADER_WORDS: [(&str, SectionKind); 3] = [
    ("observation", SectionKind::Observation),
    ("evidence", SectionKind::Evidence),
    ("conclusion", SectionKind::Conclusion),
];

#[derive(Debug, Clone, Copy)]
struct Header {
    kind: SectionKind,
    /// Byte offset of the header keyword.
    start: usize,
    /// Byte offset where the section body begins.
    body: usize,
}

#[derive(Debug, Clone, Copy)]
struct Marker {
    start: usize,
    verdict: Verdict,
}

pub fn parse_response(raw: &str, schema: &DatasetSchema) -> ParsedAnalysis {
    let mut notes = Vec::new();
    if raw.trim().is_empty() {
        notes.push("empty response".to_string());
        return ParsedAnalysis {
            verdict: Verdict::Abstain,
            verdict_source: VerdictSource::None,
            sections: Sections::default(),
            cited_features: Vec::new(),
            confidence_statement: None,
            compliance: Compliance::default(),
            parse_notes: notes,
        };
    }

    let markers = find_markers(raw);
    let headers = find_headers(raw);
    let first_marker = markers.iter().map(|m| m.start).min();

    let mut sections = Sections::default();
    let mut ordered: Vec<Header> = headers.iter().flatten().copied().collect();
    ordered.sort_by_key(|h| h.start);
    for (i, h) in ordered.iter().enumerate() {
        let mut end = ordered.get(i + 1).map_or(raw.len(), |n| n.start);
        if let Some(m) = first_marker.filter(|&m| m > h.body && m < end) {
            end = m;
        }
        let body = clean_body(&raw[h.body..end.max(h.body)]);
        let slot = match h.kind {
            SectionKind::Observation => &mut sections.observation,
            SectionKind::Evidence => &mut sections.evidence,
            SectionKind::Conclusion => &mut sections.conclusion,
        };
        *slot = Some(body);
    }
    for (word, kind) in HEADER_WORDS {
        if headers[kind as usize].is_none() {
            notes.push(alloc::format!("missing {word} section"));
        }
    }

    let (mut verdict, mut source) = (Verdict::Abstain, VerdictSource::None);
    if !markers.is_empty() {
        let first = markers[0].verdict;
        if markers.iter().all(|m| m.verdict == first) {
            verdict = first;
            source = VerdictSource::FinalMarker;
        } else {
            notes.push("conflicting FINAL markers".to_string());
        }
    }
    let conclusion_verdict = sections.conclusion.as_deref().and_then(classify);
    if source == VerdictSource::None {
        if let Some(v) = conclusion_verdict {
            verdict = v;
            source = VerdictSource::Conclusion;
        } else if let Some(v) = classify(raw) {
            verdict = v;
            source = VerdictSource::FullText;
        } else {
            notes.push("no unambiguous classification".to_string());
        }
    }

    let has_all_sections = headers.iter().all(Option::is_some);
    let section_order_ok = match headers {
        [Some(o), Some(e), Some(c)] => o.start < e.start && e.start < c.start,
        _ => false,
    };
    let marker_in_conclusion = match (headers[SectionKind::Conclusion as usize], first_marker) {
        (Some(c), Some(m)) => m >= c.body,
        _ => false,
    };
    let verdict_in_conclusion = verdict != Verdict::Abstain
        && headers[SectionKind::Conclusion as usize].is_some()
        && (conclusion_verdict == Some(verdict)
            || (source == VerdictSource::FinalMarker && marker_in_conclusion));

    let cited_features = match sections.evidence.as_deref() {
        Some(ev) => cite(ev, schema),
        None => Vec::new(),
    };

    ParsedAnalysis {
        verdict,
        verdict_source: source,
        sections,
        cited_features,
        confidence_statement: confidence_line(raw),
        compliance: Compliance {
            has_all_sections,
            section_order_ok,
            verdict_in_conclusion,
        },
        parse_notes: notes,
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Case-insensitive ASCII match of `word` at byte `at`.
fn matches_at(bytes: &[u8], at: usize, word: &str) -> bool {
    bytes.len() >= at + word.len() && bytes[at..at + word.len()].eq_ignore_ascii_case(word.as_bytes())
}

fn starts_word(bytes: &[u8], at: usize) -> bool {
    at == 0 || !is_word_byte(bytes[at - 1])
}

fn ends_word(bytes: &[u8], at: usize) -> bool {
    at >= bytes.len() || !is_word_byte(bytes[at])
}

fn skip_while(bytes: &[u8], mut at: usize, pred: impl Fn(u8) -> bool) -> usize {
    while at < bytes.len() && pred(bytes[at]) {
        at += 1;
    }
    at
}

fn find_markers(raw: &str) -> Vec<Marker> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut at = 0;
    while at + 5 <= bytes.len() {
        if !(matches_at(bytes, at, "final") && starts_word(bytes, at)) {
            at += 1;
            continue;
        }
        let start = at;
        let mut i = at + 5;
        let j = skip_while(bytes, i, |b| b == b' ');
        for filler in ["answer", "verdict"] {
            if matches_at(bytes, j, filler) {
                i = j + filler.len();
                break;
            }
        }
        i = skip_while(bytes, i, |b| b == b' ' || b == b'*');
        if bytes.get(i) == Some(&b':') {
            i = skip_while(bytes, i + 1, |b| matches!(b, b' ' | b'\t' | b'*' | b'`' | b'"' | b'\''));
            let verdict = if matches_at(bytes, i, "attack") && ends_word(bytes, i + 6) {
                Some(Verdict::Attack)
            } else if matches_at(bytes, i, "normal") && ends_word(bytes, i + 6) {
                Some(Verdict::Normal)
            } else {
                None
            };
            if let Some(verdict) = verdict {
                out.push(Marker { start, verdict });
            }
        }
        at = start + 5;
    }
    out
}

/// Decoration allowed between the start of a line and a header keyword:
/// markdown emphasis, heading hashes, bullets and list numbering.
fn is_line_prefix(prefix: &str) -> bool {
    prefix
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b' ' | b'\t' | b'#' | b'*' | b'_' | b'-' | b'>' | b'.' | b')' | b'(' | b'['))
}

fn find_headers(raw: &str) -> [Option<Header>; 3] {
    let bytes = raw.as_bytes();
    // Per section: first header at a line start, and first inline `word:`.
    let mut line_hits: [Option<Header>; 3] = [None; 3];
    let mut inline_hits: [Option<Header>; 3] = [None; 3];
    for (word, kind) in HEADER_WORDS {
        let slot = kind as usize;
        let mut at = 0;
        while at + word.len() <= bytes.len() {
            if !(matches_at(bytes, at, word) && starts_word(bytes, at)) {
                at += 1;
                continue;
            }
            let mut i = at + word.len();
            if matches_at(bytes, i, "s") {
                i += 1;
            }
            if !ends_word(bytes, i) {
                at += 1;
                continue;
            }
            let line_start = raw[..at].rfind('\n').map_or(0, |p| p + 1);
            let at_line_start = is_line_prefix(&raw[line_start..at]);
            let k = skip_while(bytes, i, |b| matches!(b, b' ' | b'\t' | b'*' | b'_' | b'#' | b')' | b']'));
            let body = match bytes.get(k) {
                Some(b':') => Some(k + 1),
                None | Some(b'\n') | Some(b'\r') if at_line_start => Some(k),
                Some(b'-') if at_line_start && bytes.get(k + 1) == Some(&b' ') => Some(k + 1),
                _ if at_line_start && raw[k..].starts_with('\u{2014}') => Some(k + '\u{2014}'.len_utf8()),
                _ => None,
            };
            if let Some(body) = body {
                let header = Header {
                    kind,
                    start: if at_line_start { line_start } else { at },
                    body,
                };
                let target = if at_line_start { &mut line_hits } else { &mut inline_hits };
                if target[slot].is_none() {
                    target[slot] = Some(header);
                }
                if line_hits[slot].is_some() {
                    break;
                }
            }
            at = i;
        }
    }
    let mut out = [None; 3];
    for slot in 0..3 {
        out[slot] = line_hits[slot].or(inline_hits[slot]);
    }
    out
}

fn clean_body(body: &str) -> String {
    body.trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '#')
        .to_string()
}

const ATTACK_WORDS: [&str; 4] = ["attack", "attacks", "ddos", "malicious"];
const NORMAL_WORDS: [&str; 3] = ["normal", "benign", "legitimate"];
const NEGATORS: [&str; 9] = ["not", "no", "non", "isn't", "isnt", "isn", "never", "without", "nor"];
const META_FOLLOWERS: [&str; 7] = [
    "detection",
    "taxonomy",
    "category",
    "categories",
    "type",
    "types",
    "classification",
];
const ALTERNATION: [&str; 3] = ["or", "vs", "versus"];

fn word_class(token: &str) -> Option<Verdict> {
    if ATTACK_WORDS.contains(&token) {
        Some(Verdict::Attack)
    } else if NORMAL_WORDS.contains(&token) {
        Some(Verdict::Normal)
    } else {
        None
    }
}

fn flip(v: Verdict) -> Verdict {
    match v {
        Verdict::Attack => Verdict::Normal,
        Verdict::Normal => Verdict::Attack,
        Verdict::Abstain => Verdict::Abstain,
    }
}

/// Keyword classification: `Some` only when every classification claim
/// in `text` points the same way.
fn classify(text: &str) -> Option<Verdict> {
    let tokens: Vec<String> = text
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(|t| t.trim_matches('\'').to_ascii_lowercase())
        .collect();
    let (mut attack, mut normal) = (0usize, 0usize);
    let mut i = 0;
    while i < tokens.len() {
        let Some(class) = word_class(&tokens[i]) else {
            i += 1;
            continue;
        };
        // A run like "ddos attack" is one mention.
        let mut end = i + 1;
        while end < tokens.len() && word_class(&tokens[end]) == Some(class) {
            end += 1;
        }
        let next = tokens.get(end).map(String::as_str);
        if next.is_some_and(|n| META_FOLLOWERS.contains(&n)) {
            i = end;
            continue;
        }
        // "attack or normal" names the options, it does not pick one.
        if next.is_some_and(|n| ALTERNATION.contains(&n)) {
            if let Some(other_end) = tokens.get(end + 1).and_then(|t| word_class(t)).map(|_| end + 2) {
                i = other_end;
                continue;
            }
        }
        let negated = tokens[i.saturating_sub(3)..i]
            .iter()
            .any(|t| NEGATORS.contains(&t.as_str()));
        match if negated { flip(class) } else { class } {
            Verdict::Attack => attack += 1,
            Verdict::Normal => normal += 1,
            Verdict::Abstain => {}
        }
        i = end;
    }
    match (attack > 0, normal > 0) {
        (true, false) => Some(Verdict::Attack),
        (false, true) => Some(Verdict::Normal),
        _ => None,
    }
}

fn confidence_line(raw: &str) -> Option<String> {
    raw.lines()
        .find(|l| {
            let lower = l.to_ascii_lowercase();
            lower.contains("confidence") || lower.contains("confident")
        })
        .map(|l| l.trim().to_string())
}

fn is_feature_like(candidate: &str) -> bool {
    let c = candidate.trim();
    !c.is_empty()
        && c.len() <= 40
        && c.split_whitespace().count() <= 4
        && c.as_bytes()[0].is_ascii_alphabetic()
        && c.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b' ' | b'-' | b'/'))
}

/// Evidence-section citations. Schema feature names found on word
/// boundaries are valid; quoted, back-ticked or snake_case names that are
/// not in the schema are recorded as invalid. Ordered by first position.
fn cite(evidence: &str, schema: &DatasetSchema) -> Vec<Citation> {
    let bytes = evidence.as_bytes();
    let mut found: Vec<(usize, Citation)> = Vec::new();
    let push = |pos: usize, name: &str, valid: bool, found: &mut Vec<(usize, Citation)>| {
        if let Some(existing) = found.iter_mut().find(|(_, c)| c.feature == name) {
            existing.0 = existing.0.min(pos);
        } else {
            found.push((
                pos,
                Citation {
                    feature: name.to_string(),
                    valid,
                },
            ));
        }
    };

    for col in schema.feature_columns() {
        let name = col.name.as_str();
        let mut from = 0;
        while let Some(rel) = evidence[from..].find(name) {
            let pos = from + rel;
            if starts_word(bytes, pos) && ends_word(bytes, pos + name.len()) {
                push(pos, name, true, &mut found);
                break;
            }
            from = pos + name.len().max(1);
            while !evidence.is_char_boundary(from) {
                from += 1;
            }
        }
    }

    let mut candidates: Vec<(usize, &str)> = Vec::new();
    for (open, close) in [('`', '`'), ('"', '"'), ('\u{201c}', '\u{201d}')] {
        let mut from = 0;
        while let Some(rel) = evidence[from..].find(open) {
            let start = from + rel + open.len_utf8();
            let Some(len) = evidence[start..].find(close) else {
                break;
            };
            candidates.push((start, &evidence[start..start + len]));
            from = start + len + close.len_utf8();
        }
    }
    let mut i = 0;
    while i < bytes.len() {
        if is_word_byte(bytes[i]) && starts_word(bytes, i) {
            let end = skip_while(bytes, i, is_word_byte);
            let token = &evidence[i..end];
            let inner = token.trim_matches('_');
            if inner.contains('_') && token.as_bytes()[0].is_ascii_alphabetic() {
                candidates.push((i, token));
            }
            i = end;
        } else {
            i += 1;
        }
    }
    for (pos, cand) in candidates {
        let cand = cand.trim();
        if !is_feature_like(cand) {
            continue;
        }
        let valid = schema.is_feature(cand);
        push(pos, cand, valid, &mut found);
    }

    found.sort_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, c)| c).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceRates {
    pub count: usize,
    pub all_sections: f64,
    pub order_ok: f64,
    pub abstain: f64,
    /// Invalid citations over all citations; 0 when nothing was cited.
    pub invalid_citation: f64,
}

pub fn compliance_summary(batch: &[ParsedAnalysis]) -> Result<ComplianceRates, MetricError> {
    if batch.is_empty() {
        return Err(MetricError::EmptyInput("compliance batch"));
    }
    let n = batch.len() as f64;
    let frac = |pred: &dyn Fn(&ParsedAnalysis) -> bool| batch.iter().filter(|p| pred(p)).count() as f64 / n;
    let (total, invalid) = batch.iter().flat_map(|p| &p.cited_features).fold((0usize, 0usize), |(t, i), c| {
        (t + 1, i + usize::from(!c.valid))
    });
    Ok(ComplianceRates {
        count: batch.len(),
        all_sections: frac(&|p| p.compliance.has_all_sections),
        order_ok: frac(&|p| p.compliance.section_order_ok),
        abstain: frac(&|p| p.verdict == Verdict::Abstain),
        invalid_citation: if total == 0 { 0.0 } else { invalid as f64 / total as f64 },
    })
}
