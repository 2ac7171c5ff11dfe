//! The sixteen reasoning-control factors and where each one is placed.
//!
//! Factor wording is not stored here: it comes from a [`TemplatePack`] so
//! the same structure can be rendered with different authorship.
//!
//! [`TemplatePack`]: crate::pack::TemplatePack

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    F12,
    F13,
    F14,
    F15,
    F16,
}

impl FactorId {
    pub const ALL: [FactorId; 16] = [
        FactorId::F1,
        FactorId::F2,
        FactorId::F3,
        FactorId::F4,
        FactorId::F5,
        FactorId::F6,
        FactorId::F7,
        FactorId::F8,
        FactorId::F9,
        FactorId::F10,
        FactorId::F11,
        FactorId::F12,
        FactorId::F13,
        FactorId::F14,
        FactorId::F15,
        FactorId::F16,
    ];

    /// 1-based factor number.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<FactorId> {
        (1..=16).contains(&n).then(|| Self::ALL[usize::from(n - 1)])
    }

    pub fn placement(self) -> Placement {
        use FactorId::*;
        match self {
            F1 | F2 | F3 | F4 | F5 | F9 | F10 | F11 | F12 | F15 => Placement::System,
            F6 | F7 | F8 | F13 | F14 | F16 => Placement::User,
        }
    }

    pub fn dimension(self) -> Dimension {
        match self.number() {
            1..=5 => Dimension::ContextScope,
            6..=8 => Dimension::EvidenceGrounding,
            9..=12 => Dimension::ReasoningStructure,
            _ => Dimension::SecurityConstraints,
        }
    }

    pub fn spec(self) -> &'static FactorSpec {
        &CATALOG[self as usize]
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.number())
    }
}

impl FromStr for FactorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        t.strip_prefix('F')
            .or_else(|| t.strip_prefix('f'))
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(FactorId::from_number)
            .ok_or_else(|| alloc::format!("unknown factor id `{s}`"))
    }
}

/// Which message of the two-message conversation carries a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    System,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ContextScope,
    EvidenceGrounding,
    ReasoningStructure,
    SecurityConstraints,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::ContextScope,
        Dimension::EvidenceGrounding,
        Dimension::ReasoningStructure,
        Dimension::SecurityConstraints,
    ];

    pub fn factors(self) -> FactorSet {
        FactorId::ALL
            .into_iter()
            .filter(|f| f.dimension() == self)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorSpec {
    pub id: FactorId,
    pub name: &'static str,
    pub placement: Placement,
    pub dimension: Dimension,
    pub purpose: &'static str,
}

const fn spec(
    id: FactorId,
    name: &'static str,
    placement: Placement,
    dimension: Dimension,
    purpose: &'static str,
) -> FactorSpec {
    FactorSpec {
        id,
        name,
        placement,
        dimension,
        purpose,
    }
}

use Dimension::*;
use Placement::*;

static CATALOG: [FactorSpec; 16] = [
    spec(FactorId::F1, "Role specification", System, ContextScope, "Sets a security-analyst reasoning perspective"),
    spec(FactorId::F2, "Explicit task scope constraints", System, ContextScope, "Keeps the task within the dataset"),
    spec(FactorId::F3, "Dataset grounding", System, ContextScope, "Restricts reasoning to the supplied record"),
    spec(FactorId::F4, "Avoid unstated assumptions", System, ContextScope, "Reduces unsupported inference"),
    spec(FactorId::F5, "Negative instruction", System, ContextScope, "Blocks outside knowledge from entering the analysis"),
    spec(FactorId::F6, "Evidence citation requirement", User, EvidenceGrounding, "Maps each inference to a cited feature"),
    spec(FactorId::F7, "Feature-level anchoring", User, EvidenceGrounding, "Grounds reasoning in measured signals"),
    spec(FactorId::F8, "Anomaly justification requirement", User, EvidenceGrounding, "Requires anomalies to be explained"),
    spec(FactorId::F9, "Output schema enforcement", System, ReasoningStructure, "Fixes the Observation, Evidence, Conclusion layout"),
    spec(FactorId::F10, "Confidence calibration instruction", System, ReasoningStructure, "Asks for acknowledged uncertainty"),
    spec(FactorId::F11, "Reasoning depth control", System, ReasoningStructure, "Bounds the length of the reasoning chain"),
    spec(FactorId::F12, "Step-by-step reasoning requirement", System, ReasoningStructure, "Makes each logical step explicit"),
    spec(FactorId::F13, "Attack taxonomy alignment", User, SecurityConstraints, "Maps reasoning to volumetric, protocol or application-layer classes"),
    spec(FactorId::F14, "Signal-to-noise prioritization", User, SecurityConstraints, "Focuses on the relevant features"),
    spec(FactorId::F15, "Final answer verification", System, SecurityConstraints, "Checks the final answer against the reasoning"),
    spec(FactorId::F16, "Temporal reasoning constraints", User, SecurityConstraints, "Requires trend-based anomaly logic"),
];

/// All sixteen factors, ordered F1 to F16.
pub fn catalog() -> &'static [FactorSpec] {
    &CATALOG
}

/// A subset of F1..F16, iterated in ascending factor order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FactorSet(u16);

impl FactorSet {
    pub const EMPTY: FactorSet = FactorSet(0);
    pub const ALL: FactorSet = FactorSet(u16::MAX);

    pub fn contains(self, id: FactorId) -> bool {
        self.0 & Self::bit(id) != 0
    }

    pub fn insert(&mut self, id: FactorId) {
        self.0 |= Self::bit(id);
    }

    pub fn remove(&mut self, id: FactorId) {
        self.0 &= !Self::bit(id);
    }

    pub fn difference(self, other: FactorSet) -> FactorSet {
        FactorSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: FactorSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn from_bits(bits: u16) -> FactorSet {
        FactorSet(bits)
    }

    pub fn iter(self) -> impl Iterator<Item = FactorId> {
        FactorId::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    fn bit(id: FactorId) -> u16 {
        1 << (id as u16)
    }
}

impl FromIterator<FactorId> for FactorSet {
    fn from_iter<T: IntoIterator<Item = FactorId>>(iter: T) -> Self {
        let mut set = FactorSet::EMPTY;
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl fmt::Debug for FactorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for FactorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for id in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for FactorSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FactorSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<FactorId>::deserialize(deserializer)?;
        Ok(ids.into_iter().collect())
    }
}
