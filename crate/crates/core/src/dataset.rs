//! Flow records, dataset schema and deterministic sampling.
//!
//! The schema is supplied at load time rather than hard-coded, so renamed
//! exports of the SDN flow dataset work as long as the schema file lists
//! their columns. Parsing a header and its rows is pure and lives here; the
//! CSV reader in the companion crate only feeds cells in.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema column `{0}` is missing from the file header")]
    MissingColumn(String),
    #[error("header column `{0}` is not declared in the schema")]
    UnknownColumn(String),
    #[error("header column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("data row {row}: expected {expected} cells, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("data row {row}: label value `{value}` is not 0 or 1")]
    InvalidLabel { row: usize, value: String },
    #[error("data row {row}, column `{column}`: `{value}` is not a finite number")]
    InvalidNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("requested {requested} rows but only {available} are available")]
    Capacity { requested: usize, available: usize },
    #[error("cannot stratify: {0}")]
    Stratification(String),
    #[error("sample size must be positive")]
    EmptySample,
}

/// Ground truth for one flow: `0` is normal traffic, `1` a DDoS attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Attack => 1,
        }
    }

    /// Strict parse of a label cell: only `0` and `1` (surrounding
    /// whitespace ignored).
    pub fn parse(cell: &str) -> Option<Label> {
        match cell.trim() {
            "0" => Some(Label::Normal),
            "1" => Some(Label::Attack),
            _ => None,
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Attack),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Declared column set: names are unique and exactly one column is the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct DatasetSchema {
    columns: Vec<ColumnSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<SchemaRepr> for DatasetSchema {
    type Error = DatasetError;

    fn try_from(repr: SchemaRepr) -> Result<Self, Self::Error> {
        DatasetSchema::new(repr.columns)
    }
}

impl From<DatasetSchema> for SchemaRepr {
    fn from(schema: DatasetSchema) -> Self {
        SchemaRepr {
            columns: schema.columns,
        }
    }
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for col in &columns {
            if col.name.trim().is_empty() {
                return Err(DatasetError::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(DatasetError::InvalidSchema(format!(
                    "column `{}` declared twice",
                    col.name
                )));
            }
        }
        let labels = columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(DatasetError::InvalidSchema(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        if columns.len() < 2 {
            return Err(DatasetError::InvalidSchema(
                "schema declares no feature columns".into(),
            ));
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn label_column(&self) -> &str {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Label)
            .map(|c| c.name.as_str())
            .expect("schema invariant: one label column")
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.kind != ColumnKind::Label)
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn is_feature(&self, name: &str) -> bool {
        self.feature_columns().any(|c| c.name == name)
    }

    fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.kind)
    }

    /// Match a file header against the schema. Every schema column must be
    /// present and every header column declared; header order is kept.
    pub fn layout(&self, header: &[&str]) -> Result<HeaderLayout, DatasetError> {
        let mut columns = Vec::with_capacity(header.len());
        let mut seen = BTreeSet::new();
        for raw in header {
            let name = raw.trim();
            let kind = self
                .kind_of(name)
                .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
            if !seen.insert(name) {
                return Err(DatasetError::DuplicateColumn(name.to_string()));
            }
            columns.push(ColumnSpec::new(name, kind));
        }
        if let Some(missing) = self
            .columns
            .iter()
            .find(|c| !seen.contains(c.name.as_str()))
        {
            return Err(DatasetError::MissingColumn(missing.name.clone()));
        }
        Ok(HeaderLayout { columns })
    }
}

/// Header of a concrete file, validated against a schema.
#[derive(Debug, Clone)]
pub struct HeaderLayout {
    columns: Vec<ColumnSpec>,
}

impl HeaderLayout {
    /// Parse one data row. `row` is the 1-based data row number used in
    /// error messages; `row_id` is the stable 0-based record index.
    pub fn parse_row(&self, row_id: u64, row: usize, cells: &[&str]) -> Result<FlowRecord, DatasetError> {
        if cells.len() != self.columns.len() {
            return Err(DatasetError::FieldCount {
                row,
                expected: self.columns.len(),
                found: cells.len(),
            });
        }
        let mut features = Vec::with_capacity(cells.len() - 1);
        let mut label = None;
        for (col, cell) in self.columns.iter().zip(cells) {
            match col.kind {
                ColumnKind::Label => {
                    label = Some(Label::parse(cell).ok_or_else(|| DatasetError::InvalidLabel {
                        row,
                        value: cell.to_string(),
                    })?);
                }
                ColumnKind::Numeric => {
                    let value = cell
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DatasetError::InvalidNumber {
                            row,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        })?;
                    features.push(Feature::new(&col.name, FeatureValue::Numeric(value)));
                }
                ColumnKind::Categorical => {
                    features.push(Feature::new(
                        &col.name,
                        FeatureValue::Categorical(cell.to_string()),
                    ));
                }
            }
        }
        Ok(FlowRecord {
            row_id,
            features,
            label: label.expect("layout invariant: one label column"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Numeric(f64),
    Categorical(String),
}

impl fmt::Display for FeatureValue {
    /// Categorical values verbatim; numbers in shortest round-trip form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Numeric(v) => write!(f, "{v}"),
            FeatureValue::Categorical(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub value: FeatureValue,
}

impl Feature {
    pub fn new(name: impl Into<String>, value: FeatureValue) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// One labeled traffic row. Features are kept in file-header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub row_id: u64,
    pub features: Vec<Feature>,
    pub label: Label,
}

impl FlowRecord {
    pub fn feature(&self, name: &str) -> Option<&FeatureValue> {
        self.features
            .iter()
            .find(|f| f.name == name)
            .map(|f| &f.value)
    }

    pub fn numeric_features(&self) -> impl Iterator<Item = (&str, f64)> {
        self.features.iter().filter_map(|f| match f.value {
            FeatureValue::Numeric(v) => Some((f.name.as_str(), v)),
            FeatureValue::Categorical(_) => None,
        })
    }

    pub fn categorical_features(&self) -> impl Iterator<Item = (&str, &str)> {
        self.features.iter().filter_map(|f| match &f.value {
            FeatureValue::Categorical(s) => Some((f.name.as_str(), s.as_str())),
            FeatureValue::Numeric(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub normal: usize,
    pub attack: usize,
}

impl LabelDistribution {
    pub fn of(records: &[FlowRecord]) -> Self {
        let attack = records.iter().filter(|r| r.label == Label::Attack).count();
        Self {
            normal: records.len() - attack,
            attack,
        }
    }

    pub fn total(&self) -> usize {
        self.normal + self.attack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStrategy {
    #[default]
    Stratified,
    Head,
    Random,
}

impl SampleStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleStrategy::Stratified => "stratified",
            SampleStrategy::Head => "head",
            SampleStrategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub records: Vec<FlowRecord>,
    pub seed: u64,
    pub strategy: SampleStrategy,
    pub source_digest: String,
}

impl DatasetSample {
    pub fn distribution(&self) -> LabelDistribution {
        LabelDistribution::of(&self.records)
    }
}

/// Draw `size` records. `head` keeps file order; `random` and `stratified`
/// pick with a ChaCha8 stream seeded by `seed` and return the pick sorted
/// by `row_id`, so the result depends only on the inputs.
///
/// Under `stratified` an odd size gives the extra row to the larger class
/// (ties go to the normal class).
pub fn sample_dataset(
    records: &[FlowRecord],
    size: usize,
    seed: u64,
    strategy: SampleStrategy,
    source_digest: impl Into<String>,
) -> Result<DatasetSample, DatasetError> {
    if size == 0 {
        return Err(DatasetError::EmptySample);
    }
    if size > records.len() {
        return Err(DatasetError::Capacity {
            requested: size,
            available: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<FlowRecord> = match strategy {
        SampleStrategy::Head => records[..size].to_vec(),
        SampleStrategy::Random => {
            let mut idx: Vec<usize> = (0..records.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(size);
            idx.into_iter().map(|i| records[i].clone()).collect()
        }
        SampleStrategy::Stratified => {
            let (normal, attack): (Vec<&FlowRecord>, Vec<&FlowRecord>) =
                records.iter().partition(|r| r.label == Label::Normal);
            if normal.is_empty() || attack.is_empty() {
                return Err(DatasetError::Stratification(format!(
                    "dataset has {} normal and {} attack rows; both classes are required",
                    normal.len(),
                    attack.len()
                )));
            }
            let half = size / 2;
            let (want_normal, want_attack) = if size % 2 == 0 {
                (half, half)
            } else if attack.len() > normal.len() {
                (half, half + 1)
            } else {
                (half + 1, half)
            };
            if normal.len() < want_normal || attack.len() < want_attack {
                return Err(DatasetError::Stratification(format!(
                    "a balanced sample of {size} needs {want_normal} normal and {want_attack} attack rows, \
                     dataset has {} and {}",
                    normal.len(),
                    attack.len()
                )));
            }
            let mut out = Vec::with_capacity(size);
            for (mut class, want) in [(normal, want_normal), (attack, want_attack)] {
                class.shuffle(&mut rng);
                out.extend(class.into_iter().take(want).cloned());
            }
            out
        }
    };
    if strategy != SampleStrategy::Head {
        picked.sort_by_key(|r| r.row_id);
    }
    Ok(DatasetSample {
        records: picked,
        seed,
        strategy,
        source_digest: source_digest.into(),
    })
}
