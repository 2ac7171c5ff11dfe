//! CSV loading against a declarative column schema.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use structcot_core::digest::sha256_hex;
use structcot_core::{DatasetSample, DatasetSchema, FlowRecord, LabelDistribution};

use crate::error::{Error, Result};

/// Column layout of the public SDN DDoS flow export.
pub const SDN_DDOS_SCHEMA: &str = include_str!("../assets/schema.sdn-ddos.json");

pub fn default_schema() -> DatasetSchema {
    serde_json::from_str(SDN_DDOS_SCHEMA).expect("bundled schema is valid")
}

/// Read a schema file: `{"columns": [{"name": "...", "kind": "numeric|categorical|label"}]}`.
pub fn load_schema(path: &Path) -> Result<DatasetSchema> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedDataset {
    pub records: Vec<FlowRecord>,
    pub total_rows: usize,
    pub distribution: LabelDistribution,
    /// SHA-256 of the raw file bytes.
    pub source_digest: String,
}

pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<LoadedDataset> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(path))?;
    parse_dataset(&bytes, schema).map_err(|e| match e {
        Error::Csv { message, .. } => Error::Csv {
            path: path.to_path_buf(),
            message,
        },
        Error::Dataset { source, .. } => Error::Dataset {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse CSV bytes. Row ids are 0-based data row indices; error messages
/// use 1-based data row numbers.
pub fn parse_dataset(bytes: &[u8], schema: &DatasetSchema) -> Result<LoadedDataset> {
    let in_memory = Path::new("<memory>");
    let csv_err = |e: csv::Error| Error::Csv {
        path: in_memory.to_path_buf(),
        message: e.to_string(),
    };
    let data_err = |source| Error::Dataset {
        path: in_memory.to_path_buf(),
        source,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader.headers().map_err(csv_err)?.clone();
    let header: Vec<&str> = header.iter().collect();
    let layout = schema.layout(&header).map_err(data_err)?;

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let cells: Vec<&str> = row.iter().collect();
        let record = layout
            .parse_row(idx as u64, idx + 1, &cells)
            .map_err(data_err)?;
        records.push(record);
    }
    Ok(LoadedDataset {
        total_rows: records.len(),
        distribution: LabelDistribution::of(&records),
        records,
        source_digest: sha256_hex(bytes),
    })
}

pub fn sample_to_json(sample: &DatasetSample) -> String {
    serde_json::to_string(sample).expect("samples always serialize")
}

pub fn sample_from_json(text: &str) -> Result<DatasetSample> {
    serde_json::from_str(text).map_err(|e| Error::Store(format!("dataset sample: {e}")))
}
