//! Blinded rating sheets for two raters, and their import.
//!
//! Both sheets hold the same rows in independently shuffled orders and are
//! keyed by opaque `item-NNNN` tokens. The token → run id mapping lives
//! only in the key file, which is written outside the sheet directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use structcot_core::{RaterScores, RatingScale, ReasoningDimension};

use crate::error::{Error, Result};
use crate::gateway::TransportStatus;
use crate::store::RunRecord;

pub const RUBRIC: &str = include_str!("../assets/rubric.md");
pub const RUBRIC_VERSION: &str = "1";

pub const SHEET_A: &str = "sheet_A.csv";
pub const SHEET_B: &str = "sheet_B.csv";
pub const KEY_FILE: &str = "key.json";
pub const BOUND_FILE: &str = "bound.json";

const FIXED_COLUMNS: [&str; 3] = ["blind_key", "record_rendering", "raw_output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rater {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub blind_key: String,
    pub record_rendering: String,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSheet {
    pub sheet_id: String,
    pub rater: Rater,
    pub rows: Vec<SheetRow>,
    pub dimensions: Vec<ReasoningDimension>,
    pub scale: RatingScale,
    pub rubric_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub blind_key: String,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedKey {
    pub manifest_digest: String,
    pub seed: u64,
    pub dimensions: Vec<ReasoningDimension>,
    pub scale: RatingScale,
    pub rubric_version: String,
    pub entries: Vec<KeyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub sheet_a: RatingSheet,
    pub sheet_b: RatingSheet,
    pub key: SealedKey,
}

/// Draw the rows and shuffle them per rater. Failed transports have
/// nothing to rate and are left out. `sample_size = None` rates all.
pub fn build_export(
    runs: &[RunRecord],
    dims: &[ReasoningDimension],
    sample_size: Option<usize>,
    seed: u64,
) -> Result<Export> {
    let mut eligible: Vec<&RunRecord> = runs
        .iter()
        .filter(|r| r.response.transport_status != TransportStatus::Failed)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Sheet("the run store has no completed responses to rate".into()));
    }
    let manifest_digest = eligible[0].manifest_digest.clone();
    eligible.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    if let Some(n) = sample_size {
        eligible.truncate(n);
    }
    let width = eligible.len().to_string().len().max(4);
    let rows: Vec<(KeyEntry, SheetRow)> = eligible
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let blind_key = format!("item-{:0width$}", i + 1);
            (
                KeyEntry {
                    blind_key: blind_key.clone(),
                    run_id: r.run_id.clone(),
                },
                SheetRow {
                    blind_key,
                    record_rendering: r.prompt.record_rendering.clone(),
                    raw_output: r.response.raw_text.clone(),
                },
            )
        })
        .collect();

    let base: Vec<SheetRow> = rows.iter().map(|(_, row)| row.clone()).collect();
    let mut order_a = base.clone();
    let mut order_b = base;
    let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
    rng_a.set_stream(1);
    let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
    rng_b.set_stream(2);
    order_a.shuffle(&mut rng_a);
    order_b.shuffle(&mut rng_b);
    if order_a.len() > 1 && order_a == order_b {
        order_b.rotate_left(1);
    }

    let sheet = |rater: Rater, rows: Vec<SheetRow>| RatingSheet {
        sheet_id: format!("{}-{rater:?}", &manifest_digest[..12.min(manifest_digest.len())]),
        rater,
        rows,
        dimensions: dims.to_vec(),
        scale: RatingScale::default(),
        rubric_version: RUBRIC_VERSION.into(),
    };
    let mut entries: Vec<KeyEntry> = rows.into_iter().map(|(k, _)| k).collect();
    entries.sort_by(|a, b| a.blind_key.cmp(&b.blind_key));
    Ok(Export {
        sheet_a: sheet(Rater::A, order_a),
        sheet_b: sheet(Rater::B, order_b),
        key: SealedKey {
            manifest_digest,
            seed,
            dimensions: dims.to_vec(),
            scale: RatingScale::default(),
            rubric_version: RUBRIC_VERSION.into(),
            entries,
        },
    })
}

fn header(dims: &[ReasoningDimension]) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(dims.iter().map(|d| d.as_str().to_string()))
        .collect()
}

pub fn write_sheet(path: &Path, sheet: &RatingSheet) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Sheet(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(&sheet.dimensions)).map_err(csv_err)?;
    for row in &sheet.rows {
        let mut cells = vec![row.blind_key.as_str(), &row.record_rendering, &row.raw_output];
        cells.extend(sheet.dimensions.iter().map(|_| ""));
        w.write_record(cells).map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub sheet_a: PathBuf,
    pub sheet_b: PathBuf,
    pub rubric: PathBuf,
    pub key: PathBuf,
}

/// Write both sheets and the rubric into `sheets_dir`, the key into `keys_dir`.
pub fn export_sheets(
    runs: &[RunRecord],
    dims: &[ReasoningDimension],
    sample_size: Option<usize>,
    seed: u64,
    sheets_dir: &Path,
    keys_dir: &Path,
) -> Result<ExportPaths> {
    if sheets_dir == keys_dir {
        return Err(Error::Sheet("the key file must live outside the sheet directory".into()));
    }
    let export = build_export(runs, dims, sample_size, seed)?;
    fs::create_dir_all(sheets_dir).map_err(Error::io(sheets_dir))?;
    fs::create_dir_all(keys_dir).map_err(Error::io(keys_dir))?;
    let paths = ExportPaths {
        sheet_a: sheets_dir.join(SHEET_A),
        sheet_b: sheets_dir.join(SHEET_B),
        rubric: sheets_dir.join("rubric.md"),
        key: keys_dir.join(KEY_FILE),
    };
    write_sheet(&paths.sheet_a, &export.sheet_a)?;
    write_sheet(&paths.sheet_b, &export.sheet_b)?;
    fs::write(&paths.rubric, RUBRIC).map_err(Error::io(&paths.rubric))?;
    let key = serde_json::to_string_pretty(&export.key).expect("key serializes");
    fs::write(&paths.key, key + "\n").map_err(Error::io(&paths.key))?;
    Ok(paths)
}

/// Scores of both raters, keyed by run id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRatings {
    pub manifest_digest: String,
    pub dimensions: Vec<ReasoningDimension>,
    pub scale: RatingScale,
    pub rater_a: RaterScores,
    pub rater_b: RaterScores,
}

/// A blank or out-of-range cell, located by sheet, CSV line and dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellIssue {
    pub rater: Rater,
    pub blind_key: String,
    pub line: u64,
    pub dimension: ReasoningDimension,
}

fn read_scores(
    path: &Path,
    rater: Rater,
    key: &SealedKey,
    incomplete: &mut Vec<CellIssue>,
) -> Result<BTreeMap<String, BTreeMap<ReasoningDimension, u8>>> {
    let csv_err = |e: csv::Error| Error::Sheet(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let found: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let expected = header(&key.dimensions);
    if found != expected {
        return Err(Error::Sheet(format!(
            "{}: header is `{}`, expected `{}`",
            path.display(),
            found.join(","),
            expected.join(",")
        )));
    }
    let known: BTreeSet<&str> = key.entries.iter().map(|e| e.blind_key.as_str()).collect();
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let blind_key = row.get(0).unwrap_or_default().to_string();
        if !known.contains(blind_key.as_str()) {
            return Err(Error::Tamper(format!(
                "{} line {line}: blind key `{blind_key}` is not in the key file",
                path.display()
            )));
        }
        let mut scores = BTreeMap::new();
        for (i, &dim) in key.dimensions.iter().enumerate() {
            let cell = row.get(FIXED_COLUMNS.len() + i).unwrap_or_default().trim();
            if cell.is_empty() {
                incomplete.push(CellIssue {
                    rater,
                    blind_key: blind_key.clone(),
                    line,
                    dimension: dim,
                });
                continue;
            }
            let value = cell
                .parse::<u8>()
                .ok()
                .filter(|v| key.scale.contains(*v))
                .ok_or_else(|| {
                    Error::Sheet(format!(
                        "{} line {line}, {blind_key} / {dim}: `{cell}` is not an integer in {}..={}",
                        path.display(),
                        key.scale.min,
                        key.scale.max
                    ))
                })?;
            scores.insert(dim, value);
        }
        if out.insert(blind_key.clone(), scores).is_some() {
            return Err(Error::Tamper(format!(
                "{} line {line}: blind key `{blind_key}` appears twice",
                path.display()
            )));
        }
    }
    for entry in &key.entries {
        if !out.contains_key(&entry.blind_key) {
            return Err(Error::Tamper(format!(
                "{}: row `{}` was removed from the sheet",
                path.display(),
                entry.blind_key
            )));
        }
    }
    Ok(out)
}

/// Read both completed sheets, check them against the key and the run
/// store, and bind every score to its run id.
pub fn import_ratings(sheet_a: &Path, sheet_b: &Path, key_path: &Path, runs: &[RunRecord]) -> Result<BoundRatings> {
    let text = fs::read_to_string(key_path).map_err(Error::io(key_path))?;
    let key: SealedKey = serde_json::from_str(&text)
        .map_err(|e| Error::Tamper(format!("{}: {e}", key_path.display())))?;
    let run_ids: BTreeSet<&str> = runs.iter().map(|r| r.run_id.as_str()).collect();
    for entry in &key.entries {
        if !run_ids.contains(entry.run_id.as_str()) {
            return Err(Error::Tamper(format!(
                "key maps `{}` to run `{}`, which is not in the run store",
                entry.blind_key, entry.run_id
            )));
        }
    }

    let mut incomplete = Vec::new();
    let a = read_scores(sheet_a, Rater::A, &key, &mut incomplete)?;
    let b = read_scores(sheet_b, Rater::B, &key, &mut incomplete)?;
    if !incomplete.is_empty() {
        let cells: Vec<String> = incomplete
            .iter()
            .map(|c| format!("{:?}:{} (line {}) {}", c.rater, c.blind_key, c.line, c.dimension))
            .collect();
        return Err(Error::Sheet(format!(
            "{} unscored cells: {}",
            incomplete.len(),
            cells.join(", ")
        )));
    }
    let to_run = |scores: BTreeMap<String, BTreeMap<ReasoningDimension, u8>>| -> RaterScores {
        key.entries
            .iter()
            .map(|e| (e.run_id.clone(), scores[&e.blind_key].clone()))
            .collect()
    };
    Ok(BoundRatings {
        manifest_digest: key.manifest_digest.clone(),
        dimensions: key.dimensions.clone(),
        scale: key.scale,
        rater_a: to_run(a),
        rater_b: to_run(b),
    })
}

pub fn write_bound(path: &Path, bound: &BoundRatings) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let text = serde_json::to_string_pretty(bound).expect("ratings serialize");
    fs::write(path, text + "\n").map_err(Error::io(path))
}

pub fn read_bound(path: &Path) -> Result<BoundRatings> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Sheet(format!("{}: {e}", path.display())))
}
