//! Report tables built from a run store and, optionally, bound ratings.
//!
//! CSV cells carry display rounding (metrics to 2 decimals, accuracy
//! percentages and improvements to 1); the JSON twins keep full precision.
//! Every row carries the number of run records behind it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use structcot_core::digest::sha256_hex;
use structcot_core::metrics::{dimension_kappa, mark_dominated, round_half_up};
use structcot_core::{
    aggregate_ratings, classification_metrics, compliance_summary, confusion, improvement,
    size_gain_series, AbstainPolicy, Author, ClassificationMetrics, ComplianceRates,
    ConfusionMatrix, Improvement, Label, MetricError, ModelGain, ModelSize, ParetoPoint,
    RaterScores, ReasoningDimension, ReasoningScores, SizeGainRow, Verdict,
};

use crate::error::{Error, Result};
use crate::gateway::TransportStatus;
use crate::manifest::{Condition, Framework, KappaMode, ResolvedManifest};
use crate::sheets::BoundRatings;
use crate::store::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRow {
    pub model: String,
    pub author: Author,
    pub condition: String,
    /// Run records in the cell, failures included.
    pub runs: usize,
    pub failed: usize,
    pub abstain: u64,
    pub confusion: ConfusionMatrix,
    /// `None` when every trial in the cell failed.
    pub metrics: Option<ClassificationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub model: String,
    pub author: Author,
    pub baseline: String,
    pub treatment: String,
    pub metric: String,
    pub before: f64,
    pub after: f64,
    /// `None` when the baseline is zero.
    pub improvement: Option<Improvement>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasoningRow {
    pub model: String,
    pub author: Author,
    pub condition: String,
    pub rated: usize,
    pub scores: ReasoningScores,
    /// Mean of the per-dimension means.
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaRow {
    pub scope: String,
    pub dimension: ReasoningDimension,
    pub n: u64,
    pub po: Option<f64>,
    pub pe: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoRow {
    pub dimension: ReasoningDimension,
    pub model: String,
    pub condition: String,
    pub accuracy: f64,
    pub score: f64,
    pub dominated: bool,
    pub rated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceRow {
    pub model: String,
    pub condition: String,
    pub runs: usize,
    pub failed: usize,
    /// Over completed (non-failed) trials.
    pub rates: Option<ComplianceRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub manifest_digest: String,
    pub abstain_policy: AbstainPolicy,
    pub kappa_mode: KappaMode,
    pub total_runs: usize,
    pub failed_runs: usize,
    pub classification: Vec<ClassificationRow>,
    pub classification_delta: Vec<DeltaRow>,
    pub reasoning: Option<Vec<ReasoningRow>>,
    pub reasoning_delta: Option<Vec<DeltaRow>>,
    pub kappa: Option<Vec<KappaRow>>,
    pub pareto: Option<Vec<ParetoRow>>,
    pub size_gain: Vec<SizeGainRow>,
    pub compliance: Vec<ComplianceRow>,
    pub notices: Vec<String>,
}

struct Cell<'a> {
    model: &'a str,
    condition: &'a Condition,
    condition_id: String,
    runs: Vec<&'a RunRecord>,
}

impl Cell<'_> {
    fn completed(&self) -> impl Iterator<Item = &&RunRecord> {
        self.runs
            .iter()
            .filter(|r| r.response.transport_status != TransportStatus::Failed)
    }

    fn failed(&self) -> usize {
        self.runs.len() - self.completed().count()
    }
}

pub fn build_report(
    manifest: &ResolvedManifest,
    runs: &[RunRecord],
    ratings: Option<&BoundRatings>,
) -> Result<ReportBundle> {
    if runs.is_empty() {
        return Err(Error::Store("the run store is empty; nothing to report".into()));
    }
    if let Some(r) = runs.iter().find(|r| r.manifest_digest != manifest.digest) {
        return Err(Error::Store(format!(
            "run {} was produced by manifest {}, not {}",
            r.run_id, r.manifest_digest, manifest.digest
        )));
    }
    if let Some(b) = ratings {
        if b.manifest_digest != manifest.digest {
            return Err(Error::Sheet(format!(
                "ratings were exported from manifest {}, not {}",
                b.manifest_digest, manifest.digest
            )));
        }
    }
    let m = &manifest.manifest;
    let policy = m.abstain_policy;
    let mut notices = Vec::new();

    // Cells in manifest order: model, then condition.
    let conditions = manifest.conditions();
    let mut by_key: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        by_key
            .entry((r.model.clone(), r.condition_id.clone()))
            .or_default()
            .push(r);
    }
    let mut cells = Vec::new();
    for model in &m.models {
        for condition in &conditions {
            let id = condition.id();
            if let Some(mut rs) = by_key.remove(&(model.name.clone(), id.clone())) {
                rs.sort_by_key(|r| r.row_id);
                cells.push(Cell {
                    model: &model.name,
                    condition,
                    condition_id: id,
                    runs: rs,
                });
            }
        }
    }
    for ((model, condition), rs) in &by_key {
        notices.push(format!(
            "{} run(s) for {model} / {condition} are outside the manifest grid and were ignored",
            rs.len()
        ));
    }

    // Classification.
    let mut classification = Vec::new();
    for cell in &cells {
        let (verdicts, labels): (Vec<Verdict>, Vec<Label>) = cell.completed().map(|r| (r.verdict, r.label)).unzip();
        let cm = confusion(&verdicts, &labels, policy)?;
        let metrics = match classification_metrics(&cm) {
            Ok(x) => Some(x),
            Err(MetricError::EmptyInput(_)) => {
                notices.push(format!(
                    "{} / {}: no scoreable trials (all failed or abstained under `{}`)",
                    cell.model,
                    cell.condition_id,
                    policy.as_str()
                ));
                None
            }
            Err(e) => return Err(e.into()),
        };
        classification.push(ClassificationRow {
            model: cell.model.to_string(),
            author: cell.condition.author,
            condition: cell.condition_id.clone(),
            runs: cell.runs.len(),
            failed: cell.failed(),
            abstain: cm.abstain_count,
            confusion: cm,
            metrics,
        });
    }

    let comparisons = comparison_pairs(&conditions);
    let mut classification_delta = Vec::new();
    for model in &m.models {
        for (base, treat) in &comparisons {
            let find = |c: &Condition| {
                classification
                    .iter()
                    .find(|r| r.model == model.name && r.condition == c.id())
            };
            let (Some(b), Some(t)) = (find(base), find(treat)) else {
                continue;
            };
            let (Some(bm), Some(tm)) = (b.metrics, t.metrics) else {
                continue;
            };
            let pairs = [
                ("accuracy_pct", bm.accuracy_pct, tm.accuracy_pct),
                ("precision", bm.precision, tm.precision),
                ("recall", bm.recall, tm.recall),
                ("f1", bm.f1, tm.f1),
            ];
            for (metric, before, after) in pairs {
                classification_delta.push(delta_row(
                    &model.name,
                    base,
                    treat,
                    metric,
                    before,
                    after,
                    b.runs + t.runs,
                    &mut notices,
                )?);
            }
        }
    }

    // Reasoning, kappa and Pareto need ratings.
    let (mut reasoning, mut reasoning_delta, mut kappa, mut pareto) = (None, None, None, None);
    match ratings {
        None => notices.push(
            "no imported ratings: reasoning, kappa and Pareto tables were not produced".into(),
        ),
        Some(bound) => {
            let rows = reasoning_rows(&cells, bound)?;
            let mut deltas = Vec::new();
            for model in &m.models {
                for (base, treat) in &comparisons {
                    let find = |c: &Condition| rows.iter().find(|r| r.model == model.name && r.condition == c.id());
                    let (Some(b), Some(t)) = (find(base), find(treat)) else {
                        continue;
                    };
                    for &dim in &bound.dimensions {
                        deltas.push(delta_row(
                            &model.name,
                            base,
                            treat,
                            dim.as_str(),
                            b.scores.means[&dim],
                            t.scores.means[&dim],
                            b.rated + t.rated,
                            &mut notices,
                        )?);
                    }
                    deltas.push(delta_row(
                        &model.name,
                        base,
                        treat,
                        "overall",
                        b.overall,
                        t.overall,
                        b.rated + t.rated,
                        &mut notices,
                    )?);
                }
            }
            kappa = Some(kappa_rows(&cells, bound, m.rating.kappa, &mut notices));
            pareto = Some(pareto_rows(&cells, &classification, &rows, bound)?);
            if rows.is_empty() {
                notices.push("ratings cover no run in the grid".into());
            }
            reasoning = Some(rows);
            reasoning_delta = Some(deltas);
        }
    }

    // Size vs gain: the no-framework → full-framework step per model and author.
    let mut gains = Vec::new();
    for model in &m.models {
        for &author in &m.authors {
            let pick = |fw: Framework| {
                conditions
                    .iter()
                    .find(|c| c.author == author && c.framework == fw && c.ablation.is_none())
                    .map(Condition::id)
            };
            let (Some(nofw), Some(fw)) = (pick(Framework::Nofw), pick(Framework::Fw)) else {
                continue;
            };
            let acc = |cid: &str| {
                classification
                    .iter()
                    .find(|r| r.model == model.name && r.condition == cid)
                    .and_then(|r| r.metrics)
                    .map(|x| x.accuracy)
            };
            let (Some(before), Some(after)) = (acc(&nofw), acc(&fw)) else {
                continue;
            };
            let Ok(acc_gain) = improvement(before, after) else {
                continue;
            };
            let reasoning_gain = reasoning.as_ref().and_then(|rows: &Vec<ReasoningRow>| {
                let overall = |cid: &str| rows.iter().find(|r| r.model == model.name && r.condition == cid).map(|r| r.overall);
                improvement(overall(&nofw)?, overall(&fw)?).ok().map(|i| i.percent)
            });
            gains.push(ModelGain {
                model: model.name.clone(),
                author,
                accuracy_gain: acc_gain.percent,
                reasoning_gain,
            });
        }
    }
    let registry: Vec<ModelSize> = m
        .models
        .iter()
        .map(|s| ModelSize {
            name: s.name.clone(),
            param_count_b: s.param_count_b,
        })
        .collect();
    let size_gain = size_gain_series(&gains, &registry)?;

    let compliance = cells
        .iter()
        .map(|cell| {
            let parsed: Vec<_> = cell.completed().map(|r| r.parsed.clone()).collect();
            ComplianceRow {
                model: cell.model.to_string(),
                condition: cell.condition_id.clone(),
                runs: cell.runs.len(),
                failed: cell.failed(),
                rates: compliance_summary(&parsed).ok(),
            }
        })
        .collect();

    Ok(ReportBundle {
        manifest_digest: manifest.digest.clone(),
        abstain_policy: policy,
        kappa_mode: m.rating.kappa,
        total_runs: runs.len(),
        failed_runs: cells.iter().map(Cell::failed).sum(),
        classification,
        classification_delta,
        reasoning,
        reasoning_delta,
        kappa,
        pareto,
        size_gain,
        compliance,
        notices,
    })
}

/// No-framework → full framework, and full framework → each ablation.
fn comparison_pairs(conditions: &[Condition]) -> Vec<(Condition, Condition)> {
    let mut out = Vec::new();
    for base in conditions.iter().filter(|c| c.framework == Framework::Nofw) {
        if let Some(fw) = conditions
            .iter()
            .find(|c| c.author == base.author && c.framework == Framework::Fw && c.ablation.is_none())
        {
            out.push((base.clone(), fw.clone()));
        }
    }
    for fw in conditions
        .iter()
        .filter(|c| c.framework == Framework::Fw && c.ablation.is_none())
    {
        for abl in conditions
            .iter()
            .filter(|c| c.author == fw.author && c.ablation.is_some())
        {
            out.push((fw.clone(), abl.clone()));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn delta_row(
    model: &str,
    base: &Condition,
    treat: &Condition,
    metric: &str,
    before: f64,
    after: f64,
    runs: usize,
    notices: &mut Vec<String>,
) -> Result<DeltaRow> {
    let imp = match improvement(before, after) {
        Ok(i) => Some(i),
        Err(MetricError::NonPositiveBaseline(_)) => {
            notices.push(format!(
                "{model} {} → {} {metric}: baseline is 0, relative improvement undefined",
                base.id(),
                treat.id()
            ));
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(DeltaRow {
        model: model.to_string(),
        author: base.author,
        baseline: base.id(),
        treatment: treat.id(),
        metric: metric.to_string(),
        before,
        after,
        improvement: imp,
        runs,
    })
}

fn cell_scores(cell: &Cell, scores: &RaterScores) -> RaterScores {
    cell.runs
        .iter()
        .filter_map(|r| scores.get(&r.run_id).map(|s| (r.run_id.clone(), s.clone())))
        .collect()
}

fn reasoning_rows(cells: &[Cell], bound: &BoundRatings) -> Result<Vec<ReasoningRow>> {
    let mut rows = Vec::new();
    for cell in cells {
        let a = cell_scores(cell, &bound.rater_a);
        let b = cell_scores(cell, &bound.rater_b);
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let scores = aggregate_ratings(&a, &b, &bound.dimensions, bound.scale)?;
        let overall = scores.means.values().sum::<f64>() / scores.means.len() as f64;
        rows.push(ReasoningRow {
            model: cell.model.to_string(),
            author: cell.condition.author,
            condition: cell.condition_id.clone(),
            rated: scores.samples,
            scores,
            overall,
        });
    }
    Ok(rows)
}

fn kappa_row(scope: String, a: &RaterScores, b: &RaterScores, dim: ReasoningDimension, notices: &mut Vec<String>) -> KappaRow {
    match dimension_kappa(a, b, dim) {
        Ok(k) => KappaRow {
            scope,
            dimension: dim,
            n: k.n,
            po: Some(k.po),
            pe: Some(k.pe),
            kappa: Some(k.kappa),
            note: None,
        },
        Err(e) => {
            notices.push(format!("kappa for {scope} / {dim}: {e}"));
            KappaRow {
                scope,
                dimension: dim,
                n: a.len() as u64,
                po: None,
                pe: None,
                kappa: None,
                note: Some(e.to_string()),
            }
        }
    }
}

fn kappa_rows(cells: &[Cell], bound: &BoundRatings, mode: KappaMode, notices: &mut Vec<String>) -> Vec<KappaRow> {
    let mut rows = Vec::new();
    match mode {
        KappaMode::Pooled => {
            for &dim in &bound.dimensions {
                rows.push(kappa_row("pooled".into(), &bound.rater_a, &bound.rater_b, dim, notices));
            }
        }
        KappaMode::Stratified => {
            for cell in cells {
                let a = cell_scores(cell, &bound.rater_a);
                let b = cell_scores(cell, &bound.rater_b);
                if a.is_empty() {
                    continue;
                }
                for &dim in &bound.dimensions {
                    let scope = format!("{}|{}", cell.model, cell.condition_id);
                    rows.push(kappa_row(scope, &a, &b, dim, notices));
                }
            }
        }
    }
    rows
}

fn pareto_rows(
    cells: &[Cell],
    classification: &[ClassificationRow],
    reasoning: &[ReasoningRow],
    bound: &BoundRatings,
) -> Result<Vec<ParetoRow>> {
    let mut out = Vec::new();
    for &dim in &bound.dimensions {
        let mut meta = Vec::new();
        let mut points = Vec::new();
        for cell in cells {
            let acc = classification
                .iter()
                .find(|r| r.model == cell.model && r.condition == cell.condition_id)
                .and_then(|r| r.metrics)
                .map(|x| x.accuracy);
            let rr = reasoning
                .iter()
                .find(|r| r.model == cell.model && r.condition == cell.condition_id);
            if let (Some(acc), Some(rr)) = (acc, rr) {
                points.push(ParetoPoint::new(
                    format!("{}|{}", cell.model, cell.condition_id),
                    acc,
                    rr.scores.means[&dim],
                ));
                meta.push((cell.model, cell.condition_id.clone(), rr.rated));
            }
        }
        if points.is_empty() {
            continue;
        }
        let marked = mark_dominated(&points)?;
        let mut rows: Vec<ParetoRow> = marked
            .into_iter()
            .zip(meta)
            .map(|(p, (model, condition, rated))| ParetoRow {
                dimension: dim,
                model: model.to_string(),
                condition,
                accuracy: p.x,
                score: p.y,
                dominated: p.dominated,
                rated,
            })
            .collect();
        rows.sort_by(|a, b| {
            a.accuracy
                .total_cmp(&b.accuracy)
                .then(b.score.total_cmp(&a.score))
                .then_with(|| (&a.model, &a.condition).cmp(&(&b.model, &b.condition)))
        });
        out.extend(rows);
    }
    Ok(out)
}

/// Fixed-point rendering with half-up rounding.
pub fn fixed(value: f64, decimals: u32) -> String {
    let n = round_half_up(value, decimals);
    let sign = if n < 0 { "-" } else { "" };
    let abs = n.unsigned_abs();
    if decimals == 0 {
        return format!("{sign}{abs}");
    }
    let scale = 10u64.pow(decimals);
    format!("{sign}{}.{:0width$}", abs / scale, abs % scale, width = decimals as usize)
}

fn metric_decimals(metric: &str) -> u32 {
    if metric == "accuracy_pct" {
        1
    } else {
        2
    }
}

fn opt(v: Option<f64>, decimals: u32) -> String {
    v.map(|x| fixed(x, decimals)).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn delta_csv(rows: &[DeltaRow]) -> Vec<u8> {
    csv_bytes(
        &["model", "author", "baseline", "treatment", "metric", "before", "after", "improvement_pct", "runs"],
        rows.iter()
            .map(|r| {
                let d = metric_decimals(&r.metric);
                vec![
                    r.model.clone(),
                    r.author.to_string(),
                    r.baseline.clone(),
                    r.treatment.clone(),
                    r.metric.clone(),
                    fixed(r.before, d),
                    fixed(r.after, d),
                    r.improvement.map(|i| i.display()).unwrap_or_default(),
                    r.runs.to_string(),
                ]
            })
            .collect(),
    )
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report rows serialize");
    out.push(b'\n');
    out
}

/// File name → contents for every output of `bundle`. Deterministic.
pub fn render(bundle: &ReportBundle) -> BTreeMap<&'static str, Vec<u8>> {
    let mut files = BTreeMap::new();

    files.insert(
        "classification.csv",
        csv_bytes(
            &[
                "model", "author", "condition", "runs", "failed", "abstain", "tp", "tn", "fp", "fn",
                "accuracy", "precision", "recall", "f1", "accuracy_pct", "precision_undefined",
                "recall_undefined",
            ],
            bundle
                .classification
                .iter()
                .map(|r| {
                    let m = r.metrics;
                    let c = &r.confusion;
                    vec![
                        r.model.clone(),
                        r.author.to_string(),
                        r.condition.clone(),
                        r.runs.to_string(),
                        r.failed.to_string(),
                        r.abstain.to_string(),
                        c.tp.to_string(),
                        c.tn.to_string(),
                        c.fp.to_string(),
                        c.fn_.to_string(),
                        opt(m.map(|x| x.accuracy), 2),
                        opt(m.map(|x| x.precision), 2),
                        opt(m.map(|x| x.recall), 2),
                        opt(m.map(|x| x.f1), 2),
                        opt(m.map(|x| x.accuracy_pct), 1),
                        m.map(|x| x.precision_undefined.to_string()).unwrap_or_default(),
                        m.map(|x| x.recall_undefined.to_string()).unwrap_or_default(),
                    ]
                })
                .collect(),
        ),
    );
    files.insert("classification.json", json_bytes(&bundle.classification));
    files.insert("classification_delta.csv", delta_csv(&bundle.classification_delta));
    files.insert("classification_delta.json", json_bytes(&bundle.classification_delta));

    if let Some(rows) = &bundle.reasoning {
        let dims: Vec<ReasoningDimension> = rows
            .first()
            .map(|r| r.scores.means.keys().copied().collect())
            .unwrap_or_default();
        let mut header = vec!["model", "author", "condition", "rated"];
        header.extend(dims.iter().map(|d| d.as_str()));
        header.push("overall");
        files.insert(
            "reasoning.csv",
            csv_bytes(
                &header,
                rows.iter()
                    .map(|r| {
                        let mut cells = vec![r.model.clone(), r.author.to_string(), r.condition.clone(), r.rated.to_string()];
                        cells.extend(dims.iter().map(|d| fixed(r.scores.means[d], 2)));
                        cells.push(fixed(r.overall, 2));
                        cells
                    })
                    .collect(),
            ),
        );
        files.insert("reasoning.json", json_bytes(rows));
    }
    if let Some(rows) = &bundle.reasoning_delta {
        files.insert("reasoning_delta.csv", delta_csv(rows));
        files.insert("reasoning_delta.json", json_bytes(rows));
    }
    if let Some(rows) = &bundle.kappa {
        files.insert(
            "kappa.csv",
            csv_bytes(
                &["scope", "dimension", "n", "po", "pe", "kappa", "note"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.scope.clone(),
                            r.dimension.to_string(),
                            r.n.to_string(),
                            opt(r.po, 2),
                            opt(r.pe, 2),
                            opt(r.kappa, 2),
                            r.note.clone().unwrap_or_default(),
                        ]
                    })
                    .collect(),
            ),
        );
        files.insert("kappa.json", json_bytes(rows));
    }
    if let Some(rows) = &bundle.pareto {
        files.insert(
            "pareto.csv",
            csv_bytes(
                &["dimension", "model", "condition", "accuracy", "score", "dominated", "rated"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.dimension.to_string(),
                            r.model.clone(),
                            r.condition.clone(),
                            fixed(r.accuracy, 2),
                            fixed(r.score, 2),
                            r.dominated.to_string(),
                            r.rated.to_string(),
                        ]
                    })
                    .collect(),
            ),
        );
        files.insert("pareto.json", json_bytes(rows));
    }
    files.insert(
        "size_gain.csv",
        csv_bytes(
            &["param_count_b", "model", "author", "accuracy_gain_pct", "reasoning_gain_pct"],
            bundle
                .size_gain
                .iter()
                .map(|r| {
                    vec![
                        r.param_count_b.to_string(),
                        r.model.clone(),
                        r.author.to_string(),
                        fixed(r.accuracy_gain, 1),
                        opt(r.reasoning_gain, 1),
                    ]
                })
                .collect(),
        ),
    );
    files.insert("size_gain.json", json_bytes(&bundle.size_gain));
    files.insert(
        "compliance.csv",
        csv_bytes(
            &["model", "condition", "runs", "failed", "all_sections", "order_ok", "abstain", "invalid_citation"],
            bundle
                .compliance
                .iter()
                .map(|r| {
                    let x = r.rates;
                    vec![
                        r.model.clone(),
                        r.condition.clone(),
                        r.runs.to_string(),
                        r.failed.to_string(),
                        opt(x.map(|v| v.all_sections), 2),
                        opt(x.map(|v| v.order_ok), 2),
                        opt(x.map(|v| v.abstain), 2),
                        opt(x.map(|v| v.invalid_citation), 2),
                    ]
                })
                .collect(),
        ),
    );
    files.insert("compliance.json", json_bytes(&bundle.compliance));

    #[derive(Serialize)]
    struct Summary<'a> {
        manifest_digest: &'a str,
        abstain_policy: AbstainPolicy,
        kappa_mode: KappaMode,
        total_runs: usize,
        failed_runs: usize,
        ratings: bool,
        notices: &'a [String],
        files: BTreeMap<&'a str, String>,
    }
    let digests = files.iter().map(|(name, bytes)| (*name, sha256_hex(bytes))).collect();
    let summary = Summary {
        manifest_digest: &bundle.manifest_digest,
        abstain_policy: bundle.abstain_policy,
        kappa_mode: bundle.kappa_mode,
        total_runs: bundle.total_runs,
        failed_runs: bundle.failed_runs,
        ratings: bundle.reasoning.is_some(),
        notices: &bundle.notices,
        files: digests,
    };
    files.insert("summary.json", json_bytes(&summary));
    files
}

const OPTIONAL: [&str; 8] = [
    "reasoning.csv",
    "reasoning.json",
    "reasoning_delta.csv",
    "reasoning_delta.json",
    "kappa.csv",
    "kappa.json",
    "pareto.csv",
    "pareto.json",
];

/// Write the bundle into `dir`, removing optional tables left over from an
/// earlier report that this one does not produce.
pub fn write_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let files = render(bundle);
    for name in OPTIONAL {
        let path = dir.join(name);
        if !files.contains_key(name) && path.exists() {
            fs::remove_file(&path).map_err(Error::io(&path))?;
        }
    }
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(Error::io(&path))?;
        written.push(path);
    }
    Ok(written)
}
