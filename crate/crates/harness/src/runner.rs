//! Executes the model × condition × record grid of a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use structcot_core::{
    ablate, compose_prompt, parse_response, sample_dataset, Author, ComposedPrompt, DatasetSample,
    DatasetSchema, PromptConfig, TemplatePack,
};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelResponse, ModelSpec};
use crate::ingest::{self, LoadedDataset};
use crate::manifest::{Condition, Framework, ResolvedManifest};
use crate::store::{run_id, RunRecord, RunStore, TrialKey};

/// Everything a run needs, loaded and checked before any request is sent.
#[derive(Debug)]
pub struct Prepared {
    pub manifest: ResolvedManifest,
    pub schema: DatasetSchema,
    pub dataset: LoadedDataset,
    pub sample: DatasetSample,
    pub packs: BTreeMap<Author, TemplatePack>,
    pub conditions: Vec<Condition>,
    /// `prompts[c][i]` is the prompt for condition `c` and sample record `i`.
    pub prompts: Vec<Vec<ComposedPrompt>>,
}

impl Prepared {
    pub fn trial_count(&self) -> usize {
        self.manifest.manifest.models.len() * self.conditions.len() * self.sample.records.len()
    }
}

pub fn prompt_config(condition: &Condition, manifest: &ResolvedManifest, pack: &TemplatePack) -> Result<PromptConfig> {
    let strategy = manifest.manifest.strategy;
    Ok(match condition.framework {
        Framework::Nofw => PromptConfig::without_framework(strategy, condition.author, pack.id.clone()),
        Framework::Fw => ablate(
            &PromptConfig::with_framework(strategy, condition.author, pack.id.clone()),
            condition.removed,
        )?,
    })
}

/// Load the dataset and packs, draw the sample and compose every prompt.
pub fn prepare(manifest: &ResolvedManifest) -> Result<Prepared> {
    let schema = manifest.schema()?;
    let dataset = ingest::load_dataset(&manifest.dataset_path(), &schema)?;
    let ds = &manifest.manifest.dataset;
    let sample = sample_dataset(
        &dataset.records,
        ds.sample_size,
        ds.seed,
        ds.strategy,
        dataset.source_digest.clone(),
    )
    .map_err(|source| Error::Dataset {
        path: manifest.dataset_path(),
        source,
    })?;
    let packs = manifest.packs()?;
    let conditions = manifest.conditions();
    let mut prompts = Vec::with_capacity(conditions.len());
    for condition in &conditions {
        let pack = &packs[&condition.author];
        let config = prompt_config(condition, manifest, pack)?;
        let row = sample
            .records
            .iter()
            .map(|r| compose_prompt(&config, r, pack))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        prompts.push(row);
    }
    Ok(Prepared {
        manifest: manifest.clone(),
        schema,
        dataset,
        sample,
        packs,
        conditions,
        prompts,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip trials already in the store instead of refusing to start.
    pub resume: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub scheduled: usize,
    pub skipped: usize,
    pub executed: usize,
    pub failed: usize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct Trial<'a> {
    condition: usize,
    record: usize,
    key: (&'a str, u64),
}

/// Run every trial not yet persisted. Models run concurrently, each with
/// `workers_per_model` workers feeding one shard writer.
pub fn run(prepared: &Prepared, gateway: &Gateway, store: &RunStore, options: RunOptions) -> Result<RunSummary> {
    let manifest = &prepared.manifest;
    let models = &manifest.manifest.models;
    for model in models {
        model.credential()?;
    }

    let existing = store.load()?;
    if !existing.is_empty() && !options.resume {
        return Err(Error::Store(format!(
            "{} already holds {} trials; pass --resume to continue it",
            store.dir().display(),
            existing.len()
        )));
    }
    if let Some(other) = existing.iter().find(|r| r.manifest_digest != manifest.digest) {
        return Err(Error::Store(format!(
            "{} was written by a different manifest (digest {}, expected {})",
            store.dir().display(),
            other.manifest_digest,
            manifest.digest
        )));
    }
    let done: BTreeSet<TrialKey> = existing.iter().map(RunRecord::key).collect();

    let condition_ids: Vec<String> = prepared.conditions.iter().map(Condition::id).collect();
    let mut summary = RunSummary {
        scheduled: prepared.trial_count(),
        ..RunSummary::default()
    };
    let mut plans: Vec<(&ModelSpec, Vec<Trial>)> = Vec::new();
    for model in models {
        let mut trials = Vec::new();
        for (c, cid) in condition_ids.iter().enumerate() {
            for (i, record) in prepared.sample.records.iter().enumerate() {
                if done.contains(&(model.name.clone(), cid.clone(), record.row_id)) {
                    summary.skipped += 1;
                } else {
                    trials.push(Trial {
                        condition: c,
                        record: i,
                        key: (cid, record.row_id),
                    });
                }
            }
        }
        plans.push((model, trials));
    }

    let executed = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let workers = manifest.manifest.workers_per_model;

    thread::scope(|scope| {
        for (model, trials) in &plans {
            if trials.is_empty() {
                continue;
            }
            let writer = match store.writer(&model.name) {
                Ok(w) => Mutex::new(w),
                Err(e) => {
                    first_error.lock().unwrap().get_or_insert(e);
                    abort.store(true, Ordering::SeqCst);
                    continue;
                }
            };
            let (executed, failed, abort, first_error) = (&executed, &failed, &abort, &first_error);
            scope.spawn(move || {
                let next = AtomicUsize::new(0);
                thread::scope(|inner| {
                    for _ in 0..workers.min(trials.len()) {
                        inner.spawn(|| loop {
                            if abort.load(Ordering::SeqCst) {
                                return;
                            }
                            let Some(trial) = trials.get(next.fetch_add(1, Ordering::SeqCst)) else {
                                return;
                            };
                            let record = execute(prepared, gateway, model, trial);
                            if record.response.error.is_some() {
                                failed.fetch_add(1, Ordering::SeqCst);
                            }
                            if let Err(e) = writer.lock().unwrap().append(&record) {
                                first_error.lock().unwrap().get_or_insert(e);
                                abort.store(true, Ordering::SeqCst);
                                return;
                            }
                            executed.fetch_add(1, Ordering::SeqCst);
                        });
                    }
                });
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    summary.executed = executed.into_inner();
    summary.failed = failed.into_inner();
    Ok(summary)
}

fn execute(prepared: &Prepared, gateway: &Gateway, model: &ModelSpec, trial: &Trial) -> RunRecord {
    let condition = &prepared.conditions[trial.condition];
    let record = &prepared.sample.records[trial.record];
    let prompt = &prepared.prompts[trial.condition][trial.record];
    let started = now_ms();
    // Configuration failures (a 4xx, say) become failure records so one
    // bad model cannot take the rest of the grid down.
    let response = gateway
        .invoke(model, prompt)
        .unwrap_or_else(|e| ModelResponse::failed(1, 0, e.to_string()));
    let finished = now_ms();
    let parsed = parse_response(&response.raw_text, &prepared.schema);
    let (condition_id, row_id) = trial.key;
    RunRecord {
        run_id: run_id(&prepared.manifest.digest, &model.name, condition_id, row_id),
        manifest_digest: prepared.manifest.digest.clone(),
        model: model.name.clone(),
        condition_id: condition_id.to_string(),
        condition: condition.clone(),
        row_id,
        prompt: prompt.clone(),
        verdict: parsed.verdict,
        parsed,
        response,
        label: record.label,
        started_unix_ms: started,
        finished_unix_ms: finished,
    }
}
