//! Runner, run store, rating sheets and report over the loopback stub.
mod common;

use std::fs;
use std::path::Path;

use common::{grid_script, manifest_json, model_json, scripted_stub, Say, StubReply, StubServer, Workspace};
use serde_json::json;
use structcot::{report, sheets, ExperimentManifest, Gateway, ResolvedManifest, RunOptions, RunRecord, RunStore, TransportStatus};
use structcot_core::{AbstainPolicy, ReasoningDimension, Verdict};

fn execute(manifest: &ResolvedManifest, resume: bool) -> structcot::Result<structcot::RunSummary> {
    let prepared = structcot::prepare(manifest)?;
    let gateway = Gateway::new(manifest.manifest.gateway.clone());
    structcot::run(&prepared, &gateway, &RunStore::new(manifest.runs_dir()), RunOptions { resume })
}

fn small_grid(ws: &Workspace, url: &str, extra: serde_json::Value) -> ResolvedManifest {
    let mut m = manifest_json(vec![model_json("alpha", 2.0, url), model_json("beta", 8.0, url)], 8);
    if let (Some(m), Some(extra)) = (m.as_object_mut(), extra.as_object()) {
        m.extend(extra.clone());
    }
    ExperimentManifest::load(&ws.write_manifest(&m)).unwrap()
}

fn load(m: &ResolvedManifest) -> Vec<RunRecord> {
    RunStore::new(m.runs_dir()).load().unwrap()
}

#[test]
fn every_trial_is_stored_once_with_parsed_verdicts() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = small_grid(&ws, &stub.url(), json!({"workers_per_model": 3}));
    let s = execute(&m, false).unwrap();
    assert_eq!((s.scheduled, s.executed, s.skipped, s.failed), (32, 32, 0, 0));
    let runs = load(&m);
    assert_eq!(runs.len(), 32);
    for r in &runs {
        assert_eq!(r.manifest_digest, m.digest);
        assert_eq!(r.verdict, r.parsed.verdict);
        assert_eq!(r.response.transport_status, TransportStatus::Ok);
        assert!(r.prompt.user_text.ends_with(&r.prompt.record_rendering));
        assert!(!r.prompt.record_rendering.contains("label"));
    }
    let fw = runs.iter().find(|r| r.condition_id == "manual/fw").unwrap();
    assert!(fw.parsed.compliance.has_all_sections);
    assert_eq!(fw.prompt.factor_trace.len(), 16);
    let nofw = runs.iter().find(|r| r.condition_id == "manual/nofw").unwrap();
    assert!(nofw.prompt.factor_trace.is_empty());
}

#[test]
fn existing_store_requires_resume_and_resume_is_idempotent() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let err = execute(&m, false).unwrap_err();
    assert!(err.to_string().contains("--resume"), "{err}");
    let before = stub.request_count();
    let s = execute(&m, true).unwrap();
    assert_eq!((s.executed, s.skipped), (0, 32));
    assert_eq!(stub.request_count(), before);
}

#[test]
fn store_from_another_manifest_is_refused() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let mut other = manifest_json(vec![model_json("alpha", 2.0, &stub.url())], 6);
    other["output_dir"] = json!("out");
    let other = ExperimentManifest::load(&ws.write_manifest(&other)).unwrap();
    let err = execute(&other, true).unwrap_err();
    assert!(err.to_string().contains("different manifest"), "{err}");
}

#[test]
fn transport_failures_are_recorded_and_excluded() {
    let ws = Workspace::new(10);
    let good = scripted_stub(grid_script);
    let down = StubServer::spawn(|_| StubReply::status(503));
    let mut v = manifest_json(vec![model_json("alpha", 2.0, &good.url()), model_json("beta", 8.0, &down.url())], 8);
    v["output_dir"] = json!("out");
    let m = ExperimentManifest::load(&ws.write_manifest(&v)).unwrap();
    let s = execute(&m, false).unwrap();
    assert_eq!((s.executed, s.failed), (32, 16));
    let runs = load(&m);
    let beta: Vec<_> = runs.iter().filter(|r| r.model == "beta").collect();
    assert!(beta.iter().all(|r| r.response.transport_status == TransportStatus::Failed && r.response.attempt_count == 4));

    let bundle = report::build_report(&m, &runs, None).unwrap();
    assert_eq!(bundle.failed_runs, 16);
    let cell = bundle.classification.iter().find(|r| r.model == "beta").unwrap();
    assert_eq!((cell.runs, cell.failed, cell.confusion.total()), (8, 8, 0));
    assert!(cell.metrics.is_none());

    let export = sheets::build_export(&runs, &ReasoningDimension::DEFAULT, None, 1).unwrap();
    assert_eq!(export.key.entries.len(), 16);
}

#[test]
fn client_errors_become_failure_records() {
    let ws = Workspace::new(10);
    let stub = StubServer::spawn(|_| StubReply::status(401));
    let m = small_grid(&ws, &stub.url(), json!({}));
    let s = execute(&m, false).unwrap();
    assert_eq!(s.failed, 32);
    let r = &load(&m)[0];
    assert!(r.response.error.as_deref().unwrap().contains("401"));
    assert_eq!(r.verdict, Verdict::Abstain);
}

#[test]
fn missing_credential_stops_before_sending() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let mut model = model_json("alpha", 2.0, &stub.url());
    model["auth_env_var"] = json!("STRUCTCOT_PIPELINE_UNSET_TOKEN");
    let m = ExperimentManifest::load(&ws.write_manifest(&manifest_json(vec![model], 8))).unwrap();
    assert_eq!(execute(&m, false).unwrap_err().code(), "E_MODEL_CONFIG");
    assert_eq!(stub.request_count(), 0);
    assert!(!m.runs_dir().join("alpha.jsonl").exists());
}

#[test]
fn store_rejects_duplicates_and_interior_garbage_but_tolerates_torn_tail() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let shard = m.runs_dir().join("alpha.jsonl");
    let text = fs::read_to_string(&shard).unwrap();
    let first = text.lines().next().unwrap().to_string();

    fs::write(&shard, format!("{text}{}", &first[..first.len() / 3])).unwrap();
    assert_eq!(load(&m).len(), 32);

    fs::write(&shard, format!("{text}{first}\n")).unwrap();
    assert!(RunStore::new(m.runs_dir()).load().unwrap_err().to_string().contains("duplicate"));

    fs::write(&shard, format!("{{oops\n{text}")).unwrap();
    assert!(RunStore::new(m.runs_dir()).load().unwrap_err().to_string().contains("line 1"));
}

#[test]
fn abstain_policy_changes_only_the_cells() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(|_, _, attack, j| if attack && j < 2 { Say::Unsure } else if attack { Say::Attack } else { Say::Normal });
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let runs = load(&m);
    let as_error = report::build_report(&m, &runs, None).unwrap();
    let mut mx = m.clone();
    mx.manifest.abstain_policy = AbstainPolicy::Exclude;
    let excluded = report::build_report(&mx, &runs, None).unwrap();
    for (a, b) in as_error.classification.iter().zip(&excluded.classification) {
        assert_eq!(a.abstain, b.abstain);
        assert_eq!(a.confusion.total(), b.confusion.total() + a.abstain);
        assert_eq!(a.confusion.fn_, b.confusion.fn_ + a.abstain);
    }
}

fn fill(path: &Path, value: impl Fn(usize) -> String) {
    let text = fs::read_to_string(path).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(&header).unwrap();
    for (i, rec) in r.records().enumerate() {
        let mut row: Vec<String> = rec.unwrap().iter().map(String::from).collect();
        for cell in row.iter_mut().skip(3) {
            *cell = value(i);
        }
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

struct Rated {
    _ws: Workspace,
    _stub: StubServer,
    m: ResolvedManifest,
    runs: Vec<RunRecord>,
    paths: sheets::ExportPaths,
}

fn rated(sample: usize) -> Rated {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let runs = load(&m);
    let paths = sheets::export_sheets(&runs, &ReasoningDimension::DEFAULT, Some(sample), 5, &m.sheets_dir(), &m.keys_dir()).unwrap();
    Rated { _ws: ws, _stub: stub, m, runs, paths }
}

#[test]
fn export_is_deterministic_and_blind() {
    let r = rated(12);
    let again = sheets::build_export(&r.runs, &ReasoningDimension::DEFAULT, Some(12), 5).unwrap();
    let once = sheets::build_export(&r.runs, &ReasoningDimension::DEFAULT, Some(12), 5).unwrap();
    assert_eq!(again, once);
    assert_ne!(once.sheet_a.rows, once.sheet_b.rows);
    let other_seed = sheets::build_export(&r.runs, &ReasoningDimension::DEFAULT, Some(12), 6).unwrap();
    assert_ne!(other_seed.key, once.key);
    let sheet = fs::read_to_string(&r.paths.sheet_a).unwrap();
    assert!(sheet.starts_with("blind_key,record_rendering,raw_output,evidence,faithfulness,structure,taxonomy"));
    assert!(!sheet.contains("alpha") && !sheet.contains("nofw"));
    assert!(r.paths.key.starts_with(r.m.keys_dir()));
    assert!(r.paths.rubric.exists());
}

#[test]
fn import_binds_scores_to_runs() {
    let r = rated(12);
    fill(&r.paths.sheet_a, |_| "2".into());
    fill(&r.paths.sheet_b, |i| (i % 3).to_string());
    let bound = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap();
    assert_eq!(bound.rater_a.len(), 12);
    assert!(bound.rater_a.keys().all(|id| r.runs.iter().any(|x| &x.run_id == id)));
    assert!(bound.rater_a.values().all(|row| row.values().all(|v| *v == 2)));
    assert_eq!(bound.manifest_digest, r.m.digest);
}

#[test]
fn blank_cells_are_listed() {
    let r = rated(6);
    fill(&r.paths.sheet_a, |i| if i == 2 { String::new() } else { "1".into() });
    fill(&r.paths.sheet_b, |_| "1".into());
    let err = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.code(), "E_SHEET");
    assert!(msg.contains("4 unscored cells") && msg.contains("A:item-") && msg.contains("(line "), "{msg}");
}

#[test]
fn out_of_scale_and_garbage_scores_are_rejected() {
    for bad in ["3", "1.5", "high", "-1"] {
        let r = rated(4);
        fill(&r.paths.sheet_a, |i| if i == 1 { bad.into() } else { "0".into() });
        fill(&r.paths.sheet_b, |_| "0".into());
        let err = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap_err();
        assert_eq!(err.code(), "E_SHEET", "{bad}: {err}");
    }
}

#[test]
fn tampering_is_detected() {
    let r = rated(6);
    fill(&r.paths.sheet_a, |_| "1".into());
    fill(&r.paths.sheet_b, |_| "1".into());
    let text = fs::read_to_string(&r.paths.sheet_b).unwrap();

    let first_key = text.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    fs::write(&r.paths.sheet_b, text.replacen(&first_key, "item-9999", 1)).unwrap();
    let err = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap_err();
    assert_eq!(err.code(), "E_TAMPER", "{err}");

    let mut r2 = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r2.headers().unwrap().iter().map(String::from).collect();
    let mut w = csv::Writer::from_path(&r.paths.sheet_b).unwrap();
    w.write_record(&header).unwrap();
    for rec in r2.records().skip(1) {
        w.write_record(&rec.unwrap()).unwrap();
    }
    w.flush().unwrap();
    let err = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap_err();
    assert_eq!(err.code(), "E_TAMPER", "{err}");

    fs::write(&r.paths.sheet_b, &text).unwrap();
    let err = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs[..1]).unwrap_err();
    assert_eq!(err.code(), "E_TAMPER", "{err}");
}

#[test]
fn report_files_are_deterministic_and_complete() {
    let r = rated(16);
    fill(&r.paths.sheet_a, |i| (i % 3).to_string());
    fill(&r.paths.sheet_b, |i| ((i + 1) % 3).to_string());
    let bound = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap();
    let bundle = report::build_report(&r.m, &r.runs, Some(&bound)).unwrap();
    let dir = r.m.report_dir();
    let written = report::write_report(&bundle, &dir).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for stem in ["classification", "classification_delta", "reasoning", "reasoning_delta", "kappa", "pareto", "size_gain", "compliance"] {
        assert!(names.contains(&format!("{stem}.csv")) && names.contains(&format!("{stem}.json")), "{stem}");
    }
    assert!(names.contains(&"summary.json".to_string()));
    let snapshot: Vec<Vec<u8>> = written.iter().map(|p| fs::read(p).unwrap()).collect();
    let mut shuffled = r.runs.clone();
    shuffled.reverse();
    let again = report::build_report(&r.m, &shuffled, Some(&bound)).unwrap();
    let rewritten = report::write_report(&again, &dir).unwrap();
    assert_eq!(written, rewritten);
    assert_eq!(snapshot, rewritten.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());

    let size: Vec<_> = bundle.size_gain.iter().map(|s| s.model.as_str()).collect();
    assert_eq!(size, ["alpha", "beta"]);

    // Without ratings the rating-derived tables disappear.
    let plain = report::build_report(&r.m, &r.runs, None).unwrap();
    let written = report::write_report(&plain, &dir).unwrap();
    assert!(!dir.join("kappa.csv").exists() && !dir.join("reasoning.json").exists());
    assert!(written.iter().any(|p| p.ends_with("classification.csv")));
}

#[test]
fn stratified_kappa_is_per_cell() {
    let r = rated(32);
    fill(&r.paths.sheet_a, |i| (i % 3).to_string());
    fill(&r.paths.sheet_b, |i| (i % 2).to_string());
    let bound = sheets::import_ratings(&r.paths.sheet_a, &r.paths.sheet_b, &r.paths.key, &r.runs).unwrap();
    let mut m = r.m.clone();
    m.manifest.rating.kappa = structcot::KappaMode::Stratified;
    let bundle = report::build_report(&m, &r.runs, Some(&bound)).unwrap();
    let scopes: std::collections::BTreeSet<_> = bundle.kappa.unwrap().iter().map(|k| k.scope.clone()).collect();
    assert_eq!(scopes.len(), 4);
    assert!(scopes.contains("alpha|manual/fw"));
}

#[test]
fn zero_baseline_gives_blank_improvement_and_a_notice() {
    let ws = Workspace::new(10);
    // No-framework answers are always wrong: every baseline metric is 0.
    let stub = scripted_stub(|_, fw, attack, _| match (fw, attack) {
        (false, true) => Say::Normal,
        (false, false) => Say::Attack,
        (true, true) => Say::Attack,
        (true, false) => Say::Normal,
    });
    let m = small_grid(&ws, &stub.url(), json!({}));
    execute(&m, false).unwrap();
    let bundle = report::build_report(&m, &load(&m), None).unwrap();
    let acc = bundle
        .classification_delta
        .iter()
        .find(|d| d.model == "alpha" && d.metric == "accuracy_pct")
        .unwrap();
    assert_eq!(acc.before, 0.0);
    assert!(acc.improvement.is_none());
    assert!(!bundle.notices.is_empty());
    let csv = String::from_utf8(report::render(&bundle)["classification_delta.csv"].clone()).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("alpha,manual,manual/nofw,manual/fw,accuracy_pct,0.0,100.0,,")), "{csv}");
}
