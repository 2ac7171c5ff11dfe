mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::{closed_port_url, grid_script, manifest_json, model_json, scripted_stub, Workspace};
use serde_json::json;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structcot")).args(args).output().unwrap()
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_the_trial_count() {
    let ws = Workspace::new(10);
    let m = ws.write_manifest(&manifest_json(vec![model_json("alpha", 2.0, "http://127.0.0.1:9/v1")], 8));
    let o = cli(&["validate", "--manifest", p(&m)]);
    let (out, err) = text(&o);
    assert!(o.status.success(), "{err}");
    assert!(out.contains("sample 8 (normal 4, attack 4)") && out.contains("= 16 trials"), "{out}");
}

#[test]
fn validate_fails_on_a_missing_pack() {
    let ws = Workspace::new(10);
    let mut v = manifest_json(vec![model_json("alpha", 2.0, "http://127.0.0.1:9/v1")], 8);
    v["packs"] = json!({"manual": "packs/absent.pack"});
    let m = ws.write_manifest(&v);
    let o = cli(&["validate", "--manifest", p(&m)]);
    let (_, err) = text(&o);
    assert_eq!(o.status.code(), Some(1));
    assert!(err.starts_with("error[E_PACK]") && err.contains("packs/absent.pack"), "{err}");
}

#[test]
fn validate_fails_on_capacity() {
    let ws = Workspace::new(3);
    let m = ws.write_manifest(&manifest_json(vec![model_json("alpha", 2.0, "http://127.0.0.1:9/v1")], 40));
    let o = cli(&["validate", "--manifest", p(&m)]);
    let (_, err) = text(&o);
    assert!(err.contains("error[E_DATASET]") && err.contains("40"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let o = cli(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.starts_with("error[E_USAGE]"));
    let o = cli(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(cli(&["--help"]).status.success());
}

#[test]
fn health_names_unreachable_endpoints() {
    let ws = Workspace::new(3);
    let stub = scripted_stub(grid_script);
    let dead = closed_port_url();
    let m = ws.write_manifest(&manifest_json(
        vec![model_json("alpha", 2.0, &stub.url()), model_json("beta", 8.0, &dead)],
        4,
    ));
    let o = cli(&["health", "--manifest", p(&m)]);
    let (out, err) = text(&o);
    assert!(!o.status.success());
    assert!(out.contains("ok alpha") && out.contains("fail beta"), "{out}");
    assert!(err.contains("E_UNREACHABLE") && err.contains(&dead), "{err}");
    let o = cli(&["health", "--manifest", p(&m), "--models", "alpha"]);
    assert!(o.status.success());
}

#[test]
fn full_workflow_through_the_binary() {
    let ws = Workspace::new(10);
    let stub = scripted_stub(grid_script);
    let m = ws.write_manifest(&manifest_json(
        vec![model_json("alpha", 2.0, &stub.url()), model_json("beta", 8.0, &stub.url())],
        8,
    ));
    let mp = p(&m);
    let out_dir = ws.path().join("results");
    let od = p(&out_dir);

    let o = cli(&["run", "--manifest", mp, "--out", od]);
    assert!(o.status.success(), "{}", text(&o).1);
    assert!(text(&o).0.contains("scheduled 32 | skipped 0 | executed 32 | failed 0"), "{}", text(&o).0);

    let o = cli(&["run", "--manifest", mp, "--out", od]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).1.contains("E_STORE"));

    let o = cli(&["run", "--manifest", mp, "--out", od, "--resume"]);
    assert!(text(&o).0.contains("skipped 32 | executed 0"), "{}", text(&o).0);

    let o = cli(&["export-sheets", "--manifest", mp, "--out", od, "--sample-size", "10", "--sheet-seed", "3"]);
    assert!(o.status.success(), "{}", text(&o).1);
    for sheet in ["sheet_A.csv", "sheet_B.csv"] {
        let path = out_dir.join("sheets").join(sheet);
        let content = std::fs::read_to_string(&path).unwrap();
        let mut r = csv::Reader::from_reader(content.as_bytes());
        let header = r.headers().unwrap().clone();
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.write_record(&header).unwrap();
        for rec in r.records() {
            let mut row: Vec<String> = rec.unwrap().iter().map(String::from).collect();
            for c in row.iter_mut().skip(3) {
                *c = "1".into();
            }
            w.write_record(&row).unwrap();
        }
        w.flush().unwrap();
    }
    let o = cli(&["import-ratings", "--manifest", mp, "--out", od]);
    assert!(o.status.success(), "{}", text(&o).1);
    assert!(out_dir.join("ratings/bound.json").exists());

    let o = cli(&["report", "--manifest", mp, "--out", od, "--kappa", "stratified"]);
    assert!(o.status.success(), "{}", text(&o).1);
    let report = out_dir.join("report");
    for f in ["classification.csv", "classification_delta.csv", "reasoning.csv", "kappa.csv", "pareto.csv", "size_gain.csv", "compliance.csv", "summary.json"] {
        assert!(report.join(f).exists(), "{f}");
    }
    // All ratings identical: kappa undefined, reported as a note.
    let kappa = std::fs::read_to_string(report.join("kappa.csv")).unwrap();
    assert!(kappa.lines().count() > 1);
    let first = std::fs::read(report.join("classification.csv")).unwrap();
    cli(&["report", "--manifest", mp, "--out", od, "--kappa", "stratified"]);
    assert_eq!(first, std::fs::read(report.join("classification.csv")).unwrap());
}

#[test]
fn parse_debug_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_structcot"))
        .args(["parse-debug", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"Observation: x\nEvidence: pktrate is 9000\nConclusion: DDoS\nFINAL: ATTACK")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "attack");
    assert_eq!(v["verdict_source"], "final_marker");
    assert_eq!(v["cited_features"][0]["feature"], "pktrate");
}

#[test]
fn parse_debug_survives_binary_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("blob");
    std::fs::write(&f, [0xff, 0xfe, 0x00, b'F', b'I', b'N', b'A', b'L', 0x80]).unwrap();
    let o = cli(&["parse-debug", p(&f)]);
    assert!(o.status.success());
}
