//! Shared fixtures: a loopback chat-completions stub, a synthetic flow
//! dataset and manifest builders.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct StubRequest {
    pub path: String,
    pub headers: BTreeMap<String, String>,
    pub raw_body: Vec<u8>,
    pub body: Value,
}

impl StubRequest {
    pub fn model(&self) -> &str {
        self.body["model"].as_str().unwrap_or_default()
    }

    pub fn message(&self, role: &str) -> &str {
        self.body["messages"]
            .as_array()
            .and_then(|m| m.iter().find(|x| x["role"] == role))
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
}

impl StubReply {
    pub fn completion(text: &str) -> Self {
        Self {
            status: 200,
            body: json!({
                "id": "stub",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
                "usage": {"prompt_tokens": 11, "completion_tokens": 7, "total_tokens": 18}
            })
            .to_string(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: json!({"error": {"message": format!("scripted {status}")}}).to_string(),
        }
    }
}

type Handler = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

pub struct StubServer {
    pub addr: std::net::SocketAddr,
    pub requests: Arc<Mutex<Vec<StubRequest>>>,
    stop: Arc<AtomicBool>,
}

impl StubServer {
    pub fn spawn(handler: impl Fn(&StubRequest) -> StubReply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().unwrap();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        {
            let requests = requests.clone();
            let stop = stop.clone();
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let handler = handler.clone();
                    let requests = requests.clone();
                    thread::spawn(move || {
                        let _ = serve(conn, &*handler, &requests);
                    });
                }
            });
        }
        Self { addr, requests, stop }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
    }
}

fn serve(conn: TcpStream, handler: &Handler, log: &Mutex<Vec<StubRequest>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut headers = BTreeMap::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = headers
        .get("content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut raw_body = vec![0; len];
    reader.read_exact(&mut raw_body)?;
    let body = serde_json::from_slice(&raw_body).unwrap_or(Value::Null);
    let request = StubRequest {
        path,
        headers,
        raw_body,
        body,
    };
    log.lock().unwrap().push(request.clone());
    let reply = handler(&request);
    let mut conn = conn;
    write!(
        conn,
        "HTTP/1.1 {} Stub\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    conn.flush()
}

/// Port that was just free; connecting to it should be refused.
pub fn closed_port_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    format!("http://127.0.0.1:{port}/v1/chat/completions")
}

pub const NUMERIC: [&str; 20] = [
    "pkt_count", "byte_count", "duration_s", "duration_ns", "total_duration", "flow_count",
    "packet_ins", "pkt_per_flow", "byte_per_flow", "pkt_rate", "pair_flow", "port_no", "tx_bytes",
    "rx_bytes", "tx_kbps", "rx_kbps", "total_kbps", "switch_id", "timestamp", "hop_count",
];

/// Three categorical, twenty numeric columns and the ground truth.
pub fn schema_json() -> Value {
    let mut columns = vec![
        json!({"name": "src", "kind": "categorical"}),
        json!({"name": "dst", "kind": "categorical"}),
        json!({"name": "protocol", "kind": "categorical"}),
    ];
    columns.extend(NUMERIC.iter().map(|n| json!({"name": n, "kind": "numeric"})));
    columns.push(json!({"name": "label", "kind": "label"}));
    json!({ "columns": columns })
}

pub fn schema() -> structcot_core::DatasetSchema {
    serde_json::from_value(schema_json()).unwrap()
}

/// Source address encoding class and per-class index: `10.<class>.0.<j>`.
pub fn src_for(attack: bool, j: usize) -> String {
    format!("10.{}.0.{}", u8::from(attack), j)
}

/// Recover (attack, j) from the rendered record in a user prompt.
pub fn row_of(user_text: &str) -> Option<(bool, usize)> {
    let line = user_text.lines().find(|l| l.starts_with("src: "))?;
    let mut parts = line["src: ".len()..].split('.');
    let _ = parts.next()?;
    let class = parts.next()?;
    let _ = parts.next()?;
    let j = parts.next()?.parse().ok()?;
    Some((class == "1", j))
}

/// `per_class` normal rows then `per_class` attack rows, interleaved.
pub fn dataset_csv(per_class: usize) -> String {
    let mut out = String::from("src,dst,protocol,");
    out.push_str(&NUMERIC.join(","));
    out.push_str(",label\n");
    for j in 0..per_class {
        for attack in [false, true] {
            let src = src_for(attack, j);
            let proto = if attack { "UDP" } else { "TCP" };
            let scale = if attack { 40.0 } else { 1.0 };
            let nums: Vec<String> = (0..NUMERIC.len())
                .map(|k| format!("{}", (k as f64 + 1.0) * scale * (1.0 + j as f64 / 8.0)))
                .collect();
            out.push_str(&format!("{src},10.9.9.9,{proto},{},{}\n", nums.join(","), u8::from(attack)));
        }
    }
    out
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(per_class: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("flows.csv"), dataset_csv(per_class)).unwrap();
        std::fs::write(
            dir.path().join("schema.json"),
            serde_json::to_string_pretty(&schema_json()).unwrap(),
        )
        .unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write_manifest(&self, manifest: &Value) -> PathBuf {
        let path = self.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(manifest).unwrap()).unwrap();
        path
    }
}

pub fn model_json(name: &str, params: f64, url: &str) -> Value {
    json!({
        "name": name,
        "family": "other",
        "param_count_b": params,
        "endpoint_url": url,
        "decoding": {"temperature": 0.0, "max_output_tokens": 256}
    })
}

/// Manifest over the synthetic dataset: manual author only, both framework
/// states, fast retries.
pub fn manifest_json(models: Vec<Value>, sample_size: usize) -> Value {
    json!({
        "dataset": {"path": "flows.csv", "schema": "schema.json", "sample_size": sample_size, "seed": 7, "strategy": "stratified"},
        "models": models,
        "authors": ["manual"],
        "frameworks": ["nofw", "fw"],
        "strategy": "structured_security_reasoning",
        "output_dir": "out",
        "gateway": {"max_retries": 3, "backoff_base_ms": 1, "request_timeout_ms": 10000},
        "rating": {"seed": 1}
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Say {
    Attack,
    Normal,
    Unsure,
}

/// Whether the system prompt carries the output-schema factor, i.e. the
/// framework is on.
pub fn framework_on(req: &StubRequest) -> bool {
    let marker = "Observation → Evidence → Conclusion";
    req.message("system").contains(marker) || req.message("user").contains(marker)
}

pub fn response_text(say: Say, structured: bool) -> String {
    match (say, structured) {
        (Say::Attack, true) => "Observation: the flow shows a very high pkt_rate.\n\
             Evidence: pkt_count and byte_count are far above the other flows.\n\
             Conclusion: this is a volumetric DDoS attack.\n\
             Confidence: high.\nFINAL: ATTACK"
            .into(),
        (Say::Normal, true) => "Observation: moderate counters.\n\
             Evidence: pkt_rate and tx_kbps are low.\n\
             Conclusion: the flow is benign.\n\
             Confidence: medium.\nFINAL: NORMAL"
            .into(),
        (Say::Unsure, true) => "Observation: mixed signals.\nEvidence: pkt_count is moderate.\n\
             Conclusion: cannot decide between attack or normal."
            .into(),
        (Say::Attack, false) => "The packet rate is extreme, so this looks like a DDoS attack.".into(),
        (Say::Normal, false) => "Nothing unusual here; this is normal traffic.".into(),
        (Say::Unsure, false) => "It is hard to say whether this is an attack or normal.".into(),
    }
}

/// Stub that answers by a script over (model, framework on, attack row, index).
pub fn scripted_stub(script: impl Fn(&str, bool, bool, usize) -> Say + Send + Sync + 'static) -> StubServer {
    StubServer::spawn(move |req| {
        let fw = framework_on(req);
        match row_of(req.message("user")) {
            Some((attack, j)) => StubReply::completion(&response_text(script(req.model(), fw, attack, j), fw)),
            None => StubReply::completion("OK"),
        }
    })
}

/// The hand-designed verdict script used by the end-to-end checks.
///
/// alpha, no framework: attack rows 0..14 ATTACK, 14..18 NORMAL, 18..20 unsure;
///                      normal rows 0..15 NORMAL, 15..20 ATTACK.
/// alpha, framework:    attack rows 0..18 ATTACK, rest NORMAL; normal rows 0..18 NORMAL, rest ATTACK.
/// beta, no framework:  attack rows 0..16 ATTACK, rest NORMAL; normal rows 0..17 NORMAL, rest ATTACK.
/// beta, framework:     attack rows 0..19 ATTACK, rest NORMAL; normal rows 0..19 NORMAL, rest ATTACK.
pub fn grid_script(model: &str, fw: bool, attack: bool, j: usize) -> Say {
    let (hit_attack, hit_normal, unsure_from) = match (model, fw) {
        ("alpha", false) => (14, 15, 18),
        ("alpha", true) => (18, 18, usize::MAX),
        ("beta", false) => (16, 17, usize::MAX),
        ("beta", true) => (19, 19, usize::MAX),
        _ => (0, 0, usize::MAX),
    };
    if attack {
        if j < hit_attack {
            Say::Attack
        } else if j >= unsure_from {
            Say::Unsure
        } else {
            Say::Normal
        }
    } else if j < hit_normal {
        Say::Normal
    } else {
        Say::Attack
    }
}
