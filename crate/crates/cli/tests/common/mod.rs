#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use graphinst_cli::{Common, CorpusArgs, SplitFilter, StageArgs};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn data(rel: &str) -> PathBuf {
    repo_root().join("data").join(rel)
}

/// The shipped fixture config with every path made absolute, plus
/// `extra` TOML appended. Written to `dir/pipeline.toml`.
pub fn fixture_config(dir: &Path, extra: &str) -> PathBuf {
    let text = std::fs::read_to_string(data("fixture/pipeline.toml")).unwrap();
    let mut t: toml::Table = toml::from_str(&text).unwrap();
    let abs = |rel: &toml::Value| toml::Value::String(data("fixture").join(rel.as_str().unwrap()).display().to_string());
    t.remove("output_dir");
    let roster = abs(&t["roster"]);
    t.insert("roster".into(), roster);
    let vocab = t["estimator"]["vocab_file"]["path"].clone();
    t["estimator"]["vocab_file"]
        .as_table_mut()
        .unwrap()
        .insert("path".into(), abs(&vocab));
    for d in t["domains"].as_array_mut().unwrap() {
        let d = d.as_table_mut().unwrap();
        let (a, r) = (abs(&d["adapter"]), abs(&d["records"]));
        d.insert("adapter".into(), a);
        d.insert("records".into(), r);
    }
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, format!("{}\n{extra}", toml::to_string(&t).unwrap())).unwrap();
    path
}

pub fn common(config: &Path, out: &Path, seed: Option<u64>) -> Common {
    Common {
        config: config.to_path_buf(),
        seed,
        out: Some(out.to_path_buf()),
    }
}

pub fn stage_args(config: &Path, out: &Path, seed: Option<u64>, force: bool) -> StageArgs {
    StageArgs {
        common: common(config, out, seed),
        force,
    }
}

pub fn corpus_args(config: &Path, out: &Path, format: &str, split: SplitFilter) -> CorpusArgs {
    CorpusArgs {
        common: common(config, out, None),
        format: format.into(),
        split,
        predictions: None,
    }
}

pub struct MockServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    server: Arc<tiny_http::Server>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    /// Serves chat-completion requests. `reply` maps the prompt and the
    /// Authorization header to an HTTP status and the reply text.
    pub fn start<F>(reply: F) -> MockServer
    where
        F: Fn(&str, Option<&str>) -> (u16, String) + Send + Sync + 'static,
    {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let requests = Arc::new(AtomicUsize::new(0));
        let (srv, count) = (server.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                count.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let prompt = serde_json::from_str::<serde_json::Value>(&body)
                    .ok()
                    .and_then(|v| v["messages"][0]["content"].as_str().map(String::from))
                    .unwrap_or_default();
                let auth = req
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.as_str().to_string());
                let (status, text) = reply(&prompt, auth.as_deref());
                let payload = serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] });
                let resp = tiny_http::Response::from_string(payload.to_string())
                    .with_status_code(status)
                    .with_header("Content-Type: application/json".parse::<tiny_http::Header>().unwrap());
                let _ = req.respond(resp);
            }
        });
        MockServer {
            url: format!("http://127.0.0.1:{port}/v1/chat/completions"),
            requests,
            server,
            handle: Some(handle),
        }
    }

    pub fn count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// An `[endpoint]` table for `url`; `extra` keys override the defaults
/// used here.
pub fn endpoint_toml(url: &str, extra: &str) -> String {
    let mut t: toml::Table = toml::from_str("max_concurrency = 8\nbackoff_ms = 1\nmax_retries = 2\ntimeout_secs = 10").unwrap();
    t.insert("url".into(), url.into());
    t.extend(toml::from_str::<toml::Table>(extra).unwrap());
    format!("[endpoint]\n{}", toml::to_string(&t).unwrap())
}
