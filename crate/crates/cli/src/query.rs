//! Querying a hosted chat-completion model for every corpus prompt.
//!
//! Predictions are appended to a newline-delimited checkpoint as they
//! arrive, so an interrupted run resumes where it stopped.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use graphinst::dataset::CorpusRecord;
use graphinst::eval::PredictionRecord;

use crate::{ConfigError, EndpointError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestTemplate {
    /// `{"model": .., "messages": [{"role": "user", "content": prompt}]}`
    ChatMessages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_template")]
    pub request_template: RequestTemplate,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Dot-separated path to the reply text in the response body; numeric
    /// segments index arrays.
    #[serde(default = "default_response_path")]
    pub response_path: String,
}

fn default_template() -> RequestTemplate {
    RequestTemplate::ChatMessages
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    5
}
fn default_backoff() -> u64 {
    500
}
fn default_response_path() -> String {
    "choices.0.message.content".into()
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            model: None,
            request_template: default_template(),
            token_env: None,
            max_concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            response_path: default_response_path(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            bail!(ConfigError("endpoint max_concurrency must be at least 1".into()));
        }
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            bail!(ConfigError(format!("endpoint url `{}` is not http(s)", self.url)));
        }
        Ok(())
    }

    fn body(&self, prompt: &str) -> Value {
        match self.request_template {
            RequestTemplate::ChatMessages => {
                let mut body = json!({ "messages": [{ "role": "user", "content": prompt }] });
                if let Some(m) = &self.model {
                    body["model"] = json!(m);
                }
                body
            }
        }
    }
}

/// Follows a dot path such as `choices.0.message.content`.
pub fn extract_field<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(value, |v, seg| match seg.parse::<usize>() {
        Ok(i) if v.is_array() => v.get(i),
        _ => v.get(seg),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QueryReport {
    pub already_done: usize,
    pub sent: usize,
    pub failed: usize,
    pub remaining: usize,
}

enum Outcome {
    Text(String),
    Retry(String),
    Fail(String),
}

struct Client {
    agent: ureq::Agent,
    endpoint: EndpointConfig,
    token: Option<String>,
}

impl Client {
    fn new(endpoint: &EndpointConfig) -> Result<Self> {
        endpoint.validate()?;
        let token = match &endpoint.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ConfigError(format!("environment variable `{var}` holding the endpoint token is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build()
            .new_agent();
        Ok(Client {
            agent,
            endpoint: endpoint.clone(),
            token,
        })
    }

    fn attempt(&self, prompt: &str) -> Outcome {
        let mut req = self.agent.post(&self.endpoint.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let body = self.endpoint.body(prompt).to_string();
        let mut resp = match req.send(body.as_str()) {
            Ok(r) => r,
            // connection-level failures are worth retrying
            Err(e) => return Outcome::Retry(format!("transport: {e}")),
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        match status {
            200..=299 => {
                let parsed: Value = match serde_json::from_str(&text) {
                    Ok(v) => v,
                    Err(e) => return Outcome::Fail(format!("response is not JSON: {e}")),
                };
                match extract_field(&parsed, &self.endpoint.response_path) {
                    Some(Value::String(s)) => Outcome::Text(s.clone()),
                    Some(other) => Outcome::Text(other.to_string()),
                    None => Outcome::Fail(format!("response lacks `{}`", self.endpoint.response_path)),
                }
            }
            429 | 500..=599 => Outcome::Retry(format!("HTTP {status}")),
            _ => Outcome::Fail(format!("HTTP {status}")),
        }
    }

    fn query(&self, rec: &CorpusRecord) -> PredictionRecord {
        let mut last = String::new();
        for attempt in 0..=self.endpoint.max_retries {
            if attempt > 0 {
                let wait = self.endpoint.backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(&rec.prompt) {
                Outcome::Text(t) => return PredictionRecord::new(rec.instance_id.clone(), t),
                Outcome::Fail(e) => {
                    return PredictionRecord {
                        instance_id: rec.instance_id.clone(),
                        raw_output: String::new(),
                        error: Some(e),
                    }
                }
                Outcome::Retry(e) => {
                    log::debug!("{}: attempt {} failed: {e}", rec.instance_id, attempt + 1);
                    last = e;
                }
            }
        }
        PredictionRecord {
            instance_id: rec.instance_id.clone(),
            raw_output: String::new(),
            error: Some(format!("retries exhausted: {last}")),
        }
    }
}

/// Reads a checkpoint, dropping a torn final line left by a crash.
fn load_checkpoint(path: &Path) -> Result<BTreeSet<String>> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(last_nl) = bytes.iter().rposition(|&b| b == b'\n') {
        if last_nl + 1 != bytes.len() {
            std::fs::write(path, &bytes[..=last_nl])?;
        }
    } else if !bytes.is_empty() {
        std::fs::write(path, b"")?;
    }
    let mut done = BTreeSet::new();
    let file = std::fs::File::open(path)?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionRecord =
            serde_json::from_str(&line).with_context(|| format!("corrupt checkpoint line in {}", path.display()))?;
        done.insert(p.instance_id);
    }
    Ok(done)
}

/// Queries every record not yet in the checkpoint at `out`, at most
/// `limit` of them. The corpus itself is never modified.
pub fn query_model(
    records: &[CorpusRecord],
    endpoint: &EndpointConfig,
    out: &Path,
    limit: Option<usize>,
) -> Result<QueryReport> {
    let client = Client::new(endpoint)?;
    let done = load_checkpoint(out)?;
    let pending: Vec<&CorpusRecord> = records.iter().filter(|r| !done.contains(&r.instance_id)).collect();
    let take = limit.unwrap_or(pending.len()).min(pending.len());
    let batch = &pending[..take];
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .with_context(|| format!("opening {}", out.display()))?;
    log::info!(
        "query: {} to send, {} already in {}",
        batch.len(),
        done.len(),
        out.display()
    );

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<PredictionRecord>();
    let mut report = QueryReport {
        already_done: records.len() - pending.len(),
        remaining: pending.len() - take,
        ..Default::default()
    };
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..endpoint.max_concurrency.min(batch.len().max(1)) {
            let tx = tx.clone();
            let (next, client) = (&next, &client);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(rec) = batch.get(i) else { break };
                if tx.send(client.query(rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for p in rx {
            report.sent += 1;
            if let Some(e) = &p.error {
                report.failed += 1;
                log::warn!("{}: {e}", p.instance_id);
            }
            let mut line = serde_json::to_string(&p)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    })?;
    if report.sent > 0 && report.failed == report.sent {
        bail!(EndpointError(format!(
            "all {} requests to {} failed; failures recorded in {}",
            report.sent,
            endpoint.url,
            out.display()
        )));
    }
    Ok(report)
}
