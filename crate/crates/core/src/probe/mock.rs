//! Scripted inference server for tests and offline demos.
//!
//! Answers both the native probe endpoint and the completion endpoint from
//! fixed logprob tables keyed by prompt. Prompts are compared with any
//! `[Y]` slot and surrounding whitespace removed, so one table serves both
//! protocols.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tiny_http::{Header, Response, Server};

use crate::error::{Error, Result};
use crate::miner::Y_SLOT;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    /// Prompt → word → natural-log probability.
    pub tables: BTreeMap<String, BTreeMap<String, f64>>,
    /// Used for prompts without a table; unknown prompts get HTTP 422
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<BTreeMap<String, f64>>,
    #[serde(default = "default_model")]
    pub model: String,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_token: Option<String>,
    /// The first this-many requests are answered with HTTP 503.
    #[serde(default)]
    pub fail_first: usize,
}

fn default_model() -> String {
    "mock".into()
}

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    fn table(&self, prompt: &str) -> Option<&BTreeMap<String, f64>> {
        let key = prompt_key(prompt);
        self.tables
            .iter()
            .find(|(p, _)| prompt_key(p) == key)
            .map(|(_, t)| t)
            .or(self.default.as_ref())
    }
}

fn prompt_key(prompt: &str) -> String {
    prompt
        .replace(Y_SLOT, "")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// A running mock server. Shuts down when dropped.
pub struct MockServer {
    server: Arc<Server>,
    url: String,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

type Reply = (u16, serde_json::Value);

fn handle(script: &MockScript, seen: usize, url: &str, auth: Option<&str>, body: &str) -> Reply {
    if seen < script.fail_first {
        return (503, json!({"error": "scripted outage"}));
    }
    if let Some(tok) = &script.required_token {
        if auth != Some(format!("Bearer {tok}").as_str()) {
            return (401, json!({"error": "bad token"}));
        }
    }
    let Ok(body) = serde_json::from_str::<serde_json::Value>(body) else {
        return (400, json!({"error": "body is not JSON"}));
    };
    let Some(prompt) = body.get("prompt").and_then(|p| p.as_str()) else {
        return (400, json!({"error": "missing prompt"}));
    };
    let Some(table) = script.table(prompt) else {
        return (422, json!({"error": format!("no table for prompt `{prompt}`")}));
    };
    match url {
        "/v1/probe" => {
            let Some(cands) = body.get("candidates").and_then(|c| c.as_array()) else {
                return (400, json!({"error": "missing candidates"}));
            };
            let logprobs: BTreeMap<&str, f64> = cands
                .iter()
                .filter_map(|c| c.as_str())
                .filter_map(|w| table.get(w).map(|lp| (w, *lp)))
                .collect();
            (200, json!({"logprobs": logprobs, "model": script.model}))
        }
        "/v1/completions" => {
            let top: BTreeMap<String, f64> = table.iter().map(|(w, lp)| (format!(" {w}"), *lp)).collect();
            (
                200,
                json!({
                    "model": script.model,
                    "choices": [{"text": "", "logprobs": {"top_logprobs": [top]}}],
                }),
            )
        }
        _ => (404, json!({"error": "not found"})),
    }
}

impl MockServer {
    /// Binds to an ephemeral localhost port and serves until dropped.
    pub fn start(script: MockScript) -> Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(|e| Error::BackendUnavailable(format!("mock server: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::BackendUnavailable("mock server has no IP address".into()))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, requests) = (Arc::clone(&server), Arc::clone(&requests));
            std::thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let seen = requests.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let _ = req.as_reader().read_to_string(&mut body);
                    let auth = req
                        .headers()
                        .iter()
                        .find(|h| h.field.equiv("Authorization"))
                        .map(|h| h.value.as_str().to_string());
                    let (code, value) = handle(&script, seen, req.url(), auth.as_deref(), &body);
                    let ctype = Header::from_bytes("Content-Type", "application/json").expect("static header");
                    let resp = Response::from_string(value.to_string())
                        .with_status_code(code)
                        .with_header(ctype);
                    let _ = req.respond(resp);
                }
            })
        };
        Ok(Self {
            server,
            url: format!("http://{addr}"),
            requests,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Number of HTTP requests received so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn request_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.requests)
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
