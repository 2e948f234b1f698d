//! HTTP inference-server backends.
//!
//! Native protocol: `POST {base}/v1/probe` with
//! `{"prompt", "slot", "candidates"}`, answered by
//! `{"logprobs": {word: ln p}, "model"}`.
//!
//! The completion adapter talks to OpenAI-style `POST {base}/v1/completions`
//! servers. Only terminal slots can be scored: the prompt up to `[Y]` is
//! sent with `max_tokens = 1` and `logprobs = N`, and each candidate is
//! matched against the returned top tokens as `" word"` or `"word"`. Words
//! the tokenizer splits show up at best by their first token, so every
//! candidate missing from the top list is reported with a warning.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, ProbeRequest, QueryOutcome, SlotConvention};
use crate::error::{Error, Result};
use crate::miner::Y_SLOT;

pub const TOKEN_ENV: &str = "PVF_BACKEND_TOKEN";

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub timeout: Duration,
    pub token: Option<String>,
    /// Retries after the first attempt for transport failures and 5xx.
    pub max_retries: u32,
    /// Delay before the first retry; doubled on each further one.
    pub backoff: Duration,
}

impl Default for HttpOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            token: None,
            max_retries: 3,
            backoff: Duration::from_millis(250),
        }
    }
}

impl HttpOptions {
    /// Defaults with the bearer token taken from `PVF_BACKEND_TOKEN`.
    pub fn from_env() -> Self {
        Self {
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            ..Self::default()
        }
    }
}

struct Client {
    base: String,
    agent: ureq::Agent,
    opts: HttpOptions,
}

enum Attempt {
    Done(String),
    Transient(String),
}

impl Client {
    fn new(base_url: &str, opts: HttpOptions) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(opts.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            opts,
        }
    }

    fn attempt(&self, url: &str, body: &serde_json::Value) -> Result<Attempt> {
        let mut req = self.agent.post(url);
        if let Some(t) = &self.opts.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Transient(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) if status == 200 => return Ok(Attempt::Transient(e.to_string())),
            Err(_) => String::new(),
        };
        match status {
            200 => Ok(Attempt::Done(text)),
            401 | 403 => Err(Error::AuthFailure(format!("{url}: HTTP {status}"))),
            500..=599 => Ok(Attempt::Transient(format!("HTTP {status}"))),
            _ => Err(Error::MalformedResponse(format!(
                "{url}: HTTP {status}: {}",
                text.trim()
            ))),
        }
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<String> {
        let url = format!("{}{path}", self.base);
        let mut delay = self.opts.backoff;
        let mut last = String::new();
        for attempt in 0..=self.opts.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&url, body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Transient(msg) => last = msg,
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{url}: {last} (after {} retries)",
            self.opts.max_retries
        )))
    }
}

/// Client for the native probe protocol.
pub struct HttpBackend {
    client: Client,
}

#[derive(Deserialize)]
struct ProbeResponse {
    logprobs: BTreeMap<String, f64>,
    #[allow(dead_code)]
    #[serde(default)]
    model: String,
}

pub(crate) fn lp_to_prob(word: &str, lp: f64) -> Result<f64> {
    if lp.is_nan() || lp > 0.0 {
        return Err(Error::MalformedResponse(format!("logprob {lp} for `{word}`")));
    }
    Ok(lp.exp())
}

impl HttpBackend {
    pub fn new(base_url: &str, opts: HttpOptions) -> Self {
        Self {
            client: Client::new(base_url, opts),
        }
    }
}

impl Backend for HttpBackend {
    fn describe(&self) -> String {
        format!("http:{}", self.client.base)
    }

    fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome> {
        let body = json!({
            "prompt": req.prompt,
            "slot": req.slot,
            "candidates": req.candidates,
        });
        let text = self.client.post("/v1/probe", &body)?;
        let resp: ProbeResponse =
            serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(format!("probe response: {e}")))?;
        let mut probs = BTreeMap::new();
        for (w, lp) in &resp.logprobs {
            probs.insert(w.as_str(), lp_to_prob(w, *lp)?);
        }
        Ok(QueryOutcome::from_lookup(req, |w| probs.get(w).copied()))
    }
}

/// Adapter for OpenAI-compatible completion servers.
pub struct OpenAiCompletionBackend {
    client: Client,
    model: String,
    top_logprobs: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    logprobs: Option<CompletionLogprobs>,
}

#[derive(Deserialize)]
struct CompletionLogprobs {
    top_logprobs: Vec<BTreeMap<String, f64>>,
}

impl OpenAiCompletionBackend {
    pub fn new(base_url: &str, model: impl Into<String>, opts: HttpOptions) -> Self {
        Self {
            client: Client::new(base_url, opts),
            model: model.into(),
            top_logprobs: 20,
        }
    }

    pub fn with_top_logprobs(mut self, n: u32) -> Self {
        self.top_logprobs = n;
        self
    }
}

/// Prompt text preceding the slot, with trailing whitespace removed so the
/// candidate's leading space is part of the scored token.
pub fn completion_prompt(prompt: &str) -> Result<&str> {
    let end = prompt
        .find(Y_SLOT)
        .ok_or_else(|| Error::BadTemplate(prompt.to_string()))?;
    if !prompt[end + Y_SLOT.len()..].trim().is_empty() {
        return Err(Error::Unsupported(format!(
            "completion adapter needs `{Y_SLOT}` at the end of `{prompt}`"
        )));
    }
    Ok(prompt[..end].trim_end())
}

impl Backend for OpenAiCompletionBackend {
    fn describe(&self) -> String {
        format!("openai-completions:{}:{}", self.client.base, self.model)
    }

    fn query(&self, req: &ProbeRequest) -> Result<QueryOutcome> {
        if req.slot != SlotConvention::Terminal {
            return Err(Error::Unsupported(
                "completion adapter only scores terminal slots".into(),
            ));
        }
        let body = json!({
            "model": self.model,
            "prompt": completion_prompt(&req.prompt)?,
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": self.top_logprobs,
        });
        let text = self.client.post("/v1/completions", &body)?;
        let resp: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(format!("completion response: {e}")))?;
        let top = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .and_then(|l| l.top_logprobs.into_iter().next())
            .ok_or_else(|| Error::MalformedResponse("completion response without logprobs".into()))?;
        let mut probs = BTreeMap::new();
        for w in &req.candidates {
            let hit = top.get(&format!(" {w}")).or_else(|| top.get(w.as_str()));
            if let Some(lp) = hit {
                probs.insert(w.as_str(), lp_to_prob(w, *lp)?);
            }
        }
        let mut out = QueryOutcome::from_lookup(req, |w| probs.get(w).copied());
        for w in req.candidates.iter().filter(|w| !probs.contains_key(w.as_str())) {
            out.warnings.push(format!(
                "`{w}` not among the top {} first tokens; it may span several tokens",
                self.top_logprobs
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logprob_conversion() {
        let p = lp_to_prob("he", -0.69).unwrap();
        assert_eq!(p, (-0.69f64).exp());
        assert!((p - 0.501_576_4).abs() < 1e-6);
        assert_eq!(lp_to_prob("he", 0.0).unwrap(), 1.0);
        assert!(lp_to_prob("he", 0.5).is_err());
        assert!(lp_to_prob("he", f64::NAN).is_err());
        assert_eq!(lp_to_prob("he", f64::NEG_INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn completion_prompt_cuts_at_slot() {
        assert_eq!(
            completion_prompt("The nurse, who came, is [Y]").unwrap(),
            "The nurse, who came, is"
        );
        assert!(matches!(
            completion_prompt("The nurse said [Y] left"),
            Err(Error::Unsupported(_))
        ));
        assert!(completion_prompt("The nurse said").is_err());
    }
}
