//! HTTP transport, pacing and the batch driver.

use std::io::BufRead;
use std::thread;
use std::time::{Duration, Instant};

use argus_core::agreement::cohen_kappa;
use argus_core::corpus::binarize;
use argus_core::corpus::Feature;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::prompt::{build_prompt, parse_response, Message, ProbeMode};
use crate::ProbeError;

pub const TOKEN_ENV: &str = "ARGUS_LLM_TOKEN";
/// First backoff delay; doubles on every retry.
pub const BACKOFF_BASE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub endpoint: String,
    pub token: Option<String>,
    pub model: String,
    pub mode: ProbeMode,
    pub feature: Feature,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Requests per second.
    pub rate_limit: f64,
}

impl ProbeConfig {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        feature: Feature,
        mode: ProbeMode,
    ) -> Self {
        ProbeConfig {
            endpoint: endpoint.into(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            model: model.into(),
            mode,
            feature,
            timeout: Duration::from_secs(60),
            max_retries: 5,
            rate_limit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.timeout.is_zero() {
            return Err(ProbeError::Config("timeout must be positive".into()));
        }
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return Err(ProbeError::Config(
                "rate limit must be a positive number of requests per second".into(),
            ));
        }
        if self.model.is_empty() {
            return Err(ProbeError::Config("model name is empty".into()));
        }
        Ok(())
    }

    pub fn request_body(&self, messages: &[Message]) -> Value {
        json!({ "model": self.model, "messages": messages, "temperature": 0 })
    }

    /// Settings the tool chose on its own, recorded next to the outputs.
    pub fn metadata(&self) -> Value {
        json!({
            "endpoint": self.endpoint,
            "model": self.model,
            "feature": self.feature,
            "mode": self.mode,
            "temperature": 0,
            "timeout_s": self.timeout.as_secs_f64(),
            "max_retries": self.max_retries,
            "rate_limit_per_s": self.rate_limit,
            "backoff_base_s": BACKOFF_BASE.as_secs_f64(),
            "note": "decoding and retry settings are defaults of this tool",
        })
    }
}

#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait Transport {
    /// Err is reserved for failures below HTTP (connect, timeout).
    fn post(&mut self, body: &Value) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
}

impl UreqTransport {
    pub fn new(config: &ProbeConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        UreqTransport {
            agent,
            endpoint: config.endpoint.clone(),
            token: config.token.clone(),
        }
    }
}

impl Transport for UreqTransport {
    fn post(&mut self, body: &Value) -> Result<HttpReply, String> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        match req.send_string(&body.to_string()) {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.into_string().map_err(|e| e.to_string())?;
                Ok(HttpReply { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => Ok(HttpReply {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(e) => Err(e.to_string()),
        }
    }
}

pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        thread::sleep(d);
    }
}

/// Spaces request starts at least 1/rate apart.
pub struct RateLimiter {
    interval: Duration,
    last: Option<Duration>,
}

impl RateLimiter {
    pub fn new(rate: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / rate),
            last: None,
        }
    }

    pub fn acquire(&mut self, clock: &mut dyn Clock) -> Duration {
        if let Some(last) = self.last {
            let ready = last + self.interval;
            let now = clock.now();
            if now < ready {
                clock.sleep(ready - now);
            }
        }
        let t = clock.now();
        self.last = Some(t);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeItem {
    pub item_id: String,
    pub text: String,
}

#[derive(Deserialize)]
struct RawItem {
    #[serde(alias = "comment_id", alias = "id")]
    item_id: String,
    text: Option<String>,
}

/// Items from JSONL; accepts comment tables and annotation files. Repeated ids keep the first text.
pub fn read_items<R: BufRead>(reader: R) -> Result<Vec<ProbeItem>, ProbeError> {
    let mut out: Vec<ProbeItem> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ProbeError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem = serde_json::from_str(&line)
            .map_err(|e| ProbeError::Config(format!("items line {}: {e}", i + 1)))?;
        if seen.contains(&raw.item_id) {
            continue;
        }
        let text = raw.text.ok_or_else(|| {
            ProbeError::Config(format!(
                "items line {}: first occurrence of {} has no text",
                i + 1,
                raw.item_id
            ))
        })?;
        seen.insert(raw.item_id.clone());
        out.push(ProbeItem {
            item_id: raw.item_id,
            text,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub item_id: String,
    pub feature: Feature,
    pub mode: ProbeMode,
    pub value: f64,
    /// Rating mode only: the rating cut at the corpus threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binarized: Option<bool>,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub item_id: String,
    pub feature: Feature,
    pub mode: ProbeMode,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    pub retries: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptRow {
    pub item_id: String,
    pub request: Value,
}

#[derive(Debug, Default)]
pub struct ProbeOutcome {
    pub rows: Vec<ProbeRow>,
    pub failures: Vec<FailureRow>,
    /// Start time of every request sent, relative to the clock origin.
    pub request_times: Vec<Duration>,
}

/// Request bodies only, nothing is sent.
pub fn dry_run(config: &ProbeConfig, items: &[ProbeItem]) -> Vec<PromptRow> {
    items
        .iter()
        .map(|it| PromptRow {
            item_id: it.item_id.clone(),
            request: config.request_body(&build_prompt(config.feature, config.mode, &it.text)),
        })
        .collect()
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Pulls the first choice's message content out of a chat-completion reply.
pub fn extract_content(body: &str) -> Result<String, ProbeError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProbeError::Parse {
        raw: body.to_string(),
        message: format!("reply is not JSON: {e}"),
    })?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProbeError::Parse {
            raw: body.to_string(),
            message: "reply has no choices[0].message.content".into(),
        })
}

enum Attempt {
    Done(String),
    Failed(String, Option<String>),
}

pub fn probe_batch(
    config: &ProbeConfig,
    items: &[ProbeItem],
    transport: &mut dyn Transport,
    clock: &mut dyn Clock,
) -> Result<ProbeOutcome, ProbeError> {
    config.validate()?;
    let mut limiter = RateLimiter::new(config.rate_limit);
    let mut out = ProbeOutcome::default();
    for item in items {
        let body = config.request_body(&build_prompt(config.feature, config.mode, &item.text));
        let mut retries = 0;
        let attempt = loop {
            out.request_times.push(limiter.acquire(clock));
            let (why, raw) = match transport.post(&body) {
                Ok(r) if (200..300).contains(&r.status) => break Attempt::Done(r.body),
                Ok(r) if !retryable(r.status) => {
                    break Attempt::Failed(format!("HTTP {}", r.status), Some(r.body))
                }
                Ok(r) => (format!("HTTP {}", r.status), Some(r.body)),
                Err(e) => (format!("transport: {e}"), None),
            };
            if retries >= config.max_retries {
                break Attempt::Failed(format!("{why}; gave up after {retries} retries"), raw);
            }
            let delay = BACKOFF_BASE * 2u32.saturating_pow(retries);
            log::warn!(
                "{}: {why}, retrying in {:.1}s",
                item.item_id,
                delay.as_secs_f64()
            );
            clock.sleep(delay);
            retries += 1;
        };
        let fail = |error: String, raw: Option<String>| FailureRow {
            item_id: item.item_id.clone(),
            feature: config.feature,
            mode: config.mode,
            error,
            raw,
            retries,
        };
        match attempt {
            Attempt::Failed(e, raw) => out.failures.push(fail(e, raw)),
            Attempt::Done(reply) => {
                let parsed = extract_content(&reply)
                    .and_then(|content| parse_response(config.feature, config.mode, &content));
                match parsed {
                    Ok(v) => {
                        let value = v.as_f64();
                        let binarized = match config.mode {
                            ProbeMode::Rating => Some(
                                binarize(value, config.feature)
                                    .map_err(|e| ProbeError::Config(e.to_string()))?,
                            ),
                            ProbeMode::Presence => None,
                        };
                        out.rows.push(ProbeRow {
                            item_id: item.item_id.clone(),
                            feature: config.feature,
                            mode: config.mode,
                            value,
                            binarized,
                            retries,
                        });
                    }
                    Err(ProbeError::Parse { raw, message }) => {
                        out.failures.push(fail(message, Some(raw)))
                    }
                    Err(e) => out.failures.push(fail(e.to_string(), None)),
                }
            }
        }
    }
    Ok(out)
}

/// Cohen's kappa between presence answers and binarized ratings on shared items.
pub fn binarized_kappa(
    presence: &[ProbeRow],
    rating: &[ProbeRow],
) -> Result<(f64, usize), ProbeError> {
    let ratings: std::collections::HashMap<(&str, Feature), bool> = rating
        .iter()
        .filter_map(|r| r.binarized.map(|b| ((r.item_id.as_str(), r.feature), b)))
        .collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for p in presence.iter().filter(|p| p.mode == ProbeMode::Presence) {
        if let Some(&r) = ratings.get(&(p.item_id.as_str(), p.feature)) {
            a.push(i64::from(p.value > 0.5));
            b.push(i64::from(r));
        }
    }
    if a.is_empty() {
        return Err(ProbeError::Config(
            "no items shared between presence and rating runs".into(),
        ));
    }
    let k = cohen_kappa(&a, &b).map_err(|e| ProbeError::Config(e.to_string()))?;
    Ok((k, a.len()))
}
