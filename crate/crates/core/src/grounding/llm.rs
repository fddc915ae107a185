//! Chat-completion membership oracle.
//!
//! Request body (POSTed as JSON to `endpoint`):
//!
//! ```json
//! {"model": "...", "temperature": 0.7, "seed": 123,
//!  "messages": [{"role": "system", "content": "..."}, {"role": "user", "content": "..."}]}
//! ```
//!
//! The reply is read from `choices[0].message.content`; the first integer in
//! it is taken as a 0–100 score.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::oracle::{MembershipOracle, OracleError, Query};

const SYSTEM_PROMPT: &str =
    "You rate how well a planning state supports a vague precondition. Answer with one integer from 0 to 100.";

const REASK: &str =
    "Your previous reply did not contain a score. Reply with a single integer between 0 and 100 and nothing else.";

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    pub audit: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: String::new(),
            api_key: None,
            model: "gpt-4o".into(),
            temperature: 0.7,
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
            audit: None,
        }
    }
}

impl LlmConfig {
    /// Reads `FCP_LLM_ENDPOINT`, `FCP_LLM_API_KEY`, `FCP_LLM_MODEL`, `FCP_LLM_TEMPERATURE`.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut cfg = LlmConfig {
            endpoint: get("FCP_LLM_ENDPOINT").ok_or("FCP_LLM_ENDPOINT is not set")?,
            api_key: get("FCP_LLM_API_KEY").filter(|k| !k.is_empty()),
            ..LlmConfig::default()
        };
        if let Some(model) = get("FCP_LLM_MODEL") {
            cfg.model = model;
        }
        if let Some(t) = get("FCP_LLM_TEMPERATURE") {
            cfg.temperature = t
                .parse()
                .map_err(|_| format!("FCP_LLM_TEMPERATURE `{t}` is not a number"))?;
        }
        if cfg.temperature.is_nan() || cfg.temperature <= 0.0 {
            return Err("FCP_LLM_TEMPERATURE must be positive for sampled grounding".into());
        }
        Ok(cfg)
    }
}

/// Renders the rating prompt for a query.
pub fn render_prompt(query: &Query<'_>) -> String {
    let a = query.action;
    let list = |set: &crate::world::FactSet| {
        if set.is_empty() {
            "none".to_string()
        } else {
            set.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", ")
        }
    };
    let mut resources: Vec<String> = query.state.resources.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if resources.is_empty() {
        resources.push("none".into());
    }
    format!(
        "Predicate: {pred}\n\
         Rubric: {rubric}\n\
         Action: {id} (requires: {req}; adds: {add}; deletes: {del})\n\
         Current facts: {facts}\n\
         Current resources: {res}\n\n\
         How well does the current state support `{pred}` for executing `{id}`?\n\
         Use a 0-100 scale: 0 = completely unsuitable, 50 = marginal, 100 = perfect.\n\
         Reply with a single integer.",
        pred = query.predicate.id,
        rubric = if query.predicate.rubric.is_empty() {
            "(none given)"
        } else {
            &query.predicate.rubric
        },
        id = a.id,
        req = list(&a.required_facts),
        add = list(&a.add_facts),
        del = list(&a.del_facts),
        facts = list(&query.state.facts),
        res = resources.join(", "),
    )
}

/// First integer in `reply`, normalized by 100. Values above 100 clamp to 1.
pub fn parse_score(reply: &str) -> Option<f64> {
    let start = reply.find(|c: char| c.is_ascii_digit())?;
    let digits: String = reply[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
    let n: u64 = digits.parse().unwrap_or(u64::MAX);
    if n > 100 {
        log::warn!("score {n} is outside 0-100; clamped");
    }
    Some((n.min(100)) as f64 / 100.0)
}

pub struct LlmOracle {
    config: LlmConfig,
    agent: ureq::Agent,
    audit: Option<Mutex<std::fs::File>>,
}

impl LlmOracle {
    pub fn new(config: LlmConfig) -> Result<Self, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let audit = match &config.audit {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| format!("cannot open audit file {}: {e}", path.display()))?,
            )),
            None => None,
        };
        Ok(LlmOracle { config, agent, audit })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn request_body(&self, prompt: &str, seed: u64, reask: Option<&str>) -> Value {
        let mut messages = vec![
            json!({"role": "system", "content": SYSTEM_PROMPT}),
            json!({"role": "user", "content": prompt}),
        ];
        if let Some(previous) = reask {
            messages.push(json!({"role": "assistant", "content": previous}));
            messages.push(json!({"role": "user", "content": REASK}));
        }
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "seed": seed,
            "messages": messages,
        })
    }

    fn log_audit(&self, body: &Value, reply: &Result<String, OracleError>) {
        if let Some(file) = &self.audit {
            let record = match reply {
                Ok(text) => json!({"request": body, "reply": text}),
                Err(e) => json!({"request": body, "error": e.to_string()}),
            };
            let mut f = file.lock().unwrap();
            if let Err(e) = writeln!(f, "{record}") {
                log::warn!("audit write failed: {e}");
            }
        }
    }

    fn post_once(&self, body: &Value) -> Result<String, OracleError> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| OracleError::Other(format!("reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| OracleError::Other("reply has no choices[0].message.content".into()))
    }

    /// Posts with bounded retries and exponential backoff on transport failures.
    fn post(&self, body: &Value) -> Result<String, OracleError> {
        let mut attempt = 0;
        loop {
            let reply = self.post_once(body);
            self.log_audit(body, &reply);
            match reply {
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    let wait = self.config.backoff * 2u32.saturating_pow(attempt);
                    log::warn!("LLM request failed ({e}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

impl MembershipOracle for LlmOracle {
    fn kind(&self) -> &'static str {
        "llm"
    }

    fn sample(&self, query: &Query<'_>, seed: u64) -> Result<f64, OracleError> {
        let prompt = render_prompt(query);
        let body = self.request_body(&prompt, seed, None);
        let reply = self.post(&body)?;
        if let Some(score) = parse_score(&reply) {
            return Ok(score);
        }
        let body = self.request_body(&prompt, seed, Some(&reply));
        let second = self.post(&body)?;
        parse_score(&second).ok_or(OracleError::Unparseable(second))
    }

    fn prompt(&self, query: &Query<'_>) -> Option<String> {
        Some(render_prompt(query))
    }
}
