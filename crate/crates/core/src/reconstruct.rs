//! Reconstruction prompts and LLM backends.
//!
//! Prompts follow an Alpaca-style body wrapped in the Llama-2 chat markers.
//! Backends implement [`Completer`]; the HTTP backend speaks the
//! chat-completions JSON protocol, and the mock backends give deterministic
//! output for tests and offline runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::distill::ConceptList;

pub const RECONSTRUCTION_INSTRUCTION: &str =
    "Make short sentences containing all the following keywords by adding the necessary sentence elements only.";
pub const KEYWORDS_INSTRUCTION: &str = "Extract a few keywords from the following content.";
pub const SUMMARY_INSTRUCTION: &str = "Generate a short summary of the following content.";

const INSTRUCTION_SLOT: &str = "$INSTRUCTION";
const INPUT_SLOT: &str = "$INPUT";

const KEYWORD_BODY: &str = "[INST] <<SYS>>\nInstruction: $INSTRUCTION\n<</SYS>>\nBelow is an instruction that describes a task, paired with an input that provides keywords.\n### Instruction: {$INSTRUCTION}\n### Input: {$INPUT}\n### Response: \n[/INST]";
const CONTENT_BODY: &str = "[INST] <<SYS>>\nInstruction: $INSTRUCTION\n<</SYS>>\nBelow is an instruction that describes a task, paired with an input that provides content.\n### Instruction: {$INSTRUCTION}\n### Input: {$INPUT}\n### Response: \n[/INST]";

const INPUT_OPEN: &str = "### Input: {";
const INPUT_CLOSE: &str = "}\n### Response:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_instruction: String,
    /// Body with `$INSTRUCTION` and `$INPUT` slots.
    pub body_template: String,
}

impl PromptTemplate {
    pub fn reconstruction() -> Self {
        PromptTemplate {
            system_instruction: RECONSTRUCTION_INSTRUCTION.into(),
            body_template: KEYWORD_BODY.into(),
        }
    }

    pub fn keywords() -> Self {
        PromptTemplate {
            system_instruction: KEYWORDS_INSTRUCTION.into(),
            body_template: CONTENT_BODY.into(),
        }
    }

    pub fn summary() -> Self {
        PromptTemplate {
            system_instruction: SUMMARY_INSTRUCTION.into(),
            body_template: CONTENT_BODY.into(),
        }
    }

    /// Fills the slots in a single pass, so slot-like text inside `input`
    /// is left untouched.
    pub fn render(&self, input: &str) -> String {
        let mut out = String::with_capacity(self.body_template.len() + input.len() * 2);
        let mut rest = self.body_template.as_str();
        loop {
            let next_instr = rest.find(INSTRUCTION_SLOT);
            let next_input = rest.find(INPUT_SLOT);
            let (at, slot, value) = match (next_instr, next_input) {
                (Some(a), Some(b)) if a < b => (a, INSTRUCTION_SLOT, self.system_instruction.as_str()),
                (Some(a), None) => (a, INSTRUCTION_SLOT, self.system_instruction.as_str()),
                (_, Some(b)) => (b, INPUT_SLOT, input),
                (None, None) => break,
            };
            out.push_str(&rest[..at]);
            out.push_str(value);
            rest = &rest[at + slot.len()..];
        }
        out.push_str(rest);
        out
    }
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("EmptyConcepts: nothing to reconstruct")]
    EmptyConcepts,
    #[error("EmptyDocument: document text is empty")]
    EmptyDocument,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// `", "`-joined concepts, or `"; "` when a concept itself contains a comma.
pub fn join_concepts(concepts: &[String]) -> String {
    let sep = if concepts.iter().any(|c| c.contains(',')) {
        "; "
    } else {
        ", "
    };
    concepts.join(sep)
}

pub fn build_reconstruction_prompt(concepts: &ConceptList) -> Result<String, ReconstructError> {
    if concepts.is_empty() {
        return Err(ReconstructError::EmptyConcepts);
    }
    Ok(PromptTemplate::reconstruction().render(&join_concepts(&concepts.concepts)))
}

pub fn build_keywords_prompt(doc: &str) -> Result<String, ReconstructError> {
    if doc.trim().is_empty() {
        return Err(ReconstructError::EmptyDocument);
    }
    Ok(PromptTemplate::keywords().render(doc))
}

pub fn build_summary_prompt(doc: &str) -> Result<String, ReconstructError> {
    if doc.trim().is_empty() {
        return Err(ReconstructError::EmptyDocument);
    }
    Ok(PromptTemplate::summary().render(doc))
}

/// Text between the last `### Input: {` and the closing `}` of a rendered
/// prompt.
pub fn prompt_input(prompt: &str) -> Option<&str> {
    let start = prompt.rfind(INPUT_OPEN)? + INPUT_OPEN.len();
    let len = prompt[start..].rfind(INPUT_CLOSE)?;
    Some(&prompt[start..start + len])
}

// ---------------------------------------------------------------------------
// Backends

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("Timeout: request did not complete in time")]
    Timeout,
    #[error("HttpStatus: endpoint returned {0}")]
    HttpStatus(u16),
    #[error("RateLimited: endpoint kept returning 429")]
    RateLimited,
    #[error("MalformedResponse: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend config: {0}")]
    Config(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::RateLimited | BackendError::Transport(_) => true,
            BackendError::HttpStatus(code) => *code >= 500,
            _ => false,
        }
    }
}

pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Http,
    /// Echoes the prompt's input block as one sentence.
    MockConceptEcho,
    /// Returns `fixed_response`.
    MockFixed,
    /// Returns the prompt unchanged.
    MockEcho,
    /// Returns the facts segment of an inference prompt.
    MockFactsEcho,
}

impl BackendKind {
    pub fn is_mock(self) -> bool {
        self != BackendKind::Http
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmBackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Base delay of the exponential retry backoff.
    pub backoff_ms: u64,
    pub fixed_response: String,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        LlmBackendConfig {
            kind: BackendKind::Http,
            endpoint_url: String::new(),
            model_name: String::new(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_tokens: 256,
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            max_in_flight: 4,
            backoff_ms: 500,
            fixed_response: String::new(),
        }
    }
}

impl LlmBackendConfig {
    pub fn mock(kind: BackendKind) -> Self {
        LlmBackendConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.kind == BackendKind::Http && self.endpoint_url.trim().is_empty() {
            return Err(BackendError::Config("endpoint_url is required for http backends".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Config("max_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::Config("temperature must be non-negative".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be positive".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(BackendError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

pub fn build_backend(config: &LlmBackendConfig) -> Result<Box<dyn Completer>, BackendError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::Http => Box::new(HttpBackend::new(config.clone())?),
        BackendKind::MockConceptEcho => Box::new(MockBackend::new(MockKind::ConceptEcho)),
        BackendKind::MockFixed => Box::new(MockBackend::new(MockKind::Fixed(
            config.fixed_response.clone(),
        ))),
        BackendKind::MockEcho => Box::new(MockBackend::new(MockKind::Echo)),
        BackendKind::MockFactsEcho => Box::new(MockBackend::new(MockKind::FactsEcho)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockKind {
    ConceptEcho,
    Fixed(String),
    Echo,
    FactsEcho,
}

/// Deterministic backend that also counts its calls.
#[derive(Debug)]
pub struct MockBackend {
    kind: MockKind,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(kind: MockKind) -> Self {
        MockBackend {
            kind,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Completer for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match &self.kind {
            MockKind::ConceptEcho => match prompt_input(prompt) {
                Some(input) => format!("{input}."),
                None => prompt.to_string(),
            },
            MockKind::Fixed(s) => s.clone(),
            MockKind::Echo => prompt.to_string(),
            MockKind::FactsEcho => crate::pipeline::prompt_facts(prompt)
                .unwrap_or(prompt)
                .to_string(),
        })
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct ConcurrencyGate {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct GatePermit<'a> {
    gate: &'a ConcurrencyGate,
}

impl ConcurrencyGate {
    pub fn new(limit: usize) -> Self {
        ConcurrencyGate {
            free: Mutex::new(limit.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GatePermit { gate: self }
    }
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut free = self.gate.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.gate.cv.notify_one();
    }
}

/// Chat-completions client with retries and a bound on in-flight requests.
pub struct HttpBackend {
    config: LlmBackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: ConcurrencyGate,
    attempts: AtomicUsize,
}

impl HttpBackend {
    pub fn new(config: LlmBackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let api_key = if config.api_key_env.is_empty() {
            None
        } else {
            let key = std::env::var(&config.api_key_env).ok();
            if key.is_none() {
                log::debug!("{} is not set; sending requests without a key", config.api_key_env);
            }
            key
        };
        Ok(HttpBackend {
            gate: ConcurrencyGate::new(config.max_in_flight),
            config,
            client,
            api_key,
            attempts: AtomicUsize::new(0),
        })
    }

    /// Total HTTP attempts made, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "messages": [{ "role": "user", "content": prompt }],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<String, BackendError> {
        let _permit = self.gate.acquire();
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let mut req = self
            .client
            .post(&self.config.endpoint_url)
            .json(&self.request_body(prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(classify_transport)?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited);
        }
        if !status.is_success() {
            return Err(BackendError::HttpStatus(status.as_u16()));
        }
        let body = resp.text().map_err(classify_transport)?;
        parse_completion(&body)
    }
}

fn classify_transport(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

/// Extracts the completion text from a chat-completions (or legacy
/// completions) response body.
pub fn parse_completion(body: &str) -> Result<String, BackendError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("choice has no text content".into()))
}

impl Completer for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let mut attempt = 0u32;
        loop {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("request failed ({e}); retry {} in {delay} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reconstruction

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReconstructedContext {
    pub per_document: Vec<String>,
    pub joined: String,
}

impl ReconstructedContext {
    /// Joins the non-empty parts with blank lines.
    pub fn from_parts(per_document: Vec<String>) -> Self {
        let joined = join_nonempty(&per_document);
        ReconstructedContext {
            per_document,
            joined,
        }
    }
}

pub fn join_nonempty(parts: &[String]) -> String {
    parts
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// One completion per non-empty concept list, in document order. Empty
/// lists reconstruct to empty strings without a backend call.
pub fn reconstruct_documents(
    concept_lists: &[ConceptList],
    backend: &dyn Completer,
) -> Result<ReconstructedContext, ReconstructError> {
    let mut parts = Vec::with_capacity(concept_lists.len());
    for concepts in concept_lists {
        if concepts.is_empty() {
            parts.push(String::new());
            continue;
        }
        let prompt = build_reconstruction_prompt(concepts)?;
        parts.push(backend.complete(&prompt)?.trim().to_string());
    }
    Ok(ReconstructedContext::from_parts(parts))
}

/// Single completion over the union of all concept lists.
pub fn reconstruct_pooled(
    concept_lists: &[ConceptList],
    backend: &dyn Completer,
) -> Result<ReconstructedContext, ReconstructError> {
    let mut seen = std::collections::HashSet::new();
    let pooled: Vec<String> = concept_lists
        .iter()
        .flat_map(|c| c.concepts.iter())
        .filter(|c| seen.insert(c.to_lowercase()))
        .cloned()
        .collect();
    if pooled.is_empty() {
        return Ok(ReconstructedContext::default());
    }
    let prompt = build_reconstruction_prompt(&ConceptList::from_concepts(pooled))?;
    let text = backend.complete(&prompt)?.trim().to_string();
    Ok(ReconstructedContext::from_parts(vec![text]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(c: &[&str]) -> ConceptList {
        ConceptList::from_concepts(c.iter().copied())
    }

    #[test]
    fn reconstruction_prompt_layout() {
        let p = build_reconstruction_prompt(&list(&["club", "soccer"])).unwrap();
        assert_eq!(
            p,
            "[INST] <<SYS>>\n\
             Instruction: Make short sentences containing all the following keywords by adding the necessary sentence elements only.\n\
             <</SYS>>\n\
             Below is an instruction that describes a task, paired with an input that provides keywords.\n\
             ### Instruction: {Make short sentences containing all the following keywords by adding the necessary sentence elements only.}\n\
             ### Input: {club, soccer}\n\
             ### Response: \n\
             [/INST]"
        );
        assert_eq!(prompt_input(&p), Some("club, soccer"));
    }

    #[test]
    fn empty_concepts_rejected() {
        assert!(matches!(
            build_reconstruction_prompt(&ConceptList::default()),
            Err(ReconstructError::EmptyConcepts)
        ));
    }

    #[test]
    fn comma_in_concept_switches_separator() {
        let p = build_reconstruction_prompt(&list(&["A,B", "C"])).unwrap();
        assert_eq!(prompt_input(&p), Some("A,B; C"));
    }

    #[test]
    fn baseline_prompts() {
        let k = build_keywords_prompt("Some text.").unwrap();
        assert!(k.contains(KEYWORDS_INSTRUCTION));
        assert!(k.contains("paired with an input that provides content."));
        let s = build_summary_prompt("Some text.").unwrap();
        assert!(s.contains(SUMMARY_INSTRUCTION));
        assert!(matches!(build_keywords_prompt(""), Err(ReconstructError::EmptyDocument)));
        assert!(matches!(build_summary_prompt(""), Err(ReconstructError::EmptyDocument)));

        let tricky = "before ### Response: after $INPUT $INSTRUCTION";
        let p = build_summary_prompt(tricky).unwrap();
        assert!(p.contains(&format!("### Input: {{{tricky}}}")));
        assert_eq!(prompt_input(&p), Some(tricky));
    }

    #[test]
    fn mock_concept_echo() {
        let m = MockBackend::new(MockKind::ConceptEcho);
        let p = build_reconstruction_prompt(&list(&["club", "soccer"])).unwrap();
        let out = m.complete(&p).unwrap();
        assert!(out.contains("club") && out.contains("soccer"));
        assert_eq!(m.calls(), 1);
    }

    #[test]
    fn reconstruct_skips_empty_lists() {
        let m = MockBackend::new(MockKind::ConceptEcho);
        let ctx = reconstruct_documents(
            &[list(&["a1", "b1"]), ConceptList::default(), list(&["c1"])],
            &m,
        )
        .unwrap();
        assert_eq!(m.calls(), 2);
        assert_eq!(ctx.per_document, ["a1, b1.", "", "c1."]);
        assert_eq!(ctx.joined, "a1, b1.\n\nc1.");

        let none = reconstruct_documents(&[], &m).unwrap();
        assert!(none.per_document.is_empty() && none.joined.is_empty());
    }

    #[test]
    fn pooled_makes_one_call() {
        let m = MockBackend::new(MockKind::ConceptEcho);
        let ctx = reconstruct_pooled(&[list(&["a1", "b1"]), list(&["B1", "c1"])], &m).unwrap();
        assert_eq!(m.calls(), 1);
        assert_eq!(ctx.joined, "a1, b1, c1.");
    }

    #[test]
    fn completion_parsing() {
        let chat = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_completion(chat).unwrap(), "hi");
        assert_eq!(parse_completion(r#"{"choices":[{"text":"yo"}]}"#).unwrap(), "yo");
        assert!(matches!(
            parse_completion(r#"{"choices":[]}"#),
            Err(BackendError::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_completion("not json"),
            Err(BackendError::MalformedResponse(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(LlmBackendConfig::default().validate().is_err());
        assert!(LlmBackendConfig::mock(BackendKind::MockEcho).validate().is_ok());
        let bad = LlmBackendConfig {
            max_in_flight: 0,
            ..LlmBackendConfig::mock(BackendKind::MockEcho)
        };
        assert!(bad.validate().is_err());
    }
}
