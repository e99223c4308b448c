//! End-to-end question answering over pre-retrieved documents.
//!
//! Each stage reads only the previous stage's output: documents are
//! distilled to concepts, concepts are reconstructed into facts, and the
//! facts plus the question form the inference prompt.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::{distill_graphs, ConceptList, DistillConfig, DistillError};
use crate::eval::{answer_correct, CaseMode, EvalError};
use crate::penman::{parse_penman_records, PenmanError};
use crate::reconstruct::{
    build_keywords_prompt, build_summary_prompt, join_nonempty, reconstruct_documents,
    reconstruct_pooled, BackendError, Completer, ReconstructError, ReconstructedContext,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportingDocument {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub docs: Vec<SupportingDocument>,
}

impl QuestionRecord {
    pub fn k(&self) -> usize {
        self.docs.len()
    }

    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.answers.iter().all(|a| a.trim().is_empty()) {
            return Err("answers must contain a non-empty string".into());
        }
        if self.docs.is_empty() {
            return Err("docs must not be empty".into());
        }
        if let Some(i) = self.docs.iter().position(|d| d.text.trim().is_empty()) {
            return Err(format!("docs[{i}].text is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Cocr,
    Keywords,
    Summary,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vanilla, Method::Cocr, Method::Keywords, Method::Summary];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Cocr => "cocr",
            Method::Keywords => "keywords",
            Method::Summary => "summary",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}` (expected vanilla, cocr, keywords or summary)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub id: String,
    pub method: Method,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<ConceptList>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructed: Option<ReconstructedContext>,
    pub inference_prompt: String,
    pub answer: String,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("EmptyQuestion: question text is empty")]
    EmptyQuestion,
    #[error("MissingAmr: document {doc} has no AMR and no parse endpoint is configured")]
    MissingAmr { doc: usize },
    #[error("document {doc}: {source}")]
    Penman {
        doc: usize,
        #[source]
        source: PenmanError,
    },
    #[error("document {doc}: {source}")]
    Distill {
        doc: usize,
        #[source]
        source: DistillError,
    },
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A stage failure tagged with the question it belongs to.
#[derive(Debug, Error)]
#[error("record {id}: {error}")]
pub struct RecordError {
    pub id: String,
    #[source]
    pub error: StageError,
}

pub const INFERENCE_PREFIX: &str = "Refer to the facts to answer the question. Facts: ";
const QUESTION_MARKER: &str = ". Question: ";

pub fn build_inference_prompt(context: &str, question: &str) -> Result<String, StageError> {
    if question.trim().is_empty() {
        return Err(StageError::EmptyQuestion);
    }
    Ok(format!("{INFERENCE_PREFIX}{context}{QUESTION_MARKER}{question}"))
}

/// Facts segment of an inference prompt.
pub fn prompt_facts(prompt: &str) -> Option<&str> {
    let rest = prompt.strip_prefix(INFERENCE_PREFIX)?;
    let end = rest.rfind(QUESTION_MARKER)?;
    Some(&rest[..end])
}

/// Text-to-PENMAN service used for documents that ship without an AMR.
pub trait AmrParser: Send + Sync {
    fn parse(&self, text: &str) -> Result<String, BackendError>;
}

/// POSTs `{"text": ...}` and expects `{"amr": "<penman>"}` back.
pub struct HttpAmrParser {
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpAmrParser {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpAmrParser {
            client,
            url: url.into(),
        })
    }
}

impl AmrParser for HttpAmrParser {
    fn parse(&self, text: &str) -> Result<String, BackendError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({ "text": text }))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        if !resp.status().is_success() {
            return Err(BackendError::HttpStatus(resp.status().as_u16()));
        }
        let body: serde_json::Value = resp
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        body.get("amr")
            .and_then(|a| a.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError::MalformedResponse("response has no `amr` string".into()))
    }
}

/// Configuration and backends shared by every record of a run.
pub struct RunContext<'a> {
    pub distill: &'a DistillConfig,
    pub reconstructor: &'a dyn Completer,
    pub answerer: &'a dyn Completer,
    pub amr_parser: Option<&'a dyn AmrParser>,
    /// Reconstruct the union of all documents' concepts in one call.
    pub pooled: bool,
}

/// Concept lists for every document of a record.
pub fn distill_record(
    record: &QuestionRecord,
    config: &DistillConfig,
    amr_parser: Option<&dyn AmrParser>,
) -> Result<Vec<ConceptList>, StageError> {
    record
        .docs
        .iter()
        .enumerate()
        .map(|(doc, d)| {
            let amr = match (&d.amr, amr_parser) {
                (Some(a), _) => a.clone(),
                (None, Some(p)) => p.parse(&d.text)?,
                (None, None) => return Err(StageError::MissingAmr { doc }),
            };
            let graphs =
                parse_penman_records(&amr).map_err(|source| StageError::Penman { doc, source })?;
            distill_graphs(&graphs, &d.text, config).map_err(|source| StageError::Distill { doc, source })
        })
        .collect()
}

fn run_stages(
    record: &QuestionRecord,
    method: Method,
    ctx: &RunContext<'_>,
) -> Result<RunResult, StageError> {
    if record.question.trim().is_empty() {
        return Err(StageError::EmptyQuestion);
    }
    let (concepts, reconstructed, context) = match method {
        Method::Vanilla => {
            let texts: Vec<String> = record.docs.iter().map(|d| d.text.clone()).collect();
            (None, None, join_nonempty(&texts))
        }
        Method::Cocr => {
            let concepts = distill_record(record, ctx.distill, ctx.amr_parser)?;
            let rc = if ctx.pooled {
                reconstruct_pooled(&concepts, ctx.reconstructor)?
            } else {
                reconstruct_documents(&concepts, ctx.reconstructor)?
            };
            let context = rc.joined.clone();
            (Some(concepts), Some(rc), context)
        }
        Method::Keywords | Method::Summary => {
            let mut parts = Vec::with_capacity(record.docs.len());
            for d in &record.docs {
                let prompt = if method == Method::Keywords {
                    build_keywords_prompt(&d.text)?
                } else {
                    build_summary_prompt(&d.text)?
                };
                parts.push(ctx.reconstructor.complete(&prompt)?.trim().to_string());
            }
            let rc = ReconstructedContext::from_parts(parts);
            let context = rc.joined.clone();
            (None, Some(rc), context)
        }
    };
    let inference_prompt = build_inference_prompt(&context, &record.question)?;
    let answer = ctx.answerer.complete(&inference_prompt)?.trim().to_string();
    Ok(RunResult {
        id: record.id.clone(),
        method,
        k: record.k(),
        concepts,
        reconstructed,
        inference_prompt,
        answer,
    })
}

pub fn run_question(
    record: &QuestionRecord,
    method: Method,
    ctx: &RunContext<'_>,
) -> Result<RunResult, RecordError> {
    run_stages(record, method, ctx).map_err(|error| RecordError {
        id: record.id.clone(),
        error,
    })
}

// ---------------------------------------------------------------------------
// Datasets

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("DatasetParse at line {line}: {message}")]
    DatasetParse { line: usize, message: String },
    #[error("InvalidRecord at line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("DuplicateId `{id}` at line {line}")]
    DuplicateId { id: String, line: usize },
}

impl DatasetError {
    fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Parses a JSONL dataset; blank lines are skipped, line numbers are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<QuestionRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::DatasetParse {
                line: line_no,
                message: e.to_string(),
            })?;
        record.check().map_err(|reason| DatasetError::InvalidRecord {
            line: line_no,
            reason,
        })?;
        if !ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_dataset(path: &Path) -> Result<Vec<QuestionRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_dataset(&text)
}

/// Outcome of a dataset run: successes sorted by id plus per-record failures.
#[derive(Debug, Default)]
pub struct DatasetRun {
    pub results: Vec<RunResult>,
    pub failures: Vec<RecordError>,
}

/// Runs every record with at most `max_in_flight` records in progress.
pub fn run_records(
    records: &[QuestionRecord],
    method: Method,
    ctx: &RunContext<'_>,
    max_in_flight: usize,
) -> DatasetRun {
    let slots: Vec<Mutex<Option<Result<RunResult, RecordError>>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(records.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(i) else { break };
                let outcome = run_question(record, method, ctx);
                if let Err(e) = &outcome {
                    log::warn!("{e}");
                }
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
            });
        }
    });

    let mut run = DatasetRun::default();
    for slot in slots {
        match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
            Some(Ok(r)) => run.results.push(r),
            Some(Err(e)) => run.failures.push(e),
            None => {}
        }
    }
    run.results.sort_by(|a, b| a.id.cmp(&b.id));
    run.failures.sort_by(|a, b| a.id.cmp(&b.id));
    run
}

pub fn run_dataset(
    path: &Path,
    method: Method,
    ctx: &RunContext<'_>,
    max_in_flight: usize,
) -> Result<DatasetRun, DatasetError> {
    let records = read_dataset(path)?;
    Ok(run_records(&records, method, ctx, max_in_flight))
}

// ---------------------------------------------------------------------------
// Result files

/// Reads a results JSONL file; a missing file reads as empty.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>, DatasetError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(DatasetError::io(path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::DatasetParse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn results_to_jsonl(results: &[RunResult]) -> String {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    for r in sorted {
        out.push_str(&serde_json::to_string(r).expect("RunResult serializes"));
        out.push('\n');
    }
    out
}

/// Writes results as JSONL sorted by id.
pub fn write_results(path: &Path, results: &[RunResult]) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(results_to_jsonl(results).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| DatasetError::io(path, e))
}

// ---------------------------------------------------------------------------
// Screening and scoring

/// How many records have the gold answer in at least one / in every document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ScreenReport {
    pub total: usize,
    pub any_doc: usize,
    pub every_doc: usize,
}

fn doc_has_answer(doc: &SupportingDocument, answers: &[String], mode: CaseMode) -> bool {
    answer_correct(&doc.text, answers, mode).unwrap_or(false)
}

/// Keeps records where some document contains a gold answer.
pub fn screen(records: Vec<QuestionRecord>, mode: CaseMode) -> (ScreenReport, Vec<QuestionRecord>) {
    let mut report = ScreenReport {
        total: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for r in records {
        let hits = r.docs.iter().filter(|d| doc_has_answer(d, &r.answers, mode)).count();
        if hits == r.docs.len() {
            report.every_doc += 1;
        }
        if hits > 0 {
            report.any_doc += 1;
            kept.push(r);
        }
    }
    (report, kept)
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("result `{0}` has no matching record in the dataset")]
    UnknownId(String),
    #[error("record {id}: {source}")]
    Eval {
        id: String,
        #[source]
        source: EvalError,
    },
}

/// `(k, correct)` for every result, using gold answers from `records`.
pub fn score_results(
    results: &[RunResult],
    records: &[QuestionRecord],
    mode: CaseMode,
) -> Result<Vec<(u32, bool)>, ScoreError> {
    let golds: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    results
        .iter()
        .map(|r| {
            let rec = golds
                .get(r.id.as_str())
                .ok_or_else(|| ScoreError::UnknownId(r.id.clone()))?;
            let ok = answer_correct(&r.answer, &rec.answers, mode).map_err(|source| {
                ScoreError::Eval {
                    id: r.id.clone(),
                    source,
                }
            })?;
            Ok((r.k as u32, ok))
        })
        .collect()
}
