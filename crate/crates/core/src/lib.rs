//! Concept-oriented context reconstruction for retrieval-augmented QA.
//!
//! Documents are parsed into AMR graphs ([`penman`]), reduced to ordered
//! concept lists ([`distill`]), rewritten into short concept-bearing
//! sentences by an LLM ([`reconstruct`]), and used as the facts of the final
//! question prompt ([`pipeline`]). [`eval`] scores answers per number of
//! supporting documents and integrates the accuracy curve.

pub mod config;
pub mod distill;
pub mod eval;
pub mod penman;
pub mod pipeline;
pub mod reconstruct;

pub use distill::{distill, ConceptList, DistillConfig, DistillError};
pub use eval::{acc_by_k, answer_correct, auc, AccCurve, EvalSummary};
pub use penman::{parse_penman, serialize_penman, split_sentences, AmrGraph, AmrNode, PenmanError};
pub use pipeline::{run_question, Method, QuestionRecord, RunContext, RunResult};
pub use reconstruct::{Completer, LlmBackendConfig, ReconstructedContext};
