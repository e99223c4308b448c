//! C ABI over `cocr-core`.
//!
//! Every fallible function returns a [`CocrStatus`]; on failure a message is
//! available from [`cocr_last_error`] on the same thread. Strings returned
//! through `char **` out-parameters are owned by the caller and must be
//! released with [`cocr_string_free`]. Graph handles are released with
//! [`cocr_graph_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cocr_core::distill::{distill, ConceptList, DistillConfig};
use cocr_core::eval::{answer_correct, auc, AccCurve, CaseMode};
use cocr_core::penman::{parse_penman, serialize_penman, split_sentences, AmrGraph};
use cocr_core::pipeline::build_inference_prompt;
use cocr_core::reconstruct::build_reconstruction_prompt;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Distill = 4,
    Eval = 5,
    Prompt = 6,
    InvalidArgument = 7,
    Panic = 8,
}

/// Opaque parsed AMR graph.
pub struct CocrGraph {
    graph: AmrGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(CocrStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<E: std::fmt::Display>(status: CocrStatus) -> impl Fn(E) -> Failure {
    move |e| Failure(status, e.to_string())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> CocrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CocrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside cocr");
            CocrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure(CocrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(CocrStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn str_array(p: *const *const c_char, len: usize, name: &str) -> FfiResult<Vec<String>> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure(CocrStatus::NullPointer, format!("{name} is null")));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .enumerate()
        .map(|(i, &s)| str_arg(s, &format!("{name}[{i}]")).map(String::from))
        .collect()
}

unsafe fn graph_arg<'a>(g: *const CocrGraph) -> FfiResult<&'a AmrGraph> {
    g.as_ref()
        .map(|g| &g.graph)
        .ok_or_else(|| Failure(CocrStatus::NullPointer, "graph is null".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(CocrStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(CocrStatus::NullPointer, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(fail(CocrStatus::InvalidArgument))?;
    out.write(c.into_raw());
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next cocr call on this thread.
#[no_mangle]
pub extern "C" fn cocr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cocr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a cocr out-parameter and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cocr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses one PENMAN graph into a new handle.
///
/// # Safety
/// `penman` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_graph_parse(penman: *const c_char, out: *mut *mut CocrGraph) -> CocrStatus {
    guard(|| {
        let text = str_arg(penman, "penman")?;
        let graph = parse_penman(text).map_err(fail(CocrStatus::Parse))?;
        write_out(out, Box::into_raw(Box::new(CocrGraph { graph })))
    })
}

/// Releases a graph handle. Null is ignored.
///
/// # Safety
/// `graph` must come from [`cocr_graph_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cocr_graph_free(graph: *mut CocrGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_graph_serialize(graph: *const CocrGraph, out: *mut *mut c_char) -> CocrStatus {
    guard(|| {
        let text = serialize_penman(graph_arg(graph)?).map_err(fail(CocrStatus::Parse))?;
        write_string(out, text)
    })
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_graph_node_count(graph: *const CocrGraph, out: *mut usize) -> CocrStatus {
    guard(|| write_out(out, graph_arg(graph)?.nodes.len()))
}

/// Number of sentence subgraphs (1 unless the root is `multi-sentence`).
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_graph_sentence_count(graph: *const CocrGraph, out: *mut usize) -> CocrStatus {
    guard(|| write_out(out, split_sentences(graph_arg(graph)?).len()))
}

/// Distills the graph's concept list and writes it as JSON
/// (`{"concepts": [...], "per_sentence": [...], "origins": [...]}`).
/// `config_toml` may be null for the default configuration.
///
/// # Safety
/// `graph` must be a live handle, `source` a NUL-terminated string,
/// `config_toml` null or NUL-terminated, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_distill_json(
    graph: *const CocrGraph,
    source: *const c_char,
    config_toml: *const c_char,
    out_json: *mut *mut c_char,
) -> CocrStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        let source = str_arg(source, "source")?;
        let config = if config_toml.is_null() {
            DistillConfig::default()
        } else {
            DistillConfig::from_toml_str(str_arg(config_toml, "config_toml")?)
                .map_err(fail(CocrStatus::InvalidArgument))?
        };
        let list = distill(graph, source, &config).map_err(fail(CocrStatus::Distill))?;
        let json = serde_json::to_string(&list).map_err(fail(CocrStatus::Distill))?;
        write_string(out_json, json)
    })
}

/// Trapezoid AUC over `[start, end]` of the curve `accs[i]` at
/// `k = first_k + i`.
///
/// # Safety
/// `accs` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_auc(
    accs: *const f64,
    len: usize,
    first_k: u32,
    start: u32,
    end: u32,
    out: *mut f64,
) -> CocrStatus {
    guard(|| {
        if accs.is_null() && len > 0 {
            return Err(Failure(CocrStatus::NullPointer, "accs is null".into()));
        }
        let values = if len == 0 { &[][..] } else { std::slice::from_raw_parts(accs, len) };
        let curve = AccCurve::from_values(first_k, values).map_err(fail(CocrStatus::Eval))?;
        write_out(out, auc(&curve, start, end).map_err(fail(CocrStatus::Eval))?)
    })
}

/// Writes 1 when some gold answer occurs in `generated`, else 0. Matching
/// is case-insensitive unless `exact` is non-zero.
///
/// # Safety
/// `generated` must be NUL-terminated, `golds` must point to `n_golds`
/// NUL-terminated strings, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_answer_correct(
    generated: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    exact: c_int,
    out: *mut c_int,
) -> CocrStatus {
    guard(|| {
        let generated = str_arg(generated, "generated")?;
        let golds = str_array(golds, n_golds, "golds")?;
        let mode = if exact != 0 { CaseMode::Exact } else { CaseMode::Insensitive };
        let ok = answer_correct(generated, &golds, mode).map_err(fail(CocrStatus::Eval))?;
        write_out(out, ok as c_int)
    })
}

/// Renders the reconstruction prompt for an ordered concept list.
///
/// # Safety
/// `concepts` must point to `n` NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_reconstruction_prompt(
    concepts: *const *const c_char,
    n: usize,
    out: *mut *mut c_char,
) -> CocrStatus {
    guard(|| {
        let list = ConceptList::from_concepts(str_array(concepts, n, "concepts")?);
        let prompt = build_reconstruction_prompt(&list).map_err(fail(CocrStatus::Prompt))?;
        write_string(out, prompt)
    })
}

/// Renders the final question prompt from reconstructed facts.
///
/// # Safety
/// `facts` and `question` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocr_inference_prompt(
    facts: *const c_char,
    question: *const c_char,
    out: *mut *mut c_char,
) -> CocrStatus {
    guard(|| {
        let facts = str_arg(facts, "facts")?;
        let question = str_arg(question, "question")?;
        let prompt = build_inference_prompt(facts, question).map_err(fail(CocrStatus::Prompt))?;
        write_string(out, prompt)
    })
}
