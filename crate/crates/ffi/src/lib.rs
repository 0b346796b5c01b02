//! C ABI over the `ironia` library.
//!
//! Every function returns an [`IroniaStatus`]. On failure a message is kept
//! per thread and can be read with [`ironia_last_error`]. Strings handed out
//! by this library must be released with [`ironia_string_free`]; handles with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use ironia::classifier::{
    forward, load_checkpoint, metrics_from_confusion, Averaging, ClassifierError, ConfusionMatrix, HeadParams,
};
use ironia::corpus::{class_distribution, load_dataset, to_binary, CorpusError, DataFormat, Dataset, Mode};
use ironia::encoder::{stub_embed, EncoderError, EMBEDDING_DIM};
use ironia::llm::{parse_classification_response, LlmError};
use ironia::review::{ReviewError, ReviewQueue, ReviewService, VerdictRequest};
use ironia::util::SystemClock;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IroniaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed input: bad label, wrong length, invalid verdict.
    InvalidArgument = 3,
    NotFound = 4,
    /// The operation conflicts with current state (already resolved, not assigned, ...).
    Conflict = 5,
    Io = 6,
    /// A file or response could not be parsed.
    Format = 7,
    /// The encoder or model backend failed.
    Backend = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Loaded dataset.
pub struct IroniaDataset {
    inner: Dataset,
}

/// Trained classification head.
pub struct IroniaHead {
    inner: HeadParams,
    encoder_id: CString,
}

/// Review queue backed by an event log.
pub struct IroniaReviewQueue {
    inner: ReviewService,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(IroniaStatus, String);

impl Failure {
    fn new(status: IroniaStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let status = match &e {
            CorpusError::Io(_) => IroniaStatus::Io,
            CorpusError::Parse { .. } => IroniaStatus::Format,
            _ => IroniaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ClassifierError> for Failure {
    fn from(e: ClassifierError) -> Self {
        let status = match &e {
            ClassifierError::Io(_) => IroniaStatus::Io,
            ClassifierError::Format(_) => IroniaStatus::Format,
            _ => IroniaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<EncoderError> for Failure {
    fn from(e: EncoderError) -> Self {
        let status = match &e {
            EncoderError::EmptyText | EncoderError::BadVector { .. } => IroniaStatus::InvalidArgument,
            EncoderError::Io(_) => IroniaStatus::Io,
            _ => IroniaStatus::Backend,
        };
        Failure(status, e.to_string())
    }
}

impl From<LlmError> for Failure {
    fn from(e: LlmError) -> Self {
        let status = match &e {
            LlmError::TagParse(_) | LlmError::ExplanationParse(_) | LlmError::EmptyCompletion => IroniaStatus::Format,
            _ => IroniaStatus::Backend,
        };
        Failure(status, e.to_string())
    }
}

impl From<ReviewError> for Failure {
    fn from(e: ReviewError) -> Self {
        let status = match &e {
            ReviewError::NotFound(_) => IroniaStatus::NotFound,
            ReviewError::DuplicateId(_)
            | ReviewError::AlreadyResolved(_)
            | ReviewError::NotAssigned { .. }
            | ReviewError::IncompleteQueue { .. } => IroniaStatus::Conflict,
            ReviewError::InvalidVerdict(_) | ReviewError::Mismatch(_) => IroniaStatus::InvalidArgument,
            ReviewError::Log { .. } => IroniaStatus::Format,
            ReviewError::Io(_) => IroniaStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(IroniaStatus::Format, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IroniaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            IroniaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            IroniaStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(IroniaStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(IroniaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(IroniaStatus::NullArgument, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(IroniaStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn mode_arg(binary: bool) -> Mode {
    if binary {
        Mode::Binary
    } else {
        Mode::Multiclass
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure::new(IroniaStatus::Internal, "string contains NUL"))
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ironia_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ironia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ironia_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a JSONL or CSV dataset (chosen by extension).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_dataset_load(path: *const c_char, out: *mut *mut IroniaDataset) -> IroniaStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let inner = load_dataset(&path, DataFormat::from_path(&path))?;
        *out = Box::into_raw(Box::new(IroniaDataset { inner }));
        Ok(())
    })
}

/// Number of entries in the dataset.
///
/// # Safety
/// `ds` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_dataset_len(ds: *const IroniaDataset, out_len: *mut usize) -> IroniaStatus {
    guard(|| {
        out_arg(out_len, "out_len")?;
        *out_len = ref_arg(ds, "ds")?.inner.len();
        Ok(())
    })
}

/// Class distribution as JSON `{"rows": [{"label", "count", "percentage"}], "total"}`.
/// With `binary` set, labels are collapsed to IRONÍA / NO_IRONÍA first.
///
/// # Safety
/// `ds` must be a live handle; `out_json` must be writable. Free the result
/// with [`ironia_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ironia_dataset_distribution_json(
    ds: *const IroniaDataset,
    binary: bool,
    out_json: *mut *mut c_char,
) -> IroniaStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let ds = &ref_arg(ds, "ds")?.inner;
        let report = match mode_arg(binary) {
            Mode::Binary => class_distribution(&to_binary(ds)?)?,
            Mode::Multiclass => class_distribution(ds)?,
        };
        *out_json = into_c_string(serde_json::to_string(&report)?)?;
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle from [`ironia_dataset_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ironia_dataset_free(ds: *mut IroniaDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Loads a head checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_head_load(path: *const c_char, out: *mut *mut IroniaHead) -> IroniaStatus {
    guard(|| {
        out_arg(out, "out")?;
        let (header, inner) = load_checkpoint(str_arg(path, "path")?)?;
        let encoder_id = CString::new(header.encoder_id).map_err(|_| Failure::new(IroniaStatus::Format, "encoder id has NUL"))?;
        *out = Box::into_raw(Box::new(IroniaHead { inner, encoder_id }));
        Ok(())
    })
}

/// Number of output nodes: 4 (multiclass) or 2 (binary).
///
/// # Safety
/// `head` must be a live handle; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_head_output_dim(head: *const IroniaHead, out_dim: *mut usize) -> IroniaStatus {
    guard(|| {
        out_arg(out_dim, "out_dim")?;
        *out_dim = ref_arg(head, "head")?.inner.output_dim;
        Ok(())
    })
}

/// Encoder id recorded in the checkpoint. Borrowed; valid while `head` lives.
///
/// # Safety
/// `head` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ironia_head_encoder_id(head: *const IroniaHead) -> *const c_char {
    head.as_ref().map_or(ptr::null(), |h| h.encoder_id.as_ptr())
}

/// Scores one 768-value embedding. Writes the predicted class index
/// (`category_encoded` convention) and, if `out_probs` is non-NULL, the
/// per-class probabilities; `probs_len` must then equal the output dimension.
///
/// # Safety
/// `x` must point to `len` doubles; `out_probs` to `probs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ironia_head_predict(
    head: *const IroniaHead,
    x: *const f64,
    len: usize,
    out_class: *mut usize,
    out_probs: *mut f64,
    probs_len: usize,
) -> IroniaStatus {
    guard(|| {
        let head = &ref_arg(head, "head")?.inner;
        out_arg(out_class, "out_class")?;
        if x.is_null() {
            return Err(Failure::new(IroniaStatus::NullArgument, "x is null"));
        }
        let scores = forward(head, std::slice::from_raw_parts(x, len))?;
        if !out_probs.is_null() {
            if probs_len != scores.probs.len() {
                return Err(Failure::new(
                    IroniaStatus::InvalidArgument,
                    format!("probs_len is {probs_len}, head has {} outputs", scores.probs.len()),
                ));
            }
            std::slice::from_raw_parts_mut(out_probs, probs_len).copy_from_slice(&scores.probs);
        }
        *out_class = scores.argmax();
        Ok(())
    })
}

/// # Safety
/// `head` must be NULL or a handle from [`ironia_head_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ironia_head_free(head: *mut IroniaHead) {
    if !head.is_null() {
        drop(Box::from_raw(head));
    }
}

/// Deterministic checkpoint-free embedding of `text` into `out` (`len` must be 768).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ironia_stub_embed(text: *const c_char, out: *mut f64, len: usize) -> IroniaStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        out_arg(out, "out")?;
        if len != EMBEDDING_DIM {
            return Err(Failure::new(IroniaStatus::InvalidArgument, format!("len must be {EMBEDDING_DIM}, got {len}")));
        }
        let v = stub_embed(text)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Parses a classification response into JSON `{"tag": "IRONÍA", "explanation": "..."}`.
///
/// # Safety
/// `raw` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_parse_response(raw: *const c_char, out_json: *mut *mut c_char) -> IroniaStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let parsed = parse_classification_response(str_arg(raw, "raw")?)?;
        let json = serde_json::json!({ "tag": parsed.tag, "explanation": parsed.explanation });
        *out_json = into_c_string(json.to_string())?;
        Ok(())
    })
}

/// Metrics for a row-major `k`x`k` confusion matrix (rows gold, columns
/// predicted; `k` is 2 or 4, labels in report order with IRONÍA first).
/// Writes the evaluation report as JSON.
///
/// # Safety
/// `counts` must point to `k * k` values; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_metrics_from_confusion(
    counts: *const u64,
    k: usize,
    out_json: *mut *mut c_char,
) -> IroniaStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        if counts.is_null() {
            return Err(Failure::new(IroniaStatus::NullArgument, "counts is null"));
        }
        if k != 2 && k != 4 {
            return Err(Failure::new(IroniaStatus::InvalidArgument, format!("k must be 2 or 4, got {k}")));
        }
        let flat = std::slice::from_raw_parts(counts, k * k);
        let mode = mode_arg(k == 2);
        let cm = ConfusionMatrix::new(mode.labels().to_vec(), flat.chunks(k).map(<[u64]>::to_vec).collect())?;
        let report = metrics_from_confusion(&cm, Averaging::for_mode(mode))?;
        *out_json = into_c_string(serde_json::to_string(&report)?)?;
        Ok(())
    })
}

/// Opens (or creates) a review queue event log. `lease_minutes` <= 0 keeps the default.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_queue_open(
    path: *const c_char,
    lease_minutes: i64,
    out: *mut *mut IroniaReviewQueue,
) -> IroniaStatus {
    guard(|| {
        out_arg(out, "out")?;
        let mut q = ReviewQueue::open(str_arg(path, "path")?, Arc::new(SystemClock))?;
        if lease_minutes > 0 {
            q = q.with_lease(chrono::Duration::minutes(lease_minutes));
        }
        *out = Box::into_raw(Box::new(IroniaReviewQueue { inner: ReviewService::new(q) }));
        Ok(())
    })
}

/// Assigns the oldest pending item to `reviewer_id` and writes it as JSON.
/// When nothing is pending, returns `Ok` and sets `*out_json` to NULL.
///
/// # Safety
/// `q` must be a live handle; `reviewer_id` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ironia_queue_next(
    q: *const IroniaReviewQueue,
    reviewer_id: *const c_char,
    out_json: *mut *mut c_char,
) -> IroniaStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let q = &ref_arg(q, "q")?.inner;
        *out_json = match q.next_pending(str_arg(reviewer_id, "reviewer_id")?)? {
            Some(item) => into_c_string(serde_json::to_string(&item)?)?,
            None => ptr::null_mut(),
        };
        Ok(())
    })
}

/// Records a verdict given as JSON
/// `{"entry_id", "decision": "accept"|"override"|"unreadable", "override_tag"?, "reviewer_id"}`.
///
/// # Safety
/// `q` must be a live handle; `verdict_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ironia_queue_submit(q: *const IroniaReviewQueue, verdict_json: *const c_char) -> IroniaStatus {
    guard(|| {
        let q = &ref_arg(q, "q")?.inner;
        let req: VerdictRequest = serde_json::from_str(str_arg(verdict_json, "verdict_json")?)
            .map_err(|e| Failure::new(IroniaStatus::InvalidArgument, e.to_string()))?;
        q.submit_verdict(&req)?;
        Ok(())
    })
}

/// Queue counts and agreement over resolved items, as JSON.
///
/// # Safety
/// `q` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ironia_queue_stats_json(q: *const IroniaReviewQueue, out_json: *mut *mut c_char) -> IroniaStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let stats = ref_arg(q, "q")?.inner.stats();
        *out_json = into_c_string(serde_json::to_string(&stats)?)?;
        Ok(())
    })
}

/// # Safety
/// `q` must be NULL or a handle from [`ironia_queue_open`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ironia_queue_free(q: *mut IroniaReviewQueue) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}
