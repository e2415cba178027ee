//! C interface to the translator and the SPARQL token codec.
//!
//! Every fallible function returns an [`NspmStatus`]; on failure the
//! message is available from [`nspm_last_error`] on the same thread.
//! Strings handed out by the library are freed with [`nspm_string_free`],
//! handles with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nspm::dataset::tokenize_nl;
use nspm::eval::bleu;
use nspm::kg::PrefixTable;
use nspm::seq2seq::{load_model, Model, Seq2SeqError};
use nspm::sparql::{decode, encode, parse_sparql, to_sparql, TokenSeq};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NspmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    Decode = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// A loaded translation model.
pub struct NspmModel {
    model: Model,
    prefixes: PrefixTable,
}

/// Converts between SPARQL text and token sequences.
pub struct NspmCodec {
    prefixes: PrefixTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(NspmStatus, String);

impl Failure {
    fn new(status: NspmStatus, msg: impl ToString) -> Self {
        Self(status, msg.to_string())
    }
}

impl From<Seq2SeqError> for Failure {
    fn from(e: Seq2SeqError) -> Self {
        let status = match e {
            Seq2SeqError::Io(_) => NspmStatus::Io,
            Seq2SeqError::Format(_) => NspmStatus::Format,
            _ => NspmStatus::InvalidArgument,
        };
        Failure::new(status, e)
    }
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NspmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NspmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NspmStatus::Panic
        }
    }
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::new(NspmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure::new(NspmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `out` is null or valid for a pointer write.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(NspmStatus::NullPointer, "output pointer is null"));
    }
    let c = CString::new(s).map_err(|_| Failure::new(NspmStatus::InvalidArgument, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(NspmStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn nspm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn nspm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nspm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a checkpoint into `*out`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn nspm_model_load(path: *const c_char, out: *mut *mut NspmModel) -> NspmStatus {
    guard(|| {
        check_out(out)?;
        let path = read_str(path, "path")?;
        let model = load_model(path)?;
        *out = Box::into_raw(Box::new(NspmModel { model, prefixes: PrefixTable::default() }));
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle from [`nspm_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nspm_model_free(model: *mut NspmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const NspmModel) -> Result<&'a NspmModel, Failure> {
    model.as_ref().ok_or_else(|| Failure::new(NspmStatus::NullPointer, "model is null"))
}

/// Greedy translation of `question` into space-separated query tokens.
///
/// # Safety
/// `model` is a live handle; `question` is NUL-terminated; `out` is valid
/// for a pointer write. The result is freed with [`nspm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nspm_model_translate_tokens(
    model: *const NspmModel,
    question: *const c_char,
    max_len: usize,
    out: *mut *mut c_char,
) -> NspmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let q = read_str(question, "question")?;
        check_out(out)?;
        let (seq, _) = m.model.translate(&tokenize_nl(q), max_len);
        write_string(out, seq.to_string())
    })
}

/// Translation of `question` decoded into SPARQL text. Returns
/// `NSPM_STATUS_DECODE` when the model output is not a valid query.
///
/// # Safety
/// As [`nspm_model_translate_tokens`].
#[no_mangle]
pub unsafe extern "C" fn nspm_model_translate_sparql(
    model: *const NspmModel,
    question: *const c_char,
    max_len: usize,
    out: *mut *mut c_char,
) -> NspmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let q = read_str(question, "question")?;
        check_out(out)?;
        let (seq, _) = m.model.translate(&tokenize_nl(q), max_len);
        let query = decode(&seq, &m.prefixes).map_err(|e| Failure::new(NspmStatus::Decode, e))?;
        write_string(out, to_sparql(&query, Some(&m.prefixes)))
    })
}

/// Codec with the default prefix table. Never null.
#[no_mangle]
pub extern "C" fn nspm_codec_new() -> *mut NspmCodec {
    Box::into_raw(Box::new(NspmCodec { prefixes: PrefixTable::default() }))
}

/// # Safety
/// `codec` is null or a handle from [`nspm_codec_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nspm_codec_free(codec: *mut NspmCodec) {
    if !codec.is_null() {
        drop(Box::from_raw(codec));
    }
}

unsafe fn codec_ref<'a>(codec: *const NspmCodec) -> Result<&'a NspmCodec, Failure> {
    codec.as_ref().ok_or_else(|| Failure::new(NspmStatus::NullPointer, "codec is null"))
}

/// Parses SPARQL text and writes its space-separated token encoding.
///
/// # Safety
/// `codec` is a live handle; `sparql` is NUL-terminated; `out` is valid
/// for a pointer write. The result is freed with [`nspm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nspm_codec_encode(codec: *const NspmCodec, sparql: *const c_char, out: *mut *mut c_char) -> NspmStatus {
    guard(|| {
        let c = codec_ref(codec)?;
        let text = read_str(sparql, "sparql")?;
        check_out(out)?;
        let q = parse_sparql(text, &c.prefixes).map_err(|e| Failure::new(NspmStatus::Format, e))?;
        let seq = encode(&q, &c.prefixes).map_err(|e| Failure::new(NspmStatus::Format, e))?;
        write_string(out, seq.to_string())
    })
}

/// Decodes a space-separated token sequence into SPARQL text.
///
/// # Safety
/// As [`nspm_codec_encode`].
#[no_mangle]
pub unsafe extern "C" fn nspm_codec_decode(codec: *const NspmCodec, tokens: *const c_char, out: *mut *mut c_char) -> NspmStatus {
    guard(|| {
        let c = codec_ref(codec)?;
        let line = read_str(tokens, "tokens")?;
        check_out(out)?;
        let q = decode(&TokenSeq::parse_line(line), &c.prefixes).map_err(|e| Failure::new(NspmStatus::Decode, e))?;
        write_string(out, to_sparql(&q, Some(&c.prefixes)))
    })
}

/// Corpus BLEU of `n` space-separated candidate/reference pairs.
///
/// # Safety
/// `candidates` and `references` point to `n` NUL-terminated strings
/// each; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn nspm_bleu(
    candidates: *const *const c_char,
    references: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> NspmStatus {
    guard(|| {
        check_out(out)?;
        if candidates.is_null() || references.is_null() {
            return Err(Failure::new(NspmStatus::NullPointer, "sequence array is null"));
        }
        let read = |arr: *const *const c_char, what: &str| -> Result<Vec<TokenSeq>, Failure> {
            (0..n).map(|i| read_str(*arr.add(i), what).map(TokenSeq::parse_line)).collect()
        };
        let (c, r) = (read(candidates, "candidate")?, read(references, "reference")?);
        *out = bleu(&c, &r).map_err(|e| Failure::new(NspmStatus::InvalidArgument, e))?;
        Ok(())
    })
}

