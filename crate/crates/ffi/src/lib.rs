//! C ABI for the slda-spectral toolkit.
//!
//! Design: opaque handles (`SldaCorpus`, `SldaModelHandle`) created and
//! destroyed by paired functions, integer status codes shared with the CLI
//! exit-code protocol, and a per-thread last-error message. Every entry
//! point catches panics, so no Rust unwinding ever crosses the boundary.
//! The companion header `include/slda_spectral.h` is regenerated by the
//! build script.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use slda_spectral::{
    generate_corpus, infer_mixture_gibbs, read_docword, read_model, read_responses,
    recover_joint, recover_two_stage, sample_model, write_model, Corpus, Document, Error,
    GibbsConfig, Method, RecoveryConfig, SldaModel, WhiteningKind,
};

/// Operation succeeded.
pub const SLDA_OK: c_int = 0;
/// Unspecified failure (see `slda_last_error_message`).
pub const SLDA_ERR_OTHER: c_int = 1;
/// Invalid argument or configuration.
pub const SLDA_ERR_INVALID_ARGUMENT: c_int = 2;
/// The second moment cannot support the requested topic count.
pub const SLDA_ERR_RANK_DEFICIENT: c_int = 10;
/// The whitened tensor admits no decomposition at the requested topic
/// count (negative eigenvalue).
pub const SLDA_ERR_NEGATIVE_EIGENVALUE: c_int = 11;
/// File I/O or parse failure.
pub const SLDA_ERR_IO: c_int = 12;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember_message(code: c_int, message: &str) -> c_int {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
    code
}

fn remember(err: Error) -> c_int {
    remember_message(err.exit_code() as c_int, &err.to_string())
}

fn invalid(message: &str) -> Error {
    Error::InvalidConfig(message.into())
}

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("internal panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("internal panic: {s}")
    } else {
        "internal panic".into()
    }
}

/// Run an FFI body, translating panics and errors into status codes.
fn ffi_try(f: impl FnOnce() -> Result<(), Error>) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SLDA_OK,
        Ok(Err(e)) => remember(e),
        Err(payload) => remember_message(SLDA_ERR_OTHER, &panic_text(payload)),
    }
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, Error> {
    if ptr.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Error> {
    unsafe { ptr.as_mut() }.ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn handle_arg<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Error> {
    unsafe { ptr.as_ref() }.ok_or_else(|| invalid(&format!("{what} is null")))
}

/// A bag-of-words corpus with per-document responses (opaque handle).
pub struct SldaCorpus {
    inner: Corpus,
}

/// A supervised LDA model (opaque handle).
pub struct SldaModelHandle {
    inner: SldaModel,
}

/// Which recovery pipeline to run.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SldaMethod {
    /// Topic recovery from word moments, then regression weights and noise.
    TwoStage = 0,
    /// One decomposition of the stacked word/response moments.
    Joint = 1,
}

/// How the second moment is whitened.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SldaWhitening {
    /// Truncated eigendecomposition of the full moment matrix.
    Exact = 0,
    /// Gaussian-sketch whitening (width `oversample`·`num_topics`).
    Randomized = 1,
}

/// Recovery settings; obtain defaults from `slda_recover_options_default`
/// and adjust fields as needed.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct SldaRecoverOptions {
    pub method: SldaMethod,
    /// Dirichlet concentration α₀ (assumed known).
    pub alpha0: f64,
    pub num_topics: u32,
    /// Tensor power method restarts per topic (L).
    pub restarts: u32,
    /// Power iteration sweeps (T).
    pub iters: u32,
    /// Assumed response noise (joint method only).
    pub sigma: f64,
    /// Word-coordinate scaling constant (joint method only).
    pub scale: f64,
    pub whitening: SldaWhitening,
    /// Sketch width multiplier for randomized whitening.
    pub oversample: u32,
    /// Relative rank tolerance for whitening.
    pub rank_tolerance: f64,
    pub seed: u64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the current thread's most recent failure. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slda_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Read a corpus from a bag-of-words file, optionally attaching responses
/// (one real per line; pass NULL to leave all responses at zero). On
/// success `*out` owns the corpus; release it with `slda_corpus_free`.
#[no_mangle]
pub unsafe extern "C" fn slda_corpus_read(
    docword_path: *const c_char,
    responses_path: *const c_char,
    out: *mut *mut SldaCorpus,
) -> c_int {
    ffi_try(|| {
        let out = unsafe { out_arg(out, "output corpus pointer") }?;
        let docword = unsafe { path_arg(docword_path, "docword path") }?;
        let mut corpus = read_docword(&docword)?;
        if !responses_path.is_null() {
            let path = unsafe { path_arg(responses_path, "responses path") }?;
            let responses = read_responses(&path, corpus.num_docs())?;
            corpus.attach_responses(&responses)?;
        }
        *out = Box::into_raw(Box::new(SldaCorpus { inner: corpus }));
        Ok(())
    })
}

/// Release a corpus created by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn slda_corpus_free(corpus: *mut SldaCorpus) {
    if !corpus.is_null() {
        drop(unsafe { Box::from_raw(corpus) });
    }
}

/// Number of documents, or 0 if the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn slda_corpus_num_docs(corpus: *const SldaCorpus) -> usize {
    unsafe { corpus.as_ref() }.map_or(0, |c| c.inner.num_docs())
}

/// Vocabulary size, or 0 if the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn slda_corpus_vocab_size(corpus: *const SldaCorpus) -> usize {
    unsafe { corpus.as_ref() }.map_or(0, |c| c.inner.vocab_size())
}

/// Sample a ground-truth model (uniform-normalized topics, standard-normal
/// weights, α₀ spread evenly) and generate a synthetic corpus from it.
/// Either output pointer may be NULL to skip that output.
#[no_mangle]
pub unsafe extern "C" fn slda_generate(
    num_topics: u32,
    vocab_size: usize,
    num_docs: usize,
    doc_len: u32,
    alpha0: f64,
    sigma: f64,
    seed: u64,
    out_model: *mut *mut SldaModelHandle,
    out_corpus: *mut *mut SldaCorpus,
) -> c_int {
    ffi_try(|| {
        let model = sample_model(num_topics as usize, vocab_size, alpha0, sigma, seed)?;
        if !out_corpus.is_null() {
            let corpus = generate_corpus(&model, num_docs, doc_len as usize, seed)?;
            unsafe { *out_corpus = Box::into_raw(Box::new(SldaCorpus { inner: corpus })) };
        }
        if !out_model.is_null() {
            unsafe { *out_model = Box::into_raw(Box::new(SldaModelHandle { inner: model })) };
        }
        Ok(())
    })
}

/// Read a model from a JSON model file. On success `*out` owns the model;
/// release it with `slda_model_free`.
#[no_mangle]
pub unsafe extern "C" fn slda_model_read(
    path: *const c_char,
    out: *mut *mut SldaModelHandle,
) -> c_int {
    ffi_try(|| {
        let out = unsafe { out_arg(out, "output model pointer") }?;
        let path = unsafe { path_arg(path, "model path") }?;
        let (model, _warnings) = read_model(&path)?;
        *out = Box::into_raw(Box::new(SldaModelHandle { inner: model }));
        Ok(())
    })
}

/// Write a model to a JSON model file.
#[no_mangle]
pub unsafe extern "C" fn slda_model_write(
    model: *const SldaModelHandle,
    path: *const c_char,
) -> c_int {
    ffi_try(|| {
        let model = unsafe { handle_arg(model, "model handle") }?;
        let path = unsafe { path_arg(path, "model path") }?;
        write_model(&model.inner, &path)
    })
}

/// Release a model created by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn slda_model_free(model: *mut SldaModelHandle) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of topics, or 0 if the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn slda_model_num_topics(model: *const SldaModelHandle) -> u32 {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.k() as u32)
}

/// Vocabulary size, or 0 if the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn slda_model_vocab_size(model: *const SldaModelHandle) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.vocab_size())
}

/// Response noise level, or NaN if the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn slda_model_sigma(model: *const SldaModelHandle) -> f64 {
    unsafe { model.as_ref() }.map_or(f64::NAN, |m| m.inner.sigma())
}

/// Copy the Dirichlet prior into `out` (`num_topics` doubles).
#[no_mangle]
pub unsafe extern "C" fn slda_model_alpha(
    model: *const SldaModelHandle,
    out: *mut f64,
) -> c_int {
    ffi_try(|| {
        let model = unsafe { handle_arg(model, "model handle") }?;
        if out.is_null() {
            return Err(invalid("output buffer is null"));
        }
        let alpha = model.inner.alpha();
        unsafe { std::ptr::copy_nonoverlapping(alpha.as_ptr(), out, alpha.len()) };
        Ok(())
    })
}

/// Copy the regression weights into `out` (`num_topics` doubles).
#[no_mangle]
pub unsafe extern "C" fn slda_model_eta(model: *const SldaModelHandle, out: *mut f64) -> c_int {
    ffi_try(|| {
        let model = unsafe { handle_arg(model, "model handle") }?;
        if out.is_null() {
            return Err(invalid("output buffer is null"));
        }
        let eta = model.inner.eta();
        unsafe { std::ptr::copy_nonoverlapping(eta.as_ptr(), out, eta.len()) };
        Ok(())
    })
}

/// Copy the topic-word matrix into `out` (`vocab_size`·`num_topics`
/// doubles, column-major: topic `t` occupies entries
/// `[t·vocab_size, (t+1)·vocab_size)`).
#[no_mangle]
pub unsafe extern "C" fn slda_model_topics(
    model: *const SldaModelHandle,
    out: *mut f64,
) -> c_int {
    ffi_try(|| {
        let model = unsafe { handle_arg(model, "model handle") }?;
        if out.is_null() {
            return Err(invalid("output buffer is null"));
        }
        let topics = model.inner.topics();
        unsafe {
            std::ptr::copy_nonoverlapping(topics.as_slice().as_ptr(), out, topics.len())
        };
        Ok(())
    })
}

/// Default recovery settings for a method: L = T = 100, scale 100,
/// assumed σ 0, exact whitening with oversample 10, relative rank
/// tolerance 1e-10, seed 0.
#[no_mangle]
pub extern "C" fn slda_recover_options_default(
    method: SldaMethod,
    alpha0: f64,
    num_topics: u32,
) -> SldaRecoverOptions {
    SldaRecoverOptions {
        method,
        alpha0,
        num_topics,
        restarts: 100,
        iters: 100,
        sigma: 0.0,
        scale: 100.0,
        whitening: SldaWhitening::Exact,
        oversample: 10,
        rank_tolerance: 1e-10,
        seed: 0,
    }
}

fn recovery_config(opts: &SldaRecoverOptions) -> RecoveryConfig {
    let mut cfg = RecoveryConfig::new(
        match opts.method {
            SldaMethod::TwoStage => Method::TwoStage,
            SldaMethod::Joint => Method::Joint,
        },
        opts.alpha0,
        opts.num_topics as usize,
    );
    cfg.restarts = opts.restarts as usize;
    cfg.iters = opts.iters as usize;
    cfg.sigma_assumed = opts.sigma;
    cfg.scale = opts.scale;
    cfg.whitening = match opts.whitening {
        SldaWhitening::Exact => WhiteningKind::Exact,
        SldaWhitening::Randomized => {
            WhiteningKind::Randomized { oversample: opts.oversample as usize }
        }
    };
    cfg.rank_tol_rel = opts.rank_tolerance;
    cfg.seed = opts.seed;
    cfg
}

/// Recover model parameters from a corpus. On success `*out` owns the
/// recovered model. Failure modes worth branching on:
/// `SLDA_ERR_RANK_DEFICIENT` (lower `num_topics`) and
/// `SLDA_ERR_NEGATIVE_EIGENVALUE` (moments inconsistent with
/// `num_topics`).
#[no_mangle]
pub unsafe extern "C" fn slda_recover(
    corpus: *const SldaCorpus,
    options: *const SldaRecoverOptions,
    out: *mut *mut SldaModelHandle,
) -> c_int {
    ffi_try(|| {
        let corpus = unsafe { handle_arg(corpus, "corpus handle") }?;
        let options = unsafe { handle_arg(options, "options") }?;
        let out = unsafe { out_arg(out, "output model pointer") }?;
        let cfg = recovery_config(options);
        let recovered = match cfg.method {
            Method::TwoStage => recover_two_stage(&corpus.inner, &cfg)?,
            Method::Joint => recover_joint(&corpus.inner, &cfg)?,
        };
        *out = Box::into_raw(Box::new(SldaModelHandle { inner: recovered.model }));
        Ok(())
    })
}

/// Infer a document's topic mixture by collapsed Gibbs sampling. The
/// document is `num_entries` (word id, count) pairs; duplicates are
/// aggregated. Writes `num_topics` doubles (a point on the simplex) to
/// `out_mixture`. Deterministic given the seed.
#[no_mangle]
pub unsafe extern "C" fn slda_infer_mixture(
    model: *const SldaModelHandle,
    words: *const u32,
    counts: *const u32,
    num_entries: usize,
    burnin: u32,
    samples: u32,
    seed: u64,
    out_mixture: *mut f64,
) -> c_int {
    ffi_try(|| {
        let model = unsafe { handle_arg(model, "model handle") }?;
        if words.is_null() || counts.is_null() {
            return Err(invalid("word/count arrays are null"));
        }
        if out_mixture.is_null() {
            return Err(invalid("output buffer is null"));
        }
        if num_entries == 0 {
            return Err(invalid("document has no words"));
        }
        let words = unsafe { std::slice::from_raw_parts(words, num_entries) };
        let counts = unsafe { std::slice::from_raw_parts(counts, num_entries) };
        let mut aggregated: BTreeMap<u32, u32> = BTreeMap::new();
        for (&w, &c) in words.iter().zip(counts) {
            if c == 0 {
                return Err(invalid(&format!("word {w} has zero count")));
            }
            let slot = aggregated.entry(w).or_insert(0);
            *slot = slot
                .checked_add(c)
                .ok_or_else(|| invalid(&format!("word {w} count overflows")))?;
        }
        let doc = Document { counts: aggregated.into_iter().collect(), response: 0.0 };
        let gibbs = GibbsConfig { burnin: burnin as usize, samples: samples as usize, seed };
        let (mixture, _warnings) = infer_mixture_gibbs(&doc, &model.inner, &gibbs)?;
        unsafe {
            std::ptr::copy_nonoverlapping(mixture.as_slice().as_ptr(), out_mixture, mixture.len())
        };
        Ok(())
    })
}
