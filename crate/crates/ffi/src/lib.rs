//! C ABI over the forta library. Every entry point returns a `FortaStatus`;
//! on failure the message is kept per thread and read back with
//! `forta_last_error_message`. Handles are opaque and owned by the caller
//! until passed to the matching `_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use forta::codec::{CodecParams, Codeword, DecodeResult, DftCodec};
use forta::error::FortaError;
use forta::select::{krum_scores, select, AggregationRule, DistanceMatrix};
use forta::theory::{self, FeedbackStats, TheoryParams};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FortaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfiguration = 3,
    LocalizationFailure = 4,
    /// The decode result handle still receives the partial answer.
    DecodeUnreliable = 5,
    ProtocolViolation = 6,
    InsufficientData = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Decoder for one `(n, k)` DFT code.
pub struct FortaCodec {
    inner: DftCodec,
}

pub struct FortaDecodeResult {
    inner: DecodeResult,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FortaTheoryParams {
    pub n: usize,
    pub a: usize,
    pub d: usize,
    pub sigma_g: f64,
    pub sigma_eps: f64,
    pub g_norm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FortaFeedbackStats {
    pub mu_t: f64,
    pub sigma_t: f64,
    pub mu_q: f64,
    pub sigma_q: f64,
    pub c1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FortaBound {
    pub value: f64,
    pub valid: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FortaStatus, String);

impl From<FortaError> for Failure {
    fn from(e: FortaError) -> Self {
        let status = match &e {
            FortaError::InvalidArgument(_) => FortaStatus::InvalidArgument,
            FortaError::InvalidConfiguration(_) | FortaError::Config { .. } => FortaStatus::InvalidConfiguration,
            FortaError::LocalizationFailure { .. } => FortaStatus::LocalizationFailure,
            FortaError::DecodeUnreliable { .. } => FortaStatus::DecodeUnreliable,
            FortaError::ProtocolViolation(_) => FortaStatus::ProtocolViolation,
            FortaError::InsufficientData(_) => FortaStatus::InsufficientData,
            FortaError::Ingestion { .. } | FortaError::Io(_) | FortaError::Csv(_) => FortaStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FortaStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FortaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FortaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FortaStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FortaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(FortaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(FortaStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(FortaStatus::NullPointer, format!("{name} is null")))
}

fn expect_len(name: &str, got: usize, want: usize) -> Result<(), Failure> {
    if got != want {
        return Err(fail(FortaStatus::InvalidArgument, format!("{name} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the buffer size the full message
/// needs, or 0 when no error is recorded.
#[no_mangle]
pub unsafe extern "C" fn forta_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_codec_new(n: usize, k: usize, out: *mut *mut FortaCodec) -> FortaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let inner = DftCodec::new(CodecParams::new(n, k))?;
        *out = Box::into_raw(Box::new(FortaCodec { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_codec_free(codec: *mut FortaCodec) {
    if !codec.is_null() {
        drop(Box::from_raw(codec));
    }
}

/// `⌊(n − k)/2⌋`; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn forta_codec_max_errors(codec: *const FortaCodec) -> usize {
    codec.as_ref().map_or(0, |c| c.inner.params().max_errors())
}

/// Encodes `k` complex coefficients (split real and imaginary arrays) into
/// `n` codeword values.
#[no_mangle]
pub unsafe extern "C" fn forta_codec_encode(
    codec: *const FortaCodec,
    msg_re: *const f64,
    msg_im: *const f64,
    k: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    n: usize,
) -> FortaStatus {
    guard(|| {
        let codec = &handle(codec, "codec")?.inner;
        expect_len("message", k, codec.params().k)?;
        expect_len("codeword", n, codec.params().n)?;
        let (re, im) = (input(msg_re, k, "msg_re")?, input(msg_im, k, "msg_im")?);
        let (ore, oim) = (output(out_re, n, "out_re")?, output(out_im, n, "out_im")?);
        let message: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        for (i, v) in codec.encode(&message)?.values().iter().enumerate() {
            ore[i] = v.re;
            oim[i] = v.im;
        }
        Ok(())
    })
}

/// Decodes `n` received values with optional 1-based erasure hints. On
/// `FORTA_STATUS_DECODE_UNRELIABLE` `*out` still holds the partial result.
#[no_mangle]
pub unsafe extern "C" fn forta_codec_decode(
    codec: *const FortaCodec,
    re: *const f64,
    im: *const f64,
    n: usize,
    hints: *const usize,
    n_hints: usize,
    out: *mut *mut FortaDecodeResult,
) -> FortaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let codec = &handle(codec, "codec")?.inner;
        expect_len("received", n, codec.params().n)?;
        let (re, im) = (input(re, n, "re")?, input(im, n, "im")?);
        let hints = input(hints, n_hints, "hints")?;
        let word = Codeword::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())?;
        let hint_arg = (!hints.is_empty()).then_some(hints);
        match codec.decode(&word, hint_arg) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FortaDecodeResult { inner }));
                Ok(())
            }
            Err(FortaError::DecodeUnreliable { residual, limit, partial }) => {
                *out = Box::into_raw(Box::new(FortaDecodeResult { inner: *partial }));
                Err(fail(
                    FortaStatus::DecodeUnreliable,
                    format!("decode unreliable: residual {residual:.3e} exceeds limit {limit:.3e}"),
                ))
            }
            Err(e) => Err(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_decode_result_free(result: *mut FortaDecodeResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Writes the `k` decoded coefficients.
#[no_mangle]
pub unsafe extern "C" fn forta_decode_result_message(
    result: *const FortaDecodeResult,
    out_re: *mut f64,
    out_im: *mut f64,
    k: usize,
) -> FortaStatus {
    guard(|| {
        let r = &handle(result, "result")?.inner;
        expect_len("message", k, r.message.len())?;
        let (ore, oim) = (output(out_re, k, "out_re")?, output(out_im, k, "out_im")?);
        for (i, v) in r.message.iter().enumerate() {
            ore[i] = v.re;
            oim[i] = v.im;
        }
        Ok(())
    })
}

/// Writes the sorted 1-based error positions. `*count` always receives the
/// number of positions; a short buffer yields `FORTA_STATUS_BUFFER_TOO_SMALL`.
#[no_mangle]
pub unsafe extern "C" fn forta_decode_result_error_positions(
    result: *const FortaDecodeResult,
    out: *mut usize,
    cap: usize,
    count: *mut usize,
) -> FortaStatus {
    guard(|| {
        let r = &handle(result, "result")?.inner;
        let count = out_ref(count, "count")?;
        *count = r.error_positions.len();
        if cap < r.error_positions.len() {
            return Err(fail(
                FortaStatus::BufferTooSmall,
                format!("{} positions do not fit in {cap}", r.error_positions.len()),
            ));
        }
        output(out, r.error_positions.len(), "out")?.copy_from_slice(&r.error_positions);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_decode_result_residual(result: *const FortaDecodeResult, out: *mut f64) -> FortaStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(result, "result")?.inner.residual;
        Ok(())
    })
}

fn theory_params(p: &FortaTheoryParams) -> TheoryParams {
    TheoryParams {
        n: p.n,
        a: p.a,
        d: p.d,
        sigma_g: p.sigma_g,
        sigma_eps: p.sigma_eps,
        g_norm: p.g_norm,
    }
}

fn feedback_stats(s: &FortaFeedbackStats) -> FeedbackStats {
    FeedbackStats {
        mu_t: s.mu_t,
        sigma_t: s.sigma_t,
        mu_q: s.mu_q,
        sigma_q: s.sigma_q,
        c1: s.c1,
    }
}

#[no_mangle]
pub unsafe extern "C" fn forta_eta(n: usize, a: usize, out: *mut f64) -> FortaStatus {
    guard(|| {
        *out_ref(out, "out")? = theory::eta(n, a)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_sin_alpha(params: *const FortaTheoryParams, out: *mut FortaBound) -> FortaStatus {
    guard(|| {
        let b = theory::sin_alpha(&theory_params(handle(params, "params")?))?;
        *out_ref(out, "out")? = FortaBound { value: b.value, valid: b.valid };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_sin_alpha_mod(
    params: *const FortaTheoryParams,
    stats: *const FortaFeedbackStats,
    out: *mut FortaBound,
) -> FortaStatus {
    guard(|| {
        let p = theory_params(handle(params, "params")?);
        let b = theory::sin_alpha_mod(&p, &feedback_stats(handle(stats, "stats")?))?;
        *out_ref(out, "out")? = FortaBound { value: b.value, valid: b.valid };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn forta_corollary_condition(
    params: *const FortaTheoryParams,
    stats: *const FortaFeedbackStats,
    out: *mut bool,
) -> FortaStatus {
    guard(|| {
        let p = theory_params(handle(params, "params")?);
        *out_ref(out, "out")? = theory::corollary_condition(&p, &feedback_stats(handle(stats, "stats")?))?;
        Ok(())
    })
}

/// Krum scores of `n_users` row-major points of length `dim`; writes
/// `n_users` scores.
#[no_mangle]
pub unsafe extern "C" fn forta_krum_scores(
    points: *const f64,
    n_users: usize,
    dim: usize,
    byzantine: usize,
    out_scores: *mut f64,
) -> FortaStatus {
    guard(|| {
        let flat = input(points, n_users * dim, "points")?;
        let rows: Vec<Vec<f64>> = (0..n_users).map(|i| flat[i * dim..(i + 1) * dim].to_vec()).collect();
        let table = krum_scores(&DistanceMatrix::from_points(&rows), byzantine)?;
        output(out_scores, n_users, "out_scores")?.copy_from_slice(&table.scores);
        Ok(())
    })
}

/// The `m` lowest-scoring users, 1-based and ascending, ties to the lower id.
#[no_mangle]
pub unsafe extern "C" fn forta_select(scores: *const f64, n: usize, m: usize, out_users: *mut usize) -> FortaStatus {
    guard(|| {
        let scores = input(scores, n, "scores")?;
        let set = select(scores, m, AggregationRule::Krum)?;
        output(out_users, m, "out_users")?.copy_from_slice(&set.users);
        Ok(())
    })
}
