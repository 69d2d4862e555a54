//! C ABI over `qstbc`.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`*_generate` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`QstbcStatus`]; on failure the message is available from
//! [`qstbc_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qstbc::codebook::{generate_packing, Codebook};
use qstbc::codec::BranchDecoder;
use qstbc::simkit::{run, ExperimentSpec};
use qstbc::verify::verify;
use qstbc::{CodeConfig, Error, StabilizerCode};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QstbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    InvalidCodebook = 4,
    Io = 5,
    VerificationFailed = 6,
    Panic = 7,
}

/// Stabilizer code for one `(M, N, T, d)`.
pub struct QstbcCode {
    code: StabilizerCode,
}

pub struct QstbcCodebook {
    codebook: Codebook,
}

/// Encoder/decoder for a code and codebook pair.
pub struct QstbcDecoder {
    decoder: BranchDecoder,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QstbcComplex {
    pub re: f64,
    pub im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QstbcBerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub symbol_errors: u64,
    pub ser: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: QstbcStatus,
    msg: String,
}

impl Failure {
    fn new(status: QstbcStatus, msg: impl Into<String>) -> Self {
        Failure {
            status,
            msg: msg.into(),
        }
    }

    fn null(what: &str) -> Self {
        Failure::new(QstbcStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_io() => QstbcStatus::Io,
            Error::InvalidConfig { .. } | Error::DimensionTooSmall(_) | Error::Construction(_) => {
                QstbcStatus::InvalidConfig
            }
            Error::Codebook(_) | Error::Parse { .. } => QstbcStatus::InvalidCodebook,
            _ => QstbcStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> QstbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QstbcStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.msg);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            QstbcStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Failure::new(QstbcStatus::InvalidArgument, "path is not UTF-8"))
}

fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: p came from Box::into_raw in this crate
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qstbc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qstbc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build the code for `(m, n, t, d)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_code_new(
    m: usize,
    n: usize,
    t: usize,
    d: usize,
    out: *mut *mut QstbcCode,
) -> QstbcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let code = StabilizerCode::new(CodeConfig::new(m, n, t, d)?)?;
        *out = Box::into_raw(Box::new(QstbcCode { code }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qstbc_code_free(code: *mut QstbcCode) {
    free_box(code);
}

/// `MT`, the length of an encoded signal. 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_code_signal_len(code: *const QstbcCode) -> usize {
    code.as_ref().map_or(0, |c| c.code.config().signal_len())
}

/// `NT`, the length of a received block. 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_code_received_len(code: *const QstbcCode) -> usize {
    code.as_ref().map_or(0, |c| c.code.config().received_len())
}

/// Load a codebook file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in [`qstbc_code_new`].
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_load(
    path: *const c_char,
    out: *mut *mut QstbcCodebook,
) -> QstbcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let codebook = Codebook::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(QstbcCodebook { codebook }));
        Ok(())
    })
}

/// Optimize a max-min chordal packing of `size` lines in `C^dim`.
///
/// # Safety
/// `out` as in [`qstbc_code_new`].
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_generate(
    dim: usize,
    size: usize,
    seed: u64,
    iterations: usize,
    out: *mut *mut QstbcCodebook,
) -> QstbcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let codebook = generate_packing(dim, size, seed, iterations)?.codebook;
        *out = Box::into_raw(Box::new(QstbcCodebook { codebook }));
        Ok(())
    })
}

/// # Safety
/// `codebook` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_save(
    codebook: *const QstbcCodebook,
    path: *const c_char,
) -> QstbcStatus {
    guard(|| {
        let cb = handle(codebook, "codebook")?;
        cb.codebook.save(path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qstbc_codebook_free(codebook: *mut QstbcCodebook) {
    free_box(codebook);
}

/// Number of codewords. 0 for a null handle.
///
/// # Safety
/// `codebook` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_len(codebook: *const QstbcCodebook) -> usize {
    codebook.as_ref().map_or(0, |c| c.codebook.len())
}

/// Line dimension. 0 for a null handle.
///
/// # Safety
/// `codebook` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_dim(codebook: *const QstbcCodebook) -> usize {
    codebook.as_ref().map_or(0, |c| c.codebook.dim())
}

/// Minimum pairwise chordal distance. NaN for a null handle.
///
/// # Safety
/// `codebook` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qstbc_codebook_min_distance(codebook: *const QstbcCodebook) -> f64 {
    codebook
        .as_ref()
        .map_or(f64::NAN, |c| c.codebook.min_chordal_distance())
}

/// Pair a code with a codebook of matching dimension. The handles may be
/// freed afterwards.
///
/// # Safety
/// `code` and `codebook` must be live handles; `out` as in [`qstbc_code_new`].
#[no_mangle]
pub unsafe extern "C" fn qstbc_decoder_new(
    code: *const QstbcCode,
    codebook: *const QstbcCodebook,
    out: *mut *mut QstbcDecoder,
) -> QstbcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let code = handle(code, "code")?;
        let cb = handle(codebook, "codebook")?;
        let decoder = BranchDecoder::new(&code.code, &cb.codebook)?;
        *out = Box::into_raw(Box::new(QstbcDecoder { decoder }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qstbc_decoder_free(decoder: *mut QstbcDecoder) {
    free_box(decoder);
}

/// Write the transmit signal `sqrt(T) C s_index` (length `MT`) to `signal`.
///
/// # Safety
/// `decoder` must be a live handle and `signal` must point to `len` writable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn qstbc_encode(
    decoder: *const QstbcDecoder,
    index: usize,
    signal: *mut QstbcComplex,
    len: usize,
) -> QstbcStatus {
    guard(|| {
        let dec = &handle(decoder, "decoder")?.decoder;
        if signal.is_null() {
            return Err(Failure::null("signal"));
        }
        if index >= dec.codebook_len() {
            return Err(Failure::new(
                QstbcStatus::InvalidArgument,
                format!("index {index} >= codebook size {}", dec.codebook_len()),
            ));
        }
        let word = dec.codeword(index);
        if len != word.len() {
            return Err(Failure::new(
                QstbcStatus::InvalidArgument,
                format!("signal length {len}, expected {}", word.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(signal, len);
        for (o, w) in out.iter_mut().zip(word) {
            *o = QstbcComplex { re: w.re, im: w.im };
        }
        Ok(())
    })
}

/// ML-decode a received block `y` of length `NT`. Writes the codebook index
/// and its bit label.
///
/// # Safety
/// `decoder` must be a live handle, `y` must point to `len` readable elements
/// and `index`/`label` must be writable (either may be null to skip it).
#[no_mangle]
pub unsafe extern "C" fn qstbc_decode(
    decoder: *const QstbcDecoder,
    y: *const QstbcComplex,
    len: usize,
    index: *mut usize,
    label: *mut u32,
) -> QstbcStatus {
    guard(|| {
        let dec = &handle(decoder, "decoder")?.decoder;
        if y.is_null() {
            return Err(Failure::null("y"));
        }
        let want = dec.config().received_len();
        if len != want {
            return Err(Failure::new(
                QstbcStatus::InvalidArgument,
                format!("received length {len}, expected {want}"),
            ));
        }
        let y: Vec<Complex64> = std::slice::from_raw_parts(y, len)
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        let mut ws = dec.workspace();
        let k = dec.decode(&y, &mut ws);
        if let Some(i) = index.as_mut() {
            *i = k;
        }
        if let Some(l) = label.as_mut() {
            *l = dec.label(k);
        }
        Ok(())
    })
}

/// Run a BER sweep and fill `points[0..n_points]`.
///
/// # Safety
/// `code` and `codebook` must be live handles; `snr_db` must point to
/// `n_points` readable values and `points` to `n_points` writable records.
#[no_mangle]
pub unsafe extern "C" fn qstbc_simulate(
    code: *const QstbcCode,
    codebook: *const QstbcCodebook,
    snr_db: *const f64,
    n_points: usize,
    trials_per_point: u64,
    seed: u64,
    workers: usize,
    points: *mut QstbcBerPoint,
) -> QstbcStatus {
    guard(|| {
        let code = handle(code, "code")?;
        let cb = handle(codebook, "codebook")?;
        if snr_db.is_null() || points.is_null() {
            return Err(Failure::null("snr_db or points"));
        }
        let spec = ExperimentSpec {
            config: *code.code.config(),
            codebook: cb.codebook.clone(),
            snr_grid_db: std::slice::from_raw_parts(snr_db, n_points).to_vec(),
            trials_per_point,
            seed,
            workers,
            stop_after_bit_errors: None,
        };
        let result = run(&spec)?;
        let out = std::slice::from_raw_parts_mut(points, n_points);
        for (o, p) in out.iter_mut().zip(result) {
            *o = QstbcBerPoint {
                snr_db: p.snr_db,
                trials: p.trials,
                bits_sent: p.bits_sent,
                bit_errors: p.bit_errors,
                ber: p.ber,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
                symbol_errors: p.symbol_errors,
                ser: p.ser,
            };
        }
        Ok(())
    })
}

/// Run the invariant suite for `(m, n, t, d)`. Returns
/// `VerificationFailed` if any check fails; `checks` and `failed` (either may
/// be null) receive the totals.
///
/// # Safety
/// `checks` and `failed` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qstbc_verify(
    m: usize,
    n: usize,
    t: usize,
    d: usize,
    seed: u64,
    checks: *mut usize,
    failed: *mut usize,
) -> QstbcStatus {
    guard(|| {
        let report = verify(&CodeConfig::new(m, n, t, d)?, seed)?;
        let bad: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        if let Some(c) = checks.as_mut() {
            *c = report.checks.len();
        }
        if let Some(f) = failed.as_mut() {
            *f = bad.len();
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Failure::new(
                QstbcStatus::VerificationFailed,
                format!("failed checks: {}", bad.join(", ")),
            ))
        }
    })
}
