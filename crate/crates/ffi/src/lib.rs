//! C ABI over `rkhs-probe`.
//!
//! Objects cross the boundary as opaque handles created by `rkp_*_new` or
//! `rkp_*_from_*` functions and released with the matching `rkp_*_free`.
//! Every fallible function returns an [`RkpStatus`]; on failure a message
//! is available from [`rkp_last_error_message`] on the same thread.
//! Strings returned through `char **` out-parameters are owned by the
//! caller and must be released with [`rkp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rkhs_probe::gp::{self, Design, Observations};
use rkhs_probe::hankel::{self, LimitFlag};
use rkhs_probe::moments::{self, MomentSequence, SpectralFamily};
use rkhs_probe::{Error, Kernel, Scalar, VarianceReport};

/// Result codes of the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RkpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Length = 3,
    Domain = 4,
    Precision = 5,
    Degenerate = 6,
    Singular = 7,
    Unsupported = 8,
    Parse = 9,
    Utf8 = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// Limit classification of a variance report.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RkpLimitFlag {
    TendsToZero = 0,
    BoundedAwayFromZero = 1,
    DegenerateZero = 2,
    Inconclusive = 3,
}

/// Spectral family handle.
pub struct RkpFamily(SpectralFamily);

/// Even-moment sequence handle.
pub struct RkpMoments(MomentSequence);

/// BLUE variance report handle.
pub struct RkpVarianceReport(VarianceReport);

/// Covariance kernel handle.
pub struct RkpKernel(Kernel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn status_of(err: &Error) -> RkpStatus {
    match err {
        Error::Parameter(_) => RkpStatus::InvalidArgument,
        Error::Length { .. } => RkpStatus::Length,
        Error::Domain(_) => RkpStatus::Domain,
        Error::Precision { .. } => RkpStatus::Precision,
        Error::Degenerate(_) => RkpStatus::Degenerate,
        Error::Singular { .. } => RkpStatus::Singular,
        Error::Unsupported(_) => RkpStatus::Unsupported,
        Error::Parse(_) => RkpStatus::Parse,
    }
}

struct Fail(RkpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> RkpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RkpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RkpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RkpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RkpStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn json(p: *const c_char, what: &str) -> Result<serde_json::Value, Fail> {
    serde_json::from_str(text(p, what)?).map_err(|e| Fail(RkpStatus::Parse, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw();
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, v: T) -> FfiResult {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn scalars(values: &[f64], what: &str) -> Result<Vec<Scalar>, Fail> {
    values
        .iter()
        .map(|&v| Scalar::from_f64_exact(v).map_err(|_| Fail(RkpStatus::InvalidArgument, format!("{what} contains {v}"))))
        .collect()
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rkp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rkp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rkp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a family from `{"family": ..., "params": {...}}`.
///
/// # Safety
/// `json_text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_family_from_json(json_text: *const c_char, out: *mut *mut RkpFamily) -> RkpStatus {
    guard(|| put(out, RkpFamily(SpectralFamily::from_json(&json(json_text, "family JSON")?)?)))
}

/// Serialise a family to JSON.
///
/// # Safety
/// `family` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_family_to_json(family: *const RkpFamily, out: *mut *mut c_char) -> RkpStatus {
    guard(|| put_string(out, borrow(family, "family")?.0.to_json().to_string()))
}

/// # Safety
/// `family` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkp_family_free(family: *mut RkpFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Even moments `b_0, ..., b_{n_max}` of a family.
///
/// # Safety
/// `family` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_even_moments(
    family: *const RkpFamily,
    n_max: usize,
    out: *mut *mut RkpMoments,
) -> RkpStatus {
    guard(|| put(out, RkpMoments(moments::even_moments(&borrow(family, "family")?.0, n_max)?)))
}

/// Moment sequence from decimal or `p/q` strings, e.g. `"1"`, `"1/3"`, `"0.2"`.
///
/// # Safety
/// `values` must point to `len` NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_moments_from_strings(
    values: *const *const c_char,
    len: usize,
    out: *mut *mut RkpMoments,
) -> RkpStatus {
    guard(|| {
        let items = slice(values, len, "values")?;
        let parsed = items
            .iter()
            .map(|&p| Ok(Scalar::parse_exact(text(p, "moment")?)?))
            .collect::<Result<Vec<_>, Fail>>()?;
        put(out, RkpMoments(MomentSequence::derived(parsed)?))
    })
}

/// Number of stored moments.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_moments_len(m: *const RkpMoments, out: *mut usize) -> RkpStatus {
    guard(|| put_value(out, borrow(m, "moments")?.0.len()))
}

/// `b_j` as text (`p/q` when exact).
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_moments_get(m: *const RkpMoments, j: usize, out: *mut *mut c_char) -> RkpStatus {
    guard(|| {
        let seq = &borrow(m, "moments")?.0;
        let v = seq
            .get(j)
            .ok_or_else(|| Fail(RkpStatus::OutOfRange, format!("index {j} beyond {} moments", seq.len())))?;
        put_string(out, v.to_string())
    })
}

/// CSV export of the moments.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_moments_to_csv(m: *const RkpMoments, out: *mut *mut c_char) -> RkpStatus {
    guard(|| put_string(out, borrow(m, "moments")?.0.to_csv()))
}

/// Tilted sequence `b_{j+m}`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_shift_measure(m: *const RkpMoments, shift: usize, out: *mut *mut RkpMoments) -> RkpStatus {
    guard(|| put(out, RkpMoments(moments::shift_measure(&borrow(m, "moments")?.0, shift)?)))
}

/// Moments of `gamma delta_0 + (1 - gamma) mu`; `gamma` as text.
///
/// # Safety
/// `m` must be a live handle, `gamma` a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_mix_atom(
    m: *const RkpMoments,
    gamma: *const c_char,
    out: *mut *mut RkpMoments,
) -> RkpStatus {
    guard(|| {
        let g = Scalar::parse_exact(text(gamma, "gamma")?)?;
        put(out, RkpMoments(moments::mix_atom(&borrow(m, "moments")?.0, &g)?))
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkp_moments_free(m: *mut RkpMoments) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `H_n` and `G_n` as text.
///
/// # Safety
/// `m` must be a live handle; `h_out` and `g_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_hankel_pair(
    m: *const RkpMoments,
    n: usize,
    h_out: *mut *mut c_char,
    g_out: *mut *mut c_char,
) -> RkpStatus {
    guard(|| {
        if h_out.is_null() || g_out.is_null() {
            return Err(null("output pointer"));
        }
        let pair = hankel::hankel_pair(&borrow(m, "moments")?.0, n)?;
        put_string(h_out, pair.h.to_string())?;
        put_string(g_out, pair.g.to_string())
    })
}

/// Least-squares polynomial approximation value, equal to `H_n / G_n`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_polyapprox_oracle(m: *const RkpMoments, n: usize, out: *mut *mut c_char) -> RkpStatus {
    guard(|| put_string(out, hankel::polyapprox_oracle(&borrow(m, "moments")?.0, n)?.to_string()))
}

/// `var_n = H_n / G_n` for `n = 0..=n_max`.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_blue_variance_seq(
    m: *const RkpMoments,
    n_max: usize,
    out: *mut *mut RkpVarianceReport,
) -> RkpStatus {
    guard(|| put(out, RkpVarianceReport(hankel::blue_variance_seq(&borrow(m, "moments")?.0, n_max)?)))
}

/// Number of entries (`n_max + 1`).
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_len(r: *const RkpVarianceReport, out: *mut usize) -> RkpStatus {
    guard(|| put_value(out, borrow(r, "report")?.0.entries.len()))
}

fn entry(r: &VarianceReport, n: usize) -> Result<&hankel::VarianceEntry, Fail> {
    r.entries
        .get(n)
        .ok_or_else(|| Fail(RkpStatus::OutOfRange, format!("n = {n} beyond n_max = {}", r.entries.len() - 1)))
}

/// `var_n` as text (`p/q` when exact).
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_variance(r: *const RkpVarianceReport, n: usize, out: *mut *mut c_char) -> RkpStatus {
    guard(|| put_string(out, entry(&borrow(r, "report")?.0, n)?.variance.to_string()))
}

/// `var_n` rounded to double.
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_variance_f64(r: *const RkpVarianceReport, n: usize, out: *mut c_double) -> RkpStatus {
    guard(|| put_value(out, entry(&borrow(r, "report")?.0, n)?.variance.to_f64()))
}

/// Limit classification of the sequence.
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_limit_flag(r: *const RkpVarianceReport, out: *mut RkpLimitFlag) -> RkpStatus {
    guard(|| {
        let flag = match borrow(r, "report")?.0.limit_flag {
            LimitFlag::TendsToZero => RkpLimitFlag::TendsToZero,
            LimitFlag::BoundedAwayFromZero => RkpLimitFlag::BoundedAwayFromZero,
            LimitFlag::DegenerateZero => RkpLimitFlag::DegenerateZero,
            LimitFlag::Inconclusive => RkpLimitFlag::Inconclusive,
        };
        put_value(out, flag)
    })
}

/// CSV export of the report.
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_to_csv(r: *const RkpVarianceReport, out: *mut *mut c_char) -> RkpStatus {
    guard(|| put_string(out, borrow(r, "report")?.0.to_csv()))
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkp_report_free(r: *mut RkpVarianceReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Kernel from a family object or `{"family": {...}, "sigma2": s}`.
///
/// # Safety
/// `json_text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_kernel_from_json(json_text: *const c_char, out: *mut *mut RkpKernel) -> RkpStatus {
    guard(|| put(out, RkpKernel(Kernel::from_json(&json(json_text, "kernel JSON")?)?)))
}

/// `sigma^2 k(u)` rounded to double.
///
/// # Safety
/// `k` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_kernel_eval(k: *const RkpKernel, u: c_double, out: *mut c_double) -> RkpStatus {
    guard(|| {
        let u = scalars(&[u], "u")?.remove(0);
        put_value(out, rkhs_probe::kernel_eval(&borrow(k, "kernel")?.0, &u).to_f64())
    })
}

/// # Safety
/// `k` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rkp_kernel_free(k: *mut RkpKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Kriging with exact observations. Writes the conditional mean and
/// variance at each of the `n_queries` queries and the MLE of the scale.
/// Any of the three outputs may be NULL to skip it.
///
/// # Safety
/// Array arguments must hold `n_points` or `n_queries` doubles as named;
/// `k` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rkp_krige(
    k: *const RkpKernel,
    points: *const c_double,
    values: *const c_double,
    n_points: usize,
    queries: *const c_double,
    n_queries: usize,
    mean_out: *mut c_double,
    var_out: *mut c_double,
    sigma2_hat_out: *mut c_double,
) -> RkpStatus {
    guard(|| {
        let kernel = &borrow(k, "kernel")?.0;
        let design = Design::new(scalars(slice(points, n_points, "points")?, "points")?)?;
        let obs = Observations::Values(scalars(slice(values, n_points, "values")?, "values")?);
        let qs = scalars(slice(queries, n_queries, "queries")?, "queries")?;
        let (mean, var, fit) = gp::krige(kernel, &design, &obs, &qs)?;
        for (i, (m, v)) in mean.iter().zip(&var).enumerate() {
            if !mean_out.is_null() {
                *mean_out.add(i) = m.to_f64();
            }
            if !var_out.is_null() {
                *var_out.add(i) = v.to_f64();
            }
        }
        if !sigma2_hat_out.is_null() {
            *sigma2_hat_out = fit.sigma2_hat.to_f64();
        }
        Ok(())
    })
}

/// Variance `1 / (F^T K^{-1} F)` of the discrete BLUE for regressor values `F`.
///
/// # Safety
/// `points` and `regressor` must hold `n_points` doubles; `k` must be a live
/// handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rkp_blue_discrete_variance(
    k: *const RkpKernel,
    points: *const c_double,
    regressor: *const c_double,
    n_points: usize,
    out: *mut c_double,
) -> RkpStatus {
    guard(|| {
        let kernel = &borrow(k, "kernel")?.0;
        let design = Design::new(scalars(slice(points, n_points, "points")?, "points")?)?;
        let f = Observations::Values(scalars(slice(regressor, n_points, "regressor")?, "regressor")?);
        let (_, var) = gp::blue_discrete(kernel, &design, &f)?;
        put_value(out, var.to_f64())
    })
}

/// Numeric value of a status, for bindings that cannot use the enum.
#[no_mangle]
pub extern "C" fn rkp_status_code(status: RkpStatus) -> c_int {
    status as c_int
}
