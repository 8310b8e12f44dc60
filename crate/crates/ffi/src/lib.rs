//! C ABI over `jps-core`.
//!
//! Samples and estimates live behind opaque handles created by `*_new` /
//! `jps_estimate*` and released with the matching `*_free`. Every function
//! returns a [`JpsStatus`]; on failure a message is kept per thread and
//! can be read with [`jps_last_error_message`]. Categories and ranks are
//! 1-based, as in the Rust API. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jps_core::estimators::{
    estimate_iso_combined, estimate_iso_drop_empty, estimate_iso_maxmin, estimate_iso_minmax, estimate_iso_no_empty,
    estimate_ml, estimate_srs, estimate_standard_jps, MlOptions,
};
use jps_core::kernel::{order_stat_category_pmf, pava_non_increasing, regularized_incomplete_beta};
use jps_core::multiranker::{estimate_sm, estimate_sm_star, ranker_weights, RankerWeights};
use jps_core::{EstimateResult, JpsError, JpsSample, MultiRankerSample};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyStratum = 3,
    ConditioningExhausted = 4,
    Numeric = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Estimators reachable through the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JpsMethod {
    Srs = 0,
    St = 1,
    Ml = 2,
    /// Isotonized, empty strata dropped.
    Iso = 3,
    /// Isotonized, fails with `EMPTY_STRATUM` if any stratum is empty.
    IsoNoEmpty = 4,
    IsoMinus = 5,
    IsoPlus = 6,
    IsoStar = 7,
    Sm = 8,
    SmStar = 9,
}

/// Single-ranker sample.
pub struct JpsSampleHandle(JpsSample);

/// Multi-ranker sample with per-ranker scores.
pub struct JpsMultiSampleHandle {
    sample: MultiRankerSample,
    has_scores: bool,
}

pub struct JpsEstimateHandle(EstimateResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &JpsError) -> JpsStatus {
    match err {
        JpsError::InvalidArgument(_) | JpsError::ZeroVariance => JpsStatus::InvalidArgument,
        JpsError::EmptyStratum { .. } => JpsStatus::EmptyStratum,
        JpsError::ConditioningExhausted { .. } => JpsStatus::ConditioningExhausted,
        JpsError::OlrFailure(_) => JpsStatus::Numeric,
    }
}

struct Failure(JpsStatus, String);

impl From<JpsError> for Failure {
    fn from(e: JpsError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(JpsStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any error message, and converts panics to `PANIC`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            JpsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            JpsStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T: Copy>(src: &[T], out: *mut T, out_len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < src.len() {
        return Err(Failure(
            JpsStatus::BufferTooSmall,
            format!("buffer holds {out_len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length
/// excluding the terminator. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn jps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jps_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Builds a single-ranker sample from `n` values in `1..=num_categories`
/// and ranks in `1..=set_size`.
///
/// # Safety
/// `values` and `ranks` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_sample_new(
    values: *const usize,
    ranks: *const usize,
    n: usize,
    set_size: usize,
    num_categories: usize,
    out: *mut *mut JpsSampleHandle,
) -> JpsStatus {
    guard(|| {
        let v = slice(values, n, "values")?.to_vec();
        let r = slice(ranks, n, "ranks")?.to_vec();
        let s = JpsSample::new(v, r, set_size, num_categories)?;
        store(out, JpsSampleHandle(s))
    })
}

/// # Safety
/// `sample` must come from [`jps_sample_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_sample_free(sample: *mut JpsSampleHandle) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of empty strata of a sample, written to `out`.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_sample_num_empty_strata(sample: *const JpsSampleHandle, out: *mut usize) -> JpsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.empty_strata().len();
        Ok(())
    })
}

/// Builds a multi-ranker sample. `ranks` and `scores` are row-major
/// `n x num_rankers`; `scores` may be null, in which case the multi-ranker
/// estimators use equal ranker weights.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_multi_sample_new(
    values: *const usize,
    ranks: *const usize,
    scores: *const f64,
    n: usize,
    num_rankers: usize,
    set_size: usize,
    num_categories: usize,
    out: *mut *mut JpsMultiSampleHandle,
) -> JpsStatus {
    guard(|| {
        if num_rankers == 0 {
            return Err(Failure(JpsStatus::InvalidArgument, "num_rankers must be positive".into()));
        }
        let total = n.checked_mul(num_rankers).ok_or_else(|| Failure(JpsStatus::InvalidArgument, "size overflow".into()))?;
        let v = slice(values, n, "values")?.to_vec();
        let r: Vec<Vec<usize>> = slice(ranks, total, "ranks")?.chunks(num_rankers).map(<[usize]>::to_vec).collect();
        let has_scores = !scores.is_null();
        let z = if has_scores {
            slice(scores, total, "scores")?.chunks(num_rankers).map(<[f64]>::to_vec).collect()
        } else {
            vec![vec![0.0; num_rankers]; n]
        };
        let labels = (1..=num_rankers).map(|k| format!("ranker_{k}")).collect();
        let sample = MultiRankerSample::new(v, r, z, labels, set_size, num_categories)?;
        store(out, JpsMultiSampleHandle { sample, has_scores })
    })
}

/// # Safety
/// `sample` must come from [`jps_multi_sample_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_multi_sample_free(sample: *mut JpsMultiSampleHandle) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

fn single(method: JpsMethod, s: &JpsSample) -> Result<EstimateResult, Failure> {
    Ok(match method {
        JpsMethod::Srs => estimate_srs(s.values(), s.num_categories())?,
        JpsMethod::St => estimate_standard_jps(s)?,
        JpsMethod::Ml => estimate_ml(s, &MlOptions::default())?,
        JpsMethod::Iso => estimate_iso_drop_empty(s)?,
        JpsMethod::IsoNoEmpty => estimate_iso_no_empty(s)?,
        JpsMethod::IsoMinus => estimate_iso_minmax(s)?,
        JpsMethod::IsoPlus => estimate_iso_maxmin(s)?,
        JpsMethod::IsoStar => estimate_iso_combined(s)?,
        JpsMethod::Sm | JpsMethod::SmStar => {
            return Err(Failure(JpsStatus::InvalidArgument, "multi-ranker method on a single-ranker sample".into()))
        }
    })
}

/// Runs a single-ranker estimator.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate(
    sample: *const JpsSampleHandle,
    method: JpsMethod,
    out: *mut *mut JpsEstimateHandle,
) -> JpsStatus {
    guard(|| {
        let s = sample.as_ref().ok_or_else(|| null("sample"))?;
        store(out, JpsEstimateHandle(single(method, &s.0)?))
    })
}

/// Runs any estimator on a multi-ranker sample. Single-ranker methods use
/// the first ranker.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_multi(
    sample: *const JpsMultiSampleHandle,
    method: JpsMethod,
    out: *mut *mut JpsEstimateHandle,
) -> JpsStatus {
    guard(|| {
        let handle = sample.as_ref().ok_or_else(|| null("sample"))?;
        let s = &handle.sample;
        let weights = || -> Result<RankerWeights, Failure> {
            if handle.has_scores {
                Ok(ranker_weights(s.values(), s.concomitants())?)
            } else {
                Ok(RankerWeights::uniform(s.num_rankers()))
            }
        };
        let est = match method {
            JpsMethod::Sm => estimate_sm(s, &weights()?)?,
            JpsMethod::SmStar => estimate_sm_star(s, &weights()?)?,
            other => single(other, &s.ranker(0))?,
        };
        store(out, JpsEstimateHandle(est))
    })
}

/// # Safety
/// `estimate` must come from `jps_estimate*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_free(estimate: *mut JpsEstimateHandle) {
    if !estimate.is_null() {
        drop(Box::from_raw(estimate));
    }
}

/// Number of categories `Q`; 0 for a null handle.
///
/// # Safety
/// `estimate` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_num_categories(estimate: *const JpsEstimateHandle) -> usize {
    estimate.as_ref().map_or(0, |e| e.0.proportions.len())
}

/// Copies `p_1..p_Q` into `out` (capacity `out_len`).
///
/// # Safety
/// `estimate` must be a live handle; `out` must be valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_proportions(
    estimate: *const JpsEstimateHandle,
    out: *mut f64,
    out_len: usize,
) -> JpsStatus {
    guard(|| write_out(&estimate.as_ref().ok_or_else(|| null("estimate"))?.0.proportions, out, out_len))
}

/// Copies `c_1..c_{Q-1}` into `out` (capacity `out_len`).
///
/// # Safety
/// `estimate` must be a live handle; `out` must be valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_cumulative(
    estimate: *const JpsEstimateHandle,
    out: *mut f64,
    out_len: usize,
) -> JpsStatus {
    guard(|| write_out(&estimate.as_ref().ok_or_else(|| null("estimate"))?.0.cumulative, out, out_len))
}

/// Iteration count and convergence flag of an ML fit. Non-iterative
/// estimators report 0 iterations and `converged = 1`.
///
/// # Safety
/// `estimate` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_estimate_fit(
    estimate: *const JpsEstimateHandle,
    iterations: *mut usize,
    converged: *mut bool,
) -> JpsStatus {
    guard(|| {
        let e = estimate.as_ref().ok_or_else(|| null("estimate"))?;
        if iterations.is_null() || converged.is_null() {
            return Err(null("iterations/converged"));
        }
        let (it, ok) = e.0.fit.map_or((0, true), |f| (f.iterations, f.converged));
        *iterations = it;
        *converged = ok;
        Ok(())
    })
}

/// Regularized incomplete beta `B_x(h, m)` for positive integers `h`, `m`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jps_incomplete_beta(x: f64, h: usize, m: usize, out: *mut f64) -> JpsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = regularized_incomplete_beta(x, h, m)?;
        Ok(())
    })
}

/// Category pmf of the `h`-th order statistic in a set of `set_size`,
/// given the cumulative law `cumulative[0..num_categories]` (last entry 1).
///
/// # Safety
/// `cumulative` must be valid for `num_categories` reads and `out` for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn jps_order_stat_pmf(
    h: usize,
    set_size: usize,
    cumulative: *const f64,
    num_categories: usize,
    out: *mut f64,
    out_len: usize,
) -> JpsStatus {
    guard(|| {
        let c = slice(cumulative, num_categories, "cumulative")?;
        write_out(&order_stat_category_pmf(h, set_size, c)?, out, out_len)
    })
}

/// Weighted least-squares non-increasing fit (PAVA).
///
/// # Safety
/// `values` and `weights` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn jps_pava_non_increasing(
    values: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut f64,
) -> JpsStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let w = slice(weights, len, "weights")?;
        write_out(&pava_non_increasing(v, w)?, out, len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&JpsError::EmptyStratum { stratum: 1 }), JpsStatus::EmptyStratum);
        assert_eq!(status_of(&JpsError::ZeroVariance), JpsStatus::InvalidArgument);
        assert_eq!(status_of(&JpsError::OlrFailure("x".into())), JpsStatus::Numeric);
    }

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, JpsStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { jps_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(n, msg.len());
        assert!(msg.contains("boom"));
    }
}
