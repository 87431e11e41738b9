//! C ABI for `covshrink`.
//!
//! Samples and matrices cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns a [`CsStatus`]; on failure a description is available from
//! [`cs_last_error`] on the same thread until the next failing call.
//!
//! Matrices and samples are exchanged in row-major order.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use covshrink::changepoint::{self, BlockLength, BootstrapConfig, WeightChoice};
use covshrink::estimators::{self, TaperSpec, ThresholdMode, TimeSeriesSample};
use covshrink::linalg::{ProjectionVector, Simplex3Weight, SymMatrix};
use covshrink::simulate::{self, ModelAConfig, ModelBCConfig, Spacing};
use covshrink::weights::{self, LrvConfig, RiskComponents};
use covshrink::CovError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    InvalidArgument = 3,
    OutOfRange = 4,
    NotPositiveSemidefinite = 5,
    NonFinite = 6,
    Io = 7,
    Panic = 8,
}

/// A `n × d` time series.
pub struct CsSample(TimeSeriesSample);

/// A symmetric `d × d` matrix.
pub struct CsMatrix(SymMatrix);

/// Bandwidths and rate parameters of the tapered and Toeplitz estimators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsThresholds {
    pub tau_dagger: f64,
    pub tau_diamond: f64,
    pub sigma_dagger: f64,
    pub alpha: f64,
    pub c_exponent: f64,
    pub s_exponent: f64,
}

/// Plug-in risk estimates of the shrinkage objective.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsRisk {
    pub mse: f64,
    pub e_dagger: f64,
    pub e_diamond: f64,
    pub d_cross: f64,
}

/// Bootstrap settings. `block_len = 0` selects `⌈5n^0.2⌉`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsBootstrap {
    pub block_len: usize,
    pub n_boot: usize,
    pub level: f64,
    pub delta_exponent: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsTestResult {
    pub statistic: f64,
    pub quantile: f64,
    pub delta: f64,
    pub reject: bool,
    pub argmax_k: usize,
    pub block_len: usize,
}

/// Estimator selector for [`cs_estimate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsTarget {
    Sample = 0,
    Taper = 1,
    Toeplitz = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CovError) -> CsStatus {
    match e {
        CovError::DimensionMismatch { .. } => CsStatus::DimensionMismatch,
        CovError::InvalidArgument(_) | CovError::Manifest(_) => CsStatus::InvalidArgument,
        CovError::OutOfRange { .. } => CsStatus::OutOfRange,
        CovError::NotPositiveSemidefinite { .. } => CsStatus::NotPositiveSemidefinite,
        CovError::NonFinite(_) => CsStatus::NonFinite,
        CovError::Io(_) | CovError::Csv(_) | CovError::Json(_) => CsStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Cov(CovError),
}

impl From<CovError> for Failure {
    fn from(e: CovError) -> Self {
        Failure::Cov(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            CsStatus::NullPointer
        }
        Ok(Err(Failure::Cov(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(value)), "out")
}

impl From<TaperSpec> for CsThresholds {
    fn from(s: TaperSpec) -> Self {
        CsThresholds {
            tau_dagger: s.tau_dagger,
            tau_diamond: s.tau_diamond,
            sigma_dagger: s.sigma_dagger,
            alpha: s.alpha,
            c_exponent: s.c_exponent,
            s_exponent: s.s_exponent,
        }
    }
}

impl CsThresholds {
    fn spec(&self) -> Result<TaperSpec, CovError> {
        TaperSpec::new(
            self.tau_dagger,
            self.tau_diamond,
            self.sigma_dagger,
            self.alpha,
            self.c_exponent,
            self.s_exponent,
        )
    }
}

impl From<RiskComponents> for CsRisk {
    fn from(r: RiskComponents) -> Self {
        CsRisk {
            mse: r.mse,
            e_dagger: r.e_dagger,
            e_diamond: r.e_diamond,
            d_cross: r.d_cross,
        }
    }
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `n × d` row-major values into a new sample.
///
/// # Safety
/// `data` must point to `n * d` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_sample_new(
    data: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut CsSample,
) -> CsStatus {
    guard(|| {
        let len = n
            .checked_mul(d)
            .ok_or_else(|| CovError::InvalidArgument("n * d overflows".into()))?;
        let values = slice(data, len, "data")?.to_vec();
        let x = TimeSeriesSample::new(n, d, values)?;
        emit(out, CsSample(x))
    })
}

/// # Safety
/// `sample` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_sample_free(sample: *mut CsSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// # Safety
/// `sample` must be a live handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_sample_shape(sample: *const CsSample, n: *mut usize, d: *mut usize) -> CsStatus {
    guard(|| {
        let x = &deref(sample, "sample")?.0;
        write(n, x.n(), "n")?;
        write(d, x.d(), "d")
    })
}

/// Simulates Model A. `change_at = 0` means no break.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_simulate_model_a(
    n: usize,
    d: usize,
    b_post: f64,
    change_at: usize,
    seed: u64,
    out: *mut *mut CsSample,
) -> CsStatus {
    guard(|| {
        let cfg = ModelAConfig {
            b_post,
            change_at: (change_at > 0).then_some(change_at),
            ..ModelAConfig::new(n, d, seed)
        };
        let x = simulate::gen_model_a(&cfg)?;
        emit(out, CsSample(x))
    })
}

/// Simulates Model B (`sqrt_spacing = false`) or Model C (`true`) under the null.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_simulate_model_bc(
    n: usize,
    d: usize,
    hurst: f64,
    sqrt_spacing: bool,
    seed: u64,
    out: *mut *mut CsSample,
) -> CsStatus {
    guard(|| {
        let spacing = if sqrt_spacing { Spacing::Sqrt } else { Spacing::Toeplitz };
        let x = simulate::gen_model_bc(&ModelBCConfig::new(n, d, spacing, hurst, seed))?;
        emit(out, CsSample(x))
    })
}

/// Default thresholds; `theorem_rates` selects `c = 2` instead of `c = 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_default_thresholds(
    n: usize,
    d: usize,
    alpha: f64,
    s_exponent: f64,
    theorem_rates: bool,
    out: *mut CsThresholds,
) -> CsStatus {
    guard(|| {
        let mode = if theorem_rates {
            ThresholdMode::Theorem
        } else {
            ThresholdMode::Simulation
        };
        let spec = estimators::default_thresholds(n, d, alpha, mode, s_exponent)?;
        write(out, spec.into(), "out")
    })
}

/// `(1/n) Σ xₜxₜᵀ` over the whole sample.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_sample_cov(sample: *const CsSample, out: *mut *mut CsMatrix) -> CsStatus {
    guard(|| {
        let s = estimators::sample_cov(&deref(sample, "sample")?.0);
        emit(out, CsMatrix(s))
    })
}

/// Tapered or Toeplitz estimate from a sample covariance.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_estimate(
    s: *const CsMatrix,
    target: CsTarget,
    tau: f64,
    out: *mut *mut CsMatrix,
) -> CsStatus {
    guard(|| {
        let s = &deref(s, "s")?.0;
        if matches!(target, CsTarget::Taper | CsTarget::Toeplitz) && !(tau > 0.0) {
            return Err(CovError::OutOfRange {
                what: "tau",
                value: tau,
                range: "(0, inf)".into(),
            }
            .into());
        }
        let m = match target {
            CsTarget::Sample => s.clone(),
            CsTarget::Taper => estimators::taper_estimator(s, tau),
            CsTarget::Toeplitz => estimators::toeplitz_estimator(s, tau),
        };
        emit(out, CsMatrix(m))
    })
}

/// `w₁S + w₂T + w₃Z`.
///
/// # Safety
/// `w` must point to 3 doubles; the matrices must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_shrink_combine(
    w: *const f64,
    sample: *const CsMatrix,
    tapered: *const CsMatrix,
    toeplitz: *const CsMatrix,
    out: *mut *mut CsMatrix,
) -> CsStatus {
    guard(|| {
        let w = weight(w)?;
        let m = estimators::shrink_combine(
            &w,
            &deref(sample, "sample")?.0,
            &deref(tapered, "tapered")?.0,
            &deref(toeplitz, "toeplitz")?.0,
        )?;
        emit(out, CsMatrix(m))
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_matrix_free(m: *mut CsMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_matrix_dim(m: *const CsMatrix, out: *mut usize) -> CsStatus {
    guard(|| write(out, deref(m, "m")?.0.dim(), "out"))
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_matrix_get(m: *const CsMatrix, i: usize, j: usize, out: *mut f64) -> CsStatus {
    guard(|| {
        let m = &deref(m, "m")?.0;
        if i >= m.dim() || j >= m.dim() {
            return Err(CovError::InvalidArgument(format!("index ({i}, {j}) outside {0}x{0}", m.dim())).into());
        }
        write(out, m.get(i, j), "out")
    })
}

/// Copies the matrix row-major into `buf`, which must hold `len ≥ d²` doubles.
///
/// # Safety
/// `m` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_matrix_copy(m: *const CsMatrix, buf: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let src = deref(m, "m")?.0.as_slice();
        if len < src.len() {
            return Err(CovError::DimensionMismatch {
                expected: src.len(),
                found: len,
            }
            .into());
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Plug-in risk estimates. `bandwidth ≤ 0` selects Newey–West per component.
///
/// # Safety
/// `sample` and `thresholds` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_risk_components(
    sample: *const CsSample,
    thresholds: *const CsThresholds,
    bandwidth: f64,
    out: *mut CsRisk,
) -> CsStatus {
    guard(|| {
        let x = &deref(sample, "sample")?.0;
        let spec = deref(thresholds, "thresholds")?.spec()?;
        let cfg = if bandwidth > 0.0 {
            LrvConfig::fixed(bandwidth)?
        } else {
            LrvConfig::default()
        };
        write(out, weights::risk_components(x, &spec, &cfg)?.into(), "out")
    })
}

/// Minimizer of the shrinkage objective over the simplex, written to `w_out[0..3]`.
///
/// # Safety
/// `risk` must be valid; `w_out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_optimal_weights(risk: *const CsRisk, w_out: *mut f64) -> CsStatus {
    guard(|| {
        let r = deref(risk, "risk")?;
        let rc = RiskComponents {
            mse: r.mse,
            e_dagger: r.e_dagger,
            e_diamond: r.e_diamond,
            d_cross: r.d_cross,
        };
        let w = weights::optimal_weights(&rc)?;
        if w_out.is_null() {
            return Err(Failure::Null("w_out"));
        }
        ptr::copy_nonoverlapping(w.as_array().as_ptr(), w_out, 3);
        Ok(())
    })
}

unsafe fn weight(w: *const f64) -> Result<Simplex3Weight, Failure> {
    let w = slice(w, 3, "w")?;
    Ok(Simplex3Weight::new(w[0], w[1], w[2])?)
}

unsafe fn projection(v: *const f64, d: usize) -> Result<ProjectionVector, Failure> {
    Ok(ProjectionVector::new(slice(v, d, "v")?.to_vec())?)
}

/// CUSUM statistic `Tₙ(w)` and its maximizing `k` for projection `v` (length `d`).
///
/// # Safety
/// `sample` and `thresholds` must be valid; `v` must point to `d` doubles and
/// `w` to 3; `stat` and `argmax_k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_cusum_stat(
    sample: *const CsSample,
    v: *const f64,
    w: *const f64,
    thresholds: *const CsThresholds,
    stat: *mut f64,
    argmax_k: *mut usize,
) -> CsStatus {
    guard(|| {
        let x = &deref(sample, "sample")?.0;
        let v = projection(v, x.d())?;
        let spec = deref(thresholds, "thresholds")?.spec()?;
        let (t, k) = changepoint::cusum_stat(x, &v, &weight(w)?, &spec)?;
        write(stat, t, "stat")?;
        write(argmax_k, k, "argmax_k")
    })
}

/// Bootstrap CUSUM test at a single weight `w`.
///
/// # Safety
/// As for [`cs_cusum_stat`]; `cfg` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_changepoint_test(
    sample: *const CsSample,
    v: *const f64,
    w: *const f64,
    thresholds: *const CsThresholds,
    cfg: *const CsBootstrap,
    out: *mut CsTestResult,
) -> CsStatus {
    guard(|| {
        let x = &deref(sample, "sample")?.0;
        let v = projection(v, x.d())?;
        let spec = deref(thresholds, "thresholds")?.spec()?;
        let c = deref(cfg, "cfg")?;
        let boot = BootstrapConfig {
            block_len: if c.block_len == 0 {
                BlockLength::Auto
            } else {
                BlockLength::Fixed(c.block_len)
            },
            n_boot: c.n_boot,
            level: c.level,
            delta_exponent: c.delta_exponent,
            seed: c.seed,
        };
        let r = changepoint::changepoint_test(x, &v, &spec, &WeightChoice::Single(weight(w)?), &boot)?;
        write(
            out,
            CsTestResult {
                statistic: r.statistic,
                quantile: r.quantile,
                delta: r.delta,
                reject: r.reject,
                argmax_k: r.argmax_k,
                block_len: r.block_len,
            },
            "out",
        )
    })
}
