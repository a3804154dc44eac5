//! C ABI over the coverscope HMM, feature and classifier routines.
//!
//! Every fallible function returns a [`CsStatus`]; on failure the message is
//! kept per thread and read with [`cs_last_error`]. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coverscope::classify::{FeatureMatrix, TrainedModel};
use coverscope::error::Error;
use coverscope::fit::FitResult;
use coverscope::hmm::{self, DefenderSeries, EmissionSpec, TransitionSpec, N_STATES};
use coverscope::tracking::PlayKey;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    Io = 4,
    Numerical = 5,
    Schema = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::InvalidParameter(_) | Error::Dimension(_) | Error::Empty(_) => CsStatus::InvalidArgument,
        Error::Parse { .. }
        | Error::Range { .. }
        | Error::MissingField(_)
        | Error::InvalidData(_)
        | Error::SingleClass(_)
        | Error::MissingPlayEffect(_)
        | Error::Json(_)
        | Error::Csv(_) => CsStatus::InvalidData,
        Error::Io(_) => CsStatus::Io,
        Error::Schema { .. } => CsStatus::Schema,
        Error::NotPositiveDefinite { .. }
        | Error::InnerNonConvergence { .. }
        | Error::DegenerateVariance
        | Error::RankDeficient => CsStatus::Numerical,
    }
}

struct Fail(CsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CsStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(CsStatus::InvalidArgument, msg.into())
}

/// Run `f`, record any error or panic, and return the status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CsStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string argument is not valid UTF-8"))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cs_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parameters of a single-series HMM evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsHmmParams {
    /// Intercept including any random effects for the series.
    pub beta0: f64,
    pub beta1: f64,
    /// Emission standard deviation.
    pub sigma: f64,
    /// Frames by which the defender trails the receivers.
    pub lag: usize,
    /// Sharpness of the initial state distribution.
    pub init_alpha: f64,
}

/// `offense_y` holds five receiver trajectories, receiver-major
/// (`offense_y[j * n_frames + t]`).
unsafe fn series(y: *const f64, offense_y: *const f64, n_frames: usize) -> Result<DefenderSeries, Fail> {
    if n_frames == 0 {
        return Err(invalid("series has no frames"));
    }
    let y = slice(y, n_frames, "y")?.to_vec();
    let off = slice(offense_y, N_STATES * n_frames, "offense_y")?;
    Ok(DefenderSeries {
        play_key: PlayKey::new("ffi", "0"),
        defender_index: 1,
        role: String::new(),
        defense: String::new(),
        y,
        offense_y: std::array::from_fn(|j| off[j * n_frames..(j + 1) * n_frames].to_vec()),
    })
}

fn specs(p: &CsHmmParams) -> (EmissionSpec, TransitionSpec) {
    let mut t = TransitionSpec::fixed(p.beta0, p.beta1);
    t.init_alpha = p.init_alpha;
    (EmissionSpec::new(p.sigma, p.lag), t)
}

/// Log-likelihood of one defender series.
///
/// # Safety
/// `y` must hold `n_frames` values, `offense_y` `5 * n_frames`.
#[no_mangle]
pub unsafe extern "C" fn cs_forward_loglik(
    y: *const f64,
    offense_y: *const f64,
    n_frames: usize,
    params: *const CsHmmParams,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = series(y, offense_y, n_frames)?;
        let (e, t) = specs(p);
        *out = hmm::forward_loglik(&s, &e, &t)?;
        Ok(())
    })
}

/// Smoothed state probabilities, frame-major (`out[t * 5 + j]`).
///
/// # Safety
/// As [`cs_forward_loglik`]; `out` must hold `5 * n_frames` values.
#[no_mangle]
pub unsafe extern "C" fn cs_local_decode(
    y: *const f64,
    offense_y: *const f64,
    n_frames: usize,
    params: *const CsHmmParams,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let s = series(y, offense_y, n_frames)?;
        let out = slice_mut(out, N_STATES * n_frames, "out")?;
        let (e, t) = specs(p);
        let post = hmm::local_decode(&s, &e, &t)?;
        for (k, row) in post.probs.iter().enumerate() {
            out[k * N_STATES..(k + 1) * N_STATES].copy_from_slice(row);
        }
        Ok(())
    })
}

/// `(total switches, defenders with at least one switch)` over
/// `n_sequences` state sequences of `n_frames` each, sequence-major.
///
/// # Safety
/// `states` must hold `n_sequences * n_frames` values.
#[no_mangle]
pub unsafe extern "C" fn cs_switch_stats(
    states: *const u32,
    n_sequences: usize,
    n_frames: usize,
    total: *mut usize,
    n_switching: *mut usize,
) -> CsStatus {
    guard(|| {
        let seqs = sequences(states, n_sequences, n_frames)?;
        let (a, b) = coverscope::features::switch_stats(&seqs);
        *total.as_mut().ok_or_else(|| null("total"))? = a;
        *n_switching.as_mut().ok_or_else(|| null("n_switching"))? = b;
        Ok(())
    })
}

/// Mean over sequences of the entropy of each sequence's state frequencies.
///
/// # Safety
/// As [`cs_switch_stats`].
#[no_mangle]
pub unsafe extern "C" fn cs_mean_entropy(states: *const u32, n_sequences: usize, n_frames: usize, out: *mut f64) -> CsStatus {
    guard(|| {
        let seqs = sequences(states, n_sequences, n_frames)?;
        *out.as_mut().ok_or_else(|| null("out"))? = coverscope::features::mean_entropy(&seqs);
        Ok(())
    })
}

unsafe fn sequences(states: *const u32, n_sequences: usize, n_frames: usize) -> Result<Vec<Vec<usize>>, Fail> {
    if n_sequences == 0 {
        return Err(invalid("no sequences"));
    }
    let v = slice(states, n_sequences * n_frames, "states")?;
    if let Some(s) = v.iter().find(|&&s| s as usize >= N_STATES) {
        return Err(invalid(format!("state {s} outside 0..{N_STATES}")));
    }
    Ok(v.chunks(n_frames.max(1)).take(n_sequences).map(|c| c.iter().map(|&s| s as usize).collect()).collect())
}

unsafe fn metric_inputs<'a>(y: *const f64, p: *const f64, n: usize) -> Result<(&'a [f64], &'a [f64]), Fail> {
    Ok((slice(y, n, "y")?, slice(p, n, "p")?))
}

/// Rank-based area under the ROC curve.
///
/// # Safety
/// `y` and `p` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cs_auc(y: *const f64, p: *const f64, n: usize, out: *mut f64) -> CsStatus {
    guard(|| {
        let (y, p) = metric_inputs(y, p, n)?;
        *out.as_mut().ok_or_else(|| null("out"))? = coverscope::eval::auc(y, p)?;
        Ok(())
    })
}

/// Mean Bernoulli log loss on clipped probabilities.
///
/// # Safety
/// `y` and `p` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cs_log_loss(y: *const f64, p: *const f64, n: usize, out: *mut f64) -> CsStatus {
    guard(|| {
        let (y, p) = metric_inputs(y, p, n)?;
        *out.as_mut().ok_or_else(|| null("out"))? = coverscope::eval::log_loss(y, p)?;
        Ok(())
    })
}

/// Fitted HMM hyperparameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsTheta {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
}

/// Opaque fitted HMM.
pub struct CsFit {
    inner: FitResult,
}

/// Load a fit written by `coverscope fit-hmm`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_fit_load(path: *const c_char, out: *mut *mut CsFit) -> CsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = FitResult::load(c_str(path)?)?;
        *out = Box::into_raw(Box::new(CsFit { inner }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`cs_fit_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_fit_free(fit: *mut CsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_fit_theta(fit: *const CsFit, out: *mut CsTheta) -> CsStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let t = f.inner.theta_hat;
        *out.as_mut().ok_or_else(|| null("out"))? = CsTheta {
            beta0: t.beta0,
            beta1: t.beta1,
            sigma: t.sigma,
            sigma_u: t.sigma_u,
            sigma_v: t.sigma_v,
            sigma_w: t.sigma_w,
        };
        Ok(())
    })
}

/// Lag the fit was estimated at.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_fit_lag(fit: *const CsFit, out: *mut usize) -> CsStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.inner.config.lag;
        Ok(())
    })
}

/// Predicted play effect for `gameId/playId`.
///
/// # Safety
/// `fit` must be a live handle and `play_key` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_fit_play_effect(fit: *const CsFit, play_key: *const c_char, out: *mut f64) -> CsStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let k = c_str(play_key)?;
        let w = f.inner.w_hat.get(k).ok_or_else(|| Fail::from(Error::MissingPlayEffect(k.to_string())))?;
        *out.as_mut().ok_or_else(|| null("out"))? = *w;
        Ok(())
    })
}

/// Opaque trained classifier.
pub struct CsModel {
    inner: TrainedModel,
    names: Vec<CString>,
}

/// Load a model written by `coverscope train`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_model_load(path: *const c_char, out: *mut *mut CsModel) -> CsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = TrainedModel::load(c_str(path)?)?;
        let names = inner
            .feature_names
            .iter()
            .map(|n| CString::new(n.as_str()).map_err(|_| invalid("feature name holds NUL")))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(CsModel { inner, names }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cs_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input columns, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cs_model_n_features(model: *const CsModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of column `i`, owned by the model; null when out of range.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cs_model_feature_name(model: *const CsModel, i: usize) -> *const c_char {
    model.as_ref().and_then(|m| m.names.get(i)).map_or(ptr::null(), |c| c.as_ptr())
}

/// Man-coverage probabilities for `n_rows` row-major rows whose columns
/// follow the model's feature order.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` values and `out` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn cs_model_predict(
    model: *const CsModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if n_cols != m.names.len() {
            return Err(invalid(format!("model takes {} columns, got {n_cols}", m.names.len())));
        }
        let data = slice(x, n_rows * n_cols, "x")?;
        let out = slice_mut(out, n_rows, "out")?;
        let rows: Vec<Vec<f64>> = data.chunks(n_cols.max(1)).take(n_rows).map(<[f64]>::to_vec).collect();
        let xm = FeatureMatrix::new(m.inner.feature_names.clone(), &rows)?;
        out.copy_from_slice(&m.inner.predict_proba(&xm)?);
        Ok(())
    })
}
