//! C interface to the regression toolkit.
//!
//! Models are opaque `HrModel` handles created by `hr_model_load` or
//! `hr_boost_fit` and released with `hr_model_free`. Every function returns
//! an `HrStatus`; on failure `hr_last_error` describes the cause. Matrices
//! are dense, row-major `double` arrays. No function lets a Rust panic cross
//! the boundary: panics become `HR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use housereg::bench::{self, ArtifactHeader, ModelArtifact};
use housereg::boost::{self, BoostParams};
use housereg::data::TargetTransform;
use housereg::metrics;
use housereg::model::{FittedModel, Model, ModelKind};
use housereg::{Error, Matrix};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Corrupt = 4,
    Version = 5,
    Checksum = 6,
    DimensionMismatch = 7,
    Numeric = 8,
    Unsupported = 9,
    Panic = 10,
}

/// Opaque model handle.
pub struct HrModel {
    artifact: ModelArtifact,
}

/// Hyperparameters for `hr_boost_fit`. Fill with `hr_boost_params_default`
/// before changing individual fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrBoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl From<HrBoostParams> for BoostParams {
    fn from(p: HrBoostParams) -> Self {
        BoostParams {
            n_rounds: p.n_rounds,
            learning_rate: p.learning_rate,
            lambda: p.lambda,
            gamma: p.gamma,
            max_depth: p.max_depth,
            min_child_weight: p.min_child_weight,
            subsample: p.subsample,
            base_score: None,
            seed: p.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HrMetrics {
    pub r2: f64,
    pub adj_r2: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(HrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => HrStatus::Io,
            Error::Corrupt(_) => HrStatus::Corrupt,
            Error::ArtifactVersion { .. } => HrStatus::Version,
            Error::Checksum => HrStatus::Checksum,
            Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => HrStatus::DimensionMismatch,
            Error::NonFinite(_) | Error::Divergence { .. } | Error::UndefinedMetric(_) => HrStatus::Numeric,
            _ => HrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: HrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, recording any error or panic for `hr_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            HrStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(HrStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(HrStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn model_ref<'a>(m: *const HrModel) -> Result<&'a HrModel, Failure> {
    m.as_ref().ok_or_else(|| fail(HrStatus::NullPointer, "model handle is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(HrStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HrStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn element_count(n_rows: usize, n_cols: usize) -> Result<usize, Failure> {
    n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| fail(HrStatus::InvalidArgument, "matrix size overflows"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a model artifact written by the harness or `hr_model_save`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_model_load(path: *const c_char, out: *mut *mut HrModel) -> HrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(HrStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let artifact = bench::load_model(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(HrModel { artifact }));
        Ok(())
    })
}

/// Writes the model as an artifact file.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hr_model_save(model: *const HrModel, path: *const c_char) -> HrStatus {
    guard(|| {
        let m = model_ref(model)?;
        bench::save_model(&m.artifact, &path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hr_model_free(model: *mut HrModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Number of input features the model expects.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_model_n_features(model: *const HrModel, out: *mut usize) -> HrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| fail(HrStatus::NullPointer, "out is null"))?;
        *out = m.artifact.model.n_features();
        Ok(())
    })
}

/// Predicts `n_rows` encoded rows into `out` (length `n_rows`), in the
/// model's target space.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles and `out` `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn hr_model_predict_matrix(
    model: *const HrModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> HrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let xs = slice(x, element_count(n_rows, n_cols)?, "x")?;
        let out = slice_mut(out, n_rows, "out")?;
        let matrix = Matrix::new(n_rows, n_cols, xs.to_vec())?;
        let pred = m.artifact.predict(&matrix)?;
        out.copy_from_slice(&pred);
        Ok(())
    })
}

/// Writes the library defaults into `params`.
///
/// # Safety
/// `params` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_boost_params_default(params: *mut HrBoostParams) -> HrStatus {
    guard(|| {
        let p = params.as_mut().ok_or_else(|| fail(HrStatus::NullPointer, "params is null"))?;
        let d = BoostParams::default();
        *p = HrBoostParams {
            n_rounds: d.n_rounds,
            learning_rate: d.learning_rate,
            lambda: d.lambda,
            gamma: d.gamma,
            max_depth: d.max_depth,
            min_child_weight: d.min_child_weight,
            subsample: d.subsample,
            seed: d.seed,
        };
        Ok(())
    })
}

/// Fits a boosted model on an encoded matrix. `params` may be null for the
/// defaults.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles, `y` `n_rows` doubles, and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_boost_fit(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    params: *const HrBoostParams,
    out: *mut *mut HrModel,
) -> HrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(HrStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let xs = slice(x, element_count(n_rows, n_cols)?, "x")?;
        let ys = slice(y, n_rows, "y")?;
        let p: BoostParams = match params.as_ref() {
            Some(p) => (*p).into(),
            None => BoostParams::default(),
        };
        let matrix = Matrix::new(n_rows, n_cols, xs.to_vec())?;
        let fitted = boost::fit_boost(&matrix, ys, &p)?;
        let header = ArtifactHeader {
            kind: ModelKind::Boost,
            seed: p.seed,
            timestamp: 0,
            feature_names: (0..n_cols).map(|j| format!("x{j}")).collect(),
            setup: format!(
                "n_rounds = {}, learning_rate = {}, max_depth = {}, min_child_weight = {}, gamma = {}, lambda = {}, subsample = {}",
                p.n_rounds, p.learning_rate, p.max_depth, p.min_child_weight, p.gamma, p.lambda, p.subsample
            ),
            metrics: None,
        };
        let fitted = FittedModel {
            model: Model::Boost(fitted),
            scaler: None,
        };
        let artifact = ModelArtifact::new(header, fitted, None, TargetTransform::Identity);
        *out = Box::into_raw(Box::new(HrModel { artifact }));
        Ok(())
    })
}

/// Normalized gain importance per feature into `out` (length `len`, which
/// must equal the model's feature count). Boost models only.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hr_model_feature_importance(model: *const HrModel, out: *mut f64, len: usize) -> HrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let Model::Boost(b) = &m.artifact.model else {
            return Err(fail(
                HrStatus::Unsupported,
                format!("feature importance needs a boost model, got {}", m.artifact.model.kind()),
            ));
        };
        if len != b.n_features() {
            return Err(Error::DimensionMismatch {
                expected: b.n_features(),
                found: len,
            }
            .into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(&b.feature_importance());
        Ok(())
    })
}

/// All five metrics of `yhat` against `y`; `k` is the regressor count for
/// adjusted R².
///
/// # Safety
/// `y` and `yhat` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_metrics(y: *const f64, yhat: *const f64, n: usize, k: usize, out: *mut HrMetrics) -> HrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| fail(HrStatus::NullPointer, "out is null"))?;
        let r = metrics::full_report(slice(y, n, "y")?, slice(yhat, n, "yhat")?, k)?;
        *out = HrMetrics {
            r2: r.r2,
            adj_r2: r.adj_r2,
            mse: r.mse,
            rmse: r.rmse,
            mae: r.mae,
        };
        Ok(())
    })
}
