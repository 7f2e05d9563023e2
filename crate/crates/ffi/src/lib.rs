//! C interface to `grnlasso`.
//!
//! Every function returns a [`GrnStatus`]. On failure the message is kept
//! per thread and can be read with [`grn_last_error`]. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use grnlasso::evaluation::{self, Method};
use grnlasso::model_selection::CvConfig;
use grnlasso::nalgebra::DMatrix;
use grnlasso::network::{self, InferenceConfig, PermutationConfig, WeightedNetwork};
use grnlasso::synthetic::GoldStandard;
use grnlasso::{Error, ExpressionMatrix, Family, SolverOptions, solvers};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Singular = 5,
    GeneMismatch = 6,
    BudgetExceeded = 7,
    Panic = 8,
}

/// Expression matrix, samples in rows and genes in columns.
pub struct GrnMatrix {
    inner: ExpressionMatrix,
}

/// Weighted network; entry `(i, j)` is the coefficient of gene `i` in the
/// regression of gene `j`.
pub struct GrnNetwork {
    inner: WeightedNetwork,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GrnMetrics {
    pub true_edges: u64,
    pub pred_edges: u64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    /// Zero when MCC is undefined; `mcc` is then NaN.
    pub mcc_defined: bool,
    pub mcc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub acc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> GrnStatus {
    match e {
        Error::Io { .. } => GrnStatus::Io,
        Error::Parse { .. } | Error::DuplicateGene(_) => GrnStatus::Parse,
        Error::Singular => GrnStatus::Singular,
        Error::GeneMismatch(_) => GrnStatus::GeneMismatch,
        Error::BudgetExceeded { .. } => GrnStatus::BudgetExceeded,
        Error::IndexOutOfRange { .. } | Error::InvalidInput(_) => GrnStatus::InvalidArgument,
    }
}

struct Fail(GrnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GrnStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GrnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GrnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GrnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GrnStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn grn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a matrix from `n * p` row-major values; genes are named g1..gp.
///
/// # Safety
/// `values` must point to `n * p` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grn_matrix_from_values(
    values: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut GrnMatrix,
) -> GrnStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| Fail(GrnStatus::InvalidArgument, "n * p overflows".into()))?;
        let slice = std::slice::from_raw_parts(values, len);
        let inner = ExpressionMatrix::from_values(DMatrix::from_row_slice(n, p, slice))?;
        *out = Box::into_raw(Box::new(GrnMatrix { inner }));
        Ok(())
    })
}

/// Reads a TSV expression file; `transpose` means genes are in rows.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grn_matrix_load(path: *const c_char, transpose: bool, out: *mut *mut GrnMatrix) -> GrnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ExpressionMatrix::load(path, transpose)?;
        *out = Box::into_raw(Box::new(GrnMatrix { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn grn_matrix_free(m: *mut GrnMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `n` and `p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grn_matrix_dims(m: *const GrnMatrix, n: *mut usize, p: *mut usize) -> GrnStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if n.is_null() || p.is_null() {
            return Err(null("output"));
        }
        *n = m.inner.n_samples();
        *p = m.inner.n_genes();
        Ok(())
    })
}

/// Writes a column-standardized copy (mean 0, variance 1) to `out`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn grn_matrix_standardize(m: *const GrnMatrix, out: *mut *mut GrnMatrix) -> GrnStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(GrnMatrix {
            inner: m.inner.standardize(),
        }));
        Ok(())
    })
}

/// Lasso regression of gene `response` on the other genes of the
/// standardized matrix at penalty `lambda`. Writes `p - 1` coefficients in
/// gene order with the response skipped.
///
/// # Safety
/// `m` must be a live handle and `coefficients` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn grn_solve_lasso(
    m: *const GrnMatrix,
    response: usize,
    lambda: f64,
    coefficients: *mut f64,
    len: usize,
) -> GrnStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if coefficients.is_null() {
            return Err(null("coefficients"));
        }
        let view = m.inner.standardize().response_view(response)?;
        if len != view.n_predictors() {
            return Err(Fail(
                GrnStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", view.n_predictors()),
            ));
        }
        let fit = solvers::solve_lasso(&view, lambda, &SolverOptions::default())?;
        std::slice::from_raw_parts_mut(coefficients, len).copy_from_slice(fit.coefficients.as_slice());
        Ok(())
    })
}

/// Node-wise inference with cross-validated penalties. `method` is one of
/// lasso, ridge, enet, fused, group, sgroup, paired, hier, labnet,
/// ridgeperm, enetperm. `seed` drives fold assignment and permutations.
///
/// # Safety
/// `m` must be a live handle, `method` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn grn_infer_network(
    m: *const GrnMatrix,
    method: *const c_char,
    seed: u64,
    out: *mut *mut GrnNetwork,
) -> GrnStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        let method: Method = str_arg(method, "method")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cv = CvConfig {
            seed,
            ..CvConfig::default()
        };
        let inner = if method.family == Family::PairedGroup {
            network::infer_paired(&m.inner, None, &cv, &SolverOptions::default())?.network
        } else {
            let cfg = InferenceConfig {
                cv,
                ..InferenceConfig::new(method.family)
            };
            if method.permutation {
                let pcfg = PermutationConfig {
                    seed,
                    ..PermutationConfig::default()
                };
                network::permutation_stability(&m.inner, &cfg, &pcfg)?.stable
            } else {
                network::infer_network(&m.inner, &cfg)?.network
            }
        };
        *out = Box::into_raw(Box::new(GrnNetwork { inner }));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn grn_network_free(net: *mut GrnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn grn_network_size(net: *const GrnNetwork, p: *mut usize) -> GrnStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        if p.is_null() {
            return Err(null("p"));
        }
        *p = net.inner.n_genes();
        Ok(())
    })
}

/// Copies the `p * p` weights in row-major order.
///
/// # Safety
/// `net` must be a live handle and `weights` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn grn_network_weights(net: *const GrnNetwork, weights: *mut f64, len: usize) -> GrnStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        if weights.is_null() {
            return Err(null("weights"));
        }
        let p = net.inner.n_genes();
        if len != p * p {
            return Err(Fail(
                GrnStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", p * p),
            ));
        }
        let out = std::slice::from_raw_parts_mut(weights, len);
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = net.inner.weights[(i, j)];
            }
        }
        Ok(())
    })
}

fn fill_metrics(r: &evaluation::MetricsReport) -> GrnMetrics {
    GrnMetrics {
        true_edges: r.true_edges,
        pred_edges: r.pred_edges,
        tp: r.counts.tp,
        fp: r.counts.fp,
        tn: r.counts.tn,
        fn_: r.counts.fn_,
        mcc_defined: r.mcc.is_some(),
        mcc: r.mcc.unwrap_or(f64::NAN),
        tpr: r.tpr,
        fpr: r.fpr,
        acc: r.acc,
    }
}

/// MCC, TPR, FPR and accuracy from confusion counts.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grn_compute_metrics(tp: u64, fp: u64, tn: u64, fn_: u64, out: *mut GrnMetrics) -> GrnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let counts = evaluation::ConfusionCounts { tp, fp, tn, fn_ };
        *out = fill_metrics(&evaluation::compute_metrics(counts, 0.0));
        Ok(())
    })
}

/// Thresholds `net` at edge quantile `quantile` and scores it against the
/// gold standard in `gold_path` (`source<TAB>target<TAB>0|1` lines).
///
/// # Safety
/// `net` must be a live handle, `gold_path` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn grn_evaluate(
    net: *const GrnNetwork,
    quantile: f64,
    gold_path: *const c_char,
    out: *mut GrnMetrics,
) -> GrnStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        let gold = GoldStandard::load(str_arg(gold_path, "gold_path")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pred = network::quantile_filter(&net.inner, quantile)?;
        let counts = evaluation::confusion(&pred, &gold)?;
        *out = fill_metrics(&evaluation::compute_metrics(counts, 0.0));
        Ok(())
    })
}
