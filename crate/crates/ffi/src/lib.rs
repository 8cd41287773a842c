//! C ABI over the nphkit library.
//!
//! Every function returns an [`NphStatus`]; results are written through out
//! pointers. Datasets and fitted AFT models are opaque handles owned by the
//! caller and released with the matching `_free` function. After a non-OK
//! status, `nph_last_error_message` describes the failure on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nphkit::aft::{aft_fit, AftFamily, AftFit};
use nphkit::cox::cox_fit;
use nphkit::logrank::{maxcombo_with, weighted_logrank, ComboCorrelation, FhWeight, MaxComboOptions};
use nphkit::rmst::rmst_difference_test;
use nphkit::sim::{builtin_scenario, simulate_trial};
use nphkit::survival::{Arm, Record, SurvivalDataset};
use nphkit::NphError;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NphStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    EmptyDataset = 3,
    SingleArm = 4,
    Degenerate = 5,
    NonConvergence = 6,
    MalformedCsv = 7,
    UnknownScenario = 8,
    Io = 9,
    Panic = 10,
}

impl From<&NphError> for NphStatus {
    fn from(e: &NphError) -> Self {
        match e {
            NphError::InvalidInput(_) => NphStatus::InvalidInput,
            NphError::EmptyDataset => NphStatus::EmptyDataset,
            NphError::SingleArm { .. } => NphStatus::SingleArm,
            NphError::Degenerate(_) => NphStatus::Degenerate,
            NphError::NonConvergence { .. } => NphStatus::NonConvergence,
            NphError::Csv { .. } => NphStatus::MalformedCsv,
            NphError::UnknownScenario(_) => NphStatus::UnknownScenario,
            NphError::Io(_) => NphStatus::Io,
        }
    }
}

/// Opaque right-censored two-arm dataset.
pub struct NphDataset(SurvivalDataset);

/// Opaque fitted generalized gamma or generalized F model.
pub struct NphAftFit(AftFit);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NphAftFamily {
    GeneralizedGamma = 0,
    GeneralizedF = 1,
}

/// A test statistic with its two-sided p-value.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NphTestResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NphRmstResult {
    pub t_star: f64,
    pub rmst0: f64,
    pub rmst1: f64,
    pub delta: f64,
    pub se_delta: f64,
    pub z: f64,
    pub p_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NphCoxResult {
    pub beta: f64,
    pub se: f64,
    pub hazard_ratio: f64,
    pub p_value: f64,
    pub converged: c_int,
}

/// Summary of an AFT fit. Fields that are unavailable are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NphAftSummary {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    /// τ for the generalized gamma, q for the generalized F.
    pub shape1: f64,
    /// p for the generalized F, NaN for the generalized gamma.
    pub shape2: f64,
    pub se_beta1: f64,
    pub acceleration_factor: f64,
    pub wald_statistic: f64,
    pub wald_p: f64,
    pub loglik: f64,
    pub converged: c_int,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: NphStatus, msg: impl Into<String>) -> NphStatus {
    set_error(msg.into());
    status
}

fn guard<F: FnOnce() -> Result<(), NphStatus>>(f: F) -> NphStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NphStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(NphStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: NphError) -> NphStatus {
    fail(NphStatus::from(&e), e.to_string())
}

unsafe fn dataset<'a>(ds: *const NphDataset) -> Result<&'a SurvivalDataset, NphStatus> {
    ds.as_ref().map(|d| &d.0).ok_or_else(|| fail(NphStatus::NullPointer, "null dataset handle"))
}

unsafe fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, NphStatus> {
    out.as_mut().ok_or_else(|| fail(NphStatus::NullPointer, "null output pointer"))
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, NphStatus> {
    if s.is_null() {
        return Err(fail(NphStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(NphStatus::InvalidInput, "string is not UTF-8"))
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn nph_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nph_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from `n` records. `events` and `arms` hold 0 or 1.
///
/// # Safety
/// The three arrays must each hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_dataset_new(
    times: *const f64,
    events: *const u8,
    arms: *const u8,
    n: usize,
    out: *mut *mut NphDataset,
) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        if n > 0 && (times.is_null() || events.is_null() || arms.is_null()) {
            return Err(fail(NphStatus::NullPointer, "null input array"));
        }
        let (t, e, a) = if n == 0 {
            (&[][..], &[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(times, n),
                std::slice::from_raw_parts(events, n),
                std::slice::from_raw_parts(arms, n),
            )
        };
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let arm = Arm::from_code(a[i])
                .ok_or_else(|| fail(NphStatus::InvalidInput, format!("record {i}: arm must be 0 or 1")))?;
            let event = match e[i] {
                0 => false,
                1 => true,
                _ => return Err(fail(NphStatus::InvalidInput, format!("record {i}: event must be 0 or 1"))),
            };
            records.push(Record::new(t[i], event, arm));
        }
        let ds = SurvivalDataset::new(records).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NphDataset(ds)));
        Ok(())
    })
}

/// Reads a `time,event,arm` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_dataset_read_csv(path: *const c_char, out: *mut *mut NphDataset) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let ds = SurvivalDataset::read_csv(c_str(path)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NphDataset(ds)));
        Ok(())
    })
}

/// Simulates one trial from a builtin scenario.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_simulate_trial(
    scenario: *const c_char,
    seed: u64,
    out: *mut *mut NphDataset,
) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let sc = builtin_scenario(c_str(scenario)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NphDataset(simulate_trial(&sc, seed))));
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nph_dataset_free(ds: *mut NphDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of records.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_dataset_len(ds: *const NphDataset, out: *mut usize) -> NphStatus {
    guard(|| {
        *out_ref(out)? = dataset(ds)?.len();
        Ok(())
    })
}

/// Fleming–Harrington G(rho, gamma) weighted log-rank test; (0, 0) is the log-rank test.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_weighted_logrank(
    ds: *const NphDataset,
    rho: f64,
    gamma: f64,
    out: *mut NphTestResult,
) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let w = FhWeight::new(rho, gamma).map_err(lib_err)?;
        let r = weighted_logrank(dataset(ds)?, w).map_err(lib_err)?;
        *out = NphTestResult { statistic: r.z, p_value: r.p_two_sided };
        Ok(())
    })
}

/// MaxCombo test over G(1,0), G(0,1), G(1,1). Nonzero `identity_correlation`
/// treats the components as independent.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_maxcombo(
    ds: *const NphDataset,
    identity_correlation: c_int,
    out: *mut NphTestResult,
) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let correlation =
            if identity_correlation != 0 { ComboCorrelation::Identity } else { ComboCorrelation::Estimated };
        let r = maxcombo_with(dataset(ds)?, MaxComboOptions { correlation, ..Default::default() }).map_err(lib_err)?;
        *out = NphTestResult { statistic: r.z_max, p_value: r.p_two_sided };
        Ok(())
    })
}

/// Difference in restricted mean survival time, treatment minus control.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_rmst_difference(ds: *const NphDataset, out: *mut NphRmstResult) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let r = rmst_difference_test(dataset(ds)?).map_err(lib_err)?;
        *out = NphRmstResult {
            t_star: r.t_star,
            rmst0: r.mu0,
            rmst1: r.mu1,
            delta: r.delta,
            se_delta: r.se_delta,
            z: r.z,
            p_value: r.p_two_sided,
        };
        Ok(())
    })
}

/// Cox proportional hazards fit with the treatment indicator as covariate.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_cox_fit(ds: *const NphDataset, out: *mut NphCoxResult) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let f = cox_fit(dataset(ds)?).map_err(lib_err)?;
        *out = NphCoxResult {
            beta: f.beta,
            se: f.se_beta(),
            hazard_ratio: f.hazard_ratio(),
            p_value: f.wald_p(),
            converged: f.converged as c_int,
        };
        Ok(())
    })
}

/// Fits a generalized gamma or generalized F AFT model.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_aft_fit(
    ds: *const NphDataset,
    family: NphAftFamily,
    out: *mut *mut NphAftFit,
) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let fam = match family {
            NphAftFamily::GeneralizedGamma => AftFamily::Gg,
            NphAftFamily::GeneralizedF => AftFamily::Gf,
        };
        let f = aft_fit(dataset(ds)?, fam).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NphAftFit(f)));
        Ok(())
    })
}

/// Releases a fit. NULL is ignored.
///
/// # Safety
/// `fit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nph_aft_fit_free(fit: *mut NphAftFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_aft_fit_summary(fit: *const NphAftFit, out: *mut NphAftSummary) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let f = &fit.as_ref().ok_or_else(|| fail(NphStatus::NullPointer, "null fit handle"))?.0;
        *out = NphAftSummary {
            beta0: f.beta0,
            beta1: f.beta1,
            sigma: f.sigma,
            shape1: f.shape.first().copied().unwrap_or(f64::NAN),
            shape2: f.shape.get(1).copied().unwrap_or(f64::NAN),
            se_beta1: f.se_beta1().unwrap_or(f64::NAN),
            acceleration_factor: f.acceleration_factor(),
            wald_statistic: f.wald.map_or(f64::NAN, |w| w.statistic),
            wald_p: f.wald.map_or(f64::NAN, |w| w.p),
            loglik: f.loglik,
            converged: f.converged as c_int,
        };
        Ok(())
    })
}

/// Fitted survival probability at `t` in arm 0 or 1.
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nph_aft_fit_survival(fit: *const NphAftFit, arm: u8, t: f64, out: *mut f64) -> NphStatus {
    guard(|| {
        let out = out_ref(out)?;
        let f = &fit.as_ref().ok_or_else(|| fail(NphStatus::NullPointer, "null fit handle"))?.0;
        let arm = Arm::from_code(arm).ok_or_else(|| fail(NphStatus::InvalidInput, "arm must be 0 or 1"))?;
        if t.is_nan() || t < 0.0 {
            return Err(fail(NphStatus::InvalidInput, "time must be non-negative"));
        }
        *out = f.distribution(arm).survival(t);
        Ok(())
    })
}
