//! C ABI for `censor-lab`.
//!
//! Every fallible function returns a [`CensorLabStatus`] and writes results
//! through out-pointers. On failure the message is available from
//! [`censor_lab_last_error`] on the same thread. Handles are created by
//! `*_new` functions and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use censor_lab::censor::{solve_censor, CensorProblem, ObservationScheme};
use censor_lab::oracle::{mc_trigger_probability, McConfig};
use censor_lab::process::{GbmParams, PerformanceIndex};
use censor_lab::profits::{cobb_douglas_profit, CobbDouglasParams};
use censor_lab::rules::{DecisionRule, Signature};
use censor_lab::scenario::run_scenario;
use censor_lab::sentiment::{
    prob_index_at_least, running_max_tail, running_min_survival, sentiment_value, SentimentInputs,
};
use censor_lab::{Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorLabStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Numeric = 3,
    Existence = 4,
    Validation = 5,
    PropertyViolation = 6,
    Io = 7,
    InvalidUtf8 = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorLabIndex {
    RunningMax = 0,
    RunningMin = 1,
    RunningAverage = 2,
}

/// Tracker and market-rule state.
pub struct CensorLabMarket {
    inputs: SentimentInputs,
}

/// Censoring problem.
pub struct CensorLabProblem {
    problem: CensorProblem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CensorLabSentiment {
    pub v_star: f64,
    pub prob_good: f64,
    pub prob_bad: f64,
    pub e_star: f64,
    pub discount: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CensorLabEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CensorLabSolution {
    pub l_vt: f64,
    pub residual: f64,
    pub iterations: u64,
    pub n_term: f64,
    pub s1_term: f64,
    pub s2_term: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CensorLabStatus {
    match err.kind() {
        ErrorKind::Domain => CensorLabStatus::Domain,
        ErrorKind::Numeric => CensorLabStatus::Numeric,
        ErrorKind::Existence => CensorLabStatus::Existence,
        ErrorKind::Validation => CensorLabStatus::Validation,
        ErrorKind::PropertyViolation => CensorLabStatus::PropertyViolation,
        ErrorKind::Io => CensorLabStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CensorLabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CensorLabStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            CensorLabStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(name))) => {
            set_last_error(format!("{name} is not valid UTF-8"));
            CensorLabStatus::InvalidUtf8
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CensorLabStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn borrow<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn utf8<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn signature(sign: c_int) -> Result<Signature, Failure> {
    let invalid = |reason: String| {
        Failure::Lib(Error::Validation {
            key: "signature".into(),
            reason,
        })
    };
    let narrow =
        i8::try_from(sign).map_err(|_| invalid(format!("must be +1 or -1, got {sign}")))?;
    Signature::try_from(narrow).map_err(invalid)
}

fn index(i: CensorLabIndex) -> PerformanceIndex {
    match i {
        CensorLabIndex::RunningMax => PerformanceIndex::RunningMax,
        CensorLabIndex::RunningMin => PerformanceIndex::RunningMin,
        CensorLabIndex::RunningAverage => PerformanceIndex::RunningAverage,
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn censor_lab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn censor_lab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `Q(max_{[0,h]} (mu w + sigma W_w) >= a)`; NaN on invalid input.
#[no_mangle]
pub extern "C" fn censor_lab_running_max_tail(mu: f64, sigma: f64, a: f64, h: f64) -> f64 {
    if !(sigma > 0.0 && h >= 0.0) {
        return f64::NAN;
    }
    running_max_tail(mu, sigma, a, h)
}

/// `Q(min_{[0,h]} (mu w + sigma W_w) >= a)`; NaN on invalid input.
#[no_mangle]
pub extern "C" fn censor_lab_running_min_survival(mu: f64, sigma: f64, a: f64, h: f64) -> f64 {
    if !(sigma > 0.0 && h >= 0.0) {
        return f64::NAN;
    }
    running_min_survival(mu, sigma, a, h)
}

/// Market state; `signature` is +1 (good news) or -1 (bad news), `mu` the
/// log drift of the tracker.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn censor_lab_market_new(
    s_star_t: f64,
    vt: f64,
    vc: f64,
    signature_sign: c_int,
    markup: f64,
    r: f64,
    t: f64,
    t1: f64,
    mu: f64,
    sigma: f64,
    performance_index: CensorLabIndex,
    out_market: *mut *mut CensorLabMarket,
) -> CensorLabStatus {
    guard(|| {
        let slot = out(out_market, "out_market")?;
        *slot = ptr::null_mut();
        let inputs = SentimentInputs {
            s_star_t,
            vt,
            vc,
            market_rule: DecisionRule::new(signature(signature_sign)?, markup)?,
            r,
            t,
            t1,
            market_params: GbmParams::new(mu, sigma, s_star_t, t)?,
            index: index(performance_index),
        };
        inputs.validate()?;
        *slot = Box::into_raw(Box::new(CensorLabMarket { inputs }));
        Ok(())
    })
}

/// # Safety
/// `market` must come from [`censor_lab_market_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_market_free(market: *mut CensorLabMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Closed-form probability that the index reaches the trigger level.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_trigger_probability(
    market: *const CensorLabMarket,
    out_p: *mut f64,
) -> CensorLabStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        *out(out_p, "out_p")? = prob_index_at_least(&m.inputs)?;
        Ok(())
    })
}

/// Sentiment value of a silent firm.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_sentiment_value(
    market: *const CensorLabMarket,
    out_value: *mut CensorLabSentiment,
) -> CensorLabStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        let v = sentiment_value(&m.inputs)?;
        *out(out_value, "out_value")? = CensorLabSentiment {
            v_star: v.v_star,
            prob_good: v.prob_good,
            prob_bad: v.prob_bad,
            e_star: v.e_star,
            discount: v.discount,
        };
        Ok(())
    })
}

/// Monte Carlo estimate of the trigger probability.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_mc_trigger_probability(
    market: *const CensorLabMarket,
    n_paths: u64,
    steps_per_unit: u64,
    seed: u64,
    batches: u64,
    out_estimate: *mut CensorLabEstimate,
) -> CensorLabStatus {
    guard(|| {
        let m = borrow(market, "market")?;
        let cfg = McConfig::new(
            n_paths as usize,
            steps_per_unit as usize,
            seed,
            batches as usize,
        )?;
        let e = mc_trigger_probability(&m.inputs, &cfg)?;
        *out(out_estimate, "out_estimate")? = CensorLabEstimate {
            mean: e.mean,
            std_error: e.std_error,
            n: e.n as u64,
        };
        Ok(())
    })
}

/// Censoring problem on `[window_start, window_end]` for a unit-start firm
/// with log drift `mu`. `intervals` holds `n_intervals` (start, end) pairs.
///
/// # Safety
/// `intervals` must hold `2 * n_intervals` values and `times` `n_times`
/// values; `out_problem` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn censor_lab_problem_new(
    window_start: f64,
    window_end: f64,
    intervals: *const f64,
    n_intervals: usize,
    times: *const f64,
    n_times: usize,
    signature_sign: c_int,
    markup: f64,
    mu: f64,
    sigma: f64,
    vt_label: f64,
    out_problem: *mut *mut CensorLabProblem,
) -> CensorLabStatus {
    guard(|| {
        let slot = out(out_problem, "out_problem")?;
        *slot = ptr::null_mut();
        let flat = slice(intervals, 2 * n_intervals, "intervals")?;
        let pairs = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let discrete = slice(times, n_times, "times")?.to_vec();
        let problem = CensorProblem {
            scheme: ObservationScheme::new((window_start, window_end), pairs, discrete)?,
            rule: DecisionRule::new(signature(signature_sign)?, markup)?,
            firm_params: GbmParams::new(mu, sigma, 1.0, window_start)?,
            vt_label,
        };
        problem.validate()?;
        *slot = Box::into_raw(Box::new(CensorLabProblem { problem }));
        Ok(())
    })
}

/// Censoring problem from the JSON layout used by scenario files.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_problem` must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_problem_from_json(
    json: *const c_char,
    out_problem: *mut *mut CensorLabProblem,
) -> CensorLabStatus {
    guard(|| {
        let slot = out(out_problem, "out_problem")?;
        *slot = ptr::null_mut();
        let problem: CensorProblem =
            serde_json::from_str(utf8(json, "json")?).map_err(Error::from)?;
        problem.validate()?;
        *slot = Box::into_raw(Box::new(CensorLabProblem { problem }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from a `censor_lab_problem_*` constructor and not be
/// freed twice.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_problem_free(problem: *mut CensorLabProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solve for the optimal censor. Existence failures name the failed
/// conditions in the last-error message.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_solve_censor(
    problem: *const CensorLabProblem,
    tol: f64,
    out_solution: *mut CensorLabSolution,
) -> CensorLabStatus {
    guard(|| {
        let p = borrow(problem, "problem")?;
        let s = solve_censor(&p.problem, tol)?;
        *out(out_solution, "out_solution")? = CensorLabSolution {
            l_vt: s.l_vt,
            residual: s.residual,
            iterations: s.iterations as u64,
            n_term: s.rhs_components.n_term,
            s1_term: s.rhs_components.s1_term,
            s2_term: s.rhs_components.s2_term,
        };
        Ok(())
    })
}

/// Cobb-Douglas profit for technology `technology · x1^a x2^b`.
///
/// # Safety
/// `out_profit` must be valid.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_cobb_douglas_profit(
    a: f64,
    b: f64,
    p: f64,
    w1: f64,
    w2: f64,
    technology: f64,
    out_profit: *mut f64,
) -> CensorLabStatus {
    guard(|| {
        let params = CobbDouglasParams::new(a, b, p, w1, w2)?.with_technology(technology)?;
        *out(out_profit, "out_profit")? = cobb_douglas_profit(&params)?;
        Ok(())
    })
}

/// Run a scenario file and return the CLI exit code (0, 2 or 3). The
/// diagnostic of a failed run is the last-error message.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn censor_lab_run_scenario(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> c_int {
    let mut code = 2;
    let status = guard(|| {
        let config = utf8(config_path, "config_path")?;
        let dir = utf8(out_dir, "out_dir")?;
        let run = run_scenario(Path::new(config), Path::new(dir));
        if let Some(d) = &run.diagnostic {
            set_last_error(d.to_json());
        }
        code = run.exit_code;
        Ok(())
    });
    match status {
        CensorLabStatus::Ok => code,
        CensorLabStatus::Panic => 3,
        _ => 2,
    }
}
