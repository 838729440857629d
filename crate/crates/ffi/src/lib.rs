//! C interface to the relaysleep planner.
//!
//! Scenarios and policies are opaque heap handles created and released by
//! this library. Every fallible call returns an [`RsStatus`]; on failure the
//! message is available from [`rs_last_error_message`] on the same thread.
//! Strings returned by the library must be released with [`rs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relaysleep::cli::{solve_scenario, Summary};
use relaysleep::{Algorithm, Error, Scenario, SleepPolicy};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed JSON, bad UTF-8, or a scenario that fails validation.
    InvalidInput = 2,
    /// The exact solver's joint state space is over budget.
    BudgetExceeded = 3,
    /// The model cannot be evaluated (zero traffic, unstable load, ...).
    Infeasible = 4,
    /// Slot or relay index outside the policy, or a short buffer.
    OutOfRange = 5,
    /// Unexpected internal failure; the library caught a panic.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsAlgorithm {
    ExactDp = 0,
    ReducedDp = 1,
    Greedy = 2,
}

impl From<RsAlgorithm> for Algorithm {
    fn from(a: RsAlgorithm) -> Self {
        match a {
            RsAlgorithm::ExactDp => Algorithm::ExactDp,
            RsAlgorithm::ReducedDp => Algorithm::ReducedDp,
            RsAlgorithm::Greedy => Algorithm::Greedy,
        }
    }
}

/// Opaque scenario handle.
pub struct RsScenario {
    inner: Scenario,
}

/// Opaque solved-policy handle.
pub struct RsPolicy {
    policy: SleepPolicy,
    summary: Summary,
    relays: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> RsStatus {
    match err.exit_code() {
        2 => RsStatus::InvalidInput,
        3 => RsStatus::BudgetExceeded,
        _ => RsStatus::Infeasible,
    }
}

fn fail(status: RsStatus, msg: impl Into<String>) -> RsStatus {
    set_error(msg);
    status
}

/// Runs `f` with panics turned into [`RsStatus::Internal`].
fn guard(f: impl FnOnce() -> RsStatus) -> RsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(RsStatus::Internal, "internal panic"),
    }
}

fn from_lib(err: Error) -> RsStatus {
    let status = status_of(&err);
    fail(status, err.to_string())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Creates the built-in 24-slot, six-relay scenario.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_default(out: *mut *mut RsScenario) -> RsStatus {
    guard(|| {
        if out.is_null() {
            return fail(RsStatus::NullPointer, "out is null");
        }
        put(
            out,
            RsScenario {
                inner: Scenario::bundled_default(),
            },
        );
        RsStatus::Ok
    })
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_from_json(json: *const c_char, out: *mut *mut RsScenario) -> RsStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(RsStatus::NullPointer, "json or out is null");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(RsStatus::InvalidInput, "scenario is not valid UTF-8");
        };
        match Scenario::from_json(text) {
            Ok(inner) => {
                put(out, RsScenario { inner });
                RsStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// Serialises a scenario to pretty-printed JSON. Release with [`rs_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_to_json(scenario: *const RsScenario, out: *mut *mut c_char) -> RsStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(RsStatus::NullPointer, "scenario or out is null");
        }
        match CString::new((*scenario).inner.to_json_pretty()) {
            Ok(s) => {
                *out = s.into_raw();
                RsStatus::Ok
            }
            Err(_) => fail(RsStatus::Internal, "scenario JSON contains NUL"),
        }
    })
}

/// Sets the blocking weight ψ.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_set_psi(scenario: *mut RsScenario, psi: f64) -> RsStatus {
    guard(|| {
        if scenario.is_null() {
            return fail(RsStatus::NullPointer, "scenario is null");
        }
        let s = &mut (*scenario).inner;
        let old = s.weights.psi;
        s.weights.psi = psi;
        if let Err(e) = s.validate() {
            s.weights.psi = old;
            return from_lib(e);
        }
        RsStatus::Ok
    })
}

/// Number of slots, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_slots(scenario: *const RsScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.slots())
}

/// Number of relays, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_relays(scenario: *const RsScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.relays())
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_scenario_free(scenario: *mut RsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Solves a scenario. The scenario handle stays owned by the caller.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_solve(
    scenario: *const RsScenario,
    algorithm: RsAlgorithm,
    out: *mut *mut RsPolicy,
) -> RsStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(RsStatus::NullPointer, "scenario or out is null");
        }
        let s = &(*scenario).inner;
        match solve_scenario(s, algorithm.into(), None) {
            Ok((policy, summary)) => {
                put(
                    out,
                    RsPolicy {
                        policy,
                        summary,
                        relays: s.relays(),
                    },
                );
                RsStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_free(policy: *mut RsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_slots(policy: *const RsPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.policy.slots.len())
}

/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_relays(policy: *const RsPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.relays)
}

/// Applied sleep ratio of one relay in one slot.
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_sleep(
    policy: *const RsPolicy,
    slot: usize,
    relay: usize,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), out.is_null()) else {
            return fail(RsStatus::NullPointer, "policy or out is null");
        };
        match p.policy.slots.get(slot).and_then(|s| s.sleep.get(relay)) {
            Some(v) => {
                *out = *v;
                RsStatus::Ok
            }
            None => fail(RsStatus::OutOfRange, format!("no slot {slot} relay {relay}")),
        }
    })
}

/// Copies the slots x relays sleep matrix, row-major, into `buf`.
///
/// # Safety
/// `policy` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_sleep_matrix(policy: *const RsPolicy, buf: *mut f64, len: usize) -> RsStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), buf.is_null()) else {
            return fail(RsStatus::NullPointer, "policy or buf is null");
        };
        let need = p.policy.slots.len() * p.relays;
        if len < need {
            return fail(RsStatus::OutOfRange, format!("buffer holds {len}, need {need}"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, v) in dst.iter_mut().zip(p.policy.slots.iter().flat_map(|s| &s.sleep)) {
            *d = *v;
        }
        RsStatus::Ok
    })
}

/// Headline figures of a solved policy.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RsTotals {
    /// Weighted objective: grid energy plus ψ-weighted blocking.
    pub weighted_cost: f64,
    pub total_grid_energy_j: f64,
    pub mean_grid_power_w: f64,
    pub mean_blocking: f64,
    pub clamped_actions: usize,
}

/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_totals(policy: *const RsPolicy, out: *mut RsTotals) -> RsStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), out.is_null()) else {
            return fail(RsStatus::NullPointer, "policy or out is null");
        };
        let s = &p.summary;
        *out = RsTotals {
            weighted_cost: s.weighted_cost,
            total_grid_energy_j: s.total_grid_energy_j,
            mean_grid_power_w: s.mean_grid_power_w,
            mean_blocking: s.mean_blocking,
            clamped_actions: s.clamped_actions,
        };
        RsStatus::Ok
    })
}

/// Run summary as JSON, same fields as the CLI's `summary.json`.
/// Release with [`rs_string_free`].
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_policy_summary_json(policy: *const RsPolicy, out: *mut *mut c_char) -> RsStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), out.is_null()) else {
            return fail(RsStatus::NullPointer, "policy or out is null");
        };
        let text = match serde_json::to_string(&p.summary) {
            Ok(t) => t,
            Err(e) => return fail(RsStatus::Internal, e.to_string()),
        };
        match CString::new(text) {
            Ok(s) => {
                *out = s.into_raw();
                RsStatus::Ok
            }
            Err(_) => fail(RsStatus::Internal, "summary contains NUL"),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
