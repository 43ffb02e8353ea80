//! C interface to `iirl-core`.
//!
//! Every entry point returns an [`IirlStatus`]. On failure a description is
//! kept per thread and can be read with [`iirl_last_error_message`]. Objects
//! cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Results are written through out-pointers and
//! are only touched on success.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iirl_core::function::CallbackFunction;
use iirl_core::iirl::{mask_strategy, MaskingOptions, MaskingProblem, MaskingResult, Scenario};
use iirl_core::optim::{maximize_concave, AscentOptions};
use iirl_core::{io, irl_strategy, irl_utility, sample_complexity, Dataset, Error, FunctionSpec};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IirlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Arguments were well formed but rejected (bad shape, out of range).
    InvalidInput = 3,
    /// JSON text could not be parsed into the expected object.
    Parse = 4,
    Io = 5,
    /// The problem has no feasible point (empty budget set, no masking).
    Infeasible = 6,
    /// An iterative solver stopped before reaching its tolerance.
    NonConverged = 7,
    /// A quantity is undefined for these inputs (zero noise, degenerate pair...).
    Numerical = 8,
    /// Internal error. The library state is still usable.
    Panic = 9,
}

fn status_of(e: &Error) -> IirlStatus {
    match e {
        Error::InvalidInput(_)
        | Error::Schema(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedDimension { .. }
        | Error::Unsupported(_) => IirlStatus::InvalidInput,
        Error::Parse { .. } => IirlStatus::Parse,
        Error::Io(_) => IirlStatus::Io,
        Error::InfeasibleRegion { .. } | Error::MaskingInfeasible { .. } => IirlStatus::Infeasible,
        Error::NonConverged { .. } => IirlStatus::NonConverged,
        Error::AtIndex { source, .. } => status_of(source),
        _ => IirlStatus::Numerical,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(IirlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(IirlStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IirlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IirlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            IirlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(IirlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn iirl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn iirl_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn iirl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// --- datasets --------------------------------------------------------------

/// Observed `(function, response)` pairs.
pub struct IirlDataset(Dataset);

/// Parses a dataset from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and the out-pointer valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_dataset_from_json(json: *const c_char, out_ds: *mut *mut IirlDataset) -> IirlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let d = io::dataset_from_str(text)?;
        out(out_ds, Box::into_raw(Box::new(IirlDataset(d))), "out")
    })
}

/// Reads a dataset file.
///
/// # Safety
/// `path` must be a nul-terminated string and the out-pointer valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_dataset_load(path: *const c_char, out_ds: *mut *mut IirlDataset) -> IirlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let d = io::load_dataset(path)?;
        out(out_ds, Box::into_raw(Box::new(IirlDataset(d))), "out")
    })
}

/// # Safety
/// `ds` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iirl_dataset_free(ds: *mut IirlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of observations.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_dataset_horizon(ds: *const IirlDataset, k: *mut usize) -> IirlStatus {
    guard(|| out(k, handle(ds, "dataset")?.0.horizon(), "k"))
}

/// Response dimension.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_dataset_dim(ds: *const IirlDataset, m: *mut usize) -> IirlStatus {
    guard(|| out(m, handle(ds, "dataset")?.0.dim(), "m"))
}

/// GARP on a utility-test dataset, with revealed-preference tolerance `tol`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_garp_check(ds: *const IirlDataset, tol: f64, passes: *mut bool) -> IirlStatus {
    guard(|| {
        let r = irl_utility::garp_check(&handle(ds, "dataset")?.0, tol)?;
        out(passes, r.passes, "passes")
    })
}

/// Whether the Afriat inequalities admit a solution (the data are
/// rationalized by a monotone concave utility).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_afriat_test(ds: *const IirlDataset, feasible: *mut bool) -> IirlStatus {
    guard(|| {
        let r = irl_utility::afriat_test(&handle(ds, "dataset")?.0)?;
        out(feasible, r.feasibility.is_feasible(), "feasible")
    })
}

/// Whether a strategy-test dataset is consistent with some convex budget.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_strategy_test(ds: *const IirlDataset, feasible: *mut bool) -> IirlStatus {
    guard(|| {
        let r = irl_strategy::strategy_feasibility_test(&handle(ds, "dataset")?.0)?;
        out(feasible, r.feasibility.is_feasible(), "feasible")
    })
}

// --- masking ---------------------------------------------------------------

/// Adversary utilities plus the true budget.
pub struct IirlScenario(Scenario);

/// Parses a scenario from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and the out-pointer valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_scenario_from_json(json: *const c_char, out_sc: *mut *mut IirlScenario) -> IirlStatus {
    guard(|| {
        let s = io::scenario_from_str(str_arg(json, "json")?)?;
        out(out_sc, Box::into_raw(Box::new(IirlScenario(s))), "out")
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be a nul-terminated string and the out-pointer valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_scenario_load(path: *const c_char, out_sc: *mut *mut IirlScenario) -> IirlStatus {
    guard(|| {
        let s = io::load_scenario(str_arg(path, "path")?)?;
        out(out_sc, Box::into_raw(Box::new(IirlScenario(s))), "out")
    })
}

/// # Safety
/// `sc` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iirl_scenario_free(sc: *mut IirlScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_scenario_horizon(sc: *const IirlScenario, k: *mut usize) -> IirlStatus {
    guard(|| out(k, handle(sc, "scenario")?.0.horizon(), "k"))
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_scenario_dim(sc: *const IirlScenario, m: *mut usize) -> IirlStatus {
    guard(|| out(m, handle(sc, "scenario")?.0.dim(), "m"))
}

/// Solution of one masking problem.
pub struct IirlMaskingResult(MaskingResult);

/// Finds minimally violated thresholds that bring the strategy margin down
/// to `(1 - eta)` of its true value. Default solver options.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_mask(sc: *const IirlScenario, eta: f64, out_r: *mut *mut IirlMaskingResult) -> IirlStatus {
    guard(|| {
        let s = &handle(sc, "scenario")?.0;
        let p = MaskingProblem::from_scenario(s, eta, MaskingOptions::default())?;
        let r = mask_strategy(&p)?;
        out(out_r, Box::into_raw(Box::new(IirlMaskingResult(r))), "out")
    })
}

/// # Safety
/// `r` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iirl_masking_result_free(r: *mut IirlMaskingResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Scalar summary of a masking result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IirlMaskingSummary {
    pub eta: f64,
    pub psi_true: f64,
    pub target: f64,
    pub psi_masked: f64,
    pub violation_norm: f64,
    pub feasible: bool,
    /// The unmasked responses already failed the test; nothing was changed.
    pub degenerate: bool,
    pub horizon: usize,
    pub dim: usize,
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_masking_result_summary(
    r: *const IirlMaskingResult,
    summary: *mut IirlMaskingSummary,
) -> IirlStatus {
    guard(|| {
        let r = &handle(r, "result")?.0;
        let s = IirlMaskingSummary {
            eta: r.eta,
            psi_true: r.psi_true,
            target: r.target,
            psi_masked: r.psi_masked,
            violation_norm: r.violation_norm,
            feasible: r.feasible,
            degenerate: r.degenerate,
            horizon: r.thresholds.len(),
            dim: r.responses.first().map_or(0, Vec::len),
        };
        out(summary, s, "summary")
    })
}

/// Copies the masked thresholds into `buf`, which holds `len` doubles and
/// must have room for the horizon.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn iirl_masking_result_thresholds(
    r: *const IirlMaskingResult,
    buf: *mut f64,
    len: usize,
) -> IirlStatus {
    guard(|| copy_out(&handle(r, "result")?.0.thresholds, buf, len))
}

/// Copies the masked responses, row-major `horizon x dim`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn iirl_masking_result_responses(
    r: *const IirlMaskingResult,
    buf: *mut f64,
    len: usize,
) -> IirlStatus {
    guard(|| {
        let flat: Vec<f64> = handle(r, "result")?.0.responses.concat();
        copy_out(&flat, buf, len)
    })
}

unsafe fn copy_out(v: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < v.len() {
        return Err(Fail(
            IirlStatus::InvalidInput,
            format!("buffer holds {len} values, {} needed", v.len()),
        ));
    }
    if v.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
    Ok(())
}

/// The full result as JSON. Free the string with [`iirl_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iirl_masking_result_to_json(r: *const IirlMaskingResult, json: *mut *mut c_char) -> IirlStatus {
    guard(|| {
        let text = io::to_json_string(&handle(r, "result")?.0)?;
        let c = CString::new(text).map_err(|e| Fail(IirlStatus::Panic, e.to_string()))?;
        out(json, c.into_raw(), "json")
    })
}

// --- numerics --------------------------------------------------------------

/// Upper bound on the probability that noise in the adversary's utility
/// estimates defeats the masking, from Lipschitz constant `l`, spread
/// `delta_max`, conditioning `kappa`, noise trace and horizon `k`.
///
/// # Safety
/// `bound` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iirl_analytic_bound(
    l: f64,
    delta_max: f64,
    kappa: f64,
    trace_sigma: f64,
    k: usize,
    bound: *mut f64,
) -> IirlStatus {
    guard(|| {
        let b = sample_complexity::analytic_bound(l, delta_max, kappa, trace_sigma, k)?;
        out(bound, b, "bound")
    })
}

/// Objective callback: returns `u(x)` and writes the gradient into `grad`.
/// Both arrays hold `m` values. Called on the thread that invoked the solver.
pub type IirlObjective = Option<unsafe extern "C" fn(x: *const f64, m: usize, grad: *mut f64, user_data: *mut c_void) -> f64>;

struct UserData(*mut c_void);
// The solver calls the objective sequentially on the caller's thread; the
// pointer never leaves it.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

/// Maximizes a concave `u` over `{x >= 0, price'x <= gamma}`.
///
/// Writes the maximizer to `point` (`m` doubles) and optionally the optimal
/// value and the budget multiplier (either may be null).
///
/// # Safety
/// `price` and `point` must hold `m` doubles; `f` must be safe to call with
/// `user_data`.
#[no_mangle]
pub unsafe extern "C" fn iirl_maximize_linear_budget(
    f: IirlObjective,
    user_data: *mut c_void,
    price: *const f64,
    m: usize,
    gamma: f64,
    point: *mut f64,
    value: *mut f64,
    multiplier: *mut f64,
) -> IirlStatus {
    guard(|| {
        let f = f.ok_or_else(|| null("objective"))?;
        if m == 0 {
            return Err(Fail(IirlStatus::InvalidInput, "dimension m must be positive".into()));
        }
        let price = slice_arg(price, m, "price")?.to_vec();
        if point.is_null() {
            return Err(null("point"));
        }
        let ud = UserData(user_data);
        let u = FunctionSpec::Callback(CallbackFunction::new("c-objective", m, None, move |x: &[f64]| {
            let ud = &ud;
            let mut g = vec![0.0; x.len()];
            let v = f(x.as_ptr(), x.len(), g.as_mut_ptr(), ud.0);
            (v, g)
        }));
        let g = FunctionSpec::linear(price, 0.0);
        let r = maximize_concave(&u, &g, gamma, &AscentOptions::default())?;
        ptr::copy_nonoverlapping(r.point.as_ptr(), point, m);
        if !value.is_null() {
            value.write(r.objective);
        }
        if !multiplier.is_null() {
            multiplier.write(r.multiplier);
        }
        Ok(())
    })
}
