//! C interface to the pricepath library.
//!
//! Conventions:
//!
//! * Every fallible call returns a [`PpStatus`]; out-parameters are written
//!   only when the call returns `Ok`. On any failure a human-readable message
//!   is stored in thread-local storage and stays valid until the next call on
//!   the same thread; fetch it with [`pp_last_error`].
//! * Handles ([`PpModel`], [`PpTrajectory`]) are opaque, owned by the caller,
//!   and released with the matching `pp_*_free`. Freeing `NULL` is a no-op.
//! * Strings returned by the library (`pp_trajectory_to_csv`) are released
//!   with [`pp_string_free`], never with `free(3)`.
//! * Series are copied into caller-provided buffers sized from
//!   [`pp_trajectory_len`]; nothing borrows library memory across calls.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use pricepath::closedform::{cr_multi, cr_trajectory, md_multi, MdBoundary};
use pricepath::io::{parse_model_str, trajectory_to_csv, ParsedModel};
use pricepath::optimality::{invariance_report, parse_invariant_names};
use pricepath::trajectory::Trajectory;
use pricepath::varsolve::{solve_cr, solve_md, SolverConfig, SolverResult};
use pricepath::Error;

/// Result code of every fallible call. Matches the CLI process exit codes:
/// bad input 1, model-hypothesis violation 2, non-convergence 3.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    InvalidInput = 1,
    Hypothesis = 2,
    NonConvergence = 3,
    /// A panic crossed the boundary; state may be inconsistent.
    Internal = 4,
}

/// Convergence summary of a numeric solve, written even when the solve fails
/// so callers can inspect how far it got.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PpSolveInfo {
    /// Quadrature objective at the final iterate (no penalty term).
    pub objective: f64,
    /// Sup-norm of the projected gradient at the final iterate.
    pub grad_norm: f64,
    /// Sup-norm miss of the terminal inventory boundary.
    pub constraint_violation: f64,
    /// Worst relative mismatch of the analytic gradient against finite
    /// differences at the first iterate; NaN when the check was skipped.
    pub gradient_check: f64,
    /// Accepted ascent steps across all penalty rounds.
    pub iterations: usize,
    pub converged: bool,
}

/// Opaque parsed model handle.
pub struct PpModel {
    inner: ParsedModel,
}

/// Opaque trajectory handle.
pub struct PpTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn store_error(msg: &str) {
    let clean: String = msg.chars().filter(|&ch| ch != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PpStatus {
    match err.exit_code() {
        1 => PpStatus::InvalidInput,
        2 => PpStatus::Hypothesis,
        3 => PpStatus::NonConvergence,
        _ => PpStatus::Internal,
    }
}

/// Run `body`, translating errors and panics into a status plus stored
/// message. Entry points do all pointer writes inside `body`.
fn guard(body: impl FnOnce() -> Result<(), Error>) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            store_error("");
            PpStatus::Ok
        }
        Ok(Err(err)) => {
            store_error(&err.to_string());
            status_of(&err)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across the C boundary".to_string());
            store_error(&format!("internal panic: {msg}"));
            PpStatus::Internal
        }
    }
}

fn null_arg(what: &str) -> Error {
    Error::input(format!("null pointer passed for `{what}`"))
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Error> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| Error::input(format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Error> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn model_arg<'a>(ptr: *const PpModel) -> Result<&'a ParsedModel, Error> {
    if ptr.is_null() {
        return Err(null_arg("model"));
    }
    Ok(unsafe { &(*ptr).inner })
}

unsafe fn trajectory_arg<'a>(ptr: *const PpTrajectory) -> Result<&'a Trajectory, Error> {
    if ptr.is_null() {
        return Err(null_arg("trajectory"));
    }
    Ok(unsafe { &(*ptr).inner })
}

unsafe fn write_out<T>(out: *mut T, what: &str, value: T) -> Result<(), Error> {
    if out.is_null() {
        return Err(null_arg(what));
    }
    unsafe { ptr::write(out, value) };
    Ok(())
}

fn boxed_trajectory(traj: Trajectory) -> *mut PpTrajectory {
    Box::into_raw(Box::new(PpTrajectory { inner: traj }))
}

fn solver_config(config_json: *const c_char) -> Result<SolverConfig, Error> {
    if config_json.is_null() {
        return Ok(SolverConfig::default());
    }
    let text = unsafe { str_arg(config_json, "config_json") }?;
    let config: SolverConfig = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("solver config does not parse: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn fill_info(info_out: *mut PpSolveInfo, res: &SolverResult) {
    if info_out.is_null() {
        return;
    }
    let info = PpSolveInfo {
        objective: res.objective,
        grad_norm: res.grad_norm,
        constraint_violation: res.constraint_violation,
        gradient_check: res.gradient_check.unwrap_or(f64::NAN),
        iterations: res.iterations,
        converged: res.converged,
    };
    unsafe { ptr::write(info_out, info) };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread, or an empty
/// string after a success. The pointer is valid until the next library call
/// on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse a model document (the same JSON the CLI reads) into a handle.
#[no_mangle]
pub unsafe extern "C" fn pp_model_from_json(
    json: *const c_char,
    out: *mut *mut PpModel,
) -> PpStatus {
    guard(|| {
        let text = unsafe { str_arg(json, "json") }?;
        let parsed = parse_model_str(text)?;
        let handle = Box::into_raw(Box::new(PpModel { inner: parsed }));
        unsafe { write_out(out, "out", handle) }
    })
}

/// Number of items in the model, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pp_model_n_items(model: *const PpModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.params.n
}

#[no_mangle]
pub unsafe extern "C" fn pp_model_free(model: *mut PpModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Closed-form markdown trajectory from initial inventories `i0[0..i0_len]`,
/// sampled on `n_points` grid points.
#[no_mangle]
pub unsafe extern "C" fn pp_markdown_closed(
    model: *const PpModel,
    i0: *const f64,
    i0_len: usize,
    n_points: usize,
    out: *mut *mut PpTrajectory,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let stock = unsafe { slice_arg(i0, i0_len, "i0") }?;
        let boundary = MdBoundary::InitialInventory(DVector::from_column_slice(stock));
        let (_, traj) = md_multi(
            &parsed.params,
            &boundary,
            parsed.seasonality.as_ref(),
            n_points,
        )?;
        unsafe { write_out(out, "out", boxed_trajectory(traj)) }
    })
}

/// Closed-form markdown trajectory pinned by inventory magnitude: the path
/// whose geometric-mean initial stock equals `geomean`.
#[no_mangle]
pub unsafe extern "C" fn pp_markdown_closed_scaled(
    model: *const PpModel,
    geomean: f64,
    n_points: usize,
    out: *mut *mut PpTrajectory,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let boundary = MdBoundary::Magnitude { geomean };
        let (_, traj) = md_multi(
            &parsed.params,
            &boundary,
            parsed.seasonality.as_ref(),
            n_points,
        )?;
        unsafe { write_out(out, "out", boxed_trajectory(traj)) }
    })
}

/// Numeric markdown solve from initial inventories. The model must carry a
/// seasonality window (the numeric stage needs a finite horizon; add a uniform
/// window to the model document if the problem has no seasonal shape).
///
/// `config_json` is an optional solver-config document (`NULL` for defaults).
/// `info_out` is optional; when non-null it is written even on failure.
#[no_mangle]
pub unsafe extern "C" fn pp_markdown_numeric(
    model: *const PpModel,
    i0: *const f64,
    i0_len: usize,
    config_json: *const c_char,
    info_out: *mut PpSolveInfo,
    out: *mut *mut PpTrajectory,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let stock = unsafe { slice_arg(i0, i0_len, "i0") }?;
        let seasonality = parsed.seasonality.as_ref().ok_or_else(|| {
            Error::input(
                "numeric solves need a seasonality window on the model; \
                 add a uniform one spanning the intended horizon",
            )
        })?;
        let config = solver_config(config_json)?;
        let res = solve_md(
            &parsed.params,
            &DVector::from_column_slice(stock),
            seasonality,
            &config,
        )?;
        fill_info(info_out, &res);
        if !res.converged {
            return Err(Error::NonConvergence(format!(
                "markdown solve stopped at grad {:e}, boundary miss {:e} after {} iterations",
                res.grad_norm, res.constraint_violation, res.iterations
            )));
        }
        unsafe { write_out(out, "out", boxed_trajectory(res.trajectory)) }
    })
}

/// Stationary replenishment equilibrium: constant prices and the inventory
/// mix at overall scale `i_scale`. Writes up to `cap` entries into each
/// non-null buffer; both buffers need room for the model's item count.
#[no_mangle]
pub unsafe extern "C" fn pp_cr_equilibrium(
    model: *const PpModel,
    i_scale: f64,
    price_out: *mut f64,
    inventory_out: *mut f64,
    cap: usize,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let n = parsed.params.n;
        if (!price_out.is_null() || !inventory_out.is_null()) && cap < n {
            return Err(Error::input(format!(
                "output capacity {cap} is smaller than the item count {n}"
            )));
        }
        let eq = cr_multi(&parsed.params, i_scale)?;
        if !price_out.is_null() {
            unsafe { std::slice::from_raw_parts_mut(price_out, n) }
                .copy_from_slice(eq.price.as_slice());
        }
        if !inventory_out.is_null() {
            unsafe { std::slice::from_raw_parts_mut(inventory_out, n) }
                .copy_from_slice(eq.inventory.as_slice());
        }
        Ok(())
    })
}

/// Closed-form replenishment trajectory (the stationary equilibrium held over
/// the model's seasonality window), sampled on `n_points` grid points.
#[no_mangle]
pub unsafe extern "C" fn pp_cr_closed(
    model: *const PpModel,
    i_scale: f64,
    n_points: usize,
    out: *mut *mut PpTrajectory,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let seasonality = parsed.seasonality.as_ref().ok_or_else(|| {
            Error::input("replenishment trajectories need a seasonality window on the model")
        })?;
        let eq = cr_multi(&parsed.params, i_scale)?;
        let traj = cr_trajectory(&parsed.params, &eq, seasonality, n_points)?;
        unsafe { write_out(out, "out", boxed_trajectory(traj)) }
    })
}

/// Numeric replenishment solve with cyclical boundary `I(T) = I(0) = i0`.
/// Same conventions as [`pp_markdown_numeric`].
#[no_mangle]
pub unsafe extern "C" fn pp_cr_numeric(
    model: *const PpModel,
    i0: *const f64,
    i0_len: usize,
    config_json: *const c_char,
    info_out: *mut PpSolveInfo,
    out: *mut *mut PpTrajectory,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let stock = unsafe { slice_arg(i0, i0_len, "i0") }?;
        let seasonality = parsed.seasonality.as_ref().ok_or_else(|| {
            Error::input(
                "numeric solves need a seasonality window on the model; \
                 add a uniform one spanning the intended horizon",
            )
        })?;
        let config = solver_config(config_json)?;
        let res = solve_cr(
            &parsed.params,
            &DVector::from_column_slice(stock),
            seasonality,
            &config,
        )?;
        fill_info(info_out, &res);
        if !res.converged {
            return Err(Error::NonConvergence(format!(
                "replenishment solve stopped at grad {:e}, boundary miss {:e} after {} iterations",
                res.grad_norm, res.constraint_violation, res.iterations
            )));
        }
        unsafe { write_out(out, "out", boxed_trajectory(res.trajectory)) }
    })
}

/// Number of grid points, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_len(traj: *const PpTrajectory) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }.inner.len()
}

/// Number of items, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_n_items(traj: *const PpTrajectory) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }.inner.n_items()
}

/// Objective value recorded on the trajectory (revenue for markdown, profit
/// for replenishment). NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_objective(traj: *const PpTrajectory) -> f64 {
    if traj.is_null() {
        return f64::NAN;
    }
    unsafe { &*traj }.inner.objective
}

fn series_values(traj: &Trajectory, name: &str, item: usize) -> Result<Vec<f64>, Error> {
    let per_item = |what: &str| -> Result<(), Error> {
        if item >= traj.n_items() {
            return Err(Error::input(format!(
                "item index {item} out of range for {} item(s) in series `{what}`",
                traj.n_items()
            )));
        }
        Ok(())
    };
    match name {
        "t" => Ok(traj.times()),
        "tau" => Ok(traj.tau()),
        "I" => {
            per_item("I")?;
            Ok(traj.states.iter().map(|s| s.inventory[item]).collect())
        }
        "p" => {
            per_item("p")?;
            Ok(traj.states.iter().map(|s| s.price[item]).collect())
        }
        "S" => {
            per_item("S")?;
            Ok(traj.states.iter().map(|s| s.demand[item]).collect())
        }
        "R" => {
            per_item("R")?;
            Ok(traj.states.iter().map(|s| s.revenue[item]).collect())
        }
        "lambda" => {
            per_item("lambda")?;
            Ok(traj.states.iter().map(|s| s.lambda[item]).collect())
        }
        "rho2" => {
            per_item("rho2")?;
            Ok(traj.states.iter().map(|s| s.rho2[item]).collect())
        }
        other => Err(Error::input(format!(
            "unknown series `{other}`; known: t, tau, I, p, S, R, lambda, rho2"
        ))),
    }
}

/// Copy one column into `buf`. `name` is one of `t`, `tau`, `I`, `p`, `S`,
/// `R`, `lambda`, `rho2` (matching the CSV headers); `item` picks the item for
/// the per-item series and is ignored for `t` and `tau`. `cap` must be at
/// least [`pp_trajectory_len`]; exactly that many values are written.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_series(
    traj: *const PpTrajectory,
    name: *const c_char,
    item: usize,
    buf: *mut f64,
    cap: usize,
) -> PpStatus {
    guard(|| {
        let traj = unsafe { trajectory_arg(traj) }?;
        let name = unsafe { str_arg(name, "name") }?;
        if buf.is_null() {
            return Err(null_arg("buf"));
        }
        let values = series_values(traj, name, item)?;
        if cap < values.len() {
            return Err(Error::input(format!(
                "buffer capacity {cap} is smaller than the trajectory length {}",
                values.len()
            )));
        }
        unsafe { std::slice::from_raw_parts_mut(buf, values.len()) }.copy_from_slice(&values);
        Ok(())
    })
}

/// Render the trajectory in the CSV format the CLI writes. The returned
/// string is owned by the caller; release it with [`pp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_to_csv(
    traj: *const PpTrajectory,
    out: *mut *mut c_char,
) -> PpStatus {
    guard(|| {
        let traj = unsafe { trajectory_arg(traj) }?;
        let csv = trajectory_to_csv(traj)?;
        let owned = CString::new(csv)
            .map_err(|_| Error::input("trajectory CSV contained an interior NUL"))?;
        unsafe { write_out(out, "out", owned.into_raw()) }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_free(traj: *mut PpTrajectory) {
    if !traj.is_null() {
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Evaluate conservation laws on a trajectory and report the worst relative
/// spread across them. `invariants` is a comma-separated list of invariant
/// names, with `all` expanding to every invariant conserved for the model's
/// demand kind. The ends of the window are trimmed by `trim_frac` (0 to 0.5)
/// on each side before evaluating, mirroring the CLI's `verify`.
#[no_mangle]
pub unsafe extern "C" fn pp_invariant_max_rel_dev(
    model: *const PpModel,
    traj: *const PpTrajectory,
    invariants: *const c_char,
    trim_frac: f64,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        let parsed = unsafe { model_arg(model) }?;
        let traj = unsafe { trajectory_arg(traj) }?;
        let list = unsafe { str_arg(invariants, "invariants") }?;
        if !(0.0..0.5).contains(&trim_frac) {
            return Err(Error::input(format!(
                "trim fraction must be in [0, 0.5), got {trim_frac}"
            )));
        }
        let kinds = parse_invariant_names(list, parsed.params.kind)?;
        let window = traj.interior(trim_frac, trim_frac);
        let reports = invariance_report(&parsed.params, &window, &kinds, f64::INFINITY)?;
        let worst = reports
            .iter()
            .map(|r| r.max_rel_dev)
            .fold(0.0_f64, f64::max);
        unsafe { write_out(out, "out", worst) }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_ITEM_MD: &str = r#"{
        "n": 1,
        "kind": "constant_elasticity",
        "S0": [400.0],
        "gamma": [[-2.0]],
        "alpha": [[0.5]],
        "c": [0.0],
        "seasonality": {"T": 1.0, "knots": [[0.0, 1.0], [1.0, 1.0]]}
    }"#;

    const ONE_ITEM_CR: &str = r#"{
        "n": 1,
        "kind": "constant_elasticity",
        "S0": [400.0],
        "gamma": [[-2.0]],
        "alpha": [[0.0]],
        "c": [1.0],
        "seasonality": {"T": 1.0, "knots": [[0.0, 1.0], [1.0, 1.0]]}
    }"#;

    fn model_from(json: &str) -> *mut PpModel {
        let text = CString::new(json).unwrap();
        let mut handle: *mut PpModel = ptr::null_mut();
        let status = unsafe { pp_model_from_json(text.as_ptr(), &mut handle) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert!(!handle.is_null());
        handle
    }

    fn last_error_string() -> String {
        unsafe { CStr::from_ptr(pp_last_error()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn closed_form_markdown_round_trip() {
        let model = model_from(ONE_ITEM_MD);
        assert_eq!(unsafe { pp_model_n_items(model) }, 1);

        let i0 = [100.0_f64];
        let mut traj: *mut PpTrajectory = ptr::null_mut();
        let status =
            unsafe { pp_markdown_closed(model, i0.as_ptr(), i0.len(), 401, &mut traj) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());

        let len = unsafe { pp_trajectory_len(traj) };
        assert_eq!(len, 401);
        assert_eq!(unsafe { pp_trajectory_n_items(traj) }, 1);
        let objective = unsafe { pp_trajectory_objective(traj) };
        assert!((objective - 516.3977794943222).abs() < 1e-9, "{objective}");

        let mut prices = vec![0.0_f64; len];
        let name = CString::new("p").unwrap();
        let status = unsafe {
            pp_trajectory_series(traj, name.as_ptr(), 0, prices.as_mut_ptr(), prices.len())
        };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert!((prices[0] - 60.0_f64.sqrt()).abs() < 1e-12, "{}", prices[0]);

        let mut dev = f64::NAN;
        let all = CString::new("all").unwrap();
        let status =
            unsafe { pp_invariant_max_rel_dev(model, traj, all.as_ptr(), 0.05, &mut dev) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert!(dev < 1e-12, "closed-form invariants should be exact, got {dev}");

        let mut csv: *mut c_char = ptr::null_mut();
        let status = unsafe { pp_trajectory_to_csv(traj, &mut csv) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap();
        assert!(text.starts_with("t,tau,"), "unexpected header: {}", &text[..20]);
        unsafe { pp_string_free(csv) };

        unsafe { pp_trajectory_free(traj) };
        unsafe { pp_model_free(model) };
    }

    #[test]
    fn numeric_markdown_matches_closed_objective() {
        let model = model_from(ONE_ITEM_MD);
        let i0 = [100.0_f64];
        let config = CString::new(r#"{"n_grid": 120}"#).unwrap();
        let mut info = PpSolveInfo {
            objective: f64::NAN,
            grad_norm: f64::NAN,
            constraint_violation: f64::NAN,
            gradient_check: f64::NAN,
            iterations: 0,
            converged: false,
        };
        let mut traj: *mut PpTrajectory = ptr::null_mut();
        let status = unsafe {
            pp_markdown_numeric(
                model,
                i0.as_ptr(),
                i0.len(),
                config.as_ptr(),
                &mut info,
                &mut traj,
            )
        };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert!(info.converged);
        assert!(info.iterations > 0);
        let objective = unsafe { pp_trajectory_objective(traj) };
        assert!(
            (objective - 516.3977794943222).abs() / 516.4 < 0.01,
            "numeric objective {objective} too far from the closed form"
        );
        unsafe { pp_trajectory_free(traj) };
        unsafe { pp_model_free(model) };
    }

    #[test]
    fn replenishment_equilibrium_price() {
        let model = model_from(ONE_ITEM_CR);
        let mut price = [f64::NAN];
        let mut inventory = [f64::NAN];
        let status = unsafe {
            pp_cr_equilibrium(model, 100.0, price.as_mut_ptr(), inventory.as_mut_ptr(), 1)
        };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert!((price[0] - 2.0).abs() < 1e-12, "{}", price[0]);
        assert!((inventory[0] - 100.0).abs() < 1e-9, "{}", inventory[0]);

        let mut traj: *mut PpTrajectory = ptr::null_mut();
        let status = unsafe { pp_cr_closed(model, 100.0, 51, &mut traj) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        assert_eq!(unsafe { pp_trajectory_len(traj) }, 51);
        unsafe { pp_trajectory_free(traj) };
        unsafe { pp_model_free(model) };
    }

    #[test]
    fn error_paths_set_status_and_message() {
        // Malformed JSON.
        let bad = CString::new("{ not json").unwrap();
        let mut handle: *mut PpModel = ptr::null_mut();
        let status = unsafe { pp_model_from_json(bad.as_ptr(), &mut handle) };
        assert_eq!(status, PpStatus::InvalidInput);
        assert!(!last_error_string().is_empty());
        assert!(handle.is_null(), "out must not be written on failure");

        // Null arguments.
        let status = unsafe { pp_model_from_json(ptr::null(), &mut handle) };
        assert_eq!(status, PpStatus::InvalidInput);
        assert!(last_error_string().contains("json"));

        let model = model_from(ONE_ITEM_MD);
        let mut traj: *mut PpTrajectory = ptr::null_mut();
        let status = unsafe { pp_markdown_closed(model, ptr::null(), 0, 401, &mut traj) };
        assert_eq!(status, PpStatus::InvalidInput);

        // Dimension mismatch between i0 and the model.
        let i0 = [100.0_f64, 50.0];
        let status = unsafe { pp_markdown_closed(model, i0.as_ptr(), 2, 401, &mut traj) };
        assert_eq!(status, PpStatus::InvalidInput, "{}", last_error_string());

        // Unknown series name and short buffer.
        let i0 = [100.0_f64];
        let status = unsafe { pp_markdown_closed(model, i0.as_ptr(), 1, 101, &mut traj) };
        assert_eq!(status, PpStatus::Ok, "{}", last_error_string());
        let mut buf = vec![0.0_f64; 5];
        let bogus = CString::new("price").unwrap();
        let status = unsafe {
            pp_trajectory_series(traj, bogus.as_ptr(), 0, buf.as_mut_ptr(), buf.len())
        };
        assert_eq!(status, PpStatus::InvalidInput);
        assert!(last_error_string().contains("unknown series"));
        let name = CString::new("p").unwrap();
        let status = unsafe {
            pp_trajectory_series(traj, name.as_ptr(), 0, buf.as_mut_ptr(), buf.len())
        };
        assert_eq!(status, PpStatus::InvalidInput);
        assert!(last_error_string().contains("capacity"));

        // A success clears the message.
        let mut full = vec![0.0_f64; 101];
        let status = unsafe {
            pp_trajectory_series(traj, name.as_ptr(), 0, full.as_mut_ptr(), full.len())
        };
        assert_eq!(status, PpStatus::Ok);
        assert!(last_error_string().is_empty());

        unsafe { pp_trajectory_free(traj) };
        unsafe { pp_model_free(model) };

        // Frees of NULL are no-ops.
        unsafe { pp_model_free(ptr::null_mut()) };
        unsafe { pp_trajectory_free(ptr::null_mut()) };
        unsafe { pp_string_free(ptr::null_mut()) };
    }
}
