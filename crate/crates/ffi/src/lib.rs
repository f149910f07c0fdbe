//! C ABI over `rbmci`.
//!
//! Every fallible function returns an [`RbmciStatus`]. On failure the message is
//! available from [`rbmci_last_error_message`] on the same thread until the next call.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rbmci::cli::check_fci_cap;
use rbmci::determinant::enumerate_space;
use rbmci::diagnostics::{estimate_fci_size, gelman_rubin};
use rbmci::eigensolver::{diagonalize, DavidsonOptions, SolverKind};
use rbmci::{ConvergenceReport, Error, IntegralTable, LoopConfig, TrainConfig};

const DENSE_LIMIT: usize = 2000;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmciStatus {
    Ok = 0,
    Parse = 1,
    IndexOutOfRange = 2,
    Capacity = 3,
    Domain = 4,
    Shape = 5,
    Precondition = 6,
    NotConverged = 7,
    Refused = 8,
    Config = 9,
    Degenerate = 10,
    Io = 11,
    Serialization = 12,
    NullPointer = 13,
    InvalidUtf8 = 14,
    Panic = 15,
}

impl From<&Error> for RbmciStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => Self::Parse,
            Error::IndexOutOfRange { .. } => Self::IndexOutOfRange,
            Error::Capacity(_) => Self::Capacity,
            Error::Domain(_) => Self::Domain,
            Error::Shape { .. } => Self::Shape,
            Error::Precondition(_) => Self::Precondition,
            Error::NotConverged { .. } => Self::NotConverged,
            Error::Refused(_) => Self::Refused,
            Error::Config(_) => Self::Config,
            Error::Degenerate(_) => Self::Degenerate,
            Error::Io(_) => Self::Io,
            Error::Json(_) => Self::Serialization,
        }
    }
}

/// Integrals read from an FCIDUMP.
pub struct RbmciIntegrals(IntegralTable);

/// Result of a selection run.
pub struct RbmciReport(ConvergenceReport);

/// Loop settings. Obtain defaults from [`rbmci_loop_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RbmciLoopConfig {
    pub max_iterations: usize,
    pub prune_threshold: f64,
    pub stability_threshold: f64,
    /// 0 means one hidden unit per visible unit.
    pub n_hidden: usize,
    pub beta: f64,
    pub sample_multiplier: usize,
    pub sample_cap: usize,
    pub reinit_weights: bool,
    pub keep_reference: bool,
    pub seed: u64,
    /// Use the dense solver instead of Davidson.
    pub dense_solver: bool,
    pub davidson_tol: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub gibbs_k: usize,
    pub learning_rate: f64,
}

impl From<&LoopConfig> for RbmciLoopConfig {
    fn from(c: &LoopConfig) -> Self {
        Self {
            max_iterations: c.max_iterations,
            prune_threshold: c.prune_threshold,
            stability_threshold: c.stability_threshold,
            n_hidden: c.n_hidden.unwrap_or(0),
            beta: c.beta,
            sample_multiplier: c.sample_multiplier,
            sample_cap: c.sample_cap,
            reinit_weights: c.reinit_weights,
            keep_reference: c.keep_reference,
            seed: c.seed,
            dense_solver: c.solver == SolverKind::Dense,
            davidson_tol: c.davidson_tol,
            epochs: c.train.epochs,
            batch_size: c.train.batch_size,
            gibbs_k: c.train.gibbs_k,
            learning_rate: c.train.learning_rate,
        }
    }
}

impl From<&RbmciLoopConfig> for LoopConfig {
    fn from(c: &RbmciLoopConfig) -> Self {
        LoopConfig {
            max_iterations: c.max_iterations,
            prune_threshold: c.prune_threshold,
            stability_threshold: c.stability_threshold,
            train: TrainConfig {
                epochs: c.epochs,
                batch_size: c.batch_size,
                gibbs_k: c.gibbs_k,
                learning_rate: c.learning_rate,
                ..TrainConfig::default()
            },
            n_hidden: (c.n_hidden > 0).then_some(c.n_hidden),
            beta: c.beta,
            sample_multiplier: c.sample_multiplier,
            sample_cap: c.sample_cap,
            reinit_weights: c.reinit_weights,
            keep_reference: c.keep_reference,
            seed: c.seed,
            solver: if c.dense_solver {
                SolverKind::Dense
            } else {
                SolverKind::Davidson
            },
            davidson_tol: c.davidson_tol,
            keep_snapshots: false,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Status(RbmciStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RbmciStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RbmciStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            RbmciStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, m))) => {
            set_last_error(m);
            s
        }
        Err(panic) => {
            let m = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {m}"));
            RbmciStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(RbmciStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Status(RbmciStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Message for the most recent failure on this thread, or null.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rbmci_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Read an FCIDUMP file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbmci_integrals_load(path: *const c_char, out: *mut *mut RbmciIntegrals) -> RbmciStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let table = IntegralTable::from_path(path)?;
        write(out, Box::into_raw(Box::new(RbmciIntegrals(table))), "out")
    })
}

/// Parse FCIDUMP text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rbmci_integrals_parse(text: *const c_char, out: *mut *mut RbmciIntegrals) -> RbmciStatus {
    guard(|| {
        let text = as_str(text, "text")?;
        let table = rbmci::parse_fcidump(text)?;
        write(out, Box::into_raw(Box::new(RbmciIntegrals(table))), "out")
    })
}

/// # Safety
/// `handle` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rbmci_integrals_free(handle: *mut RbmciIntegrals) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Orbital and electron counts.
///
/// # Safety
/// `handle` must be live; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_integrals_dims(
    handle: *const RbmciIntegrals,
    n_orbitals: *mut usize,
    n_alpha: *mut usize,
    n_beta: *mut usize,
) -> RbmciStatus {
    guard(|| {
        let t = &as_ref(handle, "handle")?.0;
        write(n_orbitals, t.n_orbitals(), "n_orbitals")?;
        write(n_alpha, t.n_alpha(), "n_alpha")?;
        write(n_beta, t.n_beta(), "n_beta")
    })
}

/// Exact ground-state energy over the full space. Refused when the space exceeds `cap` determinants.
///
/// # Safety
/// `handle` must be live and `energy` valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_fci_energy(handle: *const RbmciIntegrals, cap: u64, energy: *mut f64) -> RbmciStatus {
    guard(|| {
        let t = &as_ref(handle, "handle")?.0;
        check_fci_cap(t, cap as u128)?;
        let dets = enumerate_space(t.n_orbitals(), t.n_alpha(), t.n_beta());
        let solver = if dets.len() <= DENSE_LIMIT {
            SolverKind::Dense
        } else {
            SolverKind::Davidson
        };
        let state = diagonalize(&dets, t, None, solver, &DavidsonOptions::default())?;
        write(energy, state.energy, "energy")
    })
}

#[no_mangle]
pub extern "C" fn rbmci_loop_config_default() -> RbmciLoopConfig {
    RbmciLoopConfig::from(&LoopConfig::default())
}

/// Run the selection loop. Reaching the iteration limit is not a failure; check
/// [`rbmci_report_converged`].
///
/// # Safety
/// `handle` must be live; `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rbmci_run_selection(
    handle: *const RbmciIntegrals,
    config: *const RbmciLoopConfig,
    out: *mut *mut RbmciReport,
) -> RbmciStatus {
    guard(|| {
        let t = &as_ref(handle, "handle")?.0;
        let config = LoopConfig::from(as_ref(config, "config")?);
        let report = rbmci::run_selection(t, &config)?;
        write(out, Box::into_raw(Box::new(RbmciReport(report))), "out")
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_free(report: *mut RbmciReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Final variational energy, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_energy(report: *const RbmciReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.energy())
}

/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_iterations(report: *const RbmciReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.iterations())
}

/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_converged(report: *const RbmciReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.converged)
}

/// Size of the final determinant set.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_n_determinants(report: *const RbmciReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.final_state.len())
}

/// Copy per-iteration energies into `buffer`. `written` receives the number of iterations;
/// fails with `Shape` if `capacity` is smaller.
///
/// # Safety
/// `report` must be live, `buffer` must hold `capacity` doubles (may be null when 0),
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_iteration_energies(
    report: *const RbmciReport,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> RbmciStatus {
    guard(|| {
        let r = &as_ref(report, "report")?.0;
        let n = r.records.len();
        write(written, n, "written")?;
        if capacity < n {
            return Err(Error::Shape {
                expected: n,
                found: capacity,
            }
            .into());
        }
        if n > 0 {
            if buffer.is_null() {
                return Err(null("buffer"));
            }
            let out = std::slice::from_raw_parts_mut(buffer, n);
            for (slot, rec) in out.iter_mut().zip(&r.records) {
                *slot = rec.energy;
            }
        }
        Ok(())
    })
}

/// The full report as JSON. Release with [`rbmci_string_free`].
///
/// # Safety
/// `report` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_report_to_json(report: *const RbmciReport, out: *mut *mut c_char) -> RbmciStatus {
    guard(|| {
        let r = &as_ref(report, "report")?.0;
        let json = serde_json::to_string(r).map_err(Error::from)?;
        let c = CString::new(json).map_err(|e| Failure::Status(RbmciStatus::Serialization, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rbmci_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of determinants in the full space of `n_electrons` paired electrons over
/// `n_orbitals`. Fails with `Capacity` if the count does not fit in 64 bits.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_estimate_fci_size(n_orbitals: usize, n_electrons: usize, out: *mut u64) -> RbmciStatus {
    guard(|| {
        let n = estimate_fci_size(n_orbitals, n_electrons)?;
        let v = u64::try_from(&n).map_err(|_| Error::Capacity(format!("{n} determinants do not fit in 64 bits")))?;
        write(out, v, "out")
    })
}

/// Potential scale reduction factor over `n_chains` chains of `chain_length` draws,
/// stored chain after chain in `values`.
///
/// # Safety
/// `values` must hold `n_chains * chain_length` doubles and `statistic` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rbmci_gelman_rubin(
    values: *const f64,
    n_chains: usize,
    chain_length: usize,
    statistic: *mut f64,
) -> RbmciStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let total = n_chains
            .checked_mul(chain_length)
            .ok_or_else(|| Error::Capacity("n_chains * chain_length overflows".into()))?;
        let flat = std::slice::from_raw_parts(values, total);
        let chains: Vec<Vec<f64>> = flat.chunks(chain_length.max(1)).map(<[f64]>::to_vec).collect();
        let report = gelman_rubin(&chains)?;
        write(statistic, report.statistic, "statistic")
    })
}
