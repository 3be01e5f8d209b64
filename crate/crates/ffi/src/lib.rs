//! C ABI over the peridyn toolkit.
//!
//! A simulation is an opaque [`PdSimulation`] created from a YAML deck and
//! released with [`pd_simulation_free`]. Every fallible call returns a
//! [`PdStatus`]; the message of the most recent failure on the calling
//! thread is available from [`pd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use peridyn::deck::{Deck, OutputFormat};
use peridyn::simulation::{RunResult, Simulation};
use peridyn::{Error, Runtime};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The deck could not be read, parsed or validated.
    Deck = 3,
    /// Geometry, horizon or parameters are inconsistent.
    Input = 4,
    /// Solver, Newton or time stepping failed.
    Numerical = 5,
    BufferTooSmall = 6,
    /// Results were requested before [`pd_simulation_run`] succeeded.
    NotRun = 7,
    Panic = 8,
}

/// Snapshot file format.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdFormat {
    Csv = 0,
    Vtk = 1,
}

/// Opaque simulation handle.
pub struct PdSimulation {
    runtime: Runtime,
    sim: Simulation,
    result: Option<RunResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> PdStatus {
    match err {
        Error::Deck(_) | Error::Io { .. } => PdStatus::Deck,
        Error::Geometry(_)
        | Error::Horizon(_)
        | Error::Parameter(_)
        | Error::Dimension(_)
        | Error::ZeroLengthBond(..) => PdStatus::Input,
        _ => PdStatus::Numerical,
    }
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), PdStatus>) -> PdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {message}"));
            PdStatus::Panic
        }
    }
}

fn fail(err: Error) -> PdStatus {
    set_error(err.to_string());
    status_of(&err)
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PdStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(PdStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PdStatus::InvalidUtf8
    })
}

unsafe fn handle<'a>(sim: *const PdSimulation) -> Result<&'a PdSimulation, PdStatus> {
    sim.as_ref().ok_or_else(|| {
        set_error("null simulation handle");
        PdStatus::NullPointer
    })
}

unsafe fn handle_mut<'a>(sim: *mut PdSimulation) -> Result<&'a mut PdSimulation, PdStatus> {
    sim.as_mut().ok_or_else(|| {
        set_error("null simulation handle");
        PdStatus::NullPointer
    })
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), PdStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(PdStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_to(values: &[f64], buf: *mut f64, len: usize) -> Result<(), PdStatus> {
    if buf.is_null() {
        set_error("null output buffer");
        return Err(PdStatus::NullPointer);
    }
    if len < values.len() {
        set_error(format!("buffer holds {len} values, {} needed", values.len()));
        return Err(PdStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn create(deck: Deck, threads: usize) -> Result<Box<PdSimulation>, PdStatus> {
    let runtime = if threads == 0 { Runtime::from_env() } else { Runtime::new(threads) }.map_err(fail)?;
    let sim = Simulation::from_deck(deck, &runtime).map_err(fail)?;
    Ok(Box::new(PdSimulation {
        runtime,
        sim,
        result: None,
    }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn pd_status_message(status: PdStatus) -> *const c_char {
    let text: &'static str = match status {
        PdStatus::Ok => "ok\0",
        PdStatus::NullPointer => "null pointer argument\0",
        PdStatus::InvalidUtf8 => "invalid UTF-8 string\0",
        PdStatus::Deck => "deck error\0",
        PdStatus::Input => "invalid input\0",
        PdStatus::Numerical => "numerical failure\0",
        PdStatus::BufferTooSmall => "buffer too small\0",
        PdStatus::NotRun => "simulation has not been run\0",
        PdStatus::Panic => "internal panic\0",
    };
    text.as_ptr().cast()
}

/// Loads a deck file and builds a simulation on `threads` workers (0 uses
/// the default). On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_from_file(
    path: *const c_char,
    threads: usize,
    out: *mut *mut PdSimulation,
) -> PdStatus {
    guard(|| {
        let path = read_str(path)?;
        let deck = peridyn::deck::load_deck(Path::new(path)).map_err(|e| fail(e.into()))?;
        let sim = create(deck, threads)?;
        write_out(out, Box::into_raw(sim))
    })
}

/// As [`pd_simulation_from_file`], from YAML text.
///
/// # Safety
/// `yaml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_from_yaml(
    yaml: *const c_char,
    threads: usize,
    out: *mut *mut PdSimulation,
) -> PdStatus {
    guard(|| {
        let text = read_str(yaml)?;
        let deck = Deck::parse(text, &[]).map_err(|e| fail(e.into()))?;
        let sim = create(deck, threads)?;
        write_out(out, Box::into_raw(sim))
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `sim` must come from a constructor of this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_free(sim: *mut PdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_node_count(sim: *const PdSimulation, out: *mut usize) -> PdStatus {
    guard(|| write_out(out, handle(sim)?.sim.body.len()))
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_dim(sim: *const PdSimulation, out: *mut usize) -> PdStatus {
    guard(|| write_out(out, handle(sim)?.sim.body.dim().get()))
}

/// Runs the integrator configured by the deck, replacing earlier results.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_run(sim: *mut PdSimulation) -> PdStatus {
    guard(|| {
        let h = handle_mut(sim)?;
        h.result = None;
        h.result = Some(h.sim.run(&h.runtime).map_err(fail)?);
        Ok(())
    })
}

/// Number of snapshots produced by the last run.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_snapshot_count(sim: *const PdSimulation, out: *mut usize) -> PdStatus {
    guard(|| {
        let h = handle(sim)?;
        write_out(out, h.result.as_ref().map_or(0, |r| r.snapshots.len()))
    })
}

/// Reference positions, three values per node.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_positions(sim: *const PdSimulation, buf: *mut f64, len: usize) -> PdStatus {
    guard(|| {
        let flat: Vec<f64> = handle(sim)?.sim.body.cloud.positions().iter().flatten().copied().collect();
        copy_to(&flat, buf, len)
    })
}

/// Final displacement of the last run, `dim` values per node.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_displacement(sim: *const PdSimulation, buf: *mut f64, len: usize) -> PdStatus {
    guard(|| {
        let h = handle(sim)?;
        let result = h.result.as_ref().ok_or_else(|| {
            set_error("run the simulation first");
            PdStatus::NotRun
        })?;
        copy_to(&result.last().u, buf, len)
    })
}

/// Writes the snapshots of the last run into `dir`.
///
/// # Safety
/// `sim` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pd_simulation_write_outputs(
    sim: *const PdSimulation,
    dir: *const c_char,
    format: PdFormat,
) -> PdStatus {
    guard(|| {
        let h = handle(sim)?;
        let dir = read_str(dir)?;
        let result = h.result.as_ref().ok_or_else(|| {
            set_error("run the simulation first");
            PdStatus::NotRun
        })?;
        let format = match format {
            PdFormat::Csv => OutputFormat::Csv,
            PdFormat::Vtk => OutputFormat::Vtk,
        };
        h.sim.write_outputs(result, Path::new(dir), format, &h.runtime).map_err(fail)?;
        Ok(())
    })
}
