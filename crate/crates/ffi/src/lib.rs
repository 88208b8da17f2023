//! C ABI for the `iasm` engine.
//!
//! Every function returns an [`IasmStatus`]. On failure the message is
//! kept per thread and can be fetched with [`iasm_last_error`]. Strings
//! handed out by the library must be released with [`iasm_string_free`];
//! handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use libc::c_char;

use iasm::history::Round;
use iasm::load::{check_source, load_program, load_scenario, load_state};
use iasm::runtime::{run, Limits, Machine, RandomEnv, RuntimeError, ScenarioEnv, SilentEnv};
use iasm::service::Reply;
use iasm::structures::Element;
use iasm::syntax::{Diagnostic, Program};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IasmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Program, state or scenario text was rejected.
    Load = 3,
    /// A request was malformed (bad JSON, unknown element, ...).
    Invalid = 4,
    /// The machine is not in the phase the call needs.
    WrongPhase = 5,
    /// The engine panicked; the handle should not be used again.
    Panic = 6,
}

/// A checked, desugared program.
pub struct IasmProgram {
    inner: Arc<Program>,
}

/// A stepping machine driven by the caller.
pub struct IasmMachine {
    inner: Machine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Fail(IasmStatus, String);

impl From<RuntimeError> for Fail {
    fn from(e: RuntimeError) -> Self {
        let code = match e {
            RuntimeError::WrongPhase(_) => IasmStatus::WrongPhase,
            _ => IasmStatus::Invalid,
        };
        Fail(code, e.to_string())
    }
}

impl From<iasm::LoadError> for Fail {
    fn from(e: iasm::LoadError) -> Self {
        Fail(IasmStatus::Load, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IasmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IasmStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            IasmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(IasmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(IasmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(IasmStatus::NullPointer, "output pointer is null".into()));
    }
    *out = CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw();
    Ok(())
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(IasmStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iasm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iasm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Validates a program and writes its diagnostics as a JSON array to
/// `*out_json`. Sets `*out_ok` to 1 when the program has no errors.
///
/// # Safety
/// Pointers must be valid; `source` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iasm_check(source: *const c_char, out_json: *mut *mut c_char, out_ok: *mut i32) -> IasmStatus {
    guard(|| {
        let src = text(source, "source")?;
        let ok = handle(out_ok, "out_ok")?;
        let (diags, good) = match check_source("program", src) {
            Ok(c) => (c.diagnostics, c.program.is_some()),
            Err(e) => (vec![Diagnostic::error(e.span, e.message)], false),
        };
        *ok = i32::from(good);
        put_string(out_json, serde_json::to_string(&diags).expect("diagnostics serialize"))
    })
}

/// Loads a program. Free the result with [`iasm_program_free`].
///
/// # Safety
/// Pointers must be valid; `source` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iasm_program_load(source: *const c_char, out: *mut *mut IasmProgram) -> IasmStatus {
    guard(|| {
        let src = text(source, "source")?;
        if out.is_null() {
            return Err(Fail(IasmStatus::NullPointer, "out is null".into()));
        }
        let p = load_program("program", src)?;
        *out = Box::into_raw(Box::new(IasmProgram { inner: Arc::new(p) }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`iasm_program_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iasm_program_free(p: *mut IasmProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs to the end and writes the text trace to `*out_trace` and the
/// command line exit code (0 halted, 2 failed, 3 stuck, 4 limit) to
/// `*out_exit`. With a scenario the environment is scripted; without one
/// it answers randomly from `true,false` when `use_seed` is nonzero and
/// stays silent otherwise. Zero limits take the defaults.
///
/// # Safety
/// Pointers must be valid; `scenario` may be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn iasm_run(
    program: *const IasmProgram,
    state: *const c_char,
    scenario: *const c_char,
    use_seed: i32,
    seed: u64,
    max_steps: usize,
    max_rounds: usize,
    out_trace: *mut *mut c_char,
    out_exit: *mut i32,
) -> IasmStatus {
    guard(|| {
        let prog = program
            .as_ref()
            .ok_or_else(|| Fail(IasmStatus::NullPointer, "program is null".into()))?;
        let st = load_state("state", text(state, "state")?, &prog.inner)?;
        let exit = handle(out_exit, "out_exit")?;
        let mut env: Box<dyn iasm::runtime::Environment> = if scenario.is_null() {
            if use_seed != 0 {
                Box::new(RandomEnv::new(seed, vec![Element::True, Element::False]))
            } else {
                Box::new(SilentEnv)
            }
        } else {
            Box::new(ScenarioEnv::new(load_scenario(
                "scenario",
                text(scenario, "scenario")?,
                &st,
            )?))
        };
        let limits = limits(max_steps, max_rounds);
        let report = run(Arc::clone(&prog.inner), st, env.as_mut(), limits)?;
        *exit = report.end().exit_code();
        put_string(out_trace, report.trace.render())
    })
}

fn limits(max_steps: usize, max_rounds: usize) -> Limits {
    let d = Limits::default();
    Limits {
        max_steps: if max_steps == 0 { d.max_steps } else { max_steps },
        max_rounds: if max_rounds == 0 { d.max_rounds } else { max_rounds },
    }
}

/// Creates a machine in step 1. Free it with [`iasm_machine_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_new(
    program: *const IasmProgram,
    state: *const c_char,
    max_steps: usize,
    max_rounds: usize,
    out: *mut *mut IasmMachine,
) -> IasmStatus {
    guard(|| {
        let prog = program
            .as_ref()
            .ok_or_else(|| Fail(IasmStatus::NullPointer, "program is null".into()))?;
        if out.is_null() {
            return Err(Fail(IasmStatus::NullPointer, "out is null".into()));
        }
        let st = load_state("state", text(state, "state")?, &prog.inner)?;
        let mut m = Machine::new(Arc::clone(&prog.inner), st, limits(max_steps, max_rounds));
        m.begin_step()?;
        *out = Box::into_raw(Box::new(IasmMachine { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`iasm_machine_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_free(m: *mut IasmMachine) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Writes the machine status as JSON, in the same shape the HTTP service
/// returns.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_status(m: *mut IasmMachine, out_json: *mut *mut c_char) -> IasmStatus {
    guard(|| {
        let m = handle(m, "machine")?;
        put_string(
            out_json,
            serde_json::to_string(&m.inner.status()).expect("status serializes"),
        )
    })
}

fn replies(json: &str) -> Result<Vec<(iasm::Query, Element)>, Fail> {
    let rs: Vec<Reply> = serde_json::from_str(json).map_err(|e| Fail(IasmStatus::Invalid, e.to_string()))?;
    Ok(rs.into_iter().map(|r| (r.query, r.value)).collect())
}

/// Posts one round, given as a JSON array of `{"query", "value"}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_round(m: *mut IasmMachine, replies_json: *const c_char) -> IasmStatus {
    guard(|| {
        let m = handle(m, "machine")?;
        let mut round = Round::new();
        for (q, v) in replies(text(replies_json, "replies")?)? {
            if round.insert(q.clone(), v).is_some() {
                return Err(Fail(IasmStatus::Invalid, format!("{q} answered twice in one round")));
            }
        }
        m.inner.post_round(round)?;
        Ok(())
    })
}

/// Ends the current step as stuck.
///
/// # Safety
/// `m` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_stuck(m: *mut IasmMachine) -> IasmStatus {
    guard(|| {
        handle(m, "machine")?.inner.declare_stuck()?;
        Ok(())
    })
}

/// Delivers late replies (same JSON shape as a round) and starts the next
/// step.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_boundary(m: *mut IasmMachine, deliveries_json: *const c_char) -> IasmStatus {
    guard(|| {
        let m = handle(m, "machine")?;
        let late = replies(text(deliveries_json, "deliveries")?)?;
        m.inner.boundary(late)?;
        m.inner.begin_step()?;
        Ok(())
    })
}

/// Writes the trace so far as text lines.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iasm_machine_trace(m: *mut IasmMachine, out_text: *mut *mut c_char) -> IasmStatus {
    guard(|| {
        let m = handle(m, "machine")?;
        put_string(out_text, m.inner.trace().render())
    })
}
