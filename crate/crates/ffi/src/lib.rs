//! C ABI for `signal_mpc`.
//!
//! Every function returns an [`SmpcStatus`]; on failure a human-readable
//! message is available from [`smpc_last_error`] on the same thread. Objects
//! cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Controls are passed flat: node by node, phase
//! weights in phase order, as many entries as `smpc_network_dims` reports
//! for `controls`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use signal_mpc::controllers::{make_controller, Controller, ControllerId, OneStepConfig};
use signal_mpc::identification::{run_identification, IdentificationConfig, SimulatedPlant};
use signal_mpc::network::generators::make_paper_grid;
use signal_mpc::scenario::{parse_config, run_scenario_to, OutputPaths};
use signal_mpc::{
    check_demand_feasible, step, ControlVector, DemandVector, Error, Network, NetworkConfig, ParameterBounds,
    QueueState,
};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidNetwork = 4,
    InvalidConfig = 5,
    IdentificationAborted = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Controller selector for [`smpc_controller_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpcControllerKind {
    OneStepMpc = 0,
    MaxPressure = 1,
    PropFair = 2,
    FixedTime = 3,
}

impl From<SmpcControllerKind> for ControllerId {
    fn from(k: SmpcControllerKind) -> Self {
        match k {
            SmpcControllerKind::OneStepMpc => ControllerId::OneStepMpc,
            SmpcControllerKind::MaxPressure => ControllerId::MaxPressure,
            SmpcControllerKind::PropFair => ControllerId::PropFair,
            SmpcControllerKind::FixedTime => ControllerId::FixedTime,
        }
    }
}

/// An immutable traffic network.
pub struct SmpcNetwork {
    net: Network,
}

/// A feedback controller bound to the network it was created for.
pub struct SmpcController {
    net: Network,
    inner: Box<dyn Controller>,
}

/// Outcome of [`smpc_identify`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SmpcIdentifyReport {
    /// Plant steps taken.
    pub steps: usize,
    /// Nonzero when every target was identified.
    pub completed: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SmpcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension { .. } => SmpcStatus::DimensionMismatch,
            Error::Structure(_) => SmpcStatus::InvalidNetwork,
            Error::InvalidControl(_) | Error::InvalidInput(_) => SmpcStatus::InvalidArgument,
            Error::Numerical(_) => SmpcStatus::Numerical,
            Error::Identification(_) | Error::HorizonTooShort { .. } => SmpcStatus::IdentificationAborted,
            Error::Config { .. } | Error::Parse(_) => SmpcStatus::InvalidConfig,
            Error::Csv(_) | Error::Io(_) => SmpcStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> SmpcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SmpcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SmpcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SmpcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(SmpcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

fn expect_len(what: &'static str, expected: usize, got: usize) -> Outcome {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got }.into())
    }
}

unsafe fn new_handle<T>(out: *mut *mut T, make: impl FnOnce() -> Result<T, Failure>) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(make()?)));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn smpc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smpc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The 2×2 experiment grid.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_grid(out: *mut *mut SmpcNetwork) -> SmpcStatus {
    guard(|| new_handle(out, || Ok(SmpcNetwork { net: make_paper_grid() })))
}

/// Builds a network from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_from_json(json: *const c_char, out: *mut *mut SmpcNetwork) -> SmpcStatus {
    guard(|| {
        new_handle(out, || {
            let net = NetworkConfig::from_json(text(json, "json")?)?.build()?;
            Ok(SmpcNetwork { net })
        })
    })
}

/// Releases a network. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_free(net: *mut SmpcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Sizes of the network's vectors: nodes, movements, flat controls, entry
/// links and exit links. Any output pointer may be null.
///
/// # Safety
/// `net` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_dims(
    net: *const SmpcNetwork,
    nodes: *mut usize,
    movements: *mut usize,
    controls: *mut usize,
    entry_links: *mut usize,
    exit_links: *mut usize,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        for (p, v) in [
            (nodes, n.num_nodes()),
            (movements, n.num_movements()),
            (controls, n.num_controls()),
            (entry_links, n.entry_links().len()),
            (exit_links, n.exit_links().len()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Number of phases at node `node`.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_num_phases(net: *const SmpcNetwork, node: usize, out: *mut usize) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        if node >= n.num_nodes() {
            return Err(Failure(SmpcStatus::InvalidArgument, format!("node {node} out of range")));
        }
        write_out(out, n.num_phases(node), "out")
    })
}

/// True saturation rates and turn ratios, one per movement. Either output
/// may be null.
///
/// # Safety
/// `net` must be a live handle; non-null outputs must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn smpc_network_parameters(
    net: *const SmpcNetwork,
    saturation: *mut f64,
    turn_ratio: *mut f64,
    len: usize,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        expect_len("parameter buffer", n.num_movements(), len)?;
        if !saturation.is_null() {
            slice_mut(saturation, len, "saturation")?.copy_from_slice(n.saturation());
        }
        if !turn_ratio.is_null() {
            slice_mut(turn_ratio, len, "turn_ratio")?.copy_from_slice(n.turn_ratio());
        }
        Ok(())
    })
}

/// One step of the queue dynamics. `exit_volume` may be null.
///
/// # Safety
/// `net` must be a live handle and every non-null buffer must hold the
/// stated number of values.
#[no_mangle]
pub unsafe extern "C" fn smpc_step(
    net: *const SmpcNetwork,
    queues: *const f64,
    num_movements: usize,
    control: *const f64,
    num_controls: usize,
    demand: *const f64,
    num_entries: usize,
    next_queues: *mut f64,
    exit_volume: *mut f64,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        let x = QueueState::new(n, slice(queues, num_movements, "queues")?.to_vec())?;
        let u = ControlVector::from_flat(n, slice(control, num_controls, "control")?)?;
        let d = DemandVector::new(n, slice(demand, num_entries, "demand")?.to_vec())?;
        let next = step(n, &x, &u, &d)?;
        slice_mut(next_queues, num_movements, "next_queues")?.copy_from_slice(&next.queues);
        if !exit_volume.is_null() {
            slice_mut(exit_volume, next.exit_volume.len(), "exit_volume")?.copy_from_slice(&next.exit_volume);
        }
        Ok(())
    })
}

/// Whether `demand` lies strictly inside the stabilizable region. `margin`
/// receives the smallest slack and `witness`, when non-null, a control
/// achieving it (left untouched when infeasible).
///
/// # Safety
/// `net` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn smpc_check_feasible(
    net: *const SmpcNetwork,
    demand: *const f64,
    num_entries: usize,
    feasible: *mut i32,
    margin: *mut f64,
    witness: *mut f64,
    num_controls: usize,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        let d = DemandVector::new(n, slice(demand, num_entries, "demand")?.to_vec())?;
        let cert = check_demand_feasible(n, &d)?;
        write_out(feasible, i32::from(cert.feasible), "feasible")?;
        if !margin.is_null() {
            margin.write(cert.margin);
        }
        if let (false, Some(w)) = (witness.is_null(), cert.witness.as_ref()) {
            expect_len("witness buffer", n.num_controls(), num_controls)?;
            slice_mut(witness, num_controls, "witness")?.copy_from_slice(&w.to_flat());
        }
        Ok(())
    })
}

/// Creates a controller for `net`. `seed` drives the restarts of the
/// one-step MPC solver and is ignored by the other controllers.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smpc_controller_new(
    net: *const SmpcNetwork,
    kind: SmpcControllerKind,
    seed: u64,
    out: *mut *mut SmpcController,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        new_handle(out, || {
            let config = OneStepConfig { seed, ..OneStepConfig::default() };
            let inner = make_controller(kind.into(), n, &config)?;
            Ok(SmpcController { net: n.clone(), inner })
        })
    })
}

/// Releases a controller. Null is ignored.
///
/// # Safety
/// `ctrl` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smpc_controller_free(ctrl: *mut SmpcController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// The control the controller applies at step `t` from `queues`.
///
/// # Safety
/// `ctrl` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn smpc_controller_control(
    ctrl: *mut SmpcController,
    t: u64,
    queues: *const f64,
    num_movements: usize,
    control: *mut f64,
    num_controls: usize,
) -> SmpcStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let x = QueueState::new(&c.net, slice(queues, num_movements, "queues")?.to_vec())?;
        expect_len("control buffer", c.net.num_controls(), num_controls)?;
        let u = c.inner.control(&c.net, t, &x)?;
        slice_mut(control, num_controls, "control")?.copy_from_slice(&u.to_flat());
        Ok(())
    })
}

/// Identifies saturation rates and internal turn ratios of a simulated
/// plant built on `net`, starting from bounds at `margin` around the truth.
/// The midpoints of the final bounds are written to `saturation` and
/// `turn_ratio` even when the run aborts, in which case the status is
/// `IdentificationAborted` and `report.completed` is zero.
///
/// # Safety
/// `net` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn smpc_identify(
    net: *const SmpcNetwork,
    demand: *const f64,
    num_entries: usize,
    initial_queues: *const f64,
    num_movements: usize,
    margin: f64,
    saturation: *mut f64,
    turn_ratio: *mut f64,
    report: *mut SmpcIdentifyReport,
) -> SmpcStatus {
    guard(|| {
        let n = &handle(net, "net")?.net;
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Failure(
                SmpcStatus::InvalidArgument,
                format!("margin {margin} must be finite and nonnegative"),
            ));
        }
        let d = DemandVector::new(n, slice(demand, num_entries, "demand")?.to_vec())?;
        let x0 = QueueState::new(n, slice(initial_queues, num_movements, "initial_queues")?.to_vec())?;
        let sat = slice_mut(saturation, num_movements, "saturation")?;
        let turn = slice_mut(turn_ratio, num_movements, "turn_ratio")?;
        let prior = ParameterBounds::from_truth_margin(n, d.as_slice(), margin);
        let mut plant = SimulatedPlant::new(n.clone(), d, x0);
        let out = run_identification(&mut plant, &prior, &IdentificationConfig::default())?;
        let b = &out.bounds;
        for m in 0..num_movements {
            sat[m] = 0.5 * (b.saturation_lower[m] + b.saturation_upper[m]);
            turn[m] = 0.5 * (b.turn_lower[m] + b.turn_upper[m]);
        }
        let completed = out.completed();
        write_out(
            report,
            SmpcIdentifyReport { steps: out.telemetry.total_steps, completed: i32::from(completed) },
            "report",
        )?;
        if completed {
            Ok(())
        } else {
            Err(Failure(SmpcStatus::IdentificationAborted, format!("{:?}", out.telemetry.status)))
        }
    })
}

/// Runs a scenario given as JSON text and writes its outputs to `out_dir`.
/// Relative paths inside the scenario resolve against the working directory.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn smpc_run_scenario(config_json: *const c_char, out_dir: *const c_char) -> SmpcStatus {
    guard(|| {
        let cfg = parse_config(text(config_json, "config_json")?)?;
        let dir = Path::new(text(out_dir, "out_dir")?);
        run_scenario_to(&cfg, &OutputPaths::in_dir(dir))?;
        Ok(())
    })
}
