//! C ABI over the koopdamp core.
//!
//! Objects are opaque handles created by `kd_*_new`/producer functions and released with the
//! matching `kd_*_free`. Every fallible call returns a [`KdStatus`]; on failure the message
//! is available from [`kd_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use koopdamp::control::{control_input, ControllerConfig, DampingController};
use koopdamp::spectral::{build_snapshots, fit, select_oscillatory_mode, Dictionary, Eigenfunction, KoopmanSpectrum, ModeBand};
use koopdamp::thermal::{extract_probe_state, simulate, Scenario, ScenarioConfig, Trajectory};
use koopdamp::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    ModeNotFound = 6,
    Calibration = 7,
    ControllerFault = 8,
    InsufficientData = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Observable dictionary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdDictionary {
    Linear = 0,
    CubicMonomial = 1,
}

pub struct KdScenario {
    inner: Scenario,
}

pub struct KdTrajectory {
    inner: Trajectory,
}

pub struct KdSpectrum {
    inner: KoopmanSpectrum,
}

pub struct KdEigenfunction {
    inner: Eigenfunction,
}

pub struct KdController {
    inner: DampingController,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(e: &Error) -> KdStatus {
    match e {
        Error::Usage(_) => KdStatus::InvalidArgument,
        Error::Config(_) | Error::TomlDe(_) | Error::TomlSer(_) => KdStatus::Config,
        Error::Ingestion(_) | Error::Io(_) | Error::Csv(_) => KdStatus::Io,
        Error::Instability { .. } | Error::Numerical(_) | Error::DegenerateData(_) => KdStatus::Numerical,
        Error::ModeNotFound { .. } => KdStatus::ModeNotFound,
        Error::Calibration { .. } => KdStatus::Calibration,
        Error::ControllerFault(_) => KdStatus::ControllerFault,
        Error::UndefinedMetric(_) | Error::InsufficientData(_) => KdStatus::InsufficientData,
        Error::Stage { source, .. } => status_of(source),
    }
}

enum Fail {
    Core(Error),
    Status(KdStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null() -> Fail {
    Fail::Status(KdStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Status(KdStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KdStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            KdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`) and returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The built-in room scenario.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn kd_scenario_default(out: *mut *mut KdScenario) -> KdStatus {
    guard(|| put(out, KdScenario { inner: ScenarioConfig::default().resolve()? }))
}

/// Scenario from TOML text; omitted keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn kd_scenario_from_toml(toml: *const c_char, out: *mut *mut KdScenario) -> KdStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|_| invalid("scenario text is not UTF-8"))?;
        put(out, KdScenario { inner: ScenarioConfig::from_toml_str(text)?.resolve()? })
    })
}

/// Sampling period `h` of the scenario, s.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_scenario_sample_period(scenario: *const KdScenario, out: *mut f64) -> KdStatus {
    guard(|| {
        let s = deref(scenario)?;
        if out.is_null() {
            return Err(null());
        }
        *out = s.inner.sample_period_s;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_scenario_free(scenario: *mut KdScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Open-loop run when `controller` is null, closed-loop otherwise.
///
/// # Safety
/// `scenario` must be a live handle, `controller` null or a live handle, `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn kd_simulate(
    scenario: *const KdScenario,
    controller: *mut KdController,
    out: *mut *mut KdTrajectory,
) -> KdStatus {
    guard(|| {
        let s = deref(scenario)?;
        let output = match controller.as_mut() {
            Some(c) => simulate(&s.inner, Some(&mut c.inner))?,
            None => simulate(&s.inner, None)?,
        };
        put(out, KdTrajectory { inner: output.trajectory })
    })
}

/// Number of samples.
///
/// # Safety
/// `traj` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_trajectory_len(traj: *const KdTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Which block of a trajectory to copy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdSeries {
    /// `len` values.
    Times = 0,
    /// `4 len` values, row-major, set-point detrended.
    States = 1,
    /// `4 len` values, row-major, W/m^3.
    Inputs = 2,
    /// `4 len` values, row-major, deg.C.
    ProbeTemps = 3,
}

/// Copies a series into `buf` of capacity `cap` doubles.
///
/// # Safety
/// `traj` must be a live handle and `buf` point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kd_trajectory_copy(traj: *const KdTrajectory, series: KdSeries, buf: *mut f64, cap: usize) -> KdStatus {
    guard(|| {
        let t = &deref(traj)?.inner;
        let rows: &[[f64; 4]] = match series {
            KdSeries::Times => {
                if cap < t.len() {
                    return Err(Fail::Status(KdStatus::BufferTooSmall, format!("need {} doubles", t.len())));
                }
                slice_mut(buf, t.len())?.copy_from_slice(&t.times);
                return Ok(());
            }
            KdSeries::States => &t.states,
            KdSeries::Inputs => &t.inputs,
            KdSeries::ProbeTemps => &t.probe_temps,
        };
        let need = rows.len() * 4;
        if cap < need {
            return Err(Fail::Status(KdStatus::BufferTooSmall, format!("need {need} doubles")));
        }
        let dst = slice_mut(buf, need)?;
        for (chunk, r) in dst.chunks_exact_mut(4).zip(rows) {
            chunk.copy_from_slice(r);
        }
        Ok(())
    })
}

/// `(integral over [0, t_end] of u_channel^2 dt)^(1/2)`.
///
/// # Safety
/// `traj` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_trajectory_energy_norm(traj: *const KdTrajectory, channel: usize, t_end: f64, out: *mut f64) -> KdStatus {
    guard(|| {
        let t = &deref(traj)?.inner;
        if channel >= 4 {
            return Err(invalid(format!("channel {channel} out of range")));
        }
        if out.is_null() {
            return Err(null());
        }
        *out = t.energy_norm(channel, t_end);
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_trajectory_free(traj: *mut KdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// EDMD over the records with `t0 <= t <= t1`, detrended as the scenario specifies.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_fit(
    scenario: *const KdScenario,
    traj: *const KdTrajectory,
    dictionary: KdDictionary,
    t0: f64,
    t1: f64,
    svd_tolerance: f64,
    out: *mut *mut KdSpectrum,
) -> KdStatus {
    guard(|| {
        let s = &deref(scenario)?.inner;
        let w = deref(traj)?.inner.window(t0, t1);
        let x = extract_probe_state(&w, s.detrend)?;
        let snaps = build_snapshots(&w.times, &x, s.sample_period_s)?;
        let dict = match dictionary {
            KdDictionary::Linear => Dictionary::linear(4),
            KdDictionary::CubicMonomial => Dictionary::cubic(4),
        };
        put(out, KdSpectrum { inner: fit(&snaps, &dict, svd_tolerance)? })
    })
}

/// # Safety
/// `spectrum` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_spectrum_len(spectrum: *const KdSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.inner.len())
}

/// Continuous-time eigenvalue `nu_j`, 1/s.
///
/// # Safety
/// `spectrum` must be a live handle and `re`, `im` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_spectrum_eigenvalue(spectrum: *const KdSpectrum, j: usize, re: *mut f64, im: *mut f64) -> KdStatus {
    guard(|| {
        let s = &deref(spectrum)?.inner;
        let nu = *s.continuous_eigenvalues.get(j).ok_or_else(|| invalid(format!("mode {j} out of range")))?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        *re = nu.re;
        *im = nu.im;
        Ok(())
    })
}

/// Least-damped mode with period in `[period_min_s, period_max_s]` and `|Re nu| <= max_damping`.
///
/// # Safety
/// `spectrum` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_spectrum_select_mode(
    spectrum: *const KdSpectrum,
    period_min_s: f64,
    period_max_s: f64,
    max_damping: f64,
    out: *mut *mut KdEigenfunction,
) -> KdStatus {
    guard(|| {
        let s = &deref(spectrum)?.inner;
        let band = ModeBand { period_min_s, period_max_s, max_damping };
        put(out, KdEigenfunction { inner: select_oscillatory_mode(s, band)? })
    })
}

/// # Safety
/// `spectrum` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_spectrum_free(spectrum: *mut KdSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// `phi(x)` for a state of dimension `n`.
///
/// # Safety
/// `ef` must be a live handle, `x` point to `n` doubles, `re` and `im` be valid.
#[no_mangle]
pub unsafe extern "C" fn kd_eigenfunction_eval(ef: *const KdEigenfunction, x: *const f64, n: usize, re: *mut f64, im: *mut f64) -> KdStatus {
    guard(|| {
        let ef = &deref(ef)?.inner;
        if n != ef.n() {
            return Err(invalid(format!("state has dimension {n}, eigenfunction expects {}", ef.n())));
        }
        let z = ef.eval(slice(x, n)?);
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Eigenvalue `nu` of the eigenfunction, 1/s.
///
/// # Safety
/// `ef` must be a live handle and `re`, `im` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_eigenfunction_eigenvalue(ef: *const KdEigenfunction, re: *mut f64, im: *mut f64) -> KdStatus {
    guard(|| {
        let ef = &deref(ef)?.inner;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        *re = ef.nu.re;
        *im = ef.nu.im;
        Ok(())
    })
}

/// # Safety
/// `ef` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_eigenfunction_free(ef: *mut KdEigenfunction) {
    if !ef.is_null() {
        drop(Box::from_raw(ef));
    }
}

/// Damping controller with identity input matrix. The eigenfunction is copied.
///
/// # Safety
/// `ef` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kd_controller_new(
    ef: *const KdEigenfunction,
    d: f64,
    u_max: f64,
    phi_floor: f64,
    out: *mut *mut KdController,
) -> KdStatus {
    guard(|| {
        let ef = deref(ef)?.inner.clone();
        let cfg = ControllerConfig::identity(ef, d, u_max, phi_floor)?;
        put(out, KdController { inner: DampingController::new(cfg)? })
    })
}

/// Clamped feedback input `u(x)`; `x` has 4 entries and `u` room for 4.
///
/// # Safety
/// `ctrl` must be a live handle, `x` point to 4 doubles and `u` to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kd_controller_input(ctrl: *const KdController, x: *const f64, u: *mut f64) -> KdStatus {
    guard(|| {
        let c = &deref(ctrl)?.inner;
        let v = control_input(&c.cfg, slice(x, 4)?)?;
        slice_mut(u, 4)?.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// # Safety
/// `ctrl` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_controller_free(ctrl: *mut KdController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}
