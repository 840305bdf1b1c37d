//! C interface to the conformal-measure toolkit.
//!
//! The binding follows the usual C conventions: opaque handles created
//! and released by paired functions, integer status codes for every
//! fallible call, results written through caller-provided out
//! pointers, and a thread-local message describing the most recent
//! failure. The generated header lives in `include/conflab.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conflab::conformal::{
    atomic_periodic, existence_check, spectrum_scan, ExistenceVerdict, PeriodicOutcome,
    SpectrumShape,
};
use conflab::dynsys::{DynSystem, Point, RotationNumber};
use conflab::kms_finite::FiniteOrbitModel;
use conflab::potential::{Potential, TrigPoly};
use conflab::Error;

/// Status code returned by every fallible call. `Ok` is zero; anything
/// else leaves a description in `conflab_last_error`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was outside its domain (bad coordinate, empty list,
    /// malformed grid, unknown name).
    InvalidArgument = 2,
    /// A construction condition failed (for example a non-telescoping
    /// loop sum).
    ConstraintViolated = 3,
    /// The orbit does not close at the requested period.
    NotPeriodic = 4,
    /// The requested computation exceeds the precision mode.
    PrecisionExceeded = 5,
    /// The criterion does not apply to this system.
    Inapplicable = 6,
    /// A numeric search failed to converge or bracket.
    NumericFailure = 7,
    /// An unexpected internal failure (including caught panics).
    Internal = 8,
}

/// Opaque handle to a dynamical system.
pub struct ConflabSystem(DynSystem);

/// Opaque handle to a potential.
pub struct ConflabPotential(Potential);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> ConflabStatus {
    match err {
        Error::Config { .. }
        | Error::InvalidCoordinate { .. }
        | Error::SpaceMismatch { .. }
        | Error::RationalRotation { .. } => ConflabStatus::InvalidArgument,
        Error::ConstraintViolation { .. } => ConflabStatus::ConstraintViolated,
        Error::NotPeriodic { .. } => ConflabStatus::NotPeriodic,
        Error::PrecisionExceeded { .. } => ConflabStatus::PrecisionExceeded,
        Error::CriterionInapplicable(_) => ConflabStatus::Inapplicable,
        Error::NoSolution { .. } | Error::BracketFailed { .. } => ConflabStatus::NumericFailure,
        _ => ConflabStatus::Internal,
    }
}

fn fail(err: &Error) -> ConflabStatus {
    let status = status_of(err);
    set_error(err.to_string());
    status
}

/// Run `f` with a panic guard; a caught panic becomes `Internal`.
fn guarded(f: impl FnOnce() -> ConflabStatus) -> ConflabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            ConflabStatus::Internal
        }
    }
}

fn guarded_ptr<T>(f: impl FnOnce() -> Option<*mut T>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Some(p)) => p,
        Ok(None) => ptr::null_mut(),
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Map a raw coordinate onto the system's space: circle and interval
/// points take the coordinate directly, finite cycles round it to the
/// 1-based orbit index.
fn point_for(system: &DynSystem, x: f64) -> Result<Point, Error> {
    match system {
        DynSystem::FiniteCycle { period } => {
            let idx = x.round();
            if !(1.0..=f64::from(*period)).contains(&idx) {
                return Err(Error::InvalidCoordinate {
                    space: "cycle",
                    detail: format!("{x} is not a 1-based point index for a {period}-cycle"),
                });
            }
            Point::cycle(*period, idx as u32)
        }
        DynSystem::SquaringMap => Point::interval(x),
        _ => Ok(Point::circle(x)),
    }
}

/// Copy the most recent error message into `buffer` (NUL-terminated,
/// truncated to `capacity` bytes) and return the full message length in
/// bytes, excluding the terminator. A zero return means no error has
/// been recorded on this thread.
///
/// # Safety
///
/// `buffer` must point to at least `capacity` writable bytes, or be
/// null (in which case only the length is returned).
#[no_mangle]
pub unsafe extern "C" fn conflab_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
                *buffer.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Create an irrational-rotation system. `name` selects the rotation
/// number: `"golden"` or `"silver"`. Returns null (and sets the error
/// message) on an unknown name.
///
/// # Safety
///
/// `name` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn conflab_system_rotation(name: *const c_char) -> *mut ConflabSystem {
    guarded_ptr(|| {
        if name.is_null() {
            set_error("rotation name pointer is null");
            return None;
        }
        let text = match unsafe { CStr::from_ptr(name) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("rotation name is not valid UTF-8");
                return None;
            }
        };
        let number = match text {
            "golden" => RotationNumber::golden(),
            "silver" => RotationNumber::silver(),
            other => {
                set_error(format!("unknown rotation '{other}': expected golden or silver"));
                return None;
            }
        };
        Some(Box::into_raw(Box::new(ConflabSystem(DynSystem::rotation(number)))))
    })
}

/// Create a finite-cycle system on `period` points. Returns null when
/// `period` is zero.
#[no_mangle]
pub extern "C" fn conflab_system_finite_cycle(period: u32) -> *mut ConflabSystem {
    guarded_ptr(|| match DynSystem::finite_cycle(period) {
        Ok(sys) => Some(Box::into_raw(Box::new(ConflabSystem(sys)))),
        Err(err) => {
            fail(&err);
            None
        }
    })
}

/// Create the squaring-map system on the unit interval.
#[no_mangle]
pub extern "C" fn conflab_system_squaring() -> *mut ConflabSystem {
    guarded_ptr(|| Some(Box::into_raw(Box::new(ConflabSystem(DynSystem::squaring())))))
}

/// Release a system handle. A null pointer is ignored.
///
/// # Safety
///
/// `system` must be a pointer previously returned by a
/// `conflab_system_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conflab_system_free(system: *mut ConflabSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// Create the constant potential F = value.
#[no_mangle]
pub extern "C" fn conflab_potential_constant(value: f64) -> *mut ConflabPotential {
    guarded_ptr(|| Some(Box::into_raw(Box::new(ConflabPotential(Potential::Constant(value))))))
}

/// Create F(x) = amplitude·cos(2π·frequency·x).
#[no_mangle]
pub extern "C" fn conflab_potential_cosine(
    frequency: u32,
    amplitude: f64,
) -> *mut ConflabPotential {
    guarded_ptr(|| {
        Some(Box::into_raw(Box::new(ConflabPotential(Potential::TrigPoly(
            TrigPoly::cosine(frequency, amplitude),
        )))))
    })
}

/// Create F(x) = amplitude·sin(2π·frequency·x).
#[no_mangle]
pub extern "C" fn conflab_potential_sine(
    frequency: u32,
    amplitude: f64,
) -> *mut ConflabPotential {
    guarded_ptr(|| {
        Some(Box::into_raw(Box::new(ConflabPotential(Potential::TrigPoly(
            TrigPoly::sine(frequency, amplitude),
        )))))
    })
}

/// Create the coboundary potential F = H∘φ − H from a transfer
/// function H. Takes ownership of `transfer`, which must not be used
/// or freed afterwards. Returns null when `transfer` is null.
///
/// # Safety
///
/// `transfer` must be a pointer previously returned by a
/// `conflab_potential_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conflab_potential_coboundary(
    transfer: *mut ConflabPotential,
) -> *mut ConflabPotential {
    guarded_ptr(|| {
        if transfer.is_null() {
            set_error("transfer potential pointer is null");
            return None;
        }
        let inner = unsafe { Box::from_raw(transfer) }.0;
        Some(Box::into_raw(Box::new(ConflabPotential(Potential::coboundary(inner)))))
    })
}

/// Create a potential from explicit values on a finite cycle:
/// `values[i]` is F at the 1-based point i+1. Returns null when the
/// list is null or empty.
///
/// # Safety
///
/// `values` must point to `count` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn conflab_potential_cycle_values(
    values: *const f64,
    count: usize,
) -> *mut ConflabPotential {
    guarded_ptr(|| {
        if values.is_null() || count == 0 {
            set_error("cycle values must be a non-empty array");
            return None;
        }
        let v = unsafe { std::slice::from_raw_parts(values, count) }.to_vec();
        Some(Box::into_raw(Box::new(ConflabPotential(Potential::from_cycle_values(v)))))
    })
}

/// Release a potential handle. A null pointer is ignored.
///
/// # Safety
///
/// `potential` must be a pointer previously returned by a
/// `conflab_potential_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conflab_potential_free(potential: *mut ConflabPotential) {
    if !potential.is_null() {
        drop(unsafe { Box::from_raw(potential) });
    }
}

/// Test for an e^{βF}-conformal measure at one inverse temperature.
/// Writes 0 (holds), 1 (fails) or 2 (inconclusive) to `out_verdict`.
/// `x` seeds the orbit; see `conflab_spectrum_classify` for the
/// coordinate conventions.
///
/// # Safety
///
/// `system` and `potential` must be live handles from this library and
/// `out_verdict` must point to a writable int.
#[no_mangle]
pub unsafe extern "C" fn conflab_existence_check(
    system: *const ConflabSystem,
    potential: *const ConflabPotential,
    x: f64,
    beta: f64,
    horizon: u64,
    tolerance: f64,
    out_verdict: *mut c_int,
) -> ConflabStatus {
    guarded(|| {
        if system.is_null() || potential.is_null() || out_verdict.is_null() {
            set_error("existence check received a null argument");
            return ConflabStatus::NullArgument;
        }
        let sys = unsafe { &(*system).0 };
        let pot = unsafe { &(*potential).0 };
        let seed = match point_for(sys, x) {
            Ok(p) => p,
            Err(err) => return fail(&err),
        };
        match existence_check(sys, pot, &seed, beta, horizon as usize, tolerance) {
            Ok(report) => {
                let code = match report.verdict {
                    ExistenceVerdict::Holds => 0,
                    ExistenceVerdict::Fails => 1,
                    ExistenceVerdict::Inconclusive => 2,
                };
                unsafe { *out_verdict = code };
                ConflabStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Scan a β grid and classify the set of inverse temperatures that
/// admit a conformal measure. Writes one of 0 (only β = 0), 1 (the
/// nonnegative ray), 2 (the nonpositive ray), 3 (the whole line) to
/// `out_shape`. The grid must contain zero and both signs. The seed
/// coordinate `x` is a circle coordinate in [0, 1) for rotations, an
/// interval coordinate in [0, 1] for the squaring map, and a 1-based
/// point index for finite cycles.
///
/// # Safety
///
/// `system` and `potential` must be live handles, `betas` must point
/// to `beta_count` readable doubles, and `out_shape` must point to a
/// writable int.
#[no_mangle]
pub unsafe extern "C" fn conflab_spectrum_classify(
    system: *const ConflabSystem,
    potential: *const ConflabPotential,
    betas: *const f64,
    beta_count: usize,
    x: f64,
    horizon: u64,
    tolerance: f64,
    out_shape: *mut c_int,
) -> ConflabStatus {
    guarded(|| {
        if system.is_null() || potential.is_null() || betas.is_null() || out_shape.is_null() {
            set_error("spectrum scan received a null argument");
            return ConflabStatus::NullArgument;
        }
        if beta_count == 0 {
            set_error("the β grid is empty");
            return ConflabStatus::InvalidArgument;
        }
        let sys = unsafe { &(*system).0 };
        let pot = unsafe { &(*potential).0 };
        let grid = unsafe { std::slice::from_raw_parts(betas, beta_count) };
        let seed = match point_for(sys, x) {
            Ok(p) => p,
            Err(err) => return fail(&err),
        };
        match spectrum_scan(sys, pot, grid, &[seed], horizon as usize, tolerance) {
            Ok(verdict) => {
                let code = match verdict.classification {
                    SpectrumShape::ZeroOnly => 0,
                    SpectrumShape::NonnegRay => 1,
                    SpectrumShape::NonposRay => 2,
                    SpectrumShape::FullLine => 3,
                };
                unsafe { *out_shape = code };
                ConflabStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Build the exact conformal measure on a periodic orbit and write its
/// `period` weights (ordered along the orbit from the seed) to
/// `out_weights`. Fails with `ConstraintViolated` when the loop sum of
/// the potential does not telescope.
///
/// # Safety
///
/// `system` and `potential` must be live handles and `out_weights`
/// must point to at least `period` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn conflab_periodic_weights(
    system: *const ConflabSystem,
    potential: *const ConflabPotential,
    x: f64,
    period: u32,
    beta: f64,
    out_weights: *mut f64,
) -> ConflabStatus {
    guarded(|| {
        if system.is_null() || potential.is_null() || out_weights.is_null() {
            set_error("periodic construction received a null argument");
            return ConflabStatus::NullArgument;
        }
        let sys = unsafe { &(*system).0 };
        let pot = unsafe { &(*potential).0 };
        let seed = match point_for(sys, x) {
            Ok(p) => p,
            Err(err) => return fail(&err),
        };
        match atomic_periodic(sys, pot, &seed, period, beta) {
            Ok(PeriodicOutcome::Measure(m)) => {
                for k in 0..period as usize {
                    unsafe { *out_weights.add(k) = m.weight(k) };
                }
                ConflabStatus::Ok
            }
            Ok(PeriodicOutcome::NotCyclic { period, defect }) => {
                set_error(format!(
                    "the potential does not telescope around the {period}-cycle \
                     (loop sum {defect:e}); no conformal measure exists at β ≠ 0"
                ));
                ConflabStatus::ConstraintViolated
            }
            Err(err) => fail(&err),
        }
    })
}

/// Compute the Gibbs weights e^{−β·H_jj}/Z of the finite-orbit matrix
/// model built from `count` potential values around a cycle, writing
/// `count` doubles to `out_weights`. The values must sum to zero (the
/// cyclic condition); anything else is `ConstraintViolated`.
///
/// # Safety
///
/// `f_values` must point to `count` readable doubles and `out_weights`
/// to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn conflab_gibbs_weights(
    f_values: *const f64,
    count: usize,
    beta: f64,
    out_weights: *mut f64,
) -> ConflabStatus {
    guarded(|| {
        if f_values.is_null() || out_weights.is_null() {
            set_error("Gibbs weights received a null argument");
            return ConflabStatus::NullArgument;
        }
        let values = unsafe { std::slice::from_raw_parts(f_values, count) }.to_vec();
        let model = match FiniteOrbitModel::new(values) {
            Ok(m) => m,
            Err(err) => return fail(&err),
        };
        match model.gibbs_state(beta) {
            Ok(state) => {
                for (k, w) in state.weights.iter().enumerate() {
                    unsafe { *out_weights.add(k) = *w };
                }
                ConflabStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Measure the worst equilibrium-identity defect of the Gibbs state
/// over `trials` random operator pairs and write it to `out_residual`.
/// Exact states give values at rounding level (≤ 1e-10).
///
/// # Safety
///
/// `f_values` must point to `count` readable doubles and
/// `out_residual` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn conflab_kms_residual(
    f_values: *const f64,
    count: usize,
    beta: f64,
    trials: u32,
    seed: u64,
    out_residual: *mut f64,
) -> ConflabStatus {
    guarded(|| {
        if f_values.is_null() || out_residual.is_null() {
            set_error("residual measurement received a null argument");
            return ConflabStatus::NullArgument;
        }
        let values = unsafe { std::slice::from_raw_parts(f_values, count) }.to_vec();
        let model = match FiniteOrbitModel::new(values) {
            Ok(m) => m,
            Err(err) => return fail(&err),
        };
        match model.kms_residual_random(beta, trials as usize, seed) {
            Ok(worst) => {
                unsafe { *out_residual = worst };
                ConflabStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}
