//! C interface to `penta-coulomb`.
//!
//! Every function returns a [`PcStatus`]; results travel through out
//! pointers, which are written only on success. After a failure,
//! [`pc_last_error_message`] describes it on the calling thread.
//!
//! Polygons cross the boundary as flat `x₀, y₀, x₁, y₁, …` arrays.
//! Handles are opaque and owned by the caller until passed to their `free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use penta_coulomb::control::{navigate, Trajectory};
use penta_coulomb::moduli::{Configuration, Linkage};
use penta_coulomb::potential::{global_min_convex, ChargeVector};
use penta_coulomb::stabilizer::{stabilize_pentagon, stabilize_quad};
use penta_coulomb::Error;

/// Outcome of a call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLinkage = 3,
    InvalidConfiguration = 4,
    NotRealizable = 5,
    NotConvex = 6,
    BoundaryConfiguration = 7,
    EmptyModuli = 8,
    NonPositiveCharge = 9,
    NongenericLinkage = 10,
    DegenerateGeometry = 11,
    NumericalConditioning = 12,
    NoConvergence = 13,
    ContinuationBreak = 14,
    InvalidPath = 15,
    /// A Rust panic was caught at the boundary; a bug.
    Internal = 99,
}

impl From<&Error> for PcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidLinkage(_) => PcStatus::InvalidLinkage,
            Error::InvalidConfiguration(_) => PcStatus::InvalidConfiguration,
            Error::NotRealizable(_) => PcStatus::NotRealizable,
            Error::NotConvex => PcStatus::NotConvex,
            Error::BoundaryConfiguration(_) | Error::BoundarySlicePoint | Error::NotOnBoundary => {
                PcStatus::BoundaryConfiguration
            }
            Error::EmptySlice { .. } | Error::EmptyModuli => PcStatus::EmptyModuli,
            Error::NonPositiveCharge => PcStatus::NonPositiveCharge,
            Error::NongenericLinkage(_) => PcStatus::NongenericLinkage,
            Error::DegenerateInput | Error::DegenerateDistance { .. } | Error::CoincidentVertices(..) => {
                PcStatus::DegenerateGeometry
            }
            Error::NumericalConditioning(_) => PcStatus::NumericalConditioning,
            Error::NoConvergence(_) => PcStatus::NoConvergence,
            Error::ContinuationBreak { .. } => PcStatus::ContinuationBreak,
            Error::InvalidPath(_) | Error::AdjacentControls(..) => PcStatus::InvalidPath,
            Error::InvalidArgument(_) => PcStatus::InvalidArgument,
        }
    }
}

/// Side lengths of a closed polygonal linkage.
pub struct PcLinkage(Linkage);

/// A navigated trajectory: one convex minimum per charge step.
pub struct PcTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), (PcStatus, String)>) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PcStatus::Internal
        }
    }
}

type Fallible<T> = Result<T, (PcStatus, String)>;

fn lib<T>(r: penta_coulomb::Result<T>) -> Fallible<T> {
    r.map_err(|e| ((&e).into(), e.to_string()))
}

fn null(what: &str) -> (PcStatus, String) {
    (PcStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or points to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Fallible<&'a [f64]> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// As [`slice`], with `2n` doubles.
unsafe fn polygon(p: *const f64, n: usize, what: &str) -> Fallible<Configuration> {
    let xy = slice(p, 2 * n, what)?;
    let v: Vec<[f64; 2]> = xy.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    lib(Configuration::try_from(v))
}

/// # Safety
/// `out` is null or points to `2n` writable doubles.
unsafe fn write_polygon(c: &Configuration, out: *mut f64) {
    for (i, p) in c.vertices().iter().enumerate() {
        *out.add(2 * i) = p[0];
        *out.add(2 * i + 1) = p[1];
    }
}

fn handle<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    // SAFETY: the caller promises a live handle from this library or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a linkage from `n` side lengths.
///
/// # Safety
/// `sides` points to `n` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_linkage_new(sides: *const f64, n: usize, out: *mut *mut PcLinkage) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let l = lib(Linkage::new(slice(sides, n, "sides")?.to_vec()))?;
        *out = Box::into_raw(Box::new(PcLinkage(l)));
        Ok(())
    })
}

/// Releases a linkage. Null is ignored.
///
/// # Safety
/// `linkage` came from [`pc_linkage_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_linkage_free(linkage: *mut PcLinkage) {
    if !linkage.is_null() {
        drop(Box::from_raw(linkage));
    }
}

/// Number of sides.
///
/// # Safety
/// `linkage` is a live handle or null; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_linkage_sides(linkage: *const PcLinkage, out: *mut usize) -> PcStatus {
    guard(|| {
        let l = handle(linkage, "linkage")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = l.0.n();
        Ok(())
    })
}

/// Global minimum of the Coulomb energy over strictly convex configurations,
/// in the canonical frame.
///
/// # Safety
/// `charges` holds one double per side; `vertices_out` has room for two per
/// side; `energy_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_minimize(
    linkage: *const PcLinkage,
    charges: *const f64,
    vertices_out: *mut f64,
    energy_out: *mut f64,
) -> PcStatus {
    guard(|| {
        let l = handle(linkage, "linkage")?;
        let q = lib(ChargeVector::new(slice(charges, l.0.n(), "charges")?.to_vec()))?;
        if vertices_out.is_null() || energy_out.is_null() {
            return Err(null("output"));
        }
        let m = lib(global_min_convex(&l.0, &q))?;
        write_polygon(&m.configuration, vertices_out);
        *energy_out = m.energy;
        Ok(())
    })
}

/// Controlling charges `(s, t)` on vertices five and three that make the
/// given convex pentagon critical, with `fixed` on vertices one, two, four.
///
/// # Safety
/// `vertices` holds 10 doubles, `fixed` 3; `s_out` and `t_out` are writable.
#[no_mangle]
pub unsafe extern "C" fn pc_stabilize_pentagon(
    vertices: *const f64,
    fixed: *const f64,
    s_out: *mut f64,
    t_out: *mut f64,
) -> PcStatus {
    guard(|| {
        let p = polygon(vertices, 5, "vertices")?;
        let f = slice(fixed, 3, "fixed")?;
        if s_out.is_null() || t_out.is_null() {
            return Err(null("output"));
        }
        let sol = lib(stabilize_pentagon(&p, [f[0], f[1], f[2]]))?;
        *s_out = sol.s;
        *t_out = sol.t;
        Ok(())
    })
}

/// Charge `t` that makes the given convex quadrilateral critical.
///
/// # Safety
/// `vertices` holds 8 doubles; `t_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_stabilize_quad(vertices: *const f64, t_out: *mut f64) -> PcStatus {
    guard(|| {
        let p = polygon(vertices, 4, "vertices")?;
        if t_out.is_null() {
            return Err(null("t_out"));
        }
        *t_out = lib(stabilize_quad(&p))?;
        Ok(())
    })
}

/// Steers the convex minimum from `start` to `target` by moving `(s, t)`
/// along a straight segment in `steps` increments.
///
/// # Safety
/// `start` and `target` hold 10 doubles each, `fixed` 3; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_navigate(
    linkage: *const PcLinkage,
    start: *const f64,
    target: *const f64,
    fixed: *const f64,
    steps: usize,
    out: *mut *mut PcTrajectory,
) -> PcStatus {
    guard(|| {
        let l = handle(linkage, "linkage")?;
        let p0 = polygon(start, 5, "start")?;
        let p1 = polygon(target, 5, "target")?;
        let f = slice(fixed, 3, "fixed")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tr = lib(navigate(&l.0, &p0, &p1, [f[0], f[1], f[2]], steps))?;
        *out = Box::into_raw(Box::new(PcTrajectory(tr)));
        Ok(())
    })
}

/// Number of stored steps, including the start.
///
/// # Safety
/// `trajectory` is a live handle or null; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pc_trajectory_len(trajectory: *const PcTrajectory, out: *mut usize) -> PcStatus {
    guard(|| {
        let tr = handle(trajectory, "trajectory")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = tr.0.steps.len();
        Ok(())
    })
}

/// Step `index`: its charges, energy and 10 vertex coordinates.
///
/// # Safety
/// `trajectory` is a live handle or null; outputs are writable and
/// `vertices_out` has room for 10 doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_trajectory_step(
    trajectory: *const PcTrajectory,
    index: usize,
    s_out: *mut f64,
    t_out: *mut f64,
    energy_out: *mut f64,
    vertices_out: *mut f64,
) -> PcStatus {
    guard(|| {
        let tr = handle(trajectory, "trajectory")?;
        let step = tr.0.steps.get(index).ok_or_else(|| {
            (
                PcStatus::InvalidArgument,
                format!("step {index} out of range for {} steps", tr.0.steps.len()),
            )
        })?;
        if s_out.is_null() || t_out.is_null() || energy_out.is_null() || vertices_out.is_null() {
            return Err(null("output"));
        }
        *s_out = step.s;
        *t_out = step.t;
        *energy_out = step.energy;
        write_polygon(&step.configuration, vertices_out);
        Ok(())
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `trajectory` came from [`pc_navigate`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_trajectory_free(trajectory: *mut PcTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}
