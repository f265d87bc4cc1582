//! C ABI for nfkit.
//!
//! Every function returns an [`NfStatus`]; results come back through out
//! pointers. On failure, [`nf_last_error_message`] describes the most recent
//! error on the calling thread. Arrays are opaque handles created by
//! `nf_array_*` constructors and released with [`nf_array_free`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nfkit::channel::{nearfield_steering, AmplitudeModel, ChannelMatrix};
use nfkit::dof::effective_dof;
use nfkit::geometry::{
    fresnel_distance, max_phase_error, rayleigh_distance, ApproxOrder, ArrayGeometry, FieldBoundaries, Region,
};
use nfkit::positioning::{cep, positioning_experiment, square_room_access_points, variance_from_db, Estimator};
use nfkit::{Complex64, NfError, Point2, Point3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericalFailure = 2,
    NullPointer = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfRegion {
    ReactiveNear = 0,
    RadiatingNear = 1,
    Far = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfApprox {
    Linear = 0,
    Parabolic = 1,
}

/// Opaque antenna array.
pub struct NfArray {
    inner: ArrayGeometry,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(NfStatus, String);

impl From<NfError> for Failure {
    fn from(e: NfError) -> Self {
        let status = match e {
            NfError::InvalidArgument(_) => NfStatus::InvalidArgument,
            NfError::NumericalFailure { .. } => NfStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            NfStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a>(a: *const NfArray) -> Result<&'a ArrayGeometry, Failure> {
    a.as_ref().map(|a| &a.inner).ok_or_else(|| null("array"))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `2·D²/λ`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_rayleigh_distance(aperture_m: f64, wavelength_m: f64, out: *mut f64) -> NfStatus {
    guard(|| write(out, rayleigh_distance(aperture_m, wavelength_m)?, "out"))
}

/// `0.62·sqrt(D³/λ)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_fresnel_distance(aperture_m: f64, wavelength_m: f64, out: *mut f64) -> NfStatus {
    guard(|| write(out, fresnel_distance(aperture_m, wavelength_m)?, "out"))
}

/// Field region of `distance_m` for an aperture `aperture_m`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_classify_region(
    distance_m: f64,
    aperture_m: f64,
    wavelength_m: f64,
    out: *mut NfRegion,
) -> NfStatus {
    guard(|| {
        let region = match FieldBoundaries::new(aperture_m, wavelength_m)?.classify(distance_m)? {
            Region::ReactiveNear => NfRegion::ReactiveNear,
            Region::RadiatingNear => NfRegion::RadiatingNear,
            Region::Far => NfRegion::Far,
        };
        write(out, region, "out")
    })
}

fn boxed(out: *mut *mut NfArray, g: ArrayGeometry) -> Result<(), Failure> {
    unsafe { write(out, Box::into_raw(Box::new(NfArray { inner: g })), "out") }
}

/// Uniform linear array along x, centered at the origin, facing +z.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with
/// [`nf_array_free`].
#[no_mangle]
pub unsafe extern "C" fn nf_array_ula(n: usize, spacing_m: f64, out: *mut *mut NfArray) -> NfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(out, ArrayGeometry::ula(n, spacing_m)?)
    })
}

/// Uniform planar array in the xy plane, centered at the origin.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with
/// [`nf_array_free`].
#[no_mangle]
pub unsafe extern "C" fn nf_array_upa(nx: usize, ny: usize, spacing_m: f64, out: *mut *mut NfArray) -> NfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(out, ArrayGeometry::upa(nx, ny, spacing_m)?)
    })
}

/// Releases an array handle. Null is ignored.
///
/// # Safety
/// `array` must be null or a handle from an `nf_array_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn nf_array_free(array: *mut NfArray) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Number of elements.
///
/// # Safety
/// `array` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_array_len(array: *const NfArray, out: *mut usize) -> NfStatus {
    guard(|| write(out, handle(array)?.len(), "out"))
}

/// Largest element-to-element distance.
///
/// # Safety
/// `array` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_array_aperture(array: *const NfArray, out: *mut f64) -> NfStatus {
    guard(|| write(out, handle(array)?.aperture(), "out"))
}

/// Near-field steering vector towards the source `(x, y, z)`, written as
/// separate real and imaginary parts of length `len` (the element count).
///
/// # Safety
/// `array` must be a live handle; `out_re` and `out_im` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nf_nearfield_steering(
    array: *const NfArray,
    x: f64,
    y: f64,
    z: f64,
    wavelength_m: f64,
    free_space: bool,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
) -> NfStatus {
    guard(|| {
        let g = handle(array)?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output buffer"));
        }
        if len < g.len() {
            return Err(Failure(
                NfStatus::BufferTooSmall,
                format!("need {} entries, buffer holds {len}", g.len()),
            ));
        }
        let amplitude = if free_space {
            AmplitudeModel::FreeSpace
        } else {
            AmplitudeModel::Unit
        };
        let h = nearfield_steering(g, &Point3::new(x, y, z), wavelength_m, amplitude)?;
        for (i, v) in h.as_slice().iter().enumerate() {
            *out_re.add(i) = v.re;
            *out_im.add(i) = v.im;
        }
        Ok(())
    })
}

/// Largest phase error of the far-field (linear) or Fresnel (parabolic)
/// approximation for a source at `(x, y, z)`. `order` is an [`NfApprox`]
/// value.
///
/// # Safety
/// `array` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_max_phase_error(
    array: *const NfArray,
    x: f64,
    y: f64,
    z: f64,
    wavelength_m: f64,
    order: u32,
    out: *mut f64,
) -> NfStatus {
    guard(|| {
        let order = match order {
            o if o == NfApprox::Linear as u32 => ApproxOrder::Linear,
            o if o == NfApprox::Parabolic as u32 => ApproxOrder::Parabolic,
            o => {
                return Err(Failure(
                    NfStatus::InvalidArgument,
                    format!("unknown approximation order {o}"),
                ))
            }
        };
        write(
            out,
            max_phase_error(handle(array)?, &Point3::new(x, y, z), wavelength_m, order)?,
            "out",
        )
    })
}

/// Effective DoF of a `rows × cols` complex matrix stored column-major as
/// separate real and imaginary parts.
///
/// # Safety
/// `re` and `im` must be valid for `rows * cols` reads; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_effective_dof(
    re: *const f64,
    im: *const f64,
    rows: usize,
    cols: usize,
    energy_loss: f64,
    out: *mut usize,
) -> NfStatus {
    guard(|| {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(NfStatus::InvalidArgument, "matrix size overflows".into()))?;
        if n == 0 {
            return Err(Failure(NfStatus::InvalidArgument, "matrix is empty".into()));
        }
        let (re, im) = (slice(re, n, "re")?, slice(im, n, "im")?);
        let m =
            nfkit::nalgebra::DMatrix::from_iterator(rows, cols, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));
        write(out, effective_dof(&ChannelMatrix(m), energy_loss)?, "out")
    })
}

/// Circular error probable of `n` planar estimates about their mean.
///
/// # Safety
/// `xs` and `ys` must be valid for `n` reads; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_cep(xs: *const f64, ys: *const f64, n: usize, out: *mut f64) -> NfStatus {
    guard(|| {
        let pts: Vec<Point2> = slice(xs, n, "xs")?
            .iter()
            .zip(slice(ys, n, "ys")?)
            .map(|(&x, &y)| Point2::new(x, y))
            .collect();
        write(out, cep(&pts)?, "out")
    })
}

/// Summary of a positioning Monte Carlo run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NfPositioningSummary {
    pub cep_m: f64,
    pub mean_x_m: f64,
    pub mean_y_m: f64,
}

/// Time-of-arrival positioning in the 6 m square room with four ULA access
/// points of `elements_per_ap` elements, range variance `noise_db_m2`
/// (dB re 1 m²), linearized least-squares fixes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nf_positioning_experiment(
    elements_per_ap: usize,
    spacing_m: f64,
    noise_db_m2: f64,
    trials: usize,
    seed: u64,
    user_x_m: f64,
    user_y_m: f64,
    out: *mut NfPositioningSummary,
) -> NfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let aps = square_room_access_points(elements_per_ap, spacing_m)?;
        let r = positioning_experiment(
            Point2::new(user_x_m, user_y_m),
            &aps,
            variance_from_db(noise_db_m2),
            trials,
            seed,
            Estimator::Linearized,
        )?;
        write(
            out,
            NfPositioningSummary {
                cep_m: r.cep_m,
                mean_x_m: r.mean_estimate.x,
                mean_y_m: r.mean_estimate.y,
            },
            "out",
        )
    })
}
