//! C ABI over the semioccam library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`SoStatus`]; on failure a description is available from
//! [`so_last_error_message`] on the same thread until the next call fails.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use semioccam::error::Error;
use semioccam::{dataio, dedup, pca, sgmm, FeatureMatrix, PcaModel, SgmmModel};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    Internal = 6,
    BufferTooSmall = 7,
}

/// Feature rows held on the Rust side.
pub struct SoFeatures(FeatureMatrix);

/// A fitted PCA projection.
pub struct SoPca(PcaModel);

/// A fitted mixture classifier.
pub struct SoModel(SgmmModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SoStatus {
    match e {
        Error::Io { .. } => SoStatus::Io,
        Error::Format(_) | Error::Truncated { .. } => SoStatus::Format,
        Error::Numerical { .. } | Error::DegenerateData(_) => SoStatus::Numerical,
        Error::Stage { source, .. } => status_of(source),
        _ => SoStatus::InvalidArgument,
    }
}

fn fail(status: SoStatus, msg: impl Into<String>) -> SoStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SoStatus>) -> SoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SoStatus::Internal, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SoStatus>;
}

impl<T> OrStatus<T> for semioccam::Result<T> {
    fn or_status(self) -> Result<T, SoStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, SoStatus> {
    if path.is_null() {
        return Err(fail(SoStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(SoStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn out_arg<'a, T>(out: *mut T, name: &str) -> Result<&'a mut T, SoStatus> {
    out.as_mut().ok_or_else(|| fail(SoStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(h: *const T, name: &str) -> Result<&'a T, SoStatus> {
    h.as_ref().ok_or_else(|| fail(SoStatus::NullPointer, format!("{name} is null")))
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn so_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn so_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * d` row-major values into a new feature handle.
///
/// # Safety
/// `values` must point to `n * d` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_features_from_values(
    values: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut SoFeatures,
) -> SoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let len = n.checked_mul(d).ok_or_else(|| fail(SoStatus::InvalidArgument, "n * d overflows"))?;
        if values.is_null() && len > 0 {
            return Err(fail(SoStatus::NullPointer, "values is null"));
        }
        let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        let m = FeatureMatrix::new(n, d, data).or_status()?;
        *out = Box::into_raw(Box::new(SoFeatures(m)));
        Ok(())
    })
}

/// Reads a feature file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_features_read(path: *const c_char, out: *mut *mut SoFeatures) -> SoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = dataio::read_features(path_arg(path)?).or_status()?;
        *out = Box::into_raw(Box::new(SoFeatures(m)));
        Ok(())
    })
}

/// Writes the rows and columns of `features` to `n` and `d`.
///
/// # Safety
/// `features` must be a live handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_features_shape(features: *const SoFeatures, n: *mut usize, d: *mut usize) -> SoStatus {
    guard(|| {
        let f = handle(features, "features")?;
        *out_arg(n, "n")? = f.0.n();
        *out_arg(d, "d")? = f.0.d();
        Ok(())
    })
}

/// Copies all values, row-major, into `buf` of capacity `len` doubles.
///
/// # Safety
/// `features` must be a live handle; `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn so_features_copy(features: *const SoFeatures, buf: *mut f64, len: usize) -> SoStatus {
    guard(|| {
        let f = handle(features, "features")?;
        copy_out(f.0.values(), buf, len)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), SoStatus> {
    if len < src.len() {
        return Err(fail(SoStatus::BufferTooSmall, format!("need {} values, got room for {len}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(fail(SoStatus::NullPointer, "buf is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Releases a feature handle. Null is ignored.
///
/// # Safety
/// `features` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so_features_free(features: *mut SoFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

/// Loads a saved PCA projection.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_pca_read(path: *const c_char, out: *mut *mut SoPca) -> SoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = pca::read_pca(path_arg(path)?).or_status()?;
        *out = Box::into_raw(Box::new(SoPca(m)));
        Ok(())
    })
}

/// Projects `features` into a new handle.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_pca_transform(
    pca_model: *const SoPca,
    features: *const SoFeatures,
    out: *mut *mut SoFeatures,
) -> SoStatus {
    guard(|| {
        let p = handle(pca_model, "pca")?;
        let f = handle(features, "features")?;
        let out = out_arg(out, "out")?;
        let z = pca::transform(&p.0, &f.0).or_status()?;
        *out = Box::into_raw(Box::new(SoFeatures(z)));
        Ok(())
    })
}

/// Releases a PCA handle. Null is ignored.
///
/// # Safety
/// `pca_model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so_pca_free(pca_model: *mut SoPca) {
    if !pca_model.is_null() {
        drop(Box::from_raw(pca_model));
    }
}

/// Loads a saved mixture classifier.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_model_read(path: *const c_char, out: *mut *mut SoModel) -> SoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = sgmm::read_model(path_arg(path)?).or_status()?;
        *out = Box::into_raw(Box::new(SoModel(m)));
        Ok(())
    })
}

/// Number of classes the model predicts.
///
/// # Safety
/// `model` must be a live handle; `n_classes` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so_model_n_classes(model: *const SoModel, n_classes: *mut usize) -> SoStatus {
    guard(|| {
        *out_arg(n_classes, "n_classes")? = handle(model, "model")?.0.n_classes();
        Ok(())
    })
}

/// Writes one class id (1-based) per row of `features` into `classes`,
/// which must hold at least `len` entries.
///
/// # Safety
/// Both handles must be live; `classes` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn so_model_predict(
    model: *const SoModel,
    features: *const SoFeatures,
    classes: *mut u32,
    len: usize,
) -> SoStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let f = handle(features, "features")?;
        let pred = sgmm::predict(&m.0, &f.0).or_status()?;
        if len < pred.len() {
            return Err(fail(SoStatus::BufferTooSmall, format!("need {} entries, got {len}", pred.len())));
        }
        if !pred.is_empty() {
            if classes.is_null() {
                return Err(fail(SoStatus::NullPointer, "classes is null"));
            }
            ptr::copy_nonoverlapping(pred.as_ptr(), classes, pred.len());
        }
        Ok(())
    })
}

/// Writes class posteriors, row-major `n x K`, into `proba` of capacity
/// `len` doubles.
///
/// # Safety
/// Both handles must be live; `proba` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn so_model_predict_proba(
    model: *const SoModel,
    features: *const SoFeatures,
    proba: *mut f64,
    len: usize,
) -> SoStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let f = handle(features, "features")?;
        let p = sgmm::predict_proba(&m.0, &f.0).or_status()?;
        copy_out(p.as_slice(), proba, len)
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so_model_free(model: *mut SoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// SHA-256 of an image given as `height x width x channels` bytes, written
/// to the 32-byte buffer `digest`.
///
/// # Safety
/// `pixels` must point to `width * height * channels` readable bytes;
/// `digest` must have room for 32 bytes.
#[no_mangle]
pub unsafe extern "C" fn so_hash_image(
    pixels: *const u8,
    width: usize,
    height: usize,
    channels: usize,
    digest: *mut u8,
) -> SoStatus {
    guard(|| {
        let len = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| fail(SoStatus::InvalidArgument, "image size overflows"))?;
        if (pixels.is_null() && len > 0) || digest.is_null() {
            return Err(fail(SoStatus::NullPointer, "pixels or digest is null"));
        }
        let data = if len == 0 { &[][..] } else { std::slice::from_raw_parts(pixels, len) };
        let h = dedup::hash_image(data, width, height, channels).or_status()?;
        ptr::copy_nonoverlapping(h.0.as_ptr(), digest, 32);
        Ok(())
    })
}
