//! C ABI for the ciiqa quality metric.
//!
//! Images and feature vectors are opaque heap handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! [`CiiqaStatus`]; the message of the most recent failure on the calling
//! thread is available from [`ciiqa_last_error`]. Panics never cross the
//! boundary; they surface as `CIIQA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ciiqa::harness::{evaluate_dataset, load_manifest, EvalOptions};
use ciiqa::{build_feature, l1_distance, load_image, score_pair, srgb_to_lab, Error, FeatureVector, NormMode, RgbImage, ScalingParams};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CiiqaStatus {
    Ok = 0,
    NullArg = 1,
    Io = 2,
    Dimension = 3,
    Config = 4,
    Format = 5,
    Layout = 6,
    Degenerate = 7,
    Panic = 8,
}

/// Pipeline parameters. `window` is 0 for center-surround normalization or
/// the odd single-window size (3, 5, 7).
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiiqaParams {
    pub k1: f64,
    pub k2: f64,
    pub cr_threshold: f64,
    pub sigma_floor: f64,
    pub window: u32,
    pub include_approximation: bool,
}

/// Decoded 8-bit RGB image.
pub struct CiiqaImage {
    inner: RgbImage,
}

/// Pooled, scaled feature vector of one image.
pub struct CiiqaFeature {
    inner: FeatureVector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> CiiqaStatus {
    match err {
        Error::NotFound(_) | Error::Io { .. } | Error::MissingFiles(_) => CiiqaStatus::Io,
        Error::UnsupportedFormat { .. } | Error::MalformedDump(_) | Error::Parse { .. } => CiiqaStatus::Format,
        Error::ImageTooSmall { .. }
        | Error::PlaneTooSmall { .. }
        | Error::InconsistentDimensions(_)
        | Error::DimensionMismatch(_) => CiiqaStatus::Dimension,
        Error::LayoutMismatch => CiiqaStatus::Layout,
        Error::InvalidParams(_) => CiiqaStatus::Config,
        Error::DegenerateInput(_) => CiiqaStatus::Degenerate,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), CiiqaStatus>) -> CiiqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CiiqaStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CiiqaStatus::Panic
        }
    }
}

fn fail(err: Error) -> CiiqaStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null_arg(name: &str) -> CiiqaStatus {
    set_error(format!("{name} is null"));
    CiiqaStatus::NullArg
}

fn params_from(p: *const CiiqaParams) -> Result<ScalingParams, CiiqaStatus> {
    // SAFETY: the caller passes null or a pointer to a valid CiiqaParams.
    let Some(p) = (unsafe { p.as_ref() }) else {
        return Ok(ScalingParams::default());
    };
    let mode = match p.window {
        0 => NormMode::CenterSurround,
        k => NormMode::SingleWindow(k as usize),
    };
    let params = ScalingParams {
        k1: p.k1,
        k2: p.k2,
        cr_threshold: p.cr_threshold,
        sigma_floor: p.sigma_floor,
        mode,
        include_approximation: p.include_approximation,
    };
    params.validate().map_err(fail)?;
    Ok(params)
}

unsafe fn path_from(p: *const c_char, name: &str) -> Result<PathBuf, CiiqaStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    // SAFETY: non-null and, per the contract, nul-terminated.
    let s = unsafe { CStr::from_ptr(p) };
    match s.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(format!("{name} is not valid UTF-8"));
            Err(CiiqaStatus::Format)
        }
    }
}

/// Defaults of the reference operating point (K1 = 31, K2 = 3, threshold
/// 0.25, center-surround).
#[no_mangle]
pub extern "C" fn ciiqa_params_default() -> CiiqaParams {
    let p = ScalingParams::default();
    CiiqaParams {
        k1: p.k1,
        k2: p.k2,
        cr_threshold: p.cr_threshold,
        sigma_floor: p.sigma_floor,
        window: 0,
        include_approximation: p.include_approximation,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ciiqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Decodes a PNG or BMP file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_image_load(path: *const c_char, out: *mut *mut CiiqaImage) -> CiiqaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let path = unsafe { path_from(path, "path") }?;
        let inner = load_image(&path).map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(CiiqaImage { inner })) };
        Ok(())
    })
}

/// Wraps `width * height` packed RGB triplets (row-major) in a new image.
///
/// # Safety
/// `rgb` must point to `3 * width * height` readable bytes and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_image_from_rgb(rgb: *const u8, width: usize, height: usize, out: *mut *mut CiiqaImage) -> CiiqaStatus {
    guard(|| {
        if rgb.is_null() {
            return Err(null_arg("rgb"));
        }
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let len = width.checked_mul(height).and_then(|n| n.checked_mul(3)).ok_or_else(|| {
            set_error("image size overflows".into());
            CiiqaStatus::Dimension
        })?;
        // SAFETY: the caller guarantees `len` readable bytes.
        let bytes = unsafe { std::slice::from_raw_parts(rgb, len) };
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let inner = RgbImage::new(width, height, pixels).map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(CiiqaImage { inner })) };
        Ok(())
    })
}

/// Width in pixels, 0 for null.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_image_width(img: *const CiiqaImage) -> usize {
    unsafe { img.as_ref() }.map_or(0, |i| i.inner.width())
}

/// Height in pixels, 0 for null.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_image_height(img: *const CiiqaImage) -> usize {
    unsafe { img.as_ref() }.map_or(0, |i| i.inner.height())
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_image_free(img: *mut CiiqaImage) {
    if !img.is_null() {
        drop(unsafe { Box::from_raw(img) });
    }
}

/// Scores `dist` against `reference`. `params` may be null for defaults.
/// `out_colorful`, if non-null, receives 1 when the color-adapted scaling
/// branch was used.
///
/// # Safety
/// Handles must be live; `out_e` writable; `out_colorful` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_score_pair(
    reference: *const CiiqaImage,
    dist: *const CiiqaImage,
    params: *const CiiqaParams,
    out_e: *mut f64,
    out_colorful: *mut i32,
) -> CiiqaStatus {
    guard(|| {
        let (Some(r), Some(d)) = (unsafe { reference.as_ref() }, unsafe { dist.as_ref() }) else {
            return Err(null_arg("image"));
        };
        if out_e.is_null() {
            return Err(null_arg("out_e"));
        }
        let p = params_from(params)?;
        let score = score_pair(&r.inner, &d.inner, &p).map_err(fail)?;
        unsafe {
            *out_e = score.e;
            if let Some(c) = out_colorful.as_mut() {
                *c = (score.branch == ciiqa::Branch::Colorful) as i32;
            }
        }
        Ok(())
    })
}

/// Builds the feature vector of one image, scaled under the branch its own
/// color ratio selects.
///
/// # Safety
/// `img` must be live, `params` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_feature_build(img: *const CiiqaImage, params: *const CiiqaParams, out: *mut *mut CiiqaFeature) -> CiiqaStatus {
    guard(|| {
        let Some(img) = (unsafe { img.as_ref() }) else {
            return Err(null_arg("img"));
        };
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let p = params_from(params)?;
        let (inner, _) = build_feature(&srgb_to_lab(&img.inner), &p, None).map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(CiiqaFeature { inner })) };
        Ok(())
    })
}

/// Number of values, 0 for null.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_feature_len(f: *const CiiqaFeature) -> usize {
    unsafe { f.as_ref() }.map_or(0, |f| f.inner.len())
}

/// Borrowed pointer to the values; valid while the handle lives.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_feature_values(f: *const CiiqaFeature) -> *const f64 {
    unsafe { f.as_ref() }.map_or(ptr::null(), |f| f.inner.values.as_ptr())
}

/// L1 distance between two feature vectors of identical layout.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_feature_l1(a: *const CiiqaFeature, b: *const CiiqaFeature, out: *mut f64) -> CiiqaStatus {
    guard(|| {
        let (Some(a), Some(b)) = (unsafe { a.as_ref() }, unsafe { b.as_ref() }) else {
            return Err(null_arg("feature"));
        };
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let d = l1_distance(&a.inner, &b.inner).map_err(fail)?;
        unsafe { *out = d };
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_feature_free(f: *mut CiiqaFeature) {
    if !f.is_null() {
        drop(unsafe { Box::from_raw(f) });
    }
}

/// Evaluates a `ref,dist,mos,tag` manifest and returns the correlation report
/// as JSON in `*out_json`, to be released with [`ciiqa_string_free`].
///
/// # Safety
/// `manifest` must be nul-terminated, `params` null or valid, `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_evaluate_manifest(manifest: *const c_char, params: *const CiiqaParams, jobs: u32, out_json: *mut *mut c_char) -> CiiqaStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null_arg("out_json"));
        }
        let path = unsafe { path_from(manifest, "manifest") }?;
        let p = params_from(params)?;
        let m = load_manifest(&path).map_err(fail)?;
        let report = evaluate_dataset(&m, &p, &EvalOptions { jobs: jobs.max(1) as usize, plcc_raw: false }).map_err(fail)?;
        let json = CString::new(report.to_json()).expect("JSON has no interior nul");
        unsafe { *out_json = json.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ciiqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
