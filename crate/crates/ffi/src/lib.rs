//! C ABI over `horizonkit`.
//!
//! Every fallible function returns an [`HkStatus`]. On failure a message is
//! kept per thread and can be read with [`hk_last_error_message`]. Objects
//! with internal state are exposed as opaque handles, created by `*_new` or
//! `*_read` functions and released with the matching `*_free`.
//!
//! Lines are passed by value as [`HkLine`]: homogeneous coefficients in
//! centered image-height units (x right, y up, origin at the image center).
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the reads and writes the
//! function describes; array arguments must hold at least the stated count.
//! Handles must come from this library and be freed exactly once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use horizonkit::aggregation::{aggregate_average, aggregate_nll, make_crop_grid, transfer_horizon, Subwindow, SubwindowSet};
use horizonkit::distribution::HorizonDistribution;
use horizonkit::evaluation::{auc, horizon_error};
use horizonkit::geometry::{horizon_from_camera, tilt_roll_from_horizon, tilt_roll_rotation, CameraRig, HorizonLine, ImageFrame};
use horizonkit::label_space::LabelSpace;
use horizonkit::sfm::{estimate_zenith, label_model, SfmModel};
use horizonkit::Error;
use nalgebra::Vector3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DegenerateProjection = 3,
    VerticalHorizon = 4,
    DegenerateModel = 5,
    InsufficientCameras = 6,
    InsufficientData = 7,
    DegenerateBins = 8,
    MissingExternalGrid = 9,
    DegenerateDistribution = 10,
    MissingPrediction = 11,
    Parse = 12,
    Io = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkFrame {
    pub width: u32,
    pub height: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkLine {
    pub h: [f64; 3],
}

/// Every parameterization of one line.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkLineViews {
    pub theta: f64,
    pub rho: f64,
    pub left: f64,
    pub right: f64,
    pub y_left_px: f64,
    pub y_right_px: f64,
}

/// Axis-aligned window in full-image pixels, origin top-left.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkWindow {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

pub struct HkLabelSpace(Arc<LabelSpace>);

pub struct HkSubwindowSet {
    frame: ImageFrame,
    distributions: Vec<HorizonDistribution>,
}

pub struct HkSfmModel(SfmModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HkStatus {
    match e {
        Error::DegenerateProjection(_) => HkStatus::DegenerateProjection,
        Error::VerticalHorizon { .. } => HkStatus::VerticalHorizon,
        Error::DegenerateModel(_) => HkStatus::DegenerateModel,
        Error::InsufficientCameras { .. } => HkStatus::InsufficientCameras,
        Error::InsufficientData { .. } => HkStatus::InsufficientData,
        Error::DegenerateBins { .. } => HkStatus::DegenerateBins,
        Error::MissingExternalGrid(_) => HkStatus::MissingExternalGrid,
        Error::DegenerateDistribution => HkStatus::DegenerateDistribution,
        Error::MissingPrediction(_) => HkStatus::MissingPrediction,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => HkStatus::Parse,
        Error::Io(_) | Error::Image(_) => HkStatus::Io,
        Error::InvalidInput(_) => HkStatus::InvalidInput,
    }
}

enum Failure {
    Null(&'static str),
    Small(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HkStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HkStatus::NullPointer
        }
        Ok(Err(Failure::Small(message))) => {
            set_error(message);
            HkStatus::BufferTooSmall
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidInput("path is not UTF-8".into())))?;
    Ok(Path::new(s))
}

fn frame(f: HkFrame) -> Result<ImageFrame, Failure> {
    Ok(ImageFrame::new(f.width, f.height)?)
}

fn line(l: HkLine) -> Result<HorizonLine, Failure> {
    Ok(HorizonLine::from_coefficients(Vector3::from(l.h))?)
}

fn hk_line(l: &HorizonLine) -> HkLine {
    HkLine { h: l.coefficients().into() }
}

fn window(w: HkWindow) -> Subwindow {
    Subwindow::new(w.x, w.y, w.width, w.height)
}

fn hk_window(w: &Subwindow) -> HkWindow {
    HkWindow { x: w.x, y: w.y, width: w.width, height: w.height }
}

fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null, caller guarantees it points to writable storage
    unsafe { out.write(value) };
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Line from normal angle `theta` and offset `rho`.
#[no_mangle]
pub extern "C" fn hk_line_from_slope_offset(theta: f64, rho: f64, out: *mut HkLine) -> HkStatus {
    guard(|| {
        if !(theta.is_finite() && rho.is_finite()) {
            return Err(Error::InvalidInput("theta and rho must be finite".into()).into());
        }
        put(out, hk_line(&HorizonLine::from_slope_offset(theta, rho)), "out")
    })
}

/// Line through the left and right border heights, in image heights.
#[no_mangle]
pub extern "C" fn hk_line_from_left_right(left: f64, right: f64, image: HkFrame, out: *mut HkLine) -> HkStatus {
    guard(|| put(out, hk_line(&HorizonLine::from_left_right(left, right, &frame(image)?)?), "out"))
}

/// Line through the pixel rows where it meets the left and right borders.
#[no_mangle]
pub extern "C" fn hk_line_from_pixel_endpoints(y_left: f64, y_right: f64, image: HkFrame, out: *mut HkLine) -> HkStatus {
    guard(|| put(out, hk_line(&HorizonLine::from_pixel_endpoints(y_left, y_right, &frame(image)?)?), "out"))
}

#[no_mangle]
pub extern "C" fn hk_line_views(l: HkLine, image: HkFrame, out: *mut HkLineViews) -> HkStatus {
    guard(|| {
        let (l, f) = (line(l)?, frame(image)?);
        let (left, right) = l.left_right(&f)?;
        let (y_left_px, y_right_px) = l.pixel_endpoints(&f)?;
        put(out, HkLineViews { theta: l.theta(), rho: l.rho(), left, right, y_left_px, y_right_px }, "out")
    })
}

/// Horizon seen by a camera with the given tilt and roll (radians) and focal length (pixels).
#[no_mangle]
pub extern "C" fn hk_horizon_from_tilt_roll(tilt: f64, roll: f64, focal_px: f64, image: HkFrame, out: *mut HkLine) -> HkStatus {
    guard(|| {
        let rig = CameraRig::from_rotation(tilt_roll_rotation(tilt, roll), focal_px)?;
        put(out, hk_line(&horizon_from_camera(&rig, &frame(image)?)), "out")
    })
}

#[no_mangle]
pub extern "C" fn hk_tilt_roll_from_horizon(
    l: HkLine,
    focal_px: f64,
    image: HkFrame,
    tilt: *mut f64,
    roll: *mut f64,
) -> HkStatus {
    guard(|| {
        let (t, r) = tilt_roll_from_horizon(&line(l)?, focal_px, &frame(image)?)?;
        put(tilt, t, "tilt")?;
        put(roll, r, "roll")
    })
}

/// Re-expresses a line given in window `from` in the coordinates of window `to`.
#[no_mangle]
pub extern "C" fn hk_transfer_horizon(l: HkLine, from: HkWindow, to: HkWindow, image: HkFrame, out: *mut HkLine) -> HkStatus {
    guard(|| {
        let f = frame(image)?;
        let (from, to) = (window(from), window(to));
        from.validate(&f)?;
        to.validate(&f)?;
        put(out, hk_line(&transfer_horizon(&line(l)?, &from, &to, &f)), "out")
    })
}

/// Writes the standard crop grid (center square first) into `out`, which
/// must hold `capacity` windows. `count` receives the number of windows.
#[no_mangle]
pub unsafe extern "C" fn hk_crop_grid(image: HkFrame, out: *mut HkWindow, capacity: usize, count: *mut usize) -> HkStatus {
    guard(|| {
        let grid = make_crop_grid(&frame(image)?)?;
        put(count, grid.len(), "count")?;
        if capacity < grid.len() {
            return Err(Failure::Small(format!("crop grid has {} windows, buffer holds {capacity}", grid.len())));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        for (k, w) in grid.iter().enumerate() {
            out.add(k).write(hk_window(w));
        }
        Ok(())
    })
}

/// Maximum vertical distance between two lines across the image, in image heights.
#[no_mangle]
pub extern "C" fn hk_horizon_error(predicted: HkLine, truth: HkLine, image: HkFrame, out: *mut f64) -> HkStatus {
    guard(|| put(out, horizon_error(&line(predicted)?, &line(truth)?, &frame(image)?)?, "out"))
}

/// Area under the cumulative error curve up to `max_threshold`, in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn hk_auc(errors: *const f64, count: usize, max_threshold: f64, out: *mut f64) -> HkStatus {
    guard(|| {
        let errors = slice(errors, count, "errors")?;
        put(out, auc(errors, max_threshold)?.auc, "out")
    })
}

/// Fraction of `errors` at or below `threshold`.
#[no_mangle]
pub unsafe extern "C" fn hk_fraction_within(errors: *const f64, count: usize, threshold: f64, out: *mut f64) -> HkStatus {
    guard(|| {
        let errors = slice(errors, count, "errors")?;
        let curve = auc(errors, threshold.max(f64::MIN_POSITIVE))?;
        put(out, curve.fraction_within(threshold), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_label_space_read(path_utf8: *const c_char, out: *mut *mut HkLabelSpace) -> HkStatus {
    guard(|| {
        let space = LabelSpace::read(path(path_utf8)?)?;
        put(out, Box::into_raw(Box::new(HkLabelSpace(Arc::new(space)))), "out")
    })
}

/// Label space with `n` quantile bins per axis, built from `count` lines
/// expressed in square windows.
#[no_mangle]
pub unsafe extern "C" fn hk_label_space_from_lines(lines: *const HkLine, count: usize, n: usize, out: *mut *mut HkLabelSpace) -> HkStatus {
    guard(|| {
        let lines = slice(lines, count, "lines")?.iter().map(|&l| line(l)).collect::<Result<Vec<_>, _>>()?;
        let space = LabelSpace::from_lines(&lines, n)?;
        put(out, Box::into_raw(Box::new(HkLabelSpace(Arc::new(space)))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_label_space_dimensions(space: *const HkLabelSpace, theta_bins: *mut usize, rho_bins: *mut usize) -> HkStatus {
    guard(|| {
        let s = deref(space, "space")?;
        put(theta_bins, s.0.theta.len(), "theta_bins")?;
        put(rho_bins, s.0.rho.len(), "rho_bins")
    })
}

/// Row-major cell index (theta major) of a line.
#[no_mangle]
pub unsafe extern "C" fn hk_label_space_cell(space: *const HkLabelSpace, l: HkLine, theta_bin: *mut usize, rho_bin: *mut usize) -> HkStatus {
    guard(|| {
        let (i, j) = deref(space, "space")?.0.cell_of(&line(l)?);
        put(theta_bin, i, "theta_bin")?;
        put(rho_bin, j, "rho_bin")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_label_space_free(space: *mut HkLabelSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

#[no_mangle]
pub extern "C" fn hk_subwindow_set_new(image: HkFrame, out: *mut *mut HkSubwindowSet) -> HkStatus {
    guard(|| {
        let set = HkSubwindowSet { frame: frame(image)?, distributions: Vec::new() };
        put(out, Box::into_raw(Box::new(set)), "out")
    })
}

/// Adds one subwindow's probability grid (row-major, theta major, summing
/// to one) over `space`.
#[no_mangle]
pub unsafe extern "C" fn hk_subwindow_set_add(
    set: *mut HkSubwindowSet,
    space: *const HkLabelSpace,
    probabilities: *const f64,
    count: usize,
    win: HkWindow,
) -> HkStatus {
    guard(|| {
        let set = deref_mut(set, "set")?;
        let space = deref(space, "space")?;
        let w = window(win);
        w.validate(&set.frame)?;
        let p = slice(probabilities, count, "probabilities")?.to_vec();
        set.distributions.push(HorizonDistribution::from_probabilities(space.0.clone(), p, w)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_subwindow_set_len(set: *const HkSubwindowSet, out: *mut usize) -> HkStatus {
    guard(|| put(out, deref(set, "set")?.distributions.len(), "out"))
}

fn subwindow_set(set: &HkSubwindowSet) -> Result<SubwindowSet, Failure> {
    Ok(SubwindowSet::new(set.frame, set.distributions.clone())?)
}

/// Confidence-weighted average of the subwindow estimates, in full-image coordinates.
#[no_mangle]
pub unsafe extern "C" fn hk_aggregate_average(set: *const HkSubwindowSet, out: *mut HkLine) -> HkStatus {
    guard(|| {
        let estimate = aggregate_average(&subwindow_set(deref(set, "set")?)?)?;
        put(out, hk_line(&estimate.line), "out")
    })
}

/// Joint negative log-likelihood minimizer; `objective` may be null.
#[no_mangle]
pub unsafe extern "C" fn hk_aggregate_nll(set: *const HkSubwindowSet, out: *mut HkLine, objective: *mut f64) -> HkStatus {
    guard(|| {
        let estimate = aggregate_nll(&subwindow_set(deref(set, "set")?)?)?;
        if !objective.is_null() {
            objective.write(estimate.objective);
        }
        put(out, hk_line(&estimate.line), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_subwindow_set_free(set: *mut HkSubwindowSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Reads a reconstruction in JSON or text form.
#[no_mangle]
pub unsafe extern "C" fn hk_sfm_model_read(path_utf8: *const c_char, out: *mut *mut HkSfmModel) -> HkStatus {
    guard(|| {
        let model = SfmModel::read(path(path_utf8)?)?;
        put(out, Box::into_raw(Box::new(HkSfmModel(model))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_sfm_model_len(model: *const HkSfmModel, out: *mut usize) -> HkStatus {
    guard(|| put(out, deref(model, "model")?.0.len(), "out"))
}

/// Robust world zenith of a reconstruction; `inliers` may be null.
#[no_mangle]
pub unsafe extern "C" fn hk_sfm_estimate_zenith(model: *const HkSfmModel, zenith: *mut f64, inliers: *mut usize) -> HkStatus {
    guard(|| {
        let estimate = estimate_zenith(&deref(model, "model")?.0)?;
        if zenith.is_null() {
            return Err(Failure::Null("zenith"));
        }
        for k in 0..3 {
            zenith.add(k).write(estimate.zenith[k]);
        }
        if !inliers.is_null() {
            inliers.write(estimate.inlier_count());
        }
        Ok(())
    })
}

/// Horizon label of camera `index` under the model's estimated zenith.
/// Fails with `HK_STATUS_INVALID_INPUT` for cameras rejected as outliers.
#[no_mangle]
pub unsafe extern "C" fn hk_sfm_camera_horizon(model: *const HkSfmModel, index: usize, out: *mut HkLine, image: *mut HkFrame) -> HkStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let camera = model
            .cameras
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("camera {index} out of range ({} cameras)", model.len())))?;
        let labels = label_model(model, &estimate_zenith(model)?)?;
        let labeled = labels
            .labels
            .iter()
            .find(|l| l.image_id == camera.image_id)
            .ok_or_else(|| Error::InvalidInput(format!("camera {} has no label", camera.image_id)))?;
        if !image.is_null() {
            image.write(HkFrame { width: labeled.frame.width, height: labeled.frame.height });
        }
        put(out, hk_line(&labeled.line), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hk_sfm_model_free(model: *mut HkSfmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
