//! Pinhole camera math: point projection, horizon lines, and the
//! conversions between the horizon parameterizations.
//!
//! Camera axes follow the usual graphics convention: `+x` right, `+y` up,
//! viewing direction `-z`. The world zenith is `[0, 1, 0]`.
//!
//! Image coordinates come in two flavours:
//!
//! * **pixel frame**: origin at the top-left image corner, `y` pointing down,
//!   units of pixels. Only used at I/O boundaries.
//! * **centered frame**: origin at the image center, `y` pointing up, lengths
//!   divided by the image height. All [`HorizonLine`] quantities live here.
//!
//! A horizon line is stored as homogeneous coefficients `h` with
//! `h1 * x + h2 * y + h3 = 0`, `(h1, h2)` unit length and `h2 >= 0`. The
//! slope-offset view `(theta, rho)` is the Hough normal form
//! `rho = x cos(theta) + y sin(theta)`, so `theta` is the angle of the line's
//! normal and a horizontal line has `theta = pi / 2`. The left-right view
//! `(l, r)` holds the line's heights at the left and right image borders.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lines whose normal is closer than this (radians) to horizontal are vertical.
pub const VERTICAL_TOLERANCE: f64 = 1e-6;

const PROJECTION_EPS: f64 = 1e-12;
const ROTATION_TOLERANCE: f64 = 1e-9;

/// World up direction.
pub fn zenith() -> Vector3<f64> {
    Vector3::y()
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// World-to-camera rotation for a camera with the given tilt and roll and
/// zero yaw: `rot_z(roll) * rot_x(tilt)`.
///
/// Positive tilt pitches the view down, which moves the horizon up in the
/// image. Roll turns the image plane counter-clockwise, so the horizon's
/// normal angle is `pi / 2 + roll`.
pub fn tilt_roll_rotation(tilt: f64, roll: f64) -> Matrix3<f64> {
    rot_z(roll) * rot_x(tilt)
}

/// World-to-camera rotation including yaw about the world zenith:
/// `rot_z(roll) * rot_x(tilt) * rot_y(yaw)`.
pub fn camera_rotation(yaw: f64, tilt: f64, roll: f64) -> Matrix3<f64> {
    tilt_roll_rotation(tilt, roll) * rot_y(yaw)
}

/// Checks `R^T R = I` and `det R = +1` within `1e-9`.
pub fn is_rotation(r: &Matrix3<f64>) -> bool {
    let gram = r.transpose() * r - Matrix3::identity();
    gram.amax() <= ROTATION_TOLERANCE && (r.determinant() - 1.0).abs() <= ROTATION_TOLERANCE
}

/// Nearest rotation in the Frobenius sense.
pub fn nearest_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    u * fix * v_t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
}

impl ImageFrame {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// Centered x-coordinate of the right border; the left border is its negation.
    pub fn half_width(&self) -> f64 {
        self.width as f64 / (2.0 * self.height as f64)
    }

    pub fn min_dimension(&self) -> u32 {
        self.width.min(self.height)
    }

    pub fn pixel_to_centered(&self, pixel: Vector2<f64>) -> Vector2<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        Vector2::new((pixel.x - 0.5 * w) / h, (0.5 * h - pixel.y) / h)
    }

    pub fn centered_to_pixel(&self, point: Vector2<f64>) -> Vector2<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        Vector2::new(point.x * h + 0.5 * w, 0.5 * h - point.y * h)
    }

    /// Focal length in image heights.
    pub fn normalized_focal(&self, focal_px: f64) -> f64 {
        focal_px / self.height as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// Focal length in pixels; principal point at the image center.
    pub focal_px: f64,
}

impl CameraRig {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, focal_px: f64) -> Result<Self> {
        if !is_rotation(&rotation) {
            return Err(Error::invalid("rotation is not orthonormal with det +1"));
        }
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(Error::invalid(format!("focal length must be positive, got {focal_px}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        Ok(Self { rotation, translation, focal_px })
    }

    /// Camera at the origin with the given orientation.
    pub fn from_rotation(rotation: Matrix3<f64>, focal_px: f64) -> Result<Self> {
        Self::new(rotation, Vector3::zeros(), focal_px)
    }

    /// Intrinsic matrix in centered image-height units. The `-1` in the last
    /// row accounts for the camera looking down `-z`.
    pub fn intrinsics(&self, frame: &ImageFrame) -> Matrix3<f64> {
        let f = frame.normalized_focal(self.focal_px);
        Matrix3::new(f, 0.0, 0.0, 0.0, f, 0.0, 0.0, 0.0, -1.0)
    }

    /// World zenith expressed in camera coordinates.
    pub fn up_in_camera(&self) -> Vector3<f64> {
        self.rotation * zenith()
    }

    /// Camera up direction expressed in world coordinates.
    pub fn up_in_world(&self) -> Vector3<f64> {
        self.rotation.transpose() * Vector3::y()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Centered-frame coordinates, image heights.
    pub point: Vector2<f64>,
    /// `false` when the world point is behind the camera.
    pub in_front: bool,
}

pub fn project_point(rig: &CameraRig, frame: &ImageFrame, world_point: &Vector3<f64>) -> Result<Projection> {
    let homogeneous = rig.intrinsics(frame) * (rig.rotation * world_point + rig.translation);
    let w = homogeneous.z;
    if w.abs() < PROJECTION_EPS {
        return Err(Error::DegenerateProjection(w));
    }
    Ok(Projection {
        point: Vector2::new(homogeneous.x / w, homogeneous.y / w),
        in_front: w > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonLine {
    coefficients: [f64; 3],
}

impl HorizonLine {
    /// Normalizes `h` so that `(h1, h2)` is a unit vector with `h2 >= 0`
    /// (ties broken by `h1 >= 0`).
    pub fn from_coefficients(h: Vector3<f64>) -> Result<Self> {
        let norm = h.x.hypot(h.y);
        if !(norm.is_finite() && norm > 0.0) || !h.z.is_finite() {
            return Err(Error::invalid(format!("not a line: {:?}", h.as_slice())));
        }
        let mut n = h / norm;
        if n.y < 0.0 || (n.y == 0.0 && n.x < 0.0) {
            n = -n;
        }
        Ok(Self { coefficients: [n.x, n.y, n.z] })
    }

    /// Line with normal angle `theta` at signed distance `rho` from the image center.
    pub fn from_slope_offset(theta: f64, rho: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_coefficients(Vector3::new(c, s, -rho)).expect("unit normal")
    }

    /// Line through the border points `(-a, left)` and `(a, right)` with `a`
    /// the frame's half width.
    pub fn from_left_right(left: f64, right: f64, frame: &ImageFrame) -> Result<Self> {
        Self::from_border_heights(left, right, frame.half_width())
    }

    /// Line from pixel-frame heights (y down) at `x = 0` and `x = width`.
    pub fn from_pixel_endpoints(y_left: f64, y_right: f64, frame: &ImageFrame) -> Result<Self> {
        let h = frame.height as f64;
        Self::from_left_right((0.5 * h - y_left) / h, (0.5 * h - y_right) / h, frame)
    }

    pub fn coefficients(&self) -> Vector3<f64> {
        Vector3::from(self.coefficients)
    }

    /// Normal angle in `[0, pi)`.
    pub fn theta(&self) -> f64 {
        let [c, s, _] = self.coefficients;
        let theta = s.atan2(c);
        if theta >= PI {
            0.0
        } else {
            theta
        }
    }

    pub fn rho(&self) -> f64 {
        -self.coefficients[2]
    }

    /// Angle of the line itself against the horizontal axis, `theta - pi / 2`,
    /// in `[-pi / 2, pi / 2)`. Positive values rise to the right.
    pub fn slope_angle(&self) -> f64 {
        self.theta() - FRAC_PI_2
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.coefficients[0], self.coefficients[1])
    }

    pub fn is_vertical(&self) -> bool {
        self.coefficients[1] <= VERTICAL_TOLERANCE.sin()
    }

    /// Signed algebraic residual `p^T h` of a centered-frame point.
    pub fn residual(&self, point: &Vector2<f64>) -> f64 {
        let [a, b, c] = self.coefficients;
        a * point.x + b * point.y + c
    }

    pub fn y_at(&self, x: f64) -> Result<f64> {
        if self.is_vertical() {
            return Err(Error::VerticalHorizon { theta: self.theta() });
        }
        let [a, b, c] = self.coefficients;
        Ok(-(a * x + c) / b)
    }

    /// Heights at the left and right image borders, image heights.
    pub fn left_right(&self, frame: &ImageFrame) -> Result<(f64, f64)> {
        self.border_heights(frame.half_width())
    }

    /// Heights at `x = -half_width` and `x = half_width`.
    pub fn border_heights(&self, half_width: f64) -> Result<(f64, f64)> {
        Ok((self.y_at(-half_width)?, self.y_at(half_width)?))
    }

    /// Line through `(-half_width, left)` and `(half_width, right)`.
    pub fn from_border_heights(left: f64, right: f64, half_width: f64) -> Result<Self> {
        Self::from_coefficients(Vector3::new(left - right, 2.0 * half_width, -half_width * (left + right)))
    }

    /// Pixel-frame heights (y down) at `x = 0` and `x = width`.
    pub fn pixel_endpoints(&self, frame: &ImageFrame) -> Result<(f64, f64)> {
        let (l, r) = self.left_right(frame)?;
        let h = frame.height as f64;
        Ok((0.5 * h - l * h, 0.5 * h - r * h))
    }

    /// Reflects the line about the vertical axis through the image center.
    pub fn mirrored(&self) -> Self {
        let [a, b, c] = self.coefficients;
        Self::from_coefficients(Vector3::new(-a, b, c)).expect("unit normal")
    }

    /// Largest absolute coefficient difference; both lines are normalized,
    /// so this is zero exactly when they coincide.
    pub fn distance(&self, other: &HorizonLine) -> f64 {
        (self.coefficients() - other.coefficients()).amax()
    }
}

/// All views of a horizon line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonViews {
    pub coefficients: [f64; 3],
    pub theta: f64,
    pub rho: f64,
    pub left: f64,
    pub right: f64,
}

pub fn convert_parameterization(line: &HorizonLine, frame: &ImageFrame) -> Result<HorizonViews> {
    let (left, right) = line.left_right(frame)?;
    Ok(HorizonViews {
        coefficients: line.coefficients,
        theta: line.theta(),
        rho: line.rho(),
        left,
        right,
    })
}

/// Horizon of an arbitrary world up direction: `{p : p^T K^-T R z = 0}`.
pub fn horizon_for_zenith(rig: &CameraRig, frame: &ImageFrame, zenith: &Vector3<f64>) -> HorizonLine {
    let f = frame.normalized_focal(rig.focal_px);
    let up = rig.rotation * zenith;
    // K^-T = diag(1/f, 1/f, -1)
    HorizonLine::from_coefficients(Vector3::new(up.x / f, up.y / f, -up.z))
        .expect("camera looking straight along the zenith has no horizon")
}

pub fn horizon_from_camera(rig: &CameraRig, frame: &ImageFrame) -> HorizonLine {
    horizon_for_zenith(rig, frame, &zenith())
}

/// Recovers `(tilt, roll)` such that a camera oriented by
/// [`tilt_roll_rotation`] sees `line`. Unique for tilts inside `(-pi/2, pi/2)`.
pub fn tilt_roll_from_horizon(line: &HorizonLine, focal_px: f64, frame: &ImageFrame) -> Result<(f64, f64)> {
    if !(focal_px.is_finite() && focal_px > 0.0) {
        return Err(Error::invalid(format!("focal length must be positive, got {focal_px}")));
    }
    if line.is_vertical() {
        return Err(Error::VerticalHorizon { theta: line.theta() });
    }
    let f = frame.normalized_focal(focal_px);
    let h = line.coefficients();
    // Up vector in camera coordinates, up to scale: K^T h.
    let up = Vector3::new(h.x * f, h.y * f, -h.z);
    // up = (-sin(roll) cos(tilt), cos(roll) cos(tilt), sin(tilt))
    let tilt = up.z.atan2(up.x.hypot(up.y));
    let roll = (-up.x).atan2(up.y);
    Ok((tilt, roll))
}
