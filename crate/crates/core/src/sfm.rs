//! Automatic horizon labels from structure-from-motion reconstructions.
//!
//! SfM leaves each model in an arbitrary world frame, so the zenith has to be
//! recovered before any horizon can be drawn. Photographers rarely roll the
//! camera, which means the left/right points at infinity of every camera lie
//! (nearly) on the horizon plane. Stacking those directions and taking the
//! smallest right singular vector gives the plane normal, i.e. the zenith.
//! Portrait shots stored in landscape orientation break the zero-roll
//! assumption and are rejected by residual before the final fit.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizon_for_zenith, is_rotation, nearest_rotation, CameraRig, HorizonLine, ImageFrame};
use crate::labels::LabelRecord;

pub const MIN_CAMERAS: usize = 3;
/// Residual floor for the outlier test, radians.
pub const OUTLIER_FLOOR: f64 = 10.0 * std::f64::consts::PI / 180.0;
pub const OUTLIER_MEDIAN_FACTOR: f64 = 3.0;
pub const REJECTION_ROUNDS: usize = 2;
const DEGENERATE_RATIO: f64 = 1e-6;
/// Rotations read from files are snapped to SO(3) when this close.
const ROTATION_SNAP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SfmCamera {
    pub image_id: String,
    pub rig: CameraRig,
    pub frame: ImageFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfmModel {
    pub model_id: String,
    pub cameras: Vec<SfmCamera>,
}

impl SfmModel {
    pub fn new(model_id: impl Into<String>, cameras: Vec<SfmCamera>) -> Result<Self> {
        let mut seen = HashSet::new();
        for camera in &cameras {
            if !seen.insert(camera.image_id.as_str()) {
                return Err(Error::invalid(format!("duplicate image id `{}`", camera.image_id)));
            }
        }
        Ok(Self { model_id: model_id.into(), cameras })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Reads the whitespace-delimited text format, or JSON when the path ends in `.json`.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text, path)
        } else {
            let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Self::from_text(&text, path, &fallback)
        }
    }

    /// One camera per line:
    /// `image_id width height focal_px r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3`.
    /// `#` starts a comment; a `# model_id: <name>` comment names the model.
    pub fn from_text(text: &str, path: &Path, fallback_id: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
        let mut model_id = fallback_id.to_string();
        let mut cameras = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment.trim().strip_prefix("model_id:") {
                    model_id = id.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 16 {
                return Err(parse_err(line_no, format!("expected 16 fields, found {}", fields.len())));
            }
            let number = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| parse_err(line_no, format!("field {} (`{}`): {e}", i + 1, fields[i])))
            };
            let size = |i: usize| -> Result<u32> {
                fields[i]
                    .parse::<u32>()
                    .map_err(|e| parse_err(line_no, format!("field {} (`{}`): {e}", i + 1, fields[i])))
            };
            let mut rotation = [0.0; 9];
            for (k, slot) in rotation.iter_mut().enumerate() {
                *slot = number(4 + k)?;
            }
            let translation = [number(13)?, number(14)?, number(15)?];
            let camera = build_camera(fields[0], size(1)?, size(2)?, number(3)?, rotation, translation)
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            cameras.push(camera);
        }
        Self::new(model_id, cameras).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut cameras = Vec::with_capacity(file.cameras.len());
        for (i, c) in file.cameras.into_iter().enumerate() {
            let flat = [
                c.rotation[0][0], c.rotation[0][1], c.rotation[0][2],
                c.rotation[1][0], c.rotation[1][1], c.rotation[1][2],
                c.rotation[2][0], c.rotation[2][1], c.rotation[2][2],
            ];
            let camera = build_camera(&c.image_id, c.width, c.height, c.focal, flat, c.translation).map_err(|e| {
                Error::Parse { path: path.to_path_buf(), line: 0, message: format!("camera {i}: {e}") }
            })?;
            cameras.push(camera);
        }
        Self::new(file.model_id, cameras)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            model_id: self.model_id.clone(),
            cameras: self
                .cameras
                .iter()
                .map(|c| {
                    let r = &c.rig.rotation;
                    CameraRecord {
                        image_id: c.image_id.clone(),
                        width: c.frame.width,
                        height: c.frame.height,
                        focal: c.rig.focal_px,
                        rotation: [
                            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                        ],
                        translation: [c.rig.translation.x, c.rig.translation.y, c.rig.translation.z],
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain data serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# model_id: {}\n", self.model_id);
        for c in &self.cameras {
            let r = &c.rig.rotation;
            let t = &c.rig.translation;
            out.push_str(&format!("{} {} {} {}", c.image_id, c.frame.width, c.frame.height, c.rig.focal_px));
            for i in 0..3 {
                for j in 0..3 {
                    out.push_str(&format!(" {}", r[(i, j)]));
                }
            }
            out.push_str(&format!(" {} {} {}\n", t.x, t.y, t.z));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    model_id: String,
    cameras: Vec<CameraRecord>,
}

#[derive(Serialize, Deserialize)]
struct CameraRecord {
    image_id: String,
    width: u32,
    height: u32,
    focal: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

fn build_camera(
    image_id: &str,
    width: u32,
    height: u32,
    focal: f64,
    rotation: [f64; 9],
    translation: [f64; 3],
) -> Result<SfmCamera> {
    let mut r = Matrix3::from_row_slice(&rotation);
    if !is_rotation(&r) {
        let gram_error = (r.transpose() * r - Matrix3::identity()).amax();
        if gram_error > ROTATION_SNAP_TOLERANCE || r.determinant() <= 0.0 {
            return Err(Error::invalid(format!("rotation is not a proper rotation (|R^T R - I| = {gram_error:.3e})")));
        }
        r = nearest_rotation(&r);
    }
    Ok(SfmCamera {
        image_id: image_id.to_string(),
        rig: CameraRig::new(r, Vector3::from(translation), focal)?,
        frame: ImageFrame::new(width, height)?,
    })
}

/// World directions of each camera's left and right points at infinity,
/// two consecutive entries per camera.
pub fn collect_lateral_directions(model: &SfmModel) -> Vec<Vector3<f64>> {
    model
        .cameras
        .iter()
        .flat_map(|c| {
            let rt = c.rig.rotation.transpose();
            [rt * -Vector3::x(), rt * Vector3::x()]
        })
        .collect()
}

/// Mean of the cameras' up directions in world coordinates. Only used to
/// orient the fitted zenith, and as the naive zenith estimate.
pub fn mean_camera_up(model: &SfmModel) -> Vector3<f64> {
    model.cameras.iter().map(|c| c.rig.up_in_world()).sum()
}

/// Zenith from the average camera up direction. Assumes zero expected tilt
/// as well as zero roll, which fails for landmarks photographed from one side.
pub fn fit_zenith_naive(model: &SfmModel) -> Result<Vector3<f64>> {
    let sum = mean_camera_up(model);
    sum.try_normalize(1e-12)
        .ok_or_else(|| Error::DegenerateModel("camera up directions cancel out".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZenithEstimate {
    /// Orthonormal basis of the horizon plane.
    pub basis: [Vector3<f64>; 2],
    pub zenith: Vector3<f64>,
    pub inliers: Vec<bool>,
    /// Per camera, largest angle of its lateral directions out of the fitted plane, radians.
    pub residuals: Vec<f64>,
    /// Singular values of the final fit, descending.
    pub singular_values: [f64; 3],
}

impl ZenithEstimate {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }

    pub fn inlier_fraction(&self) -> f64 {
        self.inlier_count() as f64 / self.inliers.len().max(1) as f64
    }

    /// Flips the zenith. The horizon of every camera is unchanged.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.zenith = -out.zenith;
        out.basis = [out.basis[1], out.basis[0]];
        out
    }
}

struct PlaneFit {
    basis: [Vector3<f64>; 2],
    normal: Vector3<f64>,
    singular_values: [f64; 3],
}

fn fit_plane(directions: &[Vector3<f64>]) -> Result<PlaneFit> {
    let stacked = DMatrix::from_fn(directions.len(), 3, |i, j| directions[i][j]);
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.map(|k| svd.singular_values[k]);
    if sigma[1] < DEGENERATE_RATIO * sigma[0] {
        return Err(Error::DegenerateModel(format!(
            "lateral directions span a line (singular values {:.3e}, {:.3e}); the horizon plane is underdetermined",
            sigma[0], sigma[1]
        )));
    }
    let row = |k: usize| Vector3::new(v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)]).normalize();
    Ok(PlaneFit {
        basis: [row(order[0]), row(order[1])],
        normal: row(order[2]),
        singular_values: sigma,
    })
}

fn camera_residuals(directions: &[Vector3<f64>], normal: &Vector3<f64>) -> Vec<f64> {
    directions
        .chunks_exact(2)
        .map(|pair| {
            pair.iter()
                .map(|d| (d.dot(normal).abs() / d.norm()).min(1.0).asin())
                .fold(0.0, f64::max)
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fits the horizon plane to lateral directions (two per camera, as returned
/// by [`collect_lateral_directions`]).
///
/// Two rejection rounds follow the initial fit: a camera whose residual
/// exceeds `max(10 deg, 3 * median residual)` is dropped and the plane refit
/// on the remaining cameras. `up_hint` orients the zenith; pass the result of
/// [`mean_camera_up`].
pub fn fit_horizon_plane(directions: &[Vector3<f64>], up_hint: &Vector3<f64>) -> Result<ZenithEstimate> {
    if !directions.len().is_multiple_of(2) {
        return Err(Error::invalid("lateral directions come in left/right pairs"));
    }
    let cameras = directions.len() / 2;
    if cameras < MIN_CAMERAS {
        return Err(Error::InsufficientCameras { needed: MIN_CAMERAS, got: cameras });
    }

    let mut inliers = vec![true; cameras];
    let mut fit = fit_plane(directions)?;
    for _ in 0..REJECTION_ROUNDS {
        let residuals = camera_residuals(directions, &fit.normal);
        let threshold = OUTLIER_FLOOR.max(OUTLIER_MEDIAN_FACTOR * median(&residuals));
        let next: Vec<bool> = residuals.iter().map(|&r| r <= threshold).collect();
        let kept = next.iter().filter(|&&b| b).count();
        if kept < MIN_CAMERAS {
            return Err(Error::DegenerateModel(format!(
                "only {kept} cameras survive outlier rejection"
            )));
        }
        inliers = next;
        let subset: Vec<Vector3<f64>> = directions
            .chunks_exact(2)
            .zip(&inliers)
            .filter(|(_, &keep)| keep)
            .flat_map(|(pair, _)| pair.iter().copied())
            .collect();
        fit = fit_plane(&subset)?;
    }

    let mut zenith = fit.normal;
    let mut basis = fit.basis;
    if zenith.dot(up_hint) < 0.0 {
        zenith = -zenith;
    }
    // right-handed: basis[0] x basis[1] = zenith
    if basis[0].cross(&basis[1]).dot(&zenith) < 0.0 {
        basis.swap(0, 1);
    }
    Ok(ZenithEstimate {
        basis,
        zenith,
        residuals: camera_residuals(directions, &zenith),
        inliers,
        singular_values: fit.singular_values,
    })
}

/// `collect_lateral_directions` followed by `fit_horizon_plane`.
pub fn estimate_zenith(model: &SfmModel) -> Result<ZenithEstimate> {
    if model.len() < MIN_CAMERAS {
        return Err(Error::InsufficientCameras { needed: MIN_CAMERAS, got: model.len() });
    }
    fit_horizon_plane(&collect_lateral_directions(model), &mean_camera_up(model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmitReason {
    ExcessResidual,
    VerticalHorizon,
}

impl OmitReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            OmitReason::ExcessResidual => "excess residual",
            OmitReason::VerticalHorizon => "vertical horizon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image_id: String,
    pub frame: ImageFrame,
    pub line: HorizonLine,
}

impl LabeledImage {
    pub fn to_record(&self) -> LabelRecord {
        LabelRecord::from_line(&self.image_id, self.frame, &self.line).expect("labeled horizons are not vertical")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelLabels {
    pub labels: Vec<LabeledImage>,
    pub omitted: Vec<(String, OmitReason)>,
}

/// Projects the estimated horizon plane into every inlier camera:
/// `{p : p^T K^-T R z = 0}` with `z` the estimated zenith.
pub fn label_model(model: &SfmModel, estimate: &ZenithEstimate) -> Result<ModelLabels> {
    if estimate.inliers.len() != model.len() {
        return Err(Error::invalid(format!(
            "zenith estimate covers {} cameras, model has {}",
            estimate.inliers.len(),
            model.len()
        )));
    }
    let mut out = ModelLabels::default();
    for (camera, &inlier) in model.cameras.iter().zip(&estimate.inliers) {
        if !inlier {
            out.omitted.push((camera.image_id.clone(), OmitReason::ExcessResidual));
            continue;
        }
        let line = horizon_for_zenith(&camera.rig, &camera.frame, &estimate.zenith);
        if line.is_vertical() {
            out.omitted.push((camera.image_id.clone(), OmitReason::VerticalHorizon));
            continue;
        }
        out.labels.push(LabeledImage { image_id: camera.image_id.clone(), frame: camera.frame, line });
    }
    Ok(out)
}

/// Evidence for reviewing a model's global horizon by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub model_id: String,
    pub cameras: usize,
    pub inliers: usize,
    pub inlier_fraction: f64,
    pub zenith: [f64; 3],
    pub singular_values: [f64; 3],
    pub median_residual_deg: f64,
    /// `(lower edge deg, upper edge deg, count)`, 1 degree wide up to 10 degrees,
    /// then one bin per 10 degrees up to 90.
    pub histogram: Vec<(f64, f64, usize)>,
    pub omitted: Vec<(String, String)>,
}

impl ResidualReport {
    pub fn new(model: &SfmModel, estimate: &ZenithEstimate, labels: &ModelLabels) -> Self {
        let degrees: Vec<f64> = estimate.residuals.iter().map(|r| r.to_degrees()).collect();
        let mut edges: Vec<f64> = (0..=10).map(f64::from).collect();
        edges.extend((2..=9).map(|k| 10.0 * k as f64));
        let mut histogram: Vec<(f64, f64, usize)> = edges.windows(2).map(|w| (w[0], w[1], 0)).collect();
        for &d in &degrees {
            let slot = histogram
                .iter()
                .position(|&(_, hi, _)| d < hi)
                .unwrap_or(histogram.len() - 1);
            histogram[slot].2 += 1;
        }
        Self {
            model_id: model.model_id.clone(),
            cameras: model.len(),
            inliers: estimate.inlier_count(),
            inlier_fraction: estimate.inlier_fraction(),
            zenith: [estimate.zenith.x, estimate.zenith.y, estimate.zenith.z],
            singular_values: estimate.singular_values,
            median_residual_deg: if degrees.is_empty() { 0.0 } else { median(&degrees) },
            histogram,
            omitted: labels.omitted.iter().map(|(id, r)| (id.clone(), r.as_str().to_string())).collect(),
        }
    }
}
