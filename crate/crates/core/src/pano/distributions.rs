use std::f64::consts::PI;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tilt_roll_from_horizon, HorizonLine, ImageFrame};
use crate::synthetic::rng;

/// Degrees of freedom of the roll distribution.
pub const ROLL_DOF: f64 = 2.43;
/// Half-width of the Epanechnikov tilt kernel, radians.
pub const TILT_BANDWIDTH: f64 = 0.003;
/// Open interval sampled fields of view are clamped into, degrees.
pub const FOV_RANGE_DEG: (f64, f64) = (10.0, 120.0);
pub const MIN_SAMPLES: usize = 30;

const FOV_MARGIN_DEG: f64 = 1e-6;
const SCALE_FLOOR: f64 = 1e-9;
const EM_ITERATIONS: usize = 100;
const EM_TOLERANCE: f64 = 1e-10;

/// One labeled camera: tilt and roll in radians, vertical field of view in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamObservation {
    pub tilt: f64,
    pub roll: f64,
    pub fov_deg: f64,
}

/// Tilt, roll and vertical field of view of a camera whose horizon and focal length are known.
pub fn observation_from_line(line: &HorizonLine, focal_px: f64, frame: &ImageFrame) -> Result<ParamObservation> {
    let (tilt, roll) = tilt_roll_from_horizon(line, focal_px, frame)?;
    let fov_deg = 2.0 * (0.5 * frame.height as f64 / focal_px).atan().to_degrees();
    Ok(ParamObservation { tilt, roll, fov_deg })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovDistribution {
    pub mean_deg: f64,
    pub std_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollDistribution {
    pub location: f64,
    pub scale: f64,
    pub dof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltKde {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

/// Yaw is always uniform on `[0, 2π)` and carries no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParamDistributions {
    pub fov: FovDistribution,
    pub roll: RollDistribution,
    pub tilt: TiltKde,
}

impl CameraParamDistributions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fov.std_deg > 0.0
            && self.fov.mean_deg.is_finite()
            && self.roll.scale > 0.0
            && self.roll.location.is_finite()
            && self.roll.dof > 0.0
            && self.tilt.bandwidth > 0.0
            && !self.tilt.samples.is_empty()
            && self.tilt.samples.iter().all(|t| t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("camera parameter distributions are not valid"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSample {
    pub yaw: f64,
    pub tilt: f64,
    pub roll: f64,
    pub fov_deg: f64,
}

/// Location and scale of a Student's t with fixed `dof`, by iteratively
/// reweighted EM started from the median and scaled MAD.
pub fn fit_student_t(samples: &[f64], dof: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut deviations: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let mut loc = median;
    let mut scale = (1.4826 * deviations[deviations.len() / 2]).max(SCALE_FLOOR);
    for _ in 0..EM_ITERATIONS {
        let weights: Vec<f64> = samples
            .iter()
            .map(|x| {
                let z = (x - loc) / scale;
                (dof + 1.0) / (dof + z * z)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let new_loc = samples.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / total;
        let var = samples.iter().zip(&weights).map(|(x, w)| w * (x - new_loc).powi(2)).sum::<f64>()
            / samples.len() as f64;
        let new_scale = var.sqrt().max(SCALE_FLOOR);
        let delta = (new_loc - loc).abs().max((new_scale - scale).abs());
        loc = new_loc;
        scale = new_scale;
        if delta < EM_TOLERANCE {
            break;
        }
    }
    (loc, scale)
}

/// Fits the field-of-view normal, the roll Student's t and the tilt KDE.
/// Spreads that come out as zero are floored at 1e-9 so sampling stays defined.
pub fn fit_distributions(observations: &[ParamObservation]) -> Result<CameraParamDistributions> {
    if observations.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_SAMPLES, got: observations.len() });
    }
    if observations.iter().any(|o| !(o.tilt.is_finite() && o.roll.is_finite() && o.fov_deg.is_finite())) {
        return Err(Error::invalid("camera parameter observations must be finite"));
    }
    let n = observations.len() as f64;
    let mean_deg = observations.iter().map(|o| o.fov_deg).sum::<f64>() / n;
    let var = observations.iter().map(|o| (o.fov_deg - mean_deg).powi(2)).sum::<f64>() / (n - 1.0);
    let rolls: Vec<f64> = observations.iter().map(|o| o.roll).collect();
    let (location, scale) = fit_student_t(&rolls, ROLL_DOF);
    Ok(CameraParamDistributions {
        fov: FovDistribution { mean_deg, std_deg: var.sqrt().max(SCALE_FLOOR) },
        roll: RollDistribution { location, scale, dof: ROLL_DOF },
        tilt: TiltKde { samples: observations.iter().map(|o| o.tilt).collect(), bandwidth: TILT_BANDWIDTH },
    })
}

/// Inverse CDF of the Epanechnikov kernel on `[-1, 1]`: the root of
/// `u^3 - 3u + 4p - 2 = 0` lying in `[-1, 1]`.
pub fn epanechnikov_quantile(p: f64) -> f64 {
    2.0 * ((2.0 * p - 1.0).clamp(-1.0, 1.0).asin() / 3.0).sin()
}

pub fn sample_camera_with<R: Rng + ?Sized>(dists: &CameraParamDistributions, rng: &mut R) -> CameraSample {
    let yaw = rng.random_range(0.0..2.0 * PI);
    let base = dists.tilt.samples[rng.random_range(0..dists.tilt.samples.len())];
    let tilt = base + dists.tilt.bandwidth * epanechnikov_quantile(rng.random::<f64>());
    let t: f64 = StudentT::new(dists.roll.dof).expect("positive dof").sample(rng);
    let roll = dists.roll.location + dists.roll.scale * t;
    let fov: f64 = Normal::new(dists.fov.mean_deg, dists.fov.std_deg).expect("positive std").sample(rng);
    let fov_deg = fov.clamp(FOV_RANGE_DEG.0 + FOV_MARGIN_DEG, FOV_RANGE_DEG.1 - FOV_MARGIN_DEG);
    CameraSample { yaw, tilt, roll, fov_deg }
}

/// Pure function of `(dists, seed)`.
pub fn sample_camera(dists: &CameraParamDistributions, seed: u64) -> CameraSample {
    sample_camera_with(dists, &mut rng(seed))
}
