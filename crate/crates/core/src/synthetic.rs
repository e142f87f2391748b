//! Synthetic scenes with known ground truth: SfM models with a hidden
//! zenith, and painted panoramas whose horizon is the equator.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::geometry::{camera_rotation, CameraRig, ImageFrame};
use crate::sfm::{SfmCamera, SfmModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q: Vector4<f64> = Vector4::from_fn(|_, _| StandardNormal.sample(rng));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q)).to_rotation_matrix().into_inner()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfmSceneConfig {
    /// Ordinary cameras.
    pub cameras: usize,
    /// Extra cameras rolled by +-90 degrees.
    pub rolled_outliers: usize,
    pub tilt_sigma_deg: f64,
    pub roll_sigma_deg: f64,
    pub frame: ImageFrame,
    pub focal_px: (f64, f64),
}

impl Default for SfmSceneConfig {
    fn default() -> Self {
        Self {
            cameras: 50,
            rolled_outliers: 0,
            tilt_sigma_deg: 5.0,
            roll_sigma_deg: 2.0,
            frame: ImageFrame { width: 640, height: 480 },
            focal_px: (350.0, 900.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SfmScene {
    pub model: SfmModel,
    /// Ground-truth zenith in the model's world frame.
    pub zenith: Vector3<f64>,
    /// Per camera, `true` for the injected rolled cameras.
    pub outlier: Vec<bool>,
}

impl SfmScene {
    /// Cameras with uniform yaw and normal tilt/roll noise about a random
    /// world frame. Translations are random; labeling ignores them.
    pub fn generate(config: &SfmSceneConfig, seed: u64) -> Self {
        let mut rng = rng(seed);
        let world = random_rotation(&mut rng);
        let zenith = world.transpose() * Vector3::y();
        let tilt = Normal::new(0.0, config.tilt_sigma_deg.to_radians()).expect("finite sigma");
        let roll = Normal::new(0.0, config.roll_sigma_deg.to_radians()).expect("finite sigma");

        let total = config.cameras + config.rolled_outliers;
        let mut outlier = vec![false; total];
        let mut placed = 0;
        while placed < config.rolled_outliers {
            let k = rng.random_range(0..total);
            if !outlier[k] {
                outlier[k] = true;
                placed += 1;
            }
        }

        let cameras = outlier
            .iter()
            .enumerate()
            .map(|(i, &is_outlier)| {
                let yaw = rng.random_range(0.0..2.0 * PI);
                let mut r = roll.sample(&mut rng);
                if is_outlier {
                    r += if rng.random_bool(0.5) { PI / 2.0 } else { -PI / 2.0 };
                }
                let rotation = camera_rotation(yaw, tilt.sample(&mut rng), r) * world;
                let focal = rng.random_range(config.focal_px.0..=config.focal_px.1);
                let translation = Vector3::from_fn(|_, _| rng.random_range(-20.0..20.0));
                SfmCamera {
                    image_id: format!("img_{i:04}"),
                    rig: CameraRig::new(rotation, translation, focal).expect("valid synthetic rig"),
                    frame: config.frame,
                }
            })
            .collect();
        Self {
            model: SfmModel::new(format!("synthetic_{seed}"), cameras).expect("unique ids"),
            zenith,
            outlier,
        }
    }
}

/// Equirectangular panorama, white above the equator and black below.
/// Rows whose centers lie at positive latitude are white.
pub fn painted_panorama(height: u32) -> RgbImage {
    RgbImage::from_fn(2 * height, height, |_, y| {
        if y < height / 2 {
            Rgb([255, 255, 255])
        } else {
            Rgb([0, 0, 0])
        }
    })
}

/// Painted panorama with a little structure on both sides of the horizon:
/// brightness of the sky falls off with elevation and the ground carries
/// a longitude-dependent pattern.
pub fn textured_panorama(height: u32, seed: u64) -> RgbImage {
    let mut rng = rng(seed);
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    let width = 2 * height;
    RgbImage::from_fn(width, height, |x, y| {
        let lat = (0.5 - (y as f64 + 0.5) / height as f64) * PI;
        let lon = ((x as f64 + 0.5) / width as f64 - 0.5) * 2.0 * PI;
        if lat > 0.0 {
            let v = 200.0 + 55.0 * (lat / (PI / 2.0));
            Rgb([v as u8, v as u8, 255])
        } else {
            let v = 40.0 + 25.0 * (3.0 * lon + phase).sin() * (-lat).cos();
            Rgb([v as u8, (v * 1.2) as u8, (v * 0.6) as u8])
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_rotation;

    #[test]
    fn generated_rotations_are_proper() {
        let mut rng = rng(0);
        for _ in 0..100 {
            assert!(is_rotation(&random_rotation(&mut rng)));
        }
    }

    #[test]
    fn scene_is_deterministic() {
        let config = SfmSceneConfig { rolled_outliers: 4, ..Default::default() };
        let a = SfmScene::generate(&config, 9);
        let b = SfmScene::generate(&config, 9);
        assert_eq!(a.model, b.model);
        assert_eq!(a.outlier.iter().filter(|&&o| o).count(), 4);
        assert_eq!(a.model.len(), 54);
    }

    #[test]
    fn painted_panorama_splits_at_equator() {
        let pano = painted_panorama(64);
        assert_eq!(pano.dimensions(), (128, 64));
        assert_eq!(pano.get_pixel(5, 31)[0], 255);
        assert_eq!(pano.get_pixel(5, 32)[0], 0);
    }
}
