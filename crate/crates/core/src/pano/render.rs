use std::f64::consts::PI;
use std::path::Path;

use image::RgbImage;
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::distributions::{CameraSample, FOV_RANGE_DEG};
use crate::error::{Error, Result};
use crate::geometry::{camera_rotation, horizon_from_camera, CameraRig, HorizonLine, ImageFrame};

pub const MIN_PANORAMA_HEIGHT: u32 = 64;
pub const MIN_CUTOUT_SIZE: u32 = 32;

/// Equirectangular panorama, `W = 2H`. Longitude zero (world `-z`) is the
/// center column and longitude grows to the right, towards world `+x`. The
/// top row looks at the zenith (world `+y`).
#[derive(Debug, Clone)]
pub struct Panorama {
    image: RgbImage,
}

impl Panorama {
    pub fn new(image: RgbImage) -> Result<Self> {
        let (w, h) = image.dimensions();
        if w != 2 * h || h < MIN_PANORAMA_HEIGHT {
            return Err(Error::invalid(format!(
                "panorama must be 2H x H with H >= {MIN_PANORAMA_HEIGHT}, got {w}x{h}"
            )));
        }
        Ok(Self { image })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::new(image::open(path)?.to_rgb8())
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// half-integers); wraps horizontally and clamps vertically.
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let x = u - 0.5;
        let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let xa = (x0 as i64).rem_euclid(w) as u32;
        let xb = (x0 as i64 + 1).rem_euclid(w) as u32;
        let ya = y0 as u32;
        let yb = (y0 as i64 + 1).min(h - 1) as u32;
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let p = |px: u32, py: u32| self.image.get_pixel(px, py).0[c] as f64;
            *o = (1.0 - fy) * ((1.0 - fx) * p(xa, ya) + fx * p(xb, ya)) + fy * ((1.0 - fx) * p(xa, yb) + fx * p(xb, yb));
        }
        out
    }
}

/// Continuous equirectangular pixel coordinates of a world direction.
pub fn direction_to_equirect(direction: &Vector3<f64>, width: u32, height: u32) -> (f64, f64) {
    let d = direction.normalize();
    let lon = d.x.atan2(-d.z);
    let lat = d.y.clamp(-1.0, 1.0).asin();
    ((lon / (2.0 * PI) + 0.5) * width as f64, (0.5 - lat / PI) * height as f64)
}

/// Camera for a square cutout of side `out_size` px with the given horizontal
/// (= vertical) field of view.
pub fn cutout_rig(camera: &CameraSample, out_size: u32) -> Result<(CameraRig, ImageFrame)> {
    let frame = ImageFrame::new(out_size, out_size)?;
    let focal_px = 0.5 * out_size as f64 / (0.5 * camera.fov_deg.to_radians()).tan();
    let rig = CameraRig::from_rotation(camera_rotation(camera.yaw, camera.tilt, camera.roll), focal_px)?;
    Ok((rig, frame))
}

#[derive(Debug, Clone)]
pub struct Cutout {
    pub image: RgbImage,
    pub line: HorizonLine,
    pub rig: CameraRig,
    pub frame: ImageFrame,
}

/// Renders a square rectilinear view of the panorama and its exact horizon.
pub fn render_cutout(pano: &Panorama, camera: &CameraSample, out_size: u32) -> Result<Cutout> {
    if out_size < MIN_CUTOUT_SIZE {
        return Err(Error::invalid(format!("cutout size must be at least {MIN_CUTOUT_SIZE}, got {out_size}")));
    }
    if !(camera.fov_deg > FOV_RANGE_DEG.0 && camera.fov_deg < FOV_RANGE_DEG.1) {
        return Err(Error::invalid(format!("field of view {} deg outside (10, 120)", camera.fov_deg)));
    }
    let (rig, frame) = cutout_rig(camera, out_size)?;
    let f = frame.normalized_focal(rig.focal_px);
    let to_world = rig.rotation.transpose();
    let row_bytes = 3 * out_size as usize;
    let mut buffer = vec![0u8; row_bytes * out_size as usize];
    buffer.par_chunks_mut(row_bytes).enumerate().for_each(|(py, row)| {
        for px in 0..out_size as usize {
            let q = frame.pixel_to_centered(Vector2::new(px as f64 + 0.5, py as f64 + 0.5));
            let d = to_world * Vector3::new(q.x, q.y, -f);
            let (u, v) = direction_to_equirect(&d, pano.width(), pano.height());
            let rgb = pano.sample(u, v);
            for c in 0..3 {
                row[3 * px + c] = rgb[c].round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    let image = RgbImage::from_raw(out_size, out_size, buffer).expect("buffer matches dimensions");
    Ok(Cutout { image, line: horizon_from_camera(&rig, &frame), rig, frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{painted_panorama, textured_panorama};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera(yaw: f64, tilt: f64, roll: f64, fov_deg: f64) -> CameraSample {
        CameraSample { yaw, tilt, roll, fov_deg }
    }

    #[test]
    fn rejects_bad_panoramas() {
        assert!(Panorama::new(RgbImage::new(100, 64)).is_err());
        assert!(Panorama::new(RgbImage::new(124, 62)).is_err());
        assert!(Panorama::new(RgbImage::new(128, 64)).is_ok());
    }

    #[test]
    fn rejects_bad_cutout_requests() {
        let pano = Panorama::new(painted_panorama(64)).unwrap();
        assert!(render_cutout(&pano, &camera(0.0, 0.0, 0.0, 60.0), 31).is_err());
        assert!(render_cutout(&pano, &camera(0.0, 0.0, 0.0, 10.0), 64).is_err());
        assert!(render_cutout(&pano, &camera(0.0, 0.0, 0.0, 120.0), 64).is_err());
    }

    #[test]
    fn level_camera_has_centered_horizon() {
        let pano = Panorama::new(painted_panorama(64)).unwrap();
        let cut = render_cutout(&pano, &camera(1.0, 0.0, 0.0, 60.0), 64).unwrap();
        let (l, r) = cut.line.left_right(&cut.frame).unwrap();
        assert!(l.abs() < 1e-12 && r.abs() < 1e-12);
    }

    #[test]
    fn center_row_samples_equator() {
        let pano = Panorama::new(textured_panorama(128, 3)).unwrap();
        let size = 65;
        let cut = render_cutout(&pano, &camera(0.7, 0.0, 0.0, 70.0), size).unwrap();
        let f = cut.frame.normalized_focal(cut.rig.focal_px);
        let to_world = cut.rig.rotation.transpose();
        let py = size / 2;
        for px in 0..size {
            let q = cut.frame.pixel_to_centered(Vector2::new(px as f64 + 0.5, py as f64 + 0.5));
            assert!(q.y.abs() < 1e-12);
            let d = to_world * Vector3::new(q.x, q.y, -f);
            let (u, v) = direction_to_equirect(&d, pano.width(), pano.height());
            assert!((v - 64.0).abs() < 1e-9);
            let expected = pano.sample(u, 64.0);
            let got = cut.image.get_pixel(px, py).0;
            for c in 0..3 {
                assert!((got[c] as f64 - expected[c]).abs() <= 0.5 + 1e-9);
            }
        }
    }

    #[test]
    fn equirect_mapping_landmarks() {
        let (u, v) = direction_to_equirect(&Vector3::new(0.0, 0.0, -1.0), 200, 100);
        assert!((u - 100.0).abs() < 1e-12 && (v - 50.0).abs() < 1e-12);
        let (u, _) = direction_to_equirect(&Vector3::new(1.0, 0.0, 0.0), 200, 100);
        assert!((u - 150.0).abs() < 1e-12);
        let (_, v) = direction_to_equirect(&Vector3::new(0.0, 1.0, 0.0), 200, 100);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn sampling_wraps_horizontally() {
        let pano = Panorama::new(textured_panorama(64, 1)).unwrap();
        let a = pano.sample(0.0, 20.5);
        let b = pano.sample(128.0, 20.5);
        assert_eq!(a, b);
        let left = pano.image().get_pixel(0, 20).0;
        let right = pano.image().get_pixel(127, 20).0;
        for c in 0..3 {
            assert!((a[c] - 0.5 * (left[c] as f64 + right[c] as f64)).abs() < 1e-9);
        }
    }

    /// Boundary oracle: per column, the painted boundary lies where the
    /// intensity crosses mid-gray; it must match the label within 1 px.
    pub(crate) fn boundary_error(cut: &Cutout) -> f64 {
        let size = cut.frame.width;
        let mut worst: f64 = 0.0;
        for px in 0..size {
            let x = cut.frame.pixel_to_centered(Vector2::new(px as f64 + 0.5, 0.0)).x;
            let y_label = cut.frame.centered_to_pixel(Vector2::new(x, cut.line.y_at(x).unwrap())).y;
            let column: Vec<f64> = (0..size).map(|py| cut.image.get_pixel(px, py).0[0] as f64).collect();
            let crossing = column.windows(2).position(|w| (w[0] - 127.5) * (w[1] - 127.5) <= 0.0);
            let err = match crossing {
                Some(k) => {
                    let (a, b) = (column[k], column[k + 1]);
                    let t = if a == b { 0.5 } else { (a - 127.5) / (a - b) };
                    (k as f64 + 0.5 + t - y_label).abs()
                }
                // the boundary is outside the image: the label must be too
                None => {
                    let above = column[0] > 127.5;
                    let outside = if above { y_label >= size as f64 - 1.0 } else { y_label <= 1.0 };
                    if outside { 0.0 } else { f64::INFINITY }
                }
            };
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn painted_boundary_matches_label() {
        let pano = Panorama::new(painted_panorama(256)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let cam = camera(
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.5..0.5),
                rng.random_range(30.0..100.0),
            );
            let cut = render_cutout(&pano, &cam, 96).unwrap();
            let err = boundary_error(&cut);
            assert!(err <= 1.0, "{cam:?}: {err}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let pano = Panorama::new(textured_panorama(64, 2)).unwrap();
        let cam = camera(2.0, 0.1, -0.2, 55.0);
        assert_eq!(render_cutout(&pano, &cam, 48).unwrap().image, render_cutout(&pano, &cam, 48).unwrap().image);
    }
}
