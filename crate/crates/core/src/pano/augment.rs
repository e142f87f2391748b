use image::imageops;
use image::RgbImage;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::aggregation::{transfer_horizon, Subwindow};
use crate::error::{Error, Result};
use crate::geometry::{HorizonLine, ImageFrame};
use crate::synthetic::rng;

pub const AUGMENT_CROPS: usize = 10;
pub const MIN_CROP_FRACTION: f64 = 0.85;
pub const MIRROR_PROBABILITY: f64 = 0.5;
pub const MIN_AUGMENT_DIMENSION: u32 = 38;

/// Integer square crop, optionally mirrored after cropping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropParams {
    pub x: u32,
    pub y: u32,
    pub side: u32,
    pub mirrored: bool,
}

impl CropParams {
    pub fn window(&self) -> Subwindow {
        Subwindow::square(self.x as f64, self.y as f64, self.side as f64)
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedCrop {
    pub params: CropParams,
    pub image: RgbImage,
    /// Horizon in the crop's own centered frame.
    pub line: HorizonLine,
}

/// Side uniform in `[ceil(0.85 m), m]`, position uniform over all placements.
pub fn sample_crop_params<R: Rng + ?Sized>(frame: &ImageFrame, rng: &mut R) -> CropParams {
    let m = frame.min_dimension();
    let min_side = (MIN_CROP_FRACTION * m as f64).ceil() as u32;
    let side = rng.random_range(min_side..=m);
    let x = rng.random_range(0..=frame.width - side);
    let y = rng.random_range(0..=frame.height - side);
    CropParams { x, y, side, mirrored: rng.random_bool(MIRROR_PROBABILITY) }
}

/// Full-image horizon expressed in the crop's frame.
pub fn crop_line(line: &HorizonLine, frame: &ImageFrame, params: &CropParams) -> HorizonLine {
    let local = transfer_horizon(line, &Subwindow::full(frame), &params.window(), frame);
    if params.mirrored {
        local.mirrored()
    } else {
        local
    }
}

/// Inverse of [`crop_line`].
pub fn restore_line(line: &HorizonLine, frame: &ImageFrame, params: &CropParams) -> HorizonLine {
    let local = if params.mirrored { line.mirrored() } else { *line };
    transfer_horizon(&local, &params.window(), &Subwindow::full(frame), frame)
}

/// Ten random square crops of a labeled image with their adjusted horizons.
pub fn augment_crop(image: &RgbImage, line: &HorizonLine, seed: u64) -> Result<Vec<AugmentedCrop>> {
    let frame = ImageFrame::new(image.width(), image.height())?;
    if frame.min_dimension() < MIN_AUGMENT_DIMENSION {
        return Err(Error::invalid(format!(
            "augmentation needs a minimum dimension of {MIN_AUGMENT_DIMENSION} px, got {}",
            frame.min_dimension()
        )));
    }
    let mut r = rng(seed);
    Ok((0..AUGMENT_CROPS)
        .map(|_| {
            let params = sample_crop_params(&frame, &mut r);
            let mut crop = imageops::crop_imm(image, params.x, params.y, params.side, params.side).to_image();
            if params.mirrored {
                imageops::flip_horizontal_in_place(&mut crop);
            }
            AugmentedCrop { params, image: crop, line: crop_line(line, &frame, &params) }
        })
        .collect())
}
