//! Training data from equirectangular panoramas: camera-parameter
//! distributions, rectilinear cutout rendering and labeled-crop augmentation.

mod augment;
mod distributions;
mod render;

pub use augment::{
    augment_crop, crop_line, restore_line, sample_crop_params, AugmentedCrop, CropParams, AUGMENT_CROPS,
    MIN_AUGMENT_DIMENSION, MIN_CROP_FRACTION, MIRROR_PROBABILITY,
};
pub use distributions::{
    epanechnikov_quantile, fit_distributions, fit_student_t, observation_from_line, sample_camera,
    sample_camera_with, CameraParamDistributions, CameraSample, FovDistribution, ParamObservation,
    RollDistribution, TiltKde, FOV_RANGE_DEG, MIN_SAMPLES, ROLL_DOF, TILT_BANDWIDTH,
};
pub use render::{
    cutout_rig, direction_to_equirect, render_cutout, Cutout, Panorama, MIN_CUTOUT_SIZE, MIN_PANORAMA_HEIGHT,
};
