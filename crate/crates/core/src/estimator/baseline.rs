//! Linear regression from fixed image features to horizon parameters.

use std::f64::consts::FRAC_PI_2;

use image::RgbImage;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::Loss;
use crate::error::{Error, Result};
use crate::geometry::HorizonLine;
use crate::synthetic::rng;

pub const FEATURE_GRID: usize = 16;
pub const FEATURE_DIM: usize = 2 * FEATURE_GRID * FEATURE_GRID;
pub const MIN_TRAINING_IMAGES: usize = 50;
/// Smallest square crop the feature extractor accepts.
pub const MIN_FEATURE_SIDE: u32 = (FEATURE_GRID + 1) as u32;

/// Which pair of numbers the regressor predicts for a square crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Slope angle `theta - pi/2` and offset `rho`.
    #[default]
    SlopeOffset,
    /// Heights at the left and right borders.
    LeftRight,
}

impl Parameterization {
    /// Regression targets of a line in a square crop's centered frame.
    pub fn targets(&self, line: &HorizonLine) -> Result<[f64; 2]> {
        match self {
            Parameterization::SlopeOffset => Ok([line.slope_angle(), line.rho()]),
            Parameterization::LeftRight => {
                let (l, r) = line.border_heights(0.5)?;
                Ok([l, r])
            }
        }
    }

    pub fn line(&self, values: [f64; 2]) -> Result<HorizonLine> {
        match self {
            Parameterization::SlopeOffset => Ok(HorizonLine::from_slope_offset(values[0] + FRAC_PI_2, values[1])),
            Parameterization::LeftRight => HorizonLine::from_border_heights(values[0], values[1], 0.5),
        }
    }
}

/// Mean luminance in `[0, 1]` over `rows x cols` equal boxes of a square crop.
fn box_means(image: &RgbImage, x0: u32, y0: u32, side: u32, rows: usize, cols: usize) -> Vec<f64> {
    let bounds = |k: usize, n: usize| (k as u64 * side as u64 / n as u64) as u32;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (ya, yb) = (bounds(r, rows), bounds(r + 1, rows));
        for c in 0..cols {
            let (xa, xb) = (bounds(c, cols), bounds(c + 1, cols));
            let mut sum = 0.0;
            for y in ya..yb {
                for x in xa..xb {
                    let [red, green, blue] = image.get_pixel(x0 + x, y0 + y).0;
                    sum += 0.299 * red as f64 + 0.587 * green as f64 + 0.114 * blue as f64;
                }
            }
            out.push(sum / (255.0 * ((yb - ya) * (xb - xa)) as f64));
        }
    }
    out
}

/// 16x16 box-averaged luminance followed by the 16x16 magnitudes of vertical
/// differences between consecutive rows of a 17x16 box average.
pub fn extract_features(image: &RgbImage, x0: u32, y0: u32, side: u32) -> Result<Vec<f64>> {
    if side < MIN_FEATURE_SIDE || x0 + side > image.width() || y0 + side > image.height() {
        return Err(Error::invalid(format!(
            "feature crop ({x0}, {y0}, {side}) is smaller than {MIN_FEATURE_SIDE} px or leaves the {}x{} image",
            image.width(),
            image.height()
        )));
    }
    let mut features = box_means(image, x0, y0, side, FEATURE_GRID, FEATURE_GRID);
    let tall = box_means(image, x0, y0, side, FEATURE_GRID + 1, FEATURE_GRID);
    for r in 0..FEATURE_GRID {
        for c in 0..FEATURE_GRID {
            features.push((tall[(r + 1) * FEATURE_GRID + c] - tall[r * FEATURE_GRID + c]).abs());
        }
    }
    Ok(features)
}

/// Features of the largest centered square.
pub fn center_features(image: &RgbImage) -> Result<Vec<f64>> {
    let side = image.width().min(image.height());
    extract_features(image, (image.width() - side) / 2, (image.height() - side) / 2, side)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub parameterization: Parameterization,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::default(),
            parameterization: Parameterization::default(),
            learning_rate: 0.01,
            epochs: 60,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// One linear predictor per target on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub parameterization: Parameterization,
    pub loss: Loss,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// `weights[t]` has one entry per feature for target `t`.
    pub weights: [Vec<f64>; 2],
    pub bias: [f64; 2],
    /// Mean loss over the full training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Standardized design matrix and regression targets.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 2]>,
}

impl LinearModel {
    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.feature_mean).zip(&self.feature_std).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn output(&self, z: &[f64]) -> [f64; 2] {
        [0, 1].map(|t| self.bias[t] + self.weights[t].iter().zip(z).map(|(w, v)| w * v).sum::<f64>())
    }

    /// Raw regression outputs for a raw feature vector.
    pub fn predict_values(&self, raw_features: &[f64]) -> [f64; 2] {
        self.output(&self.standardize(raw_features))
    }

    pub fn predict_line(&self, raw_features: &[f64]) -> Result<HorizonLine> {
        self.parameterization.line(self.predict_values(raw_features))
    }

    /// Mean loss over `rows` and its gradient, laid out as
    /// `[weights[0].., bias[0], weights[1].., bias[1]]`.
    pub fn objective(&self, set: &TrainingSet, rows: &[usize]) -> (f64, Vec<f64>) {
        let d = self.feature_mean.len();
        let mut grad = vec![0.0; 2 * (d + 1)];
        let mut total = 0.0;
        for &i in rows {
            let z = &set.features[i];
            let out = self.output(z);
            for t in 0..2 {
                let (loss, g) = self.loss.eval(out[t] - set.targets[i][t]);
                total += loss;
                let base = t * (d + 1);
                for (gk, zk) in grad[base..base + d].iter_mut().zip(z) {
                    *gk += g * zk;
                }
                grad[base + d] += g;
            }
        }
        let n = rows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(2 * (self.feature_mean.len() + 1));
        for t in 0..2 {
            p.extend_from_slice(&self.weights[t]);
            p.push(self.bias[t]);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let d = self.feature_mean.len();
        for t in 0..2 {
            let base = t * (d + 1);
            self.weights[t].copy_from_slice(&p[base..base + d]);
            self.bias[t] = p[base + d];
        }
    }

    /// Zero-initialized model with standardization fitted on `raw_features`.
    /// Returns the standardized training set alongside.
    pub fn prepare(raw_features: &[Vec<f64>], targets: Vec<[f64; 2]>, config: &TrainConfig) -> (Self, TrainingSet) {
        let d = raw_features[0].len();
        let n = raw_features.len() as f64;
        let mut mean = vec![0.0; d];
        for f in raw_features {
            mean.iter_mut().zip(f).for_each(|(m, v)| *m += v / n);
        }
        let mut std = vec![0.0; d];
        for f in raw_features {
            std.iter_mut().zip(f).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
        }
        // constant features contribute nothing; keep them finite
        let std: Vec<f64> = std.into_iter().map(|v| if v.sqrt() > 1e-8 { v.sqrt() } else { 1.0 }).collect();
        let model = Self {
            parameterization: config.parameterization,
            loss: config.loss,
            feature_mean: mean,
            feature_std: std,
            weights: [vec![0.0; d], vec![0.0; d]],
            bias: [0.0; 2],
            epoch_losses: Vec::new(),
        };
        let features = raw_features.iter().map(|f| model.standardize(f)).collect();
        (model, TrainingSet { features, targets })
    }

    /// Mean loss of the best constant predictor, found per target by
    /// bisection on the (monotone) derivative of the convex loss.
    pub fn constant_loss(set: &TrainingSet, loss: Loss) -> f64 {
        let n = set.targets.len() as f64;
        let mut total = 0.0;
        for t in 0..2 {
            let values: Vec<f64> = set.targets.iter().map(|v| v[t]).collect();
            let slope = |c: f64| values.iter().map(|v| loss.eval(c - v).1).sum::<f64>();
            let (mut lo, mut hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let c = 0.5 * (lo + hi);
            total += values.iter().map(|v| loss.eval(v - c).0).sum::<f64>();
        }
        total / n
    }
}

/// Fits the linear baseline on `(image, horizon in that image's center square)` pairs.
pub fn train_linear_baseline(data: &[(RgbImage, HorizonLine)], config: &TrainConfig) -> Result<LinearModel> {
    if data.len() < MIN_TRAINING_IMAGES {
        return Err(Error::InsufficientData { needed: MIN_TRAINING_IMAGES, got: data.len() });
    }
    let features = data.iter().map(|(img, _)| center_features(img)).collect::<Result<Vec<_>>>()?;
    let targets = data.iter().map(|(_, line)| config.parameterization.targets(line)).collect::<Result<Vec<_>>>()?;
    train_on_features(&features, targets, config)
}

pub fn train_on_features(raw_features: &[Vec<f64>], targets: Vec<[f64; 2]>, config: &TrainConfig) -> Result<LinearModel> {
    if raw_features.len() < MIN_TRAINING_IMAGES {
        return Err(Error::InsufficientData { needed: MIN_TRAINING_IMAGES, got: raw_features.len() });
    }
    if !(config.learning_rate > 0.0 && config.batch_size > 0 && config.epochs > 0) {
        return Err(Error::invalid("learning rate, batch size and epochs must be positive"));
    }
    let (mut model, set) = LinearModel::prepare(raw_features, targets, config);
    let all: Vec<usize> = (0..set.features.len()).collect();
    let mut order = all.clone();
    let mut r = rng(config.seed);
    for _ in 0..config.epochs {
        order.shuffle(&mut r);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = model.objective(&set, batch);
            let mut p = model.parameters();
            p.iter_mut().zip(&grad).for_each(|(v, g)| *v -= config.learning_rate * g);
            model.set_parameters(&p);
        }
        model.epoch_losses.push(model.objective(&set, &all).0);
    }
    Ok(model)
}
