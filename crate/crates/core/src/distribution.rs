//! Discrete probability over `(theta, rho)` cells for one image or subwindow.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aggregation::Subwindow;
use crate::error::{Error, Result};
use crate::geometry::HorizonLine;
use crate::label_space::LabelSpace;

/// Tolerance on the probability mass handed to [`HorizonDistribution::from_probabilities`].
pub const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Center of the most probable cell, ties to the lowest flat index.
    #[default]
    Argmax,
    /// Probability-weighted mean of the cell centers.
    Expectation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonDistribution {
    space: Arc<LabelSpace>,
    /// Row-major, `theta` bins along rows.
    probabilities: Vec<f64>,
    /// Geometry of the subwindow the grid refers to, in full-image pixels.
    pub window: Subwindow,
    /// Point estimate in the subwindow's centered frame.
    pub point: HorizonLine,
}

impl HorizonDistribution {
    /// Normalizes `weights` (non-negative, positive total) into a distribution
    /// whose point estimate uses `decoder`.
    pub fn from_weights(space: Arc<LabelSpace>, weights: Vec<f64>, window: Subwindow, decoder: Decoder) -> Result<Self> {
        if weights.len() != space.cells() {
            return Err(Error::invalid(format!(
                "grid has {} cells, label space has {}",
                weights.len(),
                space.cells()
            )));
        }
        if weights.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("grid entries must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("grid has no probability mass"));
        }
        let probabilities: Vec<f64> = weights.iter().map(|p| p / total).collect();
        let mut out = Self { space, probabilities, window, point: HorizonLine::from_slope_offset(0.0, 0.0) };
        out.point = out.decode(decoder);
        Ok(out)
    }

    /// Like [`from_weights`](Self::from_weights) but insists the grid already
    /// sums to one within [`MASS_TOLERANCE`].
    pub fn from_probabilities(space: Arc<LabelSpace>, probabilities: Vec<f64>, window: Subwindow) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("grid sums to {total}, expected 1")));
        }
        Self::from_weights(space, probabilities, window, Decoder::Argmax)
    }

    /// Softmax over a grid of logits.
    pub fn from_logits(space: Arc<LabelSpace>, logits: &[f64], window: Subwindow) -> Result<Self> {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("logits must be finite"));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights = logits.iter().map(|v| (v - max).exp()).collect();
        Self::from_weights(space, weights, window, Decoder::Argmax)
    }

    /// Joint grid as the outer product of per-parameter marginals.
    pub fn from_marginals(space: Arc<LabelSpace>, theta: &[f64], rho: &[f64], window: Subwindow) -> Result<Self> {
        if theta.len() != space.theta.len() || rho.len() != space.rho.len() {
            return Err(Error::invalid("marginal lengths do not match the label space"));
        }
        let weights = theta.iter().flat_map(|t| rho.iter().map(move |r| t * r)).collect();
        Self::from_weights(space, weights, window, Decoder::Argmax)
    }

    /// All mass on the cell containing `line`, with `line` itself as the point
    /// estimate. Used for point regressors.
    pub fn concentrated(space: Arc<LabelSpace>, line: HorizonLine, window: Subwindow) -> Self {
        let (i, j) = space.cell_of(&line);
        let mut probabilities = vec![0.0; space.cells()];
        probabilities[i * space.rho.len() + j] = 1.0;
        Self { space, probabilities, window, point: line }
    }

    pub fn space(&self) -> &Arc<LabelSpace> {
        &self.space
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, theta_bin: usize, rho_bin: usize) -> f64 {
        self.probabilities[theta_bin * self.space.rho.len() + rho_bin]
    }

    /// `(theta bin, rho bin)` of the largest cell; ties go to the lowest flat index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = k;
            }
        }
        (best / self.space.rho.len(), best % self.space.rho.len())
    }

    pub fn max_probability(&self) -> f64 {
        let (i, j) = self.argmax();
        self.probability(i, j)
    }

    pub fn decode(&self, decoder: Decoder) -> HorizonLine {
        match decoder {
            Decoder::Argmax => {
                let (i, j) = self.argmax();
                self.space.cell_line(i, j)
            }
            Decoder::Expectation => {
                let n_rho = self.space.rho.len();
                let (mut slope, mut rho) = (0.0, 0.0);
                for (k, &p) in self.probabilities.iter().enumerate() {
                    slope += p * self.space.theta.centers[k / n_rho];
                    rho += p * self.space.rho.centers[k % n_rho];
                }
                HorizonLine::from_slope_offset(slope + std::f64::consts::FRAC_PI_2, rho)
            }
        }
    }

    /// Bilinear interpolation over the cell centers, clamped at the borders.
    /// `slope` is `theta - pi / 2`.
    pub fn density_at(&self, slope: f64, rho: f64) -> f64 {
        let (i, ti) = self.space.theta.interpolation(slope);
        let (j, tj) = self.space.rho.interpolation(rho);
        let i1 = (i + 1).min(self.space.theta.len() - 1);
        let j1 = (j + 1).min(self.space.rho.len() - 1);
        let p = |a, b| self.probability(a, b);
        (1.0 - ti) * ((1.0 - tj) * p(i, j) + tj * p(i, j1)) + ti * ((1.0 - tj) * p(i1, j) + tj * p(i1, j1))
    }

    pub fn with_window(mut self, window: Subwindow) -> Self {
        self.window = window;
        self
    }
}
