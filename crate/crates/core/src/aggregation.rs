//! Combining per-subwindow horizon estimates into one full-image horizon.
//!
//! Two strategies are provided. [`aggregate_average`] moves every
//! subwindow's point estimate into the full image and averages the border
//! heights, weighting each by its distribution's peak probability.
//! [`aggregate_nll`] searches for the full-image horizon that is jointly most
//! likely under all subwindow distributions, treating the subwindows as
//! independent:
//!
//! ```text
//! E(line) = -1/N * sum_i log W_i(line)
//! ```
//!
//! where `W_i` maps `line` into subwindow `i` and reads its probability grid.

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::HorizonDistribution;
use crate::error::{Error, Result};
use crate::geometry::{HorizonLine, ImageFrame};

/// Side of the grid crops as a fraction of the image's smaller dimension.
pub const GRID_CROP_FRACTION: f64 = 0.99;
pub const MIN_GRID_DIMENSION: u32 = 100;
/// Probabilities are floored here before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
pub const MAX_CANDIDATES_PER_AXIS: usize = 200;
pub const MAX_REFINEMENT_EVALUATIONS: usize = 200;

/// Axis-aligned window inside an image, in full-image pixels (origin top-left, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subwindow {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Subwindow {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn square(x: f64, y: f64, side: f64) -> Self {
        Self::new(x, y, side, side)
    }

    pub fn full(frame: &ImageFrame) -> Self {
        Self::new(0.0, 0.0, frame.width as f64, frame.height as f64)
    }

    /// Largest centered square, with integer corner.
    pub fn center_square(frame: &ImageFrame) -> Self {
        let side = frame.min_dimension();
        Self::square(((frame.width - side) / 2) as f64, ((frame.height - side) / 2) as f64, side as f64)
    }

    pub fn half_width(&self) -> f64 {
        self.width / (2.0 * self.height)
    }

    /// Window heights per image height.
    pub fn scale(&self, frame: &ImageFrame) -> f64 {
        self.height / frame.height as f64
    }

    /// Window center in the full image's centered frame.
    pub fn offset(&self, frame: &ImageFrame) -> Vector2<f64> {
        let (w, h) = (frame.width as f64, frame.height as f64);
        Vector2::new((self.x + 0.5 * self.width - 0.5 * w) / h, (0.5 * h - self.y - 0.5 * self.height) / h)
    }

    pub fn validate(&self, frame: &ImageFrame) -> Result<()> {
        let slack = 1e-9;
        let inside = self.x >= -slack
            && self.y >= -slack
            && self.x + self.width <= frame.width as f64 + slack
            && self.y + self.height <= frame.height as f64 + slack;
        if !(self.width > 0.0 && self.height > 0.0) || !inside {
            return Err(Error::invalid(format!(
                "subwindow {self:?} does not lie inside a {}x{} image",
                frame.width, frame.height
            )));
        }
        Ok(())
    }

    /// Window-centered point to full-image centered point.
    pub fn to_full(&self, frame: &ImageFrame, point: Vector2<f64>) -> Vector2<f64> {
        point * self.scale(frame) + self.offset(frame)
    }

    fn sort_key(&self) -> [f64; 4] {
        [self.x, self.y, self.width, self.height]
    }
}

/// Moves a line from one window's centered frame into another's. Both
/// windows are given in pixels of the same full image.
pub fn transfer_horizon(line: &HorizonLine, from: &Subwindow, to: &Subwindow, frame: &ImageFrame) -> HorizonLine {
    let h = line.coefficients();
    let normal = Vector2::new(h.x, h.y);
    // line in the full frame: n.P + (k_from h3 - n.c_from) = 0
    let full_offset = from.scale(frame) * h.z - normal.dot(&from.offset(frame));
    let to_offset = (normal.dot(&to.offset(frame)) + full_offset) / to.scale(frame);
    HorizonLine::from_coefficients(Vector3::new(normal.x, normal.y, to_offset)).expect("unit normal is preserved")
}

/// Center crop followed by a 3x3 grid of squares with side `0.99 * min(w, h)`,
/// corners flush with the image corners and middle positions centered.
/// Sides and corners are rounded to whole pixels.
pub fn make_crop_grid(frame: &ImageFrame) -> Result<Vec<Subwindow>> {
    let m = frame.min_dimension();
    if m < MIN_GRID_DIMENSION {
        return Err(Error::invalid(format!(
            "crop grid needs a minimum dimension of {MIN_GRID_DIMENSION} px, got {m}"
        )));
    }
    let side = (GRID_CROP_FRACTION * m as f64).round() as u32;
    let xs = [0, (frame.width - side) / 2, frame.width - side];
    let ys = [0, (frame.height - side) / 2, frame.height - side];
    let mut out = vec![Subwindow::center_square(frame)];
    for &y in &ys {
        for &x in &xs {
            out.push(Subwindow::square(x as f64, y as f64, side as f64));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SubwindowSet {
    pub frame: ImageFrame,
    pub distributions: Vec<HorizonDistribution>,
}

impl SubwindowSet {
    pub fn new(frame: ImageFrame, distributions: Vec<HorizonDistribution>) -> Result<Self> {
        if distributions.is_empty() {
            return Err(Error::invalid("need at least one subwindow"));
        }
        for d in &distributions {
            d.window.validate(&frame)?;
        }
        Ok(Self { frame, distributions })
    }

    /// Subwindows in a canonical order so results do not depend on input order.
    fn canonical(&self) -> Vec<&HorizonDistribution> {
        let mut out: Vec<&HorizonDistribution> = self.distributions.iter().collect();
        out.sort_by(|a, b| compare_distributions(a, b));
        out
    }
}

fn compare_slices(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn compare_distributions(a: &HorizonDistribution, b: &HorizonDistribution) -> Ordering {
    compare_slices(&a.window.sort_key(), &b.window.sort_key())
        .then_with(|| compare_slices(a.point.coefficients().as_slice(), b.point.coefficients().as_slice()))
        .then_with(|| compare_slices(a.probabilities(), b.probabilities()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageEstimate {
    pub line: HorizonLine,
    /// Normalized weights of the subwindows that contributed, canonical order.
    pub weights: Vec<f64>,
    /// Subwindows whose estimate was vertical in the full image.
    pub dropped: usize,
}

/// Confidence-weighted mean of the transferred border heights. The weight of
/// a subwindow is the peak cell probability of its distribution.
pub fn aggregate_average(set: &SubwindowSet) -> Result<AverageEstimate> {
    let full = Subwindow::full(&set.frame);
    let mut entries = Vec::new();
    let mut dropped = 0;
    for d in set.canonical() {
        let line = transfer_horizon(&d.point, &d.window, &full, &set.frame);
        match line.left_right(&set.frame) {
            Ok((l, r)) => entries.push((l, r, d.max_probability())),
            Err(_) => dropped += 1,
        }
    }
    if entries.is_empty() {
        let theta = set.distributions[0].point.theta();
        return Err(Error::VerticalHorizon { theta });
    }
    let total: f64 = entries.iter().map(|e| e.2).sum();
    let weights: Vec<f64> = entries.iter().map(|e| e.2 / total).collect();
    let (mut l, mut r) = (0.0, 0.0);
    for (e, w) in entries.iter().zip(&weights) {
        l += w * e.0;
        r += w * e.1;
    }
    Ok(AverageEstimate { line: HorizonLine::from_left_right(l, r, &set.frame)?, weights, dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllEstimate {
    pub line: HorizonLine,
    pub objective: f64,
    /// Initial pattern-search step `(slope, rho)`: the candidate grid spacing.
    pub cell: (f64, f64),
    pub evaluations: usize,
}

struct Term<'a> {
    distribution: &'a HorizonDistribution,
    scale: f64,
    offset: Vector2<f64>,
}

struct Objective<'a> {
    terms: Vec<Term<'a>>,
}

impl<'a> Objective<'a> {
    fn new(set: &'a SubwindowSet) -> Self {
        let terms = set
            .canonical()
            .into_iter()
            .map(|d| Term { distribution: d, scale: d.window.scale(&set.frame), offset: d.window.offset(&set.frame) })
            .collect();
        Self { terms }
    }

    /// Objective at the full-image line with slope angle `slope` and offset `rho`.
    fn eval(&self, slope: f64, rho: f64) -> f64 {
        let (s, c) = (slope + FRAC_PI_2).sin_cos();
        let normal = Vector2::new(c, s);
        let mut logs: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                let local_rho = (rho - normal.dot(&t.offset)) / t.scale;
                -t.distribution.density_at(slope, local_rho).max(PROBABILITY_FLOOR).ln()
            })
            .collect();
        logs.sort_by(f64::total_cmp);
        logs.iter().sum::<f64>() / logs.len() as f64
    }

    fn transferred_rho(term: &Term, slope: f64, local_rho: f64) -> f64 {
        let (s, c) = (slope + FRAC_PI_2).sin_cos();
        term.scale * local_rho + Vector2::new(c, s).dot(&term.offset)
    }
}

fn sorted_unique(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

fn subsample(values: Vec<f64>, max: usize) -> Vec<f64> {
    if values.len() <= max {
        return values;
    }
    let last = values.len() - 1;
    (0..max).map(|k| values[(k * last + (max - 1) / 2) / (max - 1)]).collect()
}

fn median_spacing(values: &[f64]) -> f64 {
    let mut gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

/// Evaluates the joint negative log-likelihood of a full-image horizon.
pub fn nll_objective(set: &SubwindowSet, line: &HorizonLine) -> f64 {
    Objective::new(set).eval(line.slope_angle(), line.rho())
}

/// Minimizes the joint negative log-likelihood over full-image horizons.
///
/// Candidates are every subwindow's cell centers moved into the full image
/// (at most 200 slopes and 200 offsets per slope) plus each subwindow's
/// transferred argmax. The best candidate is refined by a compass search
/// confined to one candidate spacing around it, whose steps start at that
/// spacing and halve on failure, for at most 200 further evaluations.
pub fn aggregate_nll(set: &SubwindowSet) -> Result<NllEstimate> {
    let objective = Objective::new(set);
    let full = Subwindow::full(&set.frame);

    let slopes = subsample(
        sorted_unique(objective.terms.iter().flat_map(|t| t.distribution.space().theta.centers.iter().copied()).collect()),
        MAX_CANDIDATES_PER_AXIS,
    );
    let rhos_at = |slope: f64| -> Vec<f64> {
        subsample(
            sorted_unique(
                objective
                    .terms
                    .iter()
                    .flat_map(|t| {
                        t.distribution
                            .space()
                            .rho
                            .centers
                            .iter()
                            .map(move |&r| Objective::transferred_rho(t, slope, r))
                    })
                    .collect(),
            ),
            MAX_CANDIDATES_PER_AXIS,
        )
    };

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for t in &objective.terms {
        let (i, j) = t.distribution.argmax();
        let local = t.distribution.space().cell_line(i, j);
        let line = transfer_horizon(&local, &t.distribution.window, &full, &set.frame);
        candidates.push((line.slope_angle(), line.rho()));
    }
    for &slope in &slopes {
        candidates.extend(rhos_at(slope).into_iter().map(|rho| (slope, rho)));
    }

    let scores: Vec<f64> = candidates.par_iter().map(|&(s, r)| objective.eval(s, r)).collect();
    let mut best = 0;
    for (k, &score) in scores.iter().enumerate() {
        if score < scores[best] {
            best = k;
        }
    }
    let floor_score = -PROBABILITY_FLOOR.ln();
    if scores[best] >= floor_score {
        return Err(Error::DegenerateDistribution);
    }

    let (mut slope, mut rho) = candidates[best];
    let mut value = scores[best];
    let cell = (median_spacing(&slopes), median_spacing(&rhos_at(slope)));
    let (mut step_slope, mut step_rho) = cell;
    let (origin_slope, origin_rho) = (slope, rho);
    let mut evaluations = 0;
    while evaluations < MAX_REFINEMENT_EVALUATIONS && (step_slope > 1e-12 || step_rho > 1e-12) {
        let mut improved = None;
        for (ds, dr) in [(step_slope, 0.0), (-step_slope, 0.0), (0.0, step_rho), (0.0, -step_rho)] {
            if (ds == 0.0 && dr == 0.0) || evaluations >= MAX_REFINEMENT_EVALUATIONS {
                continue;
            }
            let (trial_slope, trial_rho) = (slope + ds, rho + dr);
            let in_box = (trial_slope - origin_slope).abs() <= cell.0 && (trial_rho - origin_rho).abs() <= cell.1;
            if !in_box || !(-FRAC_PI_2..FRAC_PI_2).contains(&trial_slope) {
                continue;
            }
            let v = objective.eval(trial_slope, trial_rho);
            evaluations += 1;
            if v < improved.map_or(value, |(_, _, best): (f64, f64, f64)| best) {
                improved = Some((trial_slope, trial_rho, v));
            }
        }
        match improved {
            Some((s, r, v)) => {
                slope = s;
                rho = r;
                value = v;
            }
            None => {
                step_slope *= 0.5;
                step_rho *= 0.5;
            }
        }
    }

    Ok(NllEstimate {
        line: HorizonLine::from_slope_offset(slope + FRAC_PI_2, rho),
        objective: value,
        cell,
        evaluations: candidates.len() + evaluations,
    })
}
