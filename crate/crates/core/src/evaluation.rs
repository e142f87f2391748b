//! Horizon detection error and the area under its cumulative histogram.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HorizonLine, ImageFrame};
use crate::labels::LabelRecord;

pub const DEFAULT_MAX_THRESHOLD: f64 = 0.25;

/// Largest vertical gap between the two lines over the image width, in image
/// heights. For lines the maximum sits at one of the borders.
pub fn horizon_error(pred: &HorizonLine, truth: &HorizonLine, frame: &ImageFrame) -> Result<f64> {
    let (pl, pr) = pred.left_right(frame)?;
    let (tl, tr) = truth.left_right(frame)?;
    Ok((pl - tl).abs().max((pr - tr).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    /// Ascending.
    pub errors: Vec<f64>,
    pub max_threshold: f64,
    pub auc: f64,
}

impl ErrorCurve {
    /// Fraction of errors at or below `threshold`.
    pub fn fraction_within(&self, threshold: f64) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        self.errors.partition_point(|&e| e <= threshold) as f64 / self.errors.len() as f64
    }

    /// Cumulative histogram at 0, at every distinct error up to the
    /// threshold, and at the threshold.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut ts = vec![0.0];
        ts.extend(self.errors.iter().copied().filter(|&e| e > 0.0 && e < self.max_threshold));
        ts.push(self.max_threshold);
        ts.dedup();
        ts.into_iter().map(|t| (t, self.fraction_within(t))).collect()
    }

    pub fn write_points(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "threshold,fraction")?;
        for (t, f) in self.points() {
            writeln!(out, "{t},{f}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalized area under the cumulative error histogram on `[0, max_threshold]`.
///
/// An error `e` contributes `max(0, T - e)` to the integral of the empirical
/// CDF, so the area is `sum_i max(0, T - e_i) / (n T)`.
pub fn auc(errors: &[f64], max_threshold: f64) -> Result<ErrorCurve> {
    if !(max_threshold > 0.0 && max_threshold.is_finite()) {
        return Err(Error::invalid(format!("max threshold must be positive, got {max_threshold}")));
    }
    if errors.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::invalid("errors must be non-negative"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let area: f64 = sorted.iter().map(|e| (max_threshold - e).max(0.0)).sum();
    let auc = (area / (sorted.len() as f64 * max_threshold)).clamp(0.0, 1.0);
    Ok(ErrorCurve { errors: sorted, max_threshold, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageError {
    pub image_id: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEvaluation {
    pub curve: ErrorCurve,
    /// In label order.
    pub per_image: Vec<ImageError>,
    /// Labeled images without a prediction.
    pub missing: Vec<String>,
}

impl DatasetEvaluation {
    pub fn write_per_image(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.per_image {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Errors of `predictions` against `labels`, matched by image id. Without
/// `allow_missing` an unmatched label is an error.
pub fn evaluate_records(
    labels: &[LabelRecord],
    predictions: &[LabelRecord],
    max_threshold: f64,
    allow_missing: bool,
) -> Result<DatasetEvaluation> {
    let mut by_id = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.image_id.as_str(), p).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for {}", p.image_id)));
        }
    }
    let mut per_image = Vec::with_capacity(labels.len());
    let mut missing = Vec::new();
    for label in labels {
        let Some(pred) = by_id.get(label.image_id.as_str()) else {
            if !allow_missing {
                return Err(Error::MissingPrediction(label.image_id.clone()));
            }
            missing.push(label.image_id.clone());
            continue;
        };
        if (pred.width, pred.height) != (label.width, label.height) {
            return Err(Error::invalid(format!(
                "{}: prediction is for a {}x{} image, label for {}x{}",
                label.image_id, pred.width, pred.height, label.width, label.height
            )));
        }
        let frame = label.frame()?;
        let error = horizon_error(&pred.line()?, &label.line()?, &frame)?;
        per_image.push(ImageError { image_id: label.image_id.clone(), error });
    }
    let errors: Vec<f64> = per_image.iter().map(|e| e.error).collect();
    Ok(DatasetEvaluation { curve: auc(&errors, max_threshold)?, per_image, missing })
}
