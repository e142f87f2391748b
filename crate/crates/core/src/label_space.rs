//! Discretized horizon label space for classification-style predictors.
//!
//! Each horizon parameter gets its own set of bins whose edges are
//! quantiles of the training labels, so every bin carries about the same
//! training mass. The slope parameter is binned as the line's slope angle
//! `theta - pi / 2` and its edges are forced to be symmetric about zero,
//! which is the same as symmetric normal angles about `pi / 2`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HorizonLine;

pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Slope angle `theta - pi / 2`, radians.
    Theta,
    /// Signed offset from the image center, image heights.
    Rho,
    /// Height at the left border, image heights.
    Left,
    /// Height at the right border, image heights.
    Right,
}

impl Parameter {
    /// Value of this parameter for `line` in a window of the given half width.
    pub fn value_of(&self, line: &HorizonLine, half_width: f64) -> Result<f64> {
        Ok(match self {
            Parameter::Theta => line.slope_angle(),
            Parameter::Rho => line.rho(),
            Parameter::Left => line.border_heights(half_width)?.0,
            Parameter::Right => line.border_heights(half_width)?.1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub parameter: Parameter,
    /// `n + 1` strictly increasing boundaries.
    pub edges: Vec<f64>,
    /// `n` representative values, the median training sample of each bin.
    pub centers: Vec<f64>,
}

impl BinSpec {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() < 2 || self.edges.len() != self.centers.len() + 1 {
            return Err(Error::invalid(format!(
                "{} edges for {} centers",
                self.edges.len(),
                self.centers.len()
            )));
        }
        check_increasing(&self.edges)?;
        if self.centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("bin centers must be finite"));
        }
        Ok(())
    }

    /// Half-open bins `[e_i, e_i+1)`, the last one closed; out-of-range
    /// values clamp to the first or last bin.
    pub fn assign(&self, value: f64) -> usize {
        let n = self.len();
        let upper = self.edges.partition_point(|&e| e <= value);
        upper.saturating_sub(1).min(n - 1)
    }

    pub fn width(&self, bin: usize) -> f64 {
        self.edges[bin + 1] - self.edges[bin]
    }

    /// `(lower index, weight of upper index)` for linear interpolation over
    /// the bin centers, clamped at both ends.
    pub fn interpolation(&self, value: f64) -> (usize, f64) {
        let c = &self.centers;
        let n = c.len();
        if n == 1 || value <= c[0] {
            return (0, 0.0);
        }
        if value >= c[n - 1] {
            return (n - 2, 1.0);
        }
        let upper = c.partition_point(|&x| x <= value);
        let lo = upper - 1;
        let span = c[lo + 1] - c[lo];
        let t = if span > 0.0 { (value - c[lo]) / span } else { 0.0 };
        (lo, t)
    }
}

fn check_increasing(edges: &[f64]) -> Result<()> {
    for (i, w) in edges.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::DegenerateBins { index: i, next: i + 1, value: w[0] });
        }
    }
    Ok(())
}

/// Quantile of a sorted sample by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Builds `n` bins whose edges interpolate the empirical CDF of `samples`.
///
/// With `symmetric`, each edge is replaced by half its difference with the
/// opposite-rank edge, `(e_k - e_{n-k}) / 2`, making the edge set exactly
/// closed under negation.
pub fn build_bins(parameter: Parameter, samples: &[f64], n: usize, symmetric: bool) -> Result<BinSpec> {
    if n == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < n {
        return Err(Error::InsufficientData { needed: n, got: distinct.len() });
    }

    let mut edges: Vec<f64> = (0..=n).map(|k| quantile(&sorted, k as f64 / n as f64)).collect();
    if symmetric {
        let raw = edges.clone();
        for k in 0..=n {
            edges[k] = 0.5 * (raw[k] - raw[n - k]);
        }
    }
    check_increasing(&edges)?;

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); n];
    let provisional = BinSpec { parameter, edges: edges.clone(), centers: vec![0.0; n] };
    for &v in &sorted {
        members[provisional.assign(v)].push(v);
    }
    let centers = members
        .iter()
        .enumerate()
        .map(|(i, m)| if m.is_empty() { 0.5 * (edges[i] + edges[i + 1]) } else { median_of_sorted(m) })
        .collect();
    Ok(BinSpec { parameter, edges, centers })
}

pub fn assign_bin(spec: &BinSpec, value: f64) -> usize {
    spec.assign(value)
}

/// Bins for the `(theta, rho)` grid that probability distributions live on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub theta: BinSpec,
    pub rho: BinSpec,
}

impl LabelSpace {
    pub fn new(theta: BinSpec, rho: BinSpec) -> Result<Self> {
        theta.validate()?;
        rho.validate()?;
        if theta.parameter != Parameter::Theta || rho.parameter != Parameter::Rho {
            return Err(Error::invalid("label space needs theta and rho bins"));
        }
        Ok(Self { theta, rho })
    }

    /// Bins built from training horizons expressed in square windows.
    pub fn from_lines(lines: &[HorizonLine], n: usize) -> Result<Self> {
        let slopes: Vec<f64> = lines.iter().map(|l| l.slope_angle()).collect();
        let rhos: Vec<f64> = lines.iter().map(|l| l.rho()).collect();
        Self::new(
            build_bins(Parameter::Theta, &slopes, n, true)?,
            build_bins(Parameter::Rho, &rhos, n, false)?,
        )
    }

    pub fn cells(&self) -> usize {
        self.theta.len() * self.rho.len()
    }

    /// Grid cell containing `line`, as `(theta bin, rho bin)`.
    pub fn cell_of(&self, line: &HorizonLine) -> (usize, usize) {
        (self.theta.assign(line.slope_angle()), self.rho.assign(line.rho()))
    }

    /// Horizon at the center of a cell.
    pub fn cell_line(&self, theta_bin: usize, rho_bin: usize) -> HorizonLine {
        HorizonLine::from_slope_offset(
            self.theta.centers[theta_bin] + std::f64::consts::FRAC_PI_2,
            self.rho.centers[rho_bin],
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let space: LabelSpace = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::new(space.theta, space.rho)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StudentT};

    #[test]
    fn uniform_quantiles() {
        let samples: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let spec = build_bins(Parameter::Rho, &samples, 4, false).unwrap();
        assert_eq!(spec.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn interpolated_median_edge() {
        // oracle: the median of 1..=8 sits halfway between 4 and 5
        let samples: Vec<f64> = (1..=8).map(f64::from).collect();
        let spec = build_bins(Parameter::Rho, &samples, 2, false).unwrap();
        assert_eq!(spec.edges, vec![1.0, 4.5, 8.0]);
        assert_eq!(spec.centers, vec![2.5, 6.5]);
    }

    #[test]
    fn symmetric_edges_are_closed_under_negation() {
        let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() * 0.3 + 0.05).collect();
        let spec = build_bins(Parameter::Theta, &samples, 10, true).unwrap();
        let n = spec.edges.len() - 1;
        for k in 0..=n {
            assert_eq!(spec.edges[k], -spec.edges[n - k]);
        }
    }

    #[test]
    fn duplicates_are_degenerate() {
        let mut samples = vec![0.0; 50];
        samples.extend((1..=5).map(f64::from));
        assert!(matches!(
            build_bins(Parameter::Rho, &samples, 5, false),
            Err(Error::DegenerateBins { .. })
        ));
        assert!(matches!(
            build_bins(Parameter::Rho, &[1.0, 1.0, 2.0], 3, false),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn assignment_edges_and_clamping() {
        let spec = build_bins(Parameter::Rho, &(0..=100).map(|i| i as f64 / 100.0).collect::<Vec<_>>(), 4, false)
            .unwrap();
        assert_eq!(spec.assign(0.0), 0);
        assert_eq!(spec.assign(1.0), 3);
        assert_eq!(spec.assign(-5.0), 0);
        assert_eq!(spec.assign(7.0), 3);
        assert_eq!(spec.assign(0.25), 1);
        assert_eq!(spec.assign(0.2499999), 0);
    }

    #[test]
    fn quantile_balance_on_heavy_tails() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = StudentT::new(2.43).unwrap();
        let samples: Vec<f64> = (0..20_000).map(|_| 0.05 * t.sample(&mut rng)).collect();
        for symmetric in [false, true] {
            let spec = build_bins(Parameter::Theta, &samples, 100, symmetric).unwrap();
            let mut counts = vec![0usize; 100];
            for &s in &samples {
                counts[spec.assign(s)] += 1;
            }
            let total = samples.len() as f64;
            for c in counts {
                let share = c as f64 / total;
                assert!((0.005..=0.02).contains(&share), "{share}");
            }
        }
    }

    #[test]
    fn label_space_json_round_trip() {
        let lines: Vec<HorizonLine> = (0..400)
            .map(|i| HorizonLine::from_slope_offset(1.5 + 0.001 * (i % 37) as f64, 0.002 * i as f64 - 0.4))
            .collect();
        let space = LabelSpace::from_lines(&lines, 20).unwrap();
        let text = serde_json::to_string(&space).unwrap();
        assert!(text.contains("\"parameter\":\"theta\""));
        let back: LabelSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, space);
    }

    #[test]
    fn interpolation_weights() {
        let spec = BinSpec { parameter: Parameter::Rho, edges: vec![0.0, 1.0, 2.0, 3.0], centers: vec![0.5, 1.5, 2.5] };
        assert_eq!(spec.interpolation(0.0), (0, 0.0));
        assert_eq!(spec.interpolation(1.0), (0, 0.5));
        assert_eq!(spec.interpolation(1.5), (1, 0.0));
        assert_eq!(spec.interpolation(9.0), (1, 1.0));
    }

    proptest! {
        #[test]
        fn assignment_is_monotone(values in prop::collection::vec(-2.0f64..2.0, 2..50)) {
            let samples: Vec<f64> = (0..200).map(|i| (i as f64 * 0.731).sin()).collect();
            let spec = build_bins(Parameter::Rho, &samples, 12, false).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            for w in sorted.windows(2) {
                prop_assert!(spec.assign(w[0]) <= spec.assign(w[1]));
            }
        }

        #[test]
        fn symmetric_bins_ignore_sample_sign(samples in prop::collection::vec(-1.0f64..1.0, 60..120)) {
            let negated: Vec<f64> = samples.iter().map(|v| -v).collect();
            let a = build_bins(Parameter::Theta, &samples, 8, true);
            let b = build_bins(Parameter::Theta, &negated, 8, true);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    for (x, y) in a.edges.iter().zip(&b.edges) {
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side failed"),
            }
        }
    }
}
