use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::baseline::{extract_features, LinearModel, Parameterization};
use super::external::ExternalGrids;
use crate::aggregation::Subwindow;
use crate::distribution::HorizonDistribution;
use crate::error::{Error, Result};
use crate::geometry::{HorizonLine, ImageFrame};
use crate::label_space::LabelSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorKind {
    /// Normalized histogram of training labels over the label-space cells.
    Prior { histogram: Vec<f64> },
    Linear { model: LinearModel },
    /// Grid file, relative paths resolved against the spec file's directory.
    ExternalGrid { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    #[serde(flatten)]
    pub kind: PredictorKind,
    pub parameterization: Parameterization,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl PredictorSpec {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Prior over label-space cells from horizons given in their crops' frames.
pub fn train_prior(lines: &[HorizonLine], space: &LabelSpace, parameterization: Parameterization) -> Result<PredictorSpec> {
    if lines.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut histogram = vec![0.0; space.cells()];
    for line in lines {
        let (i, j) = space.cell_of(line);
        histogram[i * space.rho.len() + j] += 1.0;
    }
    histogram.iter_mut().for_each(|h| *h /= lines.len() as f64);
    Ok(PredictorSpec { kind: PredictorKind::Prior { histogram }, parameterization, metadata: BTreeMap::new() })
}

pub fn linear_spec(model: LinearModel) -> PredictorSpec {
    let parameterization = model.parameterization;
    let mut metadata = BTreeMap::new();
    metadata.insert("features".into(), "16x16 luminance + 16x16 vertical gradient magnitude, standardized".into());
    metadata.insert("loss".into(), serde_json::to_string(&model.loss).unwrap_or_default());
    PredictorSpec { kind: PredictorKind::Linear { model }, parameterization, metadata }
}

/// One subwindow of one image to predict on.
#[derive(Debug, Clone, Copy)]
pub struct PredictInput<'a> {
    pub image_id: &'a str,
    pub frame: ImageFrame,
    /// Required by pixel-based predictors.
    pub image: Option<&'a RgbImage>,
    /// Square window in full-image pixels, integer corners for pixel predictors.
    pub window: Subwindow,
    /// Index into the standard crop grid, `None` for the center square.
    pub crop: Option<usize>,
}

enum Backend {
    Prior(Vec<f64>),
    Linear(LinearModel),
    Grids(BTreeMap<(String, Option<usize>), Vec<f64>>),
}

/// A loaded predictor bound to a label space.
pub struct Predictor {
    space: Arc<LabelSpace>,
    backend: Backend,
}

impl Predictor {
    pub fn new(spec: &PredictorSpec, space: Arc<LabelSpace>, base_dir: &Path) -> Result<Self> {
        let backend = match &spec.kind {
            PredictorKind::Prior { histogram } => {
                if histogram.len() != space.cells() {
                    return Err(Error::invalid(format!(
                        "prior has {} cells, label space has {}",
                        histogram.len(),
                        space.cells()
                    )));
                }
                Backend::Prior(histogram.clone())
            }
            PredictorKind::Linear { model } => Backend::Linear(model.clone()),
            PredictorKind::ExternalGrid { path } => {
                let grids = ExternalGrids::read(&base_dir.join(path))?;
                if space.theta.len() != grids.n || space.rho.len() != grids.n {
                    return Err(Error::invalid(format!(
                        "grid file has N = {}, label space is {}x{}",
                        grids.n,
                        space.theta.len(),
                        space.rho.len()
                    )));
                }
                Backend::Grids(grids.records.into_iter().map(|r| ((r.image_id, r.crop), r.probabilities)).collect())
            }
        };
        Ok(Self { space, backend })
    }

    pub fn load(spec_path: &Path, space: Arc<LabelSpace>) -> Result<Self> {
        let spec = PredictorSpec::read(spec_path)?;
        Self::new(&spec, space, spec_path.parent().unwrap_or(Path::new(".")))
    }

    pub fn space(&self) -> &Arc<LabelSpace> {
        &self.space
    }

    pub fn needs_pixels(&self) -> bool {
        matches!(self.backend, Backend::Linear(_))
    }

    pub fn predict(&self, input: &PredictInput) -> Result<HorizonDistribution> {
        input.window.validate(&input.frame)?;
        match &self.backend {
            Backend::Prior(histogram) => {
                HorizonDistribution::from_probabilities(self.space.clone(), histogram.clone(), input.window)
            }
            Backend::Linear(model) => {
                let image = input
                    .image
                    .ok_or_else(|| Error::invalid(format!("pixels of {} are required", input.image_id)))?;
                let w = input.window;
                if w.width != w.height || w.x.fract() != 0.0 || w.y.fract() != 0.0 || w.width.fract() != 0.0 {
                    return Err(Error::invalid(format!("window {w:?} is not an integer square")));
                }
                let features = extract_features(image, w.x as u32, w.y as u32, w.width as u32)?;
                let line = model.predict_line(&features)?;
                Ok(HorizonDistribution::concentrated(self.space.clone(), line, w))
            }
            Backend::Grids(grids) => {
                let key = (input.image_id.to_string(), input.crop);
                let found = grids.get(&key).or_else(|| match input.crop {
                    None => grids.get(&(input.image_id.to_string(), Some(0))),
                    Some(0) => grids.get(&(input.image_id.to_string(), None)),
                    Some(_) => None,
                });
                let probabilities = found.ok_or_else(|| {
                    Error::MissingExternalGrid(match input.crop {
                        Some(k) => format!("{} crop {k}", input.image_id),
                        None => input.image_id.to_string(),
                    })
                })?;
                HorizonDistribution::from_probabilities(self.space.clone(), probabilities.clone(), input.window)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::external::GridRecord;
    use crate::label_space::{BinSpec, Parameter};
    use image::Rgb;

    fn space(n: usize) -> Arc<LabelSpace> {
        let edges: Vec<f64> = (0..=n).map(|k| -0.5 + k as f64 / n as f64).collect();
        let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Arc::new(
            LabelSpace::new(
                BinSpec { parameter: Parameter::Theta, edges: edges.clone(), centers: centers.clone() },
                BinSpec { parameter: Parameter::Rho, edges, centers },
            )
            .unwrap(),
        )
    }

    fn input<'a>(id: &'a str, image: Option<&'a RgbImage>) -> PredictInput<'a> {
        let frame = ImageFrame::new(64, 64).unwrap();
        PredictInput { image_id: id, frame, image, window: Subwindow::full(&frame), crop: None }
    }

    #[test]
    fn prior_ignores_pixels() {
        let s = space(4);
        let lines = [HorizonLine::from_slope_offset(1.5, 0.1), HorizonLine::from_slope_offset(1.6, -0.2)];
        let spec = train_prior(&lines, &s, Parameterization::SlopeOffset).unwrap();
        let p = Predictor::new(&spec, s, Path::new(".")).unwrap();
        let black = RgbImage::new(64, 64);
        let white = RgbImage::from_pixel(64, 64, Rgb([255, 255, 255]));
        let a = p.predict(&input("a", Some(&black))).unwrap();
        let b = p.predict(&input("b", Some(&white))).unwrap();
        assert_eq!(a, b);
        assert!((a.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.max_probability(), 0.5);
    }

    #[test]
    fn spec_json_round_trip() {
        let s = space(3);
        let spec = train_prior(&[HorizonLine::from_slope_offset(1.5, 0.0)], &s, Parameterization::LeftRight).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        spec.write(&path).unwrap();
        assert_eq!(PredictorSpec::read(&path).unwrap(), spec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"kind\": \"prior\""));
    }

    fn grid_predictor(records: Vec<GridRecord>, n: usize) -> Predictor {
        let dir = tempfile::tempdir().unwrap();
        let grids = ExternalGrids { n, label_space: "bins.json".into(), records };
        grids.write_binary(&dir.path().join("grids.bin")).unwrap();
        let spec = PredictorSpec {
            kind: PredictorKind::ExternalGrid { path: "grids.bin".into() },
            parameterization: Parameterization::SlopeOffset,
            metadata: BTreeMap::new(),
        };
        Predictor::new(&spec, space(n), dir.path()).unwrap()
    }

    #[test]
    fn uniform_external_grid_decodes_to_first_cell() {
        let p = grid_predictor(vec![GridRecord { image_id: "a".into(), crop: None, probabilities: vec![1.0 / 9.0; 9] }], 3);
        let d = p.predict(&input("a", None)).unwrap();
        assert_eq!(d.argmax(), (0, 0));
        assert_eq!(d.point, d.space().cell_line(0, 0));
    }

    #[test]
    fn missing_external_grid() {
        let p = grid_predictor(vec![GridRecord { image_id: "a".into(), crop: None, probabilities: vec![0.25; 4] }], 2);
        assert!(matches!(p.predict(&input("zzz", None)), Err(Error::MissingExternalGrid(id)) if id == "zzz"));
        let mut with_crop = input("a", None);
        with_crop.crop = Some(4);
        assert!(matches!(p.predict(&with_crop), Err(Error::MissingExternalGrid(_))));
    }

    #[test]
    fn external_grid_size_must_match_space() {
        let dir = tempfile::tempdir().unwrap();
        ExternalGrids { n: 2, label_space: String::new(), records: vec![] }.write_json(&dir.path().join("g.json")).unwrap();
        let spec = PredictorSpec {
            kind: PredictorKind::ExternalGrid { path: "g.json".into() },
            parameterization: Parameterization::SlopeOffset,
            metadata: BTreeMap::new(),
        };
        assert!(Predictor::new(&spec, space(3), dir.path()).is_err());
    }
}
