//! Command-line pipelines. Every run writes its fully resolved arguments to
//! `config.json` in the output directory; `replay --config` re-runs it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use image::RgbImage;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_average, aggregate_nll, make_crop_grid, transfer_horizon, Subwindow, SubwindowSet};
use crate::error::{Error, Result};
use crate::estimator::{
    center_features, extract_features, linear_spec, train_on_features, train_prior, Loss, Parameterization,
    PredictInput, Predictor, TrainConfig,
};
use crate::evaluation::{evaluate_records, DEFAULT_MAX_THRESHOLD};
use crate::geometry::{HorizonLine, ImageFrame};
use crate::label_space::{LabelSpace, DEFAULT_BINS};
use crate::labels::{read_labels, write_labels, LabelRecord};
use crate::pano::{
    augment_crop, fit_distributions, observation_from_line, render_cutout, sample_camera_with, CameraParamDistributions,
    ParamObservation, Panorama,
};
use crate::sfm::{estimate_zenith, label_model, ResidualReport, SfmModel};
use crate::synthetic::rng;

pub const DEFAULT_SEED: u64 = 1;
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "horizonkit", version, about = "Horizon line labeling, synthesis, prediction and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit a global horizon to SfM models and project it into every image.
    LabelSfm(LabelSfmArgs),
    /// Fit camera field-of-view, roll and tilt distributions.
    FitDistributions(FitDistributionsArgs),
    /// Render labeled square cutouts from equirectangular panoramas.
    SampleCutouts(SampleCutoutsArgs),
    /// Build the (theta, rho) label space from training labels.
    BuildBins(BuildBinsArgs),
    /// Train a prior or linear baseline predictor.
    TrainBaseline(TrainBaselineArgs),
    /// Predict horizons, optionally aggregating over the crop grid.
    PredictAggregate(PredictAggregateArgs),
    /// Score predictions against labels.
    Evaluate(EvaluateArgs),
    /// Re-run a command from a config.json written by an earlier run.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LabelSfmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// SfM model files (`.json` or whitespace text).
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitDistributionsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// SfM models whose labeled cameras supply tilt, roll and field of view.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// CSV with columns `tilt,roll,fov_deg` (radians, radians, degrees).
    #[arg(long)]
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleCutoutsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Directory of equirectangular panoramas (png/jpg).
    #[arg(long)]
    pub panoramas: PathBuf,
    #[arg(long)]
    pub distributions: PathBuf,
    #[arg(long)]
    pub count: usize,
    /// Cutout side in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BuildBinsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub labels: PathBuf,
    /// Bins per parameter.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Prior,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Huber,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterizationArg {
    SlopeOffset,
    LeftRight,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainBaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory holding the labeled images, named by image id.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub bins: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    pub kind: BaselineKind,
    #[arg(long, value_enum, default_value = "huber")]
    pub loss: LossKind,
    /// Huber threshold.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "slope-offset")]
    pub parameterization: ParameterizationArg,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    /// Train on ten random crops per image instead of the center square.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Center square only.
    Center,
    /// Confidence-weighted average over the crop grid.
    Average,
    /// Joint likelihood over the crop grid.
    Optimize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictAggregateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub predictor: PathBuf,
    #[arg(long)]
    pub bins: PathBuf,
    /// Interchange CSV listing the images and their sizes; horizon columns are ignored.
    #[arg(long)]
    pub frames: PathBuf,
    /// Image directory, needed by pixel-based predictors.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "center")]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_THRESHOLD)]
    pub max_threshold: f64,
    /// Score the matched images when some labels have no prediction.
    #[arg(long)]
    pub allow_missing: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn absolute(path: &mut PathBuf) -> Result<()> {
    *path = std::path::absolute(&*path)?;
    Ok(())
}

impl Command {
    fn common(&self) -> Option<&Common> {
        Some(match self {
            Command::LabelSfm(a) => &a.common,
            Command::FitDistributions(a) => &a.common,
            Command::SampleCutouts(a) => &a.common,
            Command::BuildBins(a) => &a.common,
            Command::TrainBaseline(a) => &a.common,
            Command::PredictAggregate(a) => &a.common,
            Command::Evaluate(a) => &a.common,
            Command::Replay(_) => return None,
        })
    }

    /// Same command with every path made absolute.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        match &mut c {
            Command::LabelSfm(a) => {
                absolute(&mut a.common.out)?;
                a.models.iter_mut().try_for_each(absolute)?;
            }
            Command::FitDistributions(a) => {
                absolute(&mut a.common.out)?;
                a.models.iter_mut().try_for_each(absolute)?;
                a.observations.iter_mut().try_for_each(absolute)?;
            }
            Command::SampleCutouts(a) => {
                absolute(&mut a.common.out)?;
                absolute(&mut a.panoramas)?;
                absolute(&mut a.distributions)?;
            }
            Command::BuildBins(a) => {
                absolute(&mut a.common.out)?;
                absolute(&mut a.labels)?;
            }
            Command::TrainBaseline(a) => {
                absolute(&mut a.common.out)?;
                absolute(&mut a.labels)?;
                absolute(&mut a.images)?;
                absolute(&mut a.bins)?;
            }
            Command::PredictAggregate(a) => {
                absolute(&mut a.common.out)?;
                absolute(&mut a.predictor)?;
                absolute(&mut a.bins)?;
                absolute(&mut a.frames)?;
                a.images.iter_mut().try_for_each(absolute)?;
            }
            Command::Evaluate(a) => {
                absolute(&mut a.common.out)?;
                absolute(&mut a.labels)?;
                absolute(&mut a.predictions)?;
            }
            Command::Replay(a) => absolute(&mut a.config)?,
        }
        Ok(c)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
    run(&cli.command)
}

pub fn run(command: &Command) -> Result<()> {
    if let Command::Replay(a) = command {
        let replayed: Command = serde_json::from_slice(&std::fs::read(&a.config)?)?;
        return run(&replayed);
    }
    let command = command.resolved()?;
    let common = command.common().expect("not a replay").clone();
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join(CONFIG_FILE), serde_json::to_string_pretty(&command)? + "\n")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| match &command {
        Command::LabelSfm(a) => label_sfm(a),
        Command::FitDistributions(a) => fit(a),
        Command::SampleCutouts(a) => sample_cutouts(a),
        Command::BuildBins(a) => build_bins(a),
        Command::TrainBaseline(a) => train_baseline(a),
        Command::PredictAggregate(a) => predict_aggregate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Replay(_) => unreachable!(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn label_sfm(a: &LabelSfmArgs) -> Result<()> {
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for path in &a.models {
        let model = SfmModel::read(path)?;
        let estimate = estimate_zenith(&model)?;
        let labels = label_model(&model, &estimate)?;
        let report = ResidualReport::new(&model, &estimate, &labels);
        println!(
            "{}: {} of {} cameras labeled, zenith [{:.6}, {:.6}, {:.6}], median residual {:.3} deg",
            report.model_id,
            labels.labels.len(),
            model.len(),
            report.zenith[0],
            report.zenith[1],
            report.zenith[2],
            report.median_residual_deg
        );
        for (id, reason) in &labels.omitted {
            eprintln!("{}: omitted {id} ({})", report.model_id, reason.as_str());
        }
        records.extend(labels.labels.iter().map(|l| l.to_record()));
        reports.push(report);
    }
    write_labels(&a.common.out.join("labels.csv"), &records)?;
    write_json(&a.common.out.join("residuals.json"), &reports)
}

fn read_observations(path: &Path) -> Result<Vec<ParamObservation>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (k, row) in reader.deserialize().enumerate() {
        out.push(row.map_err(|e: csv::Error| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(k + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn fit(a: &FitDistributionsArgs) -> Result<()> {
    let mut observations = Vec::new();
    for path in &a.models {
        let model = SfmModel::read(path)?;
        let labels = label_model(&model, &estimate_zenith(&model)?)?;
        for l in &labels.labels {
            let camera = model.cameras.iter().find(|c| c.image_id == l.image_id).expect("labeled camera");
            observations.push(observation_from_line(&l.line, camera.rig.focal_px, &l.frame)?);
        }
    }
    if let Some(path) = &a.observations {
        observations.extend(read_observations(path)?);
    }
    let dists = fit_distributions(&observations)?;
    println!(
        "{} observations: fov {:.3} +/- {:.3} deg, roll t(loc {:.6}, scale {:.6}, dof {}), {} tilt samples",
        observations.len(),
        dists.fov.mean_deg,
        dists.fov.std_deg,
        dists.roll.location,
        dists.roll.scale,
        dists.roll.dof,
        dists.tilt.samples.len()
    );
    write_json(&a.common.out.join("distributions.json"), &dists)
}

#[derive(Debug, Serialize)]
struct ManifestRow<'a> {
    image_id: String,
    width: u32,
    height: u32,
    y_left: f64,
    y_right: f64,
    panorama: &'a str,
    yaw: f64,
    tilt: f64,
    roll: f64,
    fov_deg: f64,
}

fn panorama_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
    });
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no panoramas in {}", dir.display())));
    }
    Ok(files)
}

fn sample_cutouts(a: &SampleCutoutsArgs) -> Result<()> {
    let dists: CameraParamDistributions = serde_json::from_slice(&std::fs::read(&a.distributions)?)?;
    dists.validate()?;
    let files = panorama_files(&a.panoramas)?;
    let panoramas = files
        .iter()
        .map(|p| Panorama::read(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();

    // cameras are drawn sequentially so the draw order is fixed; vertical
    // horizons (roll near 90 degrees) have no interchange record and are redrawn
    let mut r = rng(a.common.seed);
    let mut jobs = Vec::with_capacity(a.count);
    while jobs.len() < a.count {
        let pano = r.random_range(0..panoramas.len());
        let camera = sample_camera_with(&dists, &mut r);
        let frame = ImageFrame::new(a.size, a.size)?;
        let (rig, _) = crate::pano::cutout_rig(&camera, a.size)?;
        if crate::geometry::horizon_from_camera(&rig, &frame).is_vertical() {
            continue;
        }
        jobs.push((pano, camera));
    }

    let image_dir = a.common.out.join("images");
    std::fs::create_dir_all(&image_dir)?;
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (pano, camera))| {
            let cut = render_cutout(&panoramas[*pano], camera, a.size)?;
            let image_id = format!("cutout_{k:06}.png");
            cut.image.save(image_dir.join(&image_id))?;
            let record = LabelRecord::from_line(&image_id, cut.frame, &cut.line)?;
            Ok(ManifestRow {
                image_id,
                width: record.width,
                height: record.height,
                y_left: record.y_left,
                y_right: record.y_right,
                panorama: &names[*pano],
                yaw: camera.yaw,
                tilt: camera.tilt,
                roll: camera.roll,
                fov_deg: camera.fov_deg,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = csv::Writer::from_path(a.common.out.join("manifest.csv"))?;
    for row in &rows {
        manifest.serialize(row)?;
    }
    manifest.flush()?;
    let labels: Vec<LabelRecord> = rows
        .iter()
        .map(|m| LabelRecord { image_id: m.image_id.clone(), width: m.width, height: m.height, y_left: m.y_left, y_right: m.y_right })
        .collect();
    write_labels(&a.common.out.join("labels.csv"), &labels)?;
    println!("wrote {} cutouts to {}", rows.len(), image_dir.display());
    Ok(())
}

/// Label horizon moved into the image's largest centered square.
fn center_square_line(record: &LabelRecord) -> Result<(ImageFrame, Subwindow, HorizonLine)> {
    let frame = record.frame()?;
    let window = Subwindow::center_square(&frame);
    Ok((frame, window, transfer_horizon(&record.line()?, &Subwindow::full(&frame), &window, &frame)))
}

fn build_bins(a: &BuildBinsArgs) -> Result<()> {
    let labels = read_labels(&a.labels)?;
    let lines = labels.iter().map(|r| center_square_line(r).map(|t| t.2)).collect::<Result<Vec<_>>>()?;
    let space = LabelSpace::from_lines(&lines, a.bins)?;
    space.write(&a.common.out.join("bins.json"))?;
    println!("{} x {} label space from {} labels", space.theta.len(), space.rho.len(), lines.len());
    Ok(())
}

fn load_image(dir: &Path, image_id: &str) -> Result<RgbImage> {
    let path = dir.join(image_id);
    Ok(image::open(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?.to_rgb8())
}

fn train_baseline(a: &TrainBaselineArgs) -> Result<()> {
    let labels = read_labels(&a.labels)?;
    let space = LabelSpace::read(&a.bins)?;
    let parameterization = match a.parameterization {
        ParameterizationArg::SlopeOffset => Parameterization::SlopeOffset,
        ParameterizationArg::LeftRight => Parameterization::LeftRight,
    };
    let spec = match a.kind {
        BaselineKind::Prior => {
            let lines = labels.iter().map(|r| center_square_line(r).map(|t| t.2)).collect::<Result<Vec<_>>>()?;
            train_prior(&lines, &space, parameterization)?
        }
        BaselineKind::Linear => {
            let per_image = labels
                .par_iter()
                .enumerate()
                .map(|(k, record)| -> Result<Vec<(Vec<f64>, HorizonLine)>> {
                    let image = load_image(&a.images, &record.image_id)?;
                    if (image.width(), image.height()) != (record.width, record.height) {
                        return Err(Error::invalid(format!("{} does not match its label size", record.image_id)));
                    }
                    if a.augment {
                        let seed = a.common.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
                        augment_crop(&image, &record.line()?, seed)?
                            .into_iter()
                            .map(|c| Ok((center_features(&c.image)?, c.line)))
                            .collect()
                    } else {
                        let (_, w, line) = center_square_line(record)?;
                        Ok(vec![(extract_features(&image, w.x as u32, w.y as u32, w.width as u32)?, line)])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let samples: Vec<(Vec<f64>, HorizonLine)> = per_image.into_iter().flatten().collect();
            let features: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
            let targets = samples.iter().map(|s| parameterization.targets(&s.1)).collect::<Result<Vec<_>>>()?;
            let loss = match a.loss {
                LossKind::Huber => Loss::Huber { delta: a.delta },
                LossKind::L2 => Loss::L2,
            };
            let config = TrainConfig {
                loss,
                parameterization,
                learning_rate: a.learning_rate,
                epochs: a.epochs,
                batch_size: a.batch_size,
                seed: a.common.seed,
            };
            let model = train_on_features(&features, targets, &config)?;
            println!(
                "trained on {} crops, loss {:.6} -> {:.6}",
                samples.len(),
                model.epoch_losses.first().copied().unwrap_or(f64::NAN),
                model.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
            linear_spec(model)
        }
    };
    spec.write(&a.common.out.join("predictor.json"))
}

/// Full-image horizon for one image under `strategy`.
pub fn predict_image(
    predictor: &Predictor,
    image_id: &str,
    frame: ImageFrame,
    image: Option<&RgbImage>,
    strategy: Strategy,
) -> Result<HorizonLine> {
    let full = Subwindow::full(&frame);
    let input = |window: Subwindow, crop: Option<usize>| PredictInput { image_id, frame, image, window, crop };
    match strategy {
        Strategy::Center => {
            let d = predictor.predict(&input(Subwindow::center_square(&frame), None))?;
            Ok(transfer_horizon(&d.point, &d.window, &full, &frame))
        }
        Strategy::Average | Strategy::Optimize => {
            let distributions = make_crop_grid(&frame)?
                .into_iter()
                .enumerate()
                .map(|(k, w)| predictor.predict(&input(w, Some(k))))
                .collect::<Result<Vec<_>>>()?;
            let set = SubwindowSet::new(frame, distributions)?;
            if strategy == Strategy::Average {
                Ok(aggregate_average(&set)?.line)
            } else {
                Ok(aggregate_nll(&set)?.line)
            }
        }
    }
}

fn predict_aggregate(a: &PredictAggregateArgs) -> Result<()> {
    let space = Arc::new(LabelSpace::read(&a.bins)?);
    let predictor = Predictor::load(&a.predictor, space)?;
    let frames = read_labels(&a.frames)?;
    if predictor.needs_pixels() && a.images.is_none() {
        return Err(Error::invalid("this predictor needs --images"));
    }
    let results: Vec<Result<LabelRecord>> = frames
        .par_iter()
        .map(|record| {
            let frame = record.frame()?;
            let image = match (&a.images, predictor.needs_pixels()) {
                (Some(dir), true) => Some(load_image(dir, &record.image_id)?),
                _ => None,
            };
            let line = predict_image(&predictor, &record.image_id, frame, image.as_ref(), a.strategy)?;
            LabelRecord::from_line(&record.image_id, frame, &line)
        })
        .collect();
    let mut predictions = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (record, result) in frames.iter().zip(results) {
        match result {
            Ok(p) => predictions.push(p),
            Err(e) => {
                eprintln!("{}: {e}", record.image_id);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    write_labels(&a.common.out.join("predictions.csv"), &predictions)?;
    println!("wrote {} predictions", predictions.len());
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let labels = read_labels(&a.labels)?;
    let predictions = read_labels(&a.predictions)?;
    let result = evaluate_records(&labels, &predictions, a.max_threshold, a.allow_missing)?;
    for id in &result.missing {
        eprintln!("no prediction for {id}");
    }
    result.curve.write_points(&a.common.out.join("curve.csv"))?;
    result.write_per_image(&a.common.out.join("per_image.csv"))?;
    write_json(
        &a.common.out.join("summary.json"),
        &serde_json::json!({
            "auc": result.curve.auc,
            "max_threshold": result.curve.max_threshold,
            "images": result.per_image.len(),
            "missing": result.missing,
        }),
    )?;
    println!("AUC: {:.4}", result.curve.auc);
    Ok(())
}
