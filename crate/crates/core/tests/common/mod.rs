#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use horizonkit::geometry::{HorizonLine, ImageFrame};
use horizonkit::pano::{CameraParamDistributions, FovDistribution, RollDistribution, TiltKde, ROLL_DOF, TILT_BANDWIDTH};
use image::RgbImage;
use nalgebra::Vector2;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_horizonkit"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Moderate camera distributions for cutout generation.
pub fn test_distributions() -> CameraParamDistributions {
    CameraParamDistributions {
        fov: FovDistribution { mean_deg: 60.0, std_deg: 10.0 },
        roll: RollDistribution { location: 0.0, scale: 0.05, dof: ROLL_DOF },
        tilt: TiltKde { samples: (0..21).map(|k| -0.2 + 0.02 * k as f64).collect(), bandwidth: TILT_BANDWIDTH },
    }
}

/// Largest distance, in pixels, between the labeled horizon and the
/// mid-gray crossing of each column of a painted cutout.
pub fn painted_boundary_error(image: &RgbImage, line: &HorizonLine) -> f64 {
    let frame = ImageFrame::new(image.width(), image.height()).unwrap();
    let mut worst: f64 = 0.0;
    for px in 0..image.width() {
        let x = frame.pixel_to_centered(Vector2::new(px as f64 + 0.5, 0.0)).x;
        let y_label = frame.centered_to_pixel(Vector2::new(x, line.y_at(x).unwrap())).y;
        let column: Vec<f64> = (0..image.height()).map(|py| image.get_pixel(px, py).0[0] as f64).collect();
        let err = match column.windows(2).position(|w| (w[0] - 127.5) * (w[1] - 127.5) <= 0.0) {
            Some(k) => {
                let (a, b) = (column[k], column[k + 1]);
                let t = if a == b { 0.5 } else { (a - 127.5) / (a - b) };
                (k as f64 + 0.5 + t - y_label).abs()
            }
            None => {
                let outside =
                    if column[0] > 127.5 { y_label >= image.height() as f64 - 1.0 } else { y_label <= 1.0 };
                if outside { 0.0 } else { f64::INFINITY }
            }
        };
        worst = worst.max(err);
    }
    worst
}
