//! Interchange CSV for horizon labels and predictions.
//!
//! Columns: `image_id,width,height,y_left,y_right`. The two heights are pixel
//! coordinates (y down) of the horizon at `x = 0` and `x = width`. The SfM
//! labeler, the cutout manifest and the evaluator all share this schema.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HorizonLine, ImageFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub y_left: f64,
    pub y_right: f64,
}

impl LabelRecord {
    pub fn from_line(image_id: &str, frame: ImageFrame, line: &HorizonLine) -> Result<Self> {
        let (y_left, y_right) = line.pixel_endpoints(&frame)?;
        Ok(Self { image_id: image_id.to_string(), width: frame.width, height: frame.height, y_left, y_right })
    }

    pub fn frame(&self) -> Result<ImageFrame> {
        ImageFrame::new(self.width, self.height)
    }

    pub fn line(&self) -> Result<HorizonLine> {
        HorizonLine::from_pixel_endpoints(self.y_left, self.y_right, &self.frame()?)
    }

    /// Border heights in centered image-height units.
    pub fn left_right(&self) -> (f64, f64) {
        let h = self.height as f64;
        ((0.5 * h - self.y_left) / h, (0.5 * h - self.y_right) / h)
    }
}

pub fn read_labels_from<R: Read>(reader: R, path: &Path) -> Result<Vec<LabelRecord>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in csv.deserialize() {
        let record: LabelRecord = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        if record.width == 0 || record.height == 0 || !record.y_left.is_finite() || !record.y_right.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: out.len() + 2,
                message: format!("invalid record for `{}`", record.image_id),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    read_labels_from(File::open(path)?, path)
}

pub fn write_labels_to<W: Write>(writer: W, records: &[LabelRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for record in records {
        csv.serialize(record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_labels(path: &Path, records: &[LabelRecord]) -> Result<()> {
    write_labels_to(File::create(path)?, records)
}
