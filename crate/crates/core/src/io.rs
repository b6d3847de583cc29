//! Curve file formats: JSON `{"dim": 2, "closed": true, "points": [...]}` and
//! CSV with one point per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFile {
    pub dim: usize,
    #[serde(default = "default_closed")]
    pub closed: bool,
    pub points: Vec<Vec<f64>>,
}

fn default_closed() -> bool {
    true
}

impl CurveFile {
    pub fn from_curve(c: &Curve) -> Self {
        Self {
            dim: c.dim(),
            closed: true,
            points: c.to_rows(),
        }
    }

    pub fn into_curve(self) -> Result<Curve> {
        if !self.closed {
            return Err(Error::OpenCurve);
        }
        if let Some(bad) = self.points.iter().position(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "point {bad} does not have {} coordinates",
                self.dim
            )));
        }
        Curve::from_rows(&self.points)
    }
}

pub fn curve_from_json_str(s: &str) -> Result<Curve> {
    serde_json::from_str::<CurveFile>(s)?.into_curve()
}

pub fn curve_to_json_string(c: &Curve) -> Result<String> {
    Ok(serde_json::to_string(&CurveFile::from_curve(c))?)
}

pub fn read_curve_json(path: impl AsRef<Path>) -> Result<Curve> {
    let file: CurveFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    file.into_curve()
}

pub fn write_curve_json(path: impl AsRef<Path>, c: &Curve) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &CurveFile::from_curve(c))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads a headerless CSV file with one point per row.
pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Curve> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Curve::from_rows(&rows)
}

pub fn write_curve_csv(path: impl AsRef<Path>, c: &Curve) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in c.points().outer_iter() {
        writer.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Dispatches on the file extension (`.csv` or JSON otherwise).
pub fn read_curve(path: impl AsRef<Path>) -> Result<Curve> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_curve_csv(path),
        _ => read_curve_json(path),
    }
}

pub fn write_curve(path: impl AsRef<Path>, c: &Curve) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => write_curve_csv(path, c),
        _ => write_curve_json(path, c),
    }
}
