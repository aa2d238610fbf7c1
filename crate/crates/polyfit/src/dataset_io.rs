//! Stress–stretch CSV files and their JSON metadata sidecar.
//!
//! Columns are `mode,lambda_x,lambda_y,P_xx,P_yy`; `lambda_y` and `P_yy` are
//! left empty for uniaxial, pure-shear and equibiaxial rows.

use std::fs;
use std::path::{Path, PathBuf};

use polyfit_core::data::{Dataset, Mode, StressStretchSample, DEFAULT_UNIT};
use polyfit_core::kinematics::MaterialFrame;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["mode", "lambda_x", "lambda_y", "P_xx", "P_yy"];

/// Contents of the sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub unit: String,
    pub frame: MaterialFrame,
    pub provenance: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata { unit: DEFAULT_UNIT.into(), frame: MaterialFrame::default(), provenance: String::new() }
    }
}

/// `data.csv` → `data.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text of a dataset. Floats use the shortest representation that
/// parses back to the same value.
pub fn to_csv_string(ds: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Data(format!("cannot encode CSV: {e}"));
    w.write_record(HEADER).map_err(fail)?;
    for s in ds.samples() {
        w.write_record([s.mode.name().to_string(), s.lambda_x.to_string(), cell(s.lambda_y), s.p_xx.to_string(), cell(s.p_yy)])
            .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("cannot encode CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

fn parse_float(field: &str, name: &str, line: u64) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(None);
    }
    let v: f64 = t.parse().map_err(|_| Error::Data(format!("line {line}: {name} '{t}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("line {line}: {name} must be finite, got {t}")));
    }
    Ok(Some(v))
}

/// Parses CSV text into samples. Line numbers in errors count the header as 1.
pub fn parse_samples(text: &str) -> Result<Vec<StressStretchSample>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Data(format!("line 1: {e}")))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < HEADER.len() || names[..HEADER.len()] != HEADER {
        return Err(Error::Data(format!("line 1: expected header {}, found {}", HEADER.join(","), names.join(","))));
    }
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Data(format!("malformed CSV: {e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != HEADER.len() {
            return Err(Error::Data(format!("line {line}: expected {} fields, found {}", HEADER.len(), rec.len())));
        }
        let mode = Mode::parse(&rec[0]).map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let lambda_x =
            parse_float(&rec[1], "lambda_x", line)?.ok_or_else(|| Error::Data(format!("line {line}: lambda_x is missing")))?;
        let lambda_y = parse_float(&rec[2], "lambda_y", line)?;
        let p_xx = parse_float(&rec[3], "P_xx", line)?.ok_or_else(|| Error::Data(format!("line {line}: P_xx is missing")))?;
        let p_yy = parse_float(&rec[4], "P_yy", line)?;
        let sample = StressStretchSample { mode, lambda_x, lambda_y, p_xx, p_yy };
        sample.validate(line as usize).map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn parse_dataset(text: &str, meta: &Metadata) -> Result<Dataset> {
    Ok(Dataset::from_samples(parse_samples(text)?, &meta.unit, meta.frame, &meta.provenance)?)
}

/// Reads a dataset; the sidecar is optional and defaults to MPa, the
/// standard frame and an empty provenance note.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let raw = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Data(format!("{}: {e}", side.display())))?
    } else {
        Metadata::default()
    };
    parse_dataset(&text, &meta).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes the CSV and its sidecar. Returns both paths.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<[PathBuf; 2]> {
    fs::write(path, to_csv_string(ds)?).map_err(|e| Error::io(path, e))?;
    let meta = Metadata { unit: ds.unit.clone(), frame: ds.frame, provenance: ds.provenance.clone() };
    let side = sidecar_path(path);
    crate::write_json(&side, &meta)?;
    Ok([path.to_path_buf(), side])
}
