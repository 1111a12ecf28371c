//! CSV and JSON artifacts.
//!
//! Floats are written with 17 significant digits so files round-trip exactly
//! and identical runs produce identical bytes. The `t` column of every CSV is
//! the sample index.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::data::{Dataset, RegressorSpec};
use crate::error::{Error, Result};
use crate::evaluation::TrackingResult;
use crate::lip::LipParams;
use crate::model::{NnInput, PgnnModel, PgnnParams};
use crate::nn::NnParams;
use crate::training::{TrainingConfig, TrainingHistory};
use crate::trajectory::{MotionBounds, ReferenceProfile};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, contents).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| format_err(path, e.to_string()))
}

/// Reads a CSV with the expected header and returns its numeric rows.
fn read_columns(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != header {
        return Err(format_err(
            path,
            format!(
                "expected header {}, found {}",
                header.join(","),
                got.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| format_err(path, format!("row {}: {e}", line + 2)))?);
    }
    Ok(rows)
}

fn column_csv(header: &str, cols: &[&[f64]]) -> String {
    let n = cols.first().map_or(0, |c| c.len());
    let mut s = String::with_capacity(n * 26 * (cols.len() + 1));
    s.push_str(header);
    s.push('\n');
    for t in 0..n {
        let _ = write!(s, "{t}");
        for c in cols {
            let _ = write!(s, ",{:.16e}", c[t]);
        }
        s.push('\n');
    }
    s
}

pub fn dataset_csv(d: &Dataset) -> String {
    column_csv("t,u,y", &[d.u(), d.y()])
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    write_text(path, &dataset_csv(d))
}

/// Reads a `t,u,y` file; the sampling time is not stored in the CSV.
pub fn read_dataset(path: &Path, ts: f64) -> Result<Dataset> {
    let rows = read_columns(path, &["t", "u", "y"])?;
    let (u, y) = rows.iter().map(|r| (r[1], r[2])).unzip();
    Dataset::new(u, y, ts).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_reference(path: &Path, r: &ReferenceProfile) -> Result<()> {
    write_text(path, &column_csv("t,r", &[&r.r]))
}

pub fn read_reference(path: &Path, ts: f64, bounds: MotionBounds) -> Result<ReferenceProfile> {
    let rows = read_columns(path, &["t", "r"])?;
    let r: Vec<f64> = rows.iter().map(|row| row[1]).collect();
    if r.is_empty() {
        return Err(format_err(path, "no samples"));
    }
    Ok(ReferenceProfile { r, ts, bounds })
}

pub fn write_ff(path: &Path, u_ff: &[f64]) -> Result<()> {
    write_text(path, &column_csv("t,u_ff", &[u_ff]))
}

pub fn read_ff(path: &Path) -> Result<Vec<f64>> {
    Ok(read_columns(path, &["t", "u_ff"])?
        .iter()
        .map(|r| r[1])
        .collect())
}

/// `t,r,y,e,u_ff` for one tracking run.
pub fn tracking_csv(reference: &ReferenceProfile, res: &TrackingResult) -> String {
    column_csv("t,r,y,e,u_ff", &[&reference.r, &res.y, &res.e, &res.u_ff])
}

pub fn history_csv(h: &TrainingHistory) -> String {
    let n_phy = h.records.first().map_or(0, |r| r.theta_phy.len());
    let mut s = String::from("iter,total_cost,data_fit,reg_term");
    for i in 0..n_phy {
        let _ = write!(s, ",theta_phy_{i}");
    }
    s.push('\n');
    for r in &h.records {
        let _ = write!(
            s,
            "{},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.total, r.data_fit, r.reg
        );
        for v in &r.theta_phy {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipFile {
    pub theta: Vec<f64>,
    pub basis_kind: String,
    pub spec: RegressorSpec,
}

impl LipFile {
    pub fn new(lip: &LipParams, map: &BasisMap) -> Self {
        Self {
            theta: lip.theta.clone(),
            basis_kind: map.key().to_string(),
            spec: *map.spec(),
        }
    }

    pub fn params(&self) -> Result<LipParams> {
        LipParams::new(self.theta.clone())
    }

    pub fn basis(&self) -> Result<BasisMap> {
        BasisMap::from_key(&self.basis_kind, self.spec.ts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub theta_phy: Vec<f64>,
    pub nn: NnParams,
    pub input_scaling: Vec<f64>,
    pub nn_input: NnInput,
    pub basis_kind: String,
    pub spec: RegressorSpec,
    /// Training configuration that produced the model.
    pub cfg: Option<TrainingConfig>,
}

impl ModelFile {
    pub fn new(model: &PgnnModel, cfg: Option<&TrainingConfig>) -> Self {
        Self {
            theta_phy: model.params.theta_phy.clone(),
            nn: model.params.nn.clone(),
            input_scaling: model.input_scaling.clone(),
            nn_input: model.nn_input,
            basis_kind: model.map.key().to_string(),
            spec: *model.map.spec(),
            cfg: cfg.cloned(),
        }
    }

    pub fn model(&self) -> Result<PgnnModel> {
        let map = BasisMap::from_key(&self.basis_kind, self.spec.ts)?;
        let nn = self.nn.clone().validate()?;
        PgnnModel::new(
            PgnnParams::new(nn, self.theta_phy.clone())?,
            map,
            self.input_scaling.clone(),
            self.nn_input,
        )
    }
}

/// Either kind of stored inverse model, told apart by their fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum AnyModelFile {
    Pgnn(ModelFile),
    Lip(LipFile),
}
