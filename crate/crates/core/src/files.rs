//! On-disk formats: model checkpoints (JSON), forecast and allocation CSVs.
//!
//! All writers go through [`atomic_write`]: content is staged in a sibling
//! temp file and renamed into place, so failed commands never leave partial
//! outputs behind.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{LstmModel, PointForecast};
use crate::sff::{quantile_closed_form, GaussianForecast, SffModel};

/// Quantile columns carried by the distributional forecast CSV.
pub const FORECAST_QUANTILES: [(&str, f64); 7] = [
    ("p01", 0.01),
    ("p05", 0.05),
    ("p25", 0.25),
    ("p50", 0.50),
    ("p75", 0.75),
    ("p95", 0.95),
    ("p99", 0.99),
];

/// Writes `content` to `path` via a temp file + rename.
pub fn atomic_write(path: impl AsRef<Path>, content: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    tmp.write_all(content)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialized trained model; the `model` tag selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelCheckpoint {
    Sff(SffModel),
    Lstm(LstmModel),
}

impl ModelCheckpoint {
    pub fn context_len(&self) -> usize {
        match self {
            ModelCheckpoint::Sff(m) => m.config.context_len,
            ModelCheckpoint::Lstm(m) => m.config.context_len,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ModelCheckpoint::Sff(m) => m.config.horizon,
            ModelCheckpoint::Lstm(m) => m.config.horizon,
        }
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &ModelCheckpoint) -> Result<()> {
    let json = serde_json::to_string_pretty(checkpoint)?;
    atomic_write(path, json.as_bytes())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("bad checkpoint: {e}")))
}

/// CSV rows for distributional forecasts:
/// `beam_id,origin_time,step,mu,sigma,p01,p05,p25,p50,p75,p95,p99`.
pub fn gaussian_forecast_csv(forecasts: &[GaussianForecast]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["beam_id", "origin_time", "step", "mu", "sigma"];
    header.extend(FORECAST_QUANTILES.iter().map(|(name, _)| *name));
    w.write_record(&header).map_err(csv_err)?;
    for f in forecasts {
        let quantiles: Vec<Vec<f64>> = FORECAST_QUANTILES
            .iter()
            .map(|(_, p)| quantile_closed_form(f, *p))
            .collect::<Result<_>>()?;
        for step in 0..f.horizon() {
            let mut row = vec![
                f.beam_id.clone(),
                f.origin_time.to_string(),
                step.to_string(),
                f.mu[step].to_string(),
                f.sigma[step].to_string(),
            ];
            row.extend(quantiles.iter().map(|q| q[step].to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// CSV rows for point forecasts: `beam_id,origin_time,step,value`.
/// Intentionally no interval columns.
pub fn point_forecast_csv(forecasts: &[PointForecast]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["beam_id", "origin_time", "step", "value"])
        .map_err(csv_err)?;
    for f in forecasts {
        for (step, value) in f.values.iter().enumerate() {
            w.write_record(&[
                f.beam_id.clone(),
                f.origin_time.to_string(),
                step.to_string(),
                value.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// Forecast file contents, shape detected from the header.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastFile {
    Gaussian(Vec<GaussianForecast>),
    Point(Vec<PointForecast>),
}

pub fn read_forecast_csv(path: impl AsRef<Path>) -> Result<ForecastFile> {
    let file = std::fs::File::open(path.as_ref())?;
    read_forecast_reader(file)
}

pub fn read_forecast_reader(reader: impl std::io::Read) -> Result<ForecastFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let gaussian = headers.len() >= 5 && headers[3] == "mu" && headers[4] == "sigma";
    let point = headers == ["beam_id", "origin_time", "step", "value"];
    if !gaussian && !point {
        return Err(Error::MissingColumn {
            expected: "beam_id,origin_time,step,{mu,sigma,...|value}".into(),
            got: headers.join(","),
        });
    }

    // Rows grouped by (beam_id, origin_time) in file order, steps ascending.
    let mut gaussians: Vec<GaussianForecast> = Vec::new();
    let mut points: Vec<PointForecast> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let beam_id = record[0].trim().to_string();
        let origin_time: i64 = parse_field(&record, 1)?;
        let step: usize = parse_field(&record, 2)?;
        if gaussian {
            let mu: f64 = parse_field(&record, 3)?;
            let sigma: f64 = parse_field(&record, 4)?;
            if sigma <= 0.0 || sigma.is_nan() {
                return Err(Error::NonPositiveSigma(sigma));
            }
            let current = match gaussians.last_mut() {
                Some(f) if f.beam_id == beam_id && f.origin_time == origin_time => f,
                _ => {
                    gaussians.push(GaussianForecast {
                        beam_id,
                        origin_time,
                        mu: Vec::new(),
                        sigma: Vec::new(),
                    });
                    gaussians.last_mut().expect("just pushed")
                }
            };
            if step != current.mu.len() {
                return Err(Error::CsvParse(format!(
                    "beam {} origin {origin_time}: step {step} out of order",
                    current.beam_id
                )));
            }
            current.mu.push(mu);
            current.sigma.push(sigma);
        } else {
            let value: f64 = parse_field(&record, 3)?;
            let current = match points.last_mut() {
                Some(f) if f.beam_id == beam_id && f.origin_time == origin_time => f,
                _ => {
                    points.push(PointForecast {
                        beam_id,
                        origin_time,
                        values: Vec::new(),
                    });
                    points.last_mut().expect("just pushed")
                }
            };
            if step != current.values.len() {
                return Err(Error::CsvParse(format!(
                    "beam {} origin {origin_time}: step {step} out of order",
                    current.beam_id
                )));
            }
            current.values.push(value);
        }
    }
    if gaussian {
        if gaussians.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(ForecastFile::Gaussian(gaussians))
    } else {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(ForecastFile::Point(points))
    }
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, index: usize) -> Result<T> {
    record
        .get(index)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::CsvParse(format!("bad field {index} in `{record:?}`")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::CsvParse(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::CsvParse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::CsvParse(e.to_string()))
}
