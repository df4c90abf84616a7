//! Traffic data model: CSV ingestion, synthetic multi-beam generation,
//! sliding-window extraction, and per-window normalization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

/// Hourly traffic for one beam. Timestamps are implicit: sample `i` is at
/// `start_time + i` epoch-hours, with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    pub beam_id: String,
    pub start_time: i64,
    pub values: Vec<f64>,
}

impl TrafficSeries {
    pub fn new(beam_id: impl Into<String>, start_time: i64, values: Vec<f64>) -> Result<Self> {
        let beam_id = beam_id.into();
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::NegativeValue {
                    beam_id,
                    at: start_time + i as i64,
                    value: *v,
                });
            }
        }
        Ok(Self {
            beam_id,
            start_time,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First hour past the end of the series.
    pub fn end_time(&self) -> i64 {
        self.start_time + self.values.len() as i64
    }

    /// Values in the absolute hour range [from, to).
    pub fn slice_hours(&self, from: i64, to: i64) -> Result<&[f64]> {
        if from < self.start_time || to > self.end_time() || from > to {
            return Err(Error::InsufficientHistory(format!(
                "beam {}: requested hours [{from}, {to}) outside [{}, {})",
                self.beam_id,
                self.start_time,
                self.end_time()
            )));
        }
        let a = (from - self.start_time) as usize;
        let b = (to - self.start_time) as usize;
        Ok(&self.values[a..b])
    }
}

/// One aligned series per beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub series: Vec<TrafficSeries>,
}

impl Dataset {
    /// Validates beam-id uniqueness and alignment (same start, same length).
    pub fn new(series: Vec<TrafficSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let first = &series[0];
        for s in &series[1..] {
            if s.len() != first.len() || s.start_time != first.start_time {
                return Err(Error::UnequalSeriesLength {
                    beam_id: s.beam_id.clone(),
                    reference: first.beam_id.clone(),
                    detail: format!(
                        "len {} start {} vs len {} start {}",
                        s.len(),
                        s.start_time,
                        first.len(),
                        first.start_time
                    ),
                });
            }
        }
        for (i, s) in series.iter().enumerate() {
            for other in &series[i + 1..] {
                if other.beam_id == s.beam_id {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate beam id {}",
                        s.beam_id
                    )));
                }
            }
        }
        Ok(Self { series })
    }

    pub fn n_beams(&self) -> usize {
        self.series.len()
    }

    /// Shared series length.
    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn start_time(&self) -> i64 {
        self.series[0].start_time
    }

    pub fn end_time(&self) -> i64 {
        self.series[0].end_time()
    }

    pub fn beam(&self, beam_id: &str) -> Option<&TrafficSeries> {
        self.series.iter().find(|s| s.beam_id == beam_id)
    }

    /// Copy of the dataset truncated to hours before `cutoff`.
    pub fn truncated_before(&self, cutoff: i64) -> Result<Dataset> {
        let keep = (cutoff - self.start_time()).clamp(0, self.len() as i64) as usize;
        if keep == 0 {
            return Err(Error::InsufficientHistory(format!(
                "no samples before hour {cutoff}"
            )));
        }
        Dataset::new(
            self.series
                .iter()
                .map(|s| TrafficSeries {
                    beam_id: s.beam_id.clone(),
                    start_time: s.start_time,
                    values: s.values[..keep].to_vec(),
                })
                .collect(),
        )
    }
}

/// Context/target pair cut from one series by the sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastWindow {
    pub beam_id: String,
    pub context: Vec<f64>,
    pub horizon_truth: Vec<f64>,
}

/// Mean/std used to normalize one context window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

/// Floor keeping the scale strictly positive for constant contexts.
pub const STD_FLOOR: f64 = 1e-6;

/// Z-score normalization with sample std (n-1) floored at [`STD_FLOOR`].
pub fn normalize(context: &[f64]) -> (Vec<f64>, NormStats) {
    assert!(!context.is_empty(), "normalize requires a non-empty context");
    let n = context.len() as f64;
    let mean = context.iter().sum::<f64>() / n;
    let var = if context.len() > 1 {
        context.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt().max(STD_FLOOR);
    let stats = NormStats { mean, std };
    (context.iter().map(|x| (x - mean) / std).collect(), stats)
}

pub fn denormalize(values: &[f64], stats: NormStats) -> Vec<f64> {
    values.iter().map(|v| v * stats.std + stats.mean).collect()
}

/// Synthetic multi-beam traffic model: diurnal and weekly sinusoids, AR(1)
/// noise, and Poisson-arriving bursts with exponential decay. A stand-in
/// for operational beam telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_beams: usize,
    pub n_days: usize,
    pub base_load: f64,
    pub diurnal_amplitude: f64,
    pub weekly_amplitude: f64,
    /// AR(1) coefficient of the noise process, in [0, 1).
    pub noise_ar_coeff: f64,
    /// Stationary standard deviation of the AR(1) noise.
    pub noise_std: f64,
    /// Expected burst arrivals per day per beam.
    pub burst_rate: f64,
    /// Mean amplitude of a burst (exponentially distributed).
    pub burst_scale: f64,
    /// Diurnal phase offset per beam, in hours. Empty = evenly spread.
    pub phase_offsets: Vec<f64>,
}

/// Burst decay time constant, hours.
const BURST_DECAY_HOURS: f64 = 6.0;

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_beams: 6,
            n_days: 38,
            base_load: 100.0,
            diurnal_amplitude: 30.0,
            weekly_amplitude: 10.0,
            noise_ar_coeff: 0.6,
            noise_std: 5.0,
            burst_rate: 0.5,
            burst_scale: 20.0,
            phase_offsets: Vec::new(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_beams == 0 || self.n_days == 0 {
            return Err(Error::InvalidConfig(
                "n_beams and n_days must be positive".into(),
            ));
        }
        if self.base_load <= 0.0 || self.base_load.is_nan() {
            return Err(Error::InvalidConfig("base_load must be > 0".into()));
        }
        if self.diurnal_amplitude < 0.0
            || self.weekly_amplitude < 0.0
            || self.noise_std < 0.0
            || self.burst_rate < 0.0
            || self.burst_scale < 0.0
        {
            return Err(Error::InvalidConfig(
                "amplitudes, noise_std, burst_rate, burst_scale must be >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise_ar_coeff) {
            return Err(Error::InvalidConfig(
                "noise_ar_coeff must lie in [0, 1)".into(),
            ));
        }
        if !self.phase_offsets.is_empty() && self.phase_offsets.len() != self.n_beams {
            return Err(Error::InvalidConfig(format!(
                "phase_offsets has {} entries for {} beams",
                self.phase_offsets.len(),
                self.n_beams
            )));
        }
        Ok(())
    }

    fn phase_for(&self, beam: usize) -> f64 {
        if self.phase_offsets.is_empty() {
            24.0 * beam as f64 / self.n_beams as f64
        } else {
            self.phase_offsets[beam]
        }
    }
}

/// Generates `spec.n_beams` aligned hourly series of `n_days * 24` samples,
/// clamped at zero. Bit-deterministic in `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let horizon = spec.n_days * 24;
    let innovation_std = spec.noise_std * (1.0 - spec.noise_ar_coeff * spec.noise_ar_coeff).sqrt();
    let burst_decay = (-1.0 / BURST_DECAY_HOURS).exp();
    let hourly_burst_rate = spec.burst_rate / 24.0;

    let mut series = Vec::with_capacity(spec.n_beams);
    for beam in 0..spec.n_beams {
        let beam_id = format!("b{beam}");
        let mut rng = SplitMix64::new(rng::derive_seed(seed, rng::hash_str(&beam_id)));
        let phase = spec.phase_for(beam);

        let mut noise = spec.noise_std * rng.normal();
        let mut burst_level = 0.0f64;
        let mut values = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let th = t as f64;
            let diurnal = spec.diurnal_amplitude
                * (std::f64::consts::TAU * (th + phase) / 24.0).sin();
            let weekly = spec.weekly_amplitude * (std::f64::consts::TAU * th / 168.0).sin();
            if t > 0 {
                noise = spec.noise_ar_coeff * noise + innovation_std * rng.normal();
            }
            burst_level *= burst_decay;
            for _ in 0..rng.poisson(hourly_burst_rate) {
                burst_level += rng.exponential(spec.burst_scale);
            }
            let v = spec.base_load + diurnal + weekly + noise + burst_level;
            values.push(v.max(0.0));
        }
        series.push(TrafficSeries {
            beam_id,
            start_time: 0,
            values,
        });
    }
    Dataset::new(series)
}

/// Sliding windows at offsets 0, stride, 2*stride, ... per series.
/// Yields `floor((T - C - H) / stride) + 1` windows per series.
pub fn make_windows(
    ds: &Dataset,
    context_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<ForecastWindow>> {
    if context_len == 0 || horizon == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "context_len, horizon and stride must be positive".into(),
        ));
    }
    let total = context_len + horizon;
    let len = ds.len();
    if total > len {
        return Err(Error::WindowTooLong {
            context: context_len,
            horizon,
            len,
        });
    }
    let mut windows = Vec::new();
    for s in &ds.series {
        let mut offset = 0;
        while offset + total <= len {
            windows.push(ForecastWindow {
                beam_id: s.beam_id.clone(),
                context: s.values[offset..offset + context_len].to_vec(),
                horizon_truth: s.values[offset + context_len..offset + total].to_vec(),
            });
            offset += stride;
        }
    }
    Ok(windows)
}

/// Parses `timestamp,beam_id,traffic` rows into an aligned [`Dataset`].
///
/// Timestamps are integer epoch-hours or ISO-8601 hour-aligned instants.
/// Rows may arrive in any order; each beam must form a gap-free hourly
/// series once sorted, and all beams must cover the same span. Missing
/// hours are an error, never imputed.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file)
}

pub fn load_csv_reader(reader: impl std::io::Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::CsvParse(e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != ["timestamp", "beam_id", "traffic"] {
        return Err(Error::MissingColumn {
            expected: "timestamp,beam_id,traffic".into(),
            got: got.join(","),
        });
    }

    let mut by_beam: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::CsvParse(e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::CsvParse(format!(
                "expected 3 fields, got {}",
                record.len()
            )));
        }
        let hour = parse_timestamp(record[0].trim())?;
        let beam_id = record[1].trim().to_string();
        let raw = record[2].trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::CsvParse(format!("bad traffic value `{raw}`")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeValue {
                beam_id,
                at: hour,
                value,
            });
        }
        by_beam.entry(beam_id).or_default().push((hour, value));
    }
    if by_beam.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut series = Vec::with_capacity(by_beam.len());
    for (beam_id, mut rows) in by_beam {
        rows.sort_by_key(|(hour, _)| *hour);
        for pair in rows.windows(2) {
            if pair[1].0 - pair[0].0 != 1 {
                return Err(Error::NonHourlyGap {
                    beam_id,
                    at: pair[1].0,
                    prev: pair[0].0,
                });
            }
        }
        let start_time = rows[0].0;
        let values = rows.into_iter().map(|(_, v)| v).collect();
        series.push(TrafficSeries {
            beam_id,
            start_time,
            values,
        });
    }
    Dataset::new(series)
}

/// Writes a dataset back out in the ingestion schema (integer epoch-hours).
pub fn write_csv(ds: &Dataset, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "beam_id", "traffic"])
        .map_err(|e| Error::CsvParse(e.to_string()))?;
    for s in &ds.series {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record(&[
                (s.start_time + i as i64).to_string(),
                s.beam_id.clone(),
                v.to_string(),
            ])
            .map_err(|e| Error::CsvParse(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_timestamp(raw: &str) -> Result<i64> {
    if let Ok(hours) = raw.parse::<i64>() {
        return Ok(hours);
    }
    let dt = chrono::DateTime::parse_from_rfc3339(raw)
        .map_err(|_| Error::CsvParse(format!("bad timestamp `{raw}`")))?;
    let secs = dt.timestamp();
    if secs.rem_euclid(3600) != 0 {
        return Err(Error::NonHourlyGap {
            beam_id: String::new(),
            at: secs.div_euclid(3600),
            prev: secs.div_euclid(3600),
        });
    }
    Ok(secs.div_euclid(3600))
}
