//! Closed-loop provisioning simulation.
//!
//! Rolls the monitoring -> analytics -> decision -> actuation -> feedback
//! cycle forward over a multi-beam dataset, one forecast origin per
//! evaluation day: slice telemetry up to the origin, train (or reuse)
//! models on that history, forecast the horizon, build empirical
//! percentiles where a quantile policy asks for them, record the
//! allocation the actuator would push, then audit against realized
//! traffic. Actuation and the management interface are modeled as log
//! records, not a wire protocol.
//!
//! Everything is deterministic in the config seed; per-beam sampling
//! streams are derived as `seed ^ hash(beam_id)` so results do not depend
//! on evaluation order.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decision::{
    account_provisioning, classify_step, decide_allocation, ecdf_quantiles, percentile_grid,
    AllocationPlan, AllocationPolicy, ForecastSource, ProvisioningOutcome,
};
use crate::error::{Error, Result};
use crate::files;
use crate::lstm::{train_lstm, LstmHyper, LstmModel, PointForecast};
use crate::metrics::{self, interval_coverage, EvalRecord, MetricsRecord, Report};
use crate::rng::{derive_seed, hash_str};
use crate::sff::{sample_paths, train_sff, GaussianForecast, SffHyper, SffModel};
use crate::timeseries::{generate_synthetic, load_csv, make_windows, Dataset, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sff,
    Lstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Sff => "sff",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Rolling evaluation: one origin per day over the last `n_eval_days`.
    #[default]
    Rolling,
    /// Case-study replay: single origin, last horizon held out.
    Replay,
}

/// Where the traffic data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        #[serde(default)]
        spec: SyntheticSpec,
        seed: u64,
    },
    Csv {
        path: String,
    },
}

/// Per-model training settings (seeds come from the simulation seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SffSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden_dims: Vec<usize>,
}

impl Default for SffSettings {
    fn default() -> Self {
        let d = SffHyper::new(0);
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            hidden_dims: d.hidden_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden_dim: usize,
}

impl Default for LstmSettings {
    fn default() -> Self {
        let d = LstmHyper::new(0);
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            hidden_dim: d.hidden_dim,
        }
    }
}

/// Allocation policy per model. The default audits each model's own point
/// forecast, the symmetric way to compare a probabilistic model against a
/// deterministic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub sff: AllocationPolicy,
    pub lstm: AllocationPolicy,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            sff: AllocationPolicy::Point,
            lstm: AllocationPolicy::Point,
        }
    }
}

impl PolicyConfig {
    pub fn for_kind(&self, kind: ModelKind) -> AllocationPolicy {
        match kind {
            ModelKind::Sff => self.sff,
            ModelKind::Lstm => self.lstm,
        }
    }
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Sff, ModelKind::Lstm]
}

fn default_context_len() -> usize {
    168
}

fn default_horizon() -> usize {
    24
}

fn default_n_eval_days() -> usize {
    4
}

fn default_train_stride() -> usize {
    1
}

fn default_ecdf_samples() -> usize {
    1000
}

/// Full simulation configuration; also the CLI run-config JSON schema.
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub mode: SimMode,
    pub dataset: DatasetSource,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_context_len")]
    pub context_len: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Evaluation days; each day contributes one forecast origin spaced
    /// `horizon` hours apart, counted back from the end of the data.
    #[serde(default = "default_n_eval_days")]
    pub n_eval_days: usize,
    /// Retrain cadence in evaluation days; unset = train once up front.
    #[serde(default)]
    pub retrain_every: Option<usize>,
    /// Stride for training-window extraction.
    #[serde(default = "default_train_stride")]
    pub train_stride: usize,
    /// Paths drawn per forecast when building empirical percentiles.
    #[serde(default = "default_ecdf_samples")]
    pub ecdf_samples: usize,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub sff: SffSettings,
    #[serde(default)]
    pub lstm: LstmSettings,
    pub seed: u64,
}

impl SimConfig {
    /// Canonical rolling-evaluation config on the default synthetic data.
    pub fn synthetic_default(seed: u64) -> Self {
        Self {
            mode: SimMode::Rolling,
            dataset: DatasetSource::Synthetic {
                spec: SyntheticSpec::default(),
                seed,
            },
            models: default_models(),
            context_len: default_context_len(),
            horizon: default_horizon(),
            n_eval_days: default_n_eval_days(),
            retrain_every: None,
            train_stride: default_train_stride(),
            ecdf_samples: default_ecdf_samples(),
            policy: PolicyConfig::default(),
            sff: SffSettings::default(),
            lstm: LstmSettings::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("no models selected".into()));
        }
        let mut seen = Vec::new();
        for m in &self.models {
            if seen.contains(m) {
                return Err(Error::InvalidConfig(format!("model {m} listed twice")));
            }
            seen.push(*m);
        }
        if self.n_eval_days == 0 {
            return Err(Error::InvalidConfig("n_eval_days must be >= 1".into()));
        }
        if self.context_len == 0 || self.horizon == 0 || self.train_stride == 0 {
            return Err(Error::InvalidConfig(
                "context_len, horizon, train_stride must be >= 1".into(),
            ));
        }
        if self.ecdf_samples == 0 {
            return Err(Error::InvalidConfig("ecdf_samples must be >= 1".into()));
        }
        if let Some(0) = self.retrain_every {
            return Err(Error::InvalidConfig("retrain_every must be >= 1".into()));
        }
        if let DatasetSource::Synthetic { spec, .. } = &self.dataset {
            spec.validate()?;
        }
        for kind in &self.models {
            let policy = self.policy.for_kind(*kind);
            policy.validate()?;
            match (kind, policy) {
                (ModelKind::Lstm, AllocationPolicy::Quantile { .. }) => {
                    return Err(Error::IncompatiblePolicy(
                        "lstm is deterministic; quantile policies need sff".into(),
                    ));
                }
                (ModelKind::Sff, AllocationPolicy::Quantile { p }) => {
                    // Allocation happens from the 1..99 percentile grid.
                    let on_grid = percentile_grid().iter().any(|g| (g - p).abs() < 1e-9);
                    if !on_grid {
                        return Err(Error::IncompatiblePolicy(format!(
                            "quantile p={p} is not on the percentile grid (0.01..=0.99)"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic { spec, seed } => generate_synthetic(spec, *seed),
            DatasetSource::Csv { path } => load_csv(path),
        }
    }
}

/// One model's output for one (day, beam).
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastRecord {
    Gaussian(GaussianForecast),
    Point(PointForecast),
}

impl ForecastRecord {
    pub fn point_values(&self) -> &[f64] {
        match self {
            ForecastRecord::Gaussian(f) => &f.mu,
            ForecastRecord::Point(f) => &f.values,
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianForecast> {
        match self {
            ForecastRecord::Gaussian(f) => Some(f),
            ForecastRecord::Point(_) => None,
        }
    }
}

/// Forecasting model as seen by the evaluation loop. Implementations must
/// be pure in (beam_id, origin_time, context).
pub trait BeamForecaster {
    fn kind(&self) -> ModelKind;
    fn forecast(&self, beam_id: &str, origin_time: i64, context: &[f64])
        -> Result<ForecastRecord>;
}

struct SffBeamForecaster {
    model: SffModel,
}

impl BeamForecaster for SffBeamForecaster {
    fn kind(&self) -> ModelKind {
        ModelKind::Sff
    }

    fn forecast(
        &self,
        beam_id: &str,
        origin_time: i64,
        context: &[f64],
    ) -> Result<ForecastRecord> {
        Ok(ForecastRecord::Gaussian(self.model.predict(
            beam_id,
            origin_time,
            context,
        )?))
    }
}

struct LstmBeamForecaster {
    model: LstmModel,
}

impl BeamForecaster for LstmBeamForecaster {
    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn forecast(
        &self,
        beam_id: &str,
        origin_time: i64,
        context: &[f64],
    ) -> Result<ForecastRecord> {
        Ok(ForecastRecord::Point(self.model.predict(
            beam_id,
            origin_time,
            context,
        )?))
    }
}

/// One audited (day, beam, model) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEntry {
    pub day: usize,
    pub origin_time: i64,
    pub beam_id: String,
    pub model: ModelKind,
    pub forecast: ForecastRecord,
    pub plan: AllocationPlan,
    pub actual: Vec<f64>,
    pub outcome: ProvisioningOutcome,
    pub metrics: MetricsRecord,
}

/// Complete simulation record: per-evaluation entries, training curves,
/// the pooled report, per-beam errors, and phase wall-times.
#[derive(Debug, Clone)]
pub struct SimLog {
    pub entries: Vec<SimEntry>,
    pub training_logs: BTreeMap<String, Vec<f64>>,
    pub report: Report,
    pub per_beam: Vec<metrics::BeamErrors>,
    /// Wall-clock seconds per phase. Diagnostics only: excluded from the
    /// reproducibility contract.
    pub timings: BTreeMap<String, f64>,
}

struct TrainedModels {
    forecasters: Vec<Box<dyn BeamForecaster>>,
    logs: BTreeMap<String, Vec<f64>>,
}

fn train_models(cfg: &SimConfig, dataset: &Dataset, cutoff: i64) -> Result<TrainedModels> {
    let history = dataset.truncated_before(cutoff)?;
    if history.len() < cfg.context_len + cfg.horizon {
        return Err(Error::InsufficientHistory(format!(
            "history of {} hours cannot fit one {}+{} training window",
            history.len(),
            cfg.context_len,
            cfg.horizon
        )));
    }
    let windows = make_windows(&history, cfg.context_len, cfg.horizon, cfg.train_stride)?;

    let mut trained = TrainedModels {
        forecasters: Vec::with_capacity(cfg.models.len()),
        logs: BTreeMap::new(),
    };
    for kind in &cfg.models {
        match kind {
            ModelKind::Sff => {
                let hyper = SffHyper {
                    epochs: cfg.sff.epochs,
                    batch_size: cfg.sff.batch_size,
                    lr: cfg.sff.lr,
                    seed: derive_seed(cfg.seed, hash_str("sff")),
                    hidden_dims: cfg.sff.hidden_dims.clone(),
                };
                let model = train_sff(&windows, &hyper, cfg.horizon)?;
                trained
                    .logs
                    .insert("sff".into(), model.training_log.clone());
                trained
                    .forecasters
                    .push(Box::new(SffBeamForecaster { model }));
            }
            ModelKind::Lstm => {
                let hyper = LstmHyper {
                    epochs: cfg.lstm.epochs,
                    batch_size: cfg.lstm.batch_size,
                    lr: cfg.lstm.lr,
                    seed: derive_seed(cfg.seed, hash_str("lstm")),
                    hidden_dim: cfg.lstm.hidden_dim,
                };
                let model = train_lstm(&windows, &hyper, cfg.horizon)?;
                trained
                    .logs
                    .insert("lstm".into(), model.training_log.clone());
                trained
                    .forecasters
                    .push(Box::new(LstmBeamForecaster { model }));
            }
        }
    }
    Ok(trained)
}

/// Independent sampling stream per (beam, day).
fn sample_seed(base: u64, beam_id: &str, day: usize) -> u64 {
    derive_seed(base ^ hash_str(beam_id), day as u64)
}

struct PhaseTimers {
    forecast: f64,
    decide: f64,
    audit: f64,
}

fn eval_origin(
    cfg: &SimConfig,
    dataset: &Dataset,
    forecasters: &[Box<dyn BeamForecaster>],
    day: usize,
    origin: i64,
    timers: &mut PhaseTimers,
) -> Result<Vec<SimEntry>> {
    let mut entries = Vec::with_capacity(dataset.n_beams() * forecasters.len());
    for series in &dataset.series {
        // Monitoring: the model may only see samples strictly before the
        // origin. The audit side reads the realized horizon separately.
        let context = series.slice_hours(origin - cfg.context_len as i64, origin)?;
        let actual = series
            .slice_hours(origin, origin + cfg.horizon as i64)?
            .to_vec();

        for forecaster in forecasters {
            let kind = forecaster.kind();
            let policy = cfg.policy.for_kind(kind);

            let t0 = Instant::now();
            let record = forecaster.forecast(&series.beam_id, origin, context)?;
            timers.forecast += t0.elapsed().as_secs_f64();

            let t1 = Instant::now();
            let plan = match (&record, policy) {
                (ForecastRecord::Gaussian(g), AllocationPolicy::Quantile { .. }) => {
                    // Workflow route: sample paths, build the 1..99
                    // percentile grid, allocate from the grid.
                    let seed = sample_seed(cfg.seed, &series.beam_id, day);
                    let paths = sample_paths(g, cfg.ecdf_samples, seed);
                    let grid = ecdf_quantiles(&paths, &percentile_grid())?;
                    let mut plan =
                        decide_allocation(ForecastSource::Quantiles(&grid), policy)?;
                    plan.beam_id = series.beam_id.clone();
                    plan.origin_time = origin;
                    plan
                }
                (ForecastRecord::Gaussian(g), _) => {
                    decide_allocation(ForecastSource::Gaussian(g), policy)?
                }
                (ForecastRecord::Point(p), _) => {
                    decide_allocation(ForecastSource::Point(p), policy)?
                }
            };
            timers.decide += t1.elapsed().as_secs_f64();

            let t2 = Instant::now();
            let outcome = account_provisioning(&plan, &actual)?;
            let gaussian = record.gaussian();
            let entry_metrics = MetricsRecord {
                model: kind.to_string(),
                mae: metrics::mae(record.point_values(), &actual)?,
                rmse: metrics::rmse(record.point_values(), &actual)?,
                coverage_50: gaussian
                    .map(|g| interval_coverage(g, &actual, 0.5))
                    .transpose()?,
                coverage_90: gaussian
                    .map(|g| interval_coverage(g, &actual, 0.9))
                    .transpose()?,
            };
            timers.audit += t2.elapsed().as_secs_f64();

            entries.push(SimEntry {
                day,
                origin_time: origin,
                beam_id: series.beam_id.clone(),
                model: kind,
                forecast: record,
                plan,
                actual: actual.clone(),
                outcome,
                metrics: entry_metrics,
            });
        }
    }
    Ok(entries)
}

fn assemble_log(
    mut entries: Vec<SimEntry>,
    training_logs: BTreeMap<String, Vec<f64>>,
    mut timings: BTreeMap<String, f64>,
    started: Instant,
) -> Result<SimLog> {
    // Fixed aggregation order regardless of evaluation schedule.
    entries.sort_by(|a, b| {
        (a.day, &a.beam_id, a.model).cmp(&(b.day, &b.beam_id, b.model))
    });

    let records: Vec<EvalRecord> = entries
        .iter()
        .map(|e| EvalRecord {
            model: e.model.to_string(),
            beam_id: e.beam_id.clone(),
            point: e.forecast.point_values().to_vec(),
            actual: e.actual.clone(),
            gaussian: e.forecast.gaussian().cloned(),
            outcome: e.outcome.clone(),
        })
        .collect();
    let report = metrics::summarize(&records)?;
    let per_beam = metrics::per_beam_errors(&records)?;

    timings.insert("total_s".into(), started.elapsed().as_secs_f64());
    Ok(SimLog {
        entries,
        training_logs,
        report,
        per_beam,
        timings,
    })
}

fn check_eval_span(cfg: &SimConfig, dataset: &Dataset) -> Result<i64> {
    let eval_span = (cfg.n_eval_days * cfg.horizon) as i64;
    let first_origin = dataset.end_time() - eval_span;
    // The earliest context must fit entirely before the first origin.
    if first_origin - (cfg.context_len as i64) < dataset.start_time() {
        return Err(Error::InsufficientHistory(format!(
            "{} hours of data cannot cover context {} plus {} evaluation hours",
            dataset.len(),
            cfg.context_len,
            eval_span
        )));
    }
    Ok(first_origin)
}

/// Runs the full closed loop: load data, train, then per evaluation day
/// forecast / decide / actuate / audit, with optional retraining.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimLog> {
    let started = Instant::now();
    cfg.validate()?;
    let dataset = cfg.load_dataset()?;
    let first_origin = check_eval_span(cfg, &dataset)?;

    let mut timings = BTreeMap::new();
    let t_train = Instant::now();
    let mut trained = train_models(cfg, &dataset, first_origin)?;
    let mut train_s = t_train.elapsed().as_secs_f64();

    let mut timers = PhaseTimers {
        forecast: 0.0,
        decide: 0.0,
        audit: 0.0,
    };
    let mut entries = Vec::new();
    for day in 0..cfg.n_eval_days {
        let origin = first_origin + (day * cfg.horizon) as i64;
        if let Some(cadence) = cfg.retrain_every {
            if day > 0 && day % cadence == 0 {
                let t = Instant::now();
                trained = train_models(cfg, &dataset, origin)?;
                train_s += t.elapsed().as_secs_f64();
            }
        }
        entries.extend(eval_origin(
            cfg,
            &dataset,
            &trained.forecasters,
            day,
            origin,
            &mut timers,
        )?);
    }

    timings.insert("train_s".into(), train_s);
    timings.insert("forecast_s".into(), timers.forecast);
    timings.insert("decide_s".into(), timers.decide);
    timings.insert("audit_s".into(), timers.audit);
    assemble_log(entries, trained.logs, timings, started)
}

/// Case-study replay: hold out the final horizon, forecast it per beam from
/// the immediately preceding context, using models trained on everything
/// earlier. Requires at least 6 beams.
pub fn replay_case_study(cfg: &SimConfig) -> Result<SimLog> {
    let dataset = cfg.load_dataset()?;
    if dataset.n_beams() < 6 {
        return Err(Error::InvalidConfig(format!(
            "case-study replay needs >= 6 beams, dataset has {}",
            dataset.n_beams()
        )));
    }
    let mut single = cfg.clone();
    single.mode = SimMode::Replay;
    single.n_eval_days = 1;
    run_simulation(&single)
}

/// Routes on `cfg.mode`.
pub fn run(cfg: &SimConfig) -> Result<SimLog> {
    match cfg.mode {
        SimMode::Rolling => run_simulation(cfg),
        SimMode::Replay => replay_case_study(cfg),
    }
}

/// Evaluation loop with externally supplied forecasters and no training;
/// the hook test doubles use to exercise the loop.
pub fn run_with_forecasters(
    cfg: &SimConfig,
    dataset: &Dataset,
    forecasters: &[Box<dyn BeamForecaster>],
) -> Result<SimLog> {
    let started = Instant::now();
    cfg.validate()?;
    let first_origin = check_eval_span(cfg, dataset)?;
    let mut timers = PhaseTimers {
        forecast: 0.0,
        decide: 0.0,
        audit: 0.0,
    };
    let mut entries = Vec::new();
    for day in 0..cfg.n_eval_days {
        let origin = first_origin + (day * cfg.horizon) as i64;
        entries.extend(eval_origin(cfg, dataset, forecasters, day, origin, &mut timers)?);
    }
    let mut timings = BTreeMap::new();
    timings.insert("train_s".into(), 0.0);
    timings.insert("forecast_s".into(), timers.forecast);
    timings.insert("decide_s".into(), timers.decide);
    timings.insert("audit_s".into(), timers.audit);
    assemble_log(entries, BTreeMap::new(), timings, started)
}

impl SimLog {
    /// Writes the log as a directory of plot-ready files:
    /// `forecasts_{model}.csv`, `allocations_{model}.csv`, `report.json`,
    /// `errors.csv`, `timings.json`. Everything except `timings.json` is
    /// byte-deterministic in the config.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let models: Vec<ModelKind> = {
            let mut seen = Vec::new();
            for e in &self.entries {
                if !seen.contains(&e.model) {
                    seen.push(e.model);
                }
            }
            seen.sort();
            seen
        };

        for kind in models {
            let of_kind: Vec<&SimEntry> =
                self.entries.iter().filter(|e| e.model == kind).collect();

            let forecast_csv = match kind {
                ModelKind::Sff => {
                    let list: Vec<GaussianForecast> = of_kind
                        .iter()
                        .filter_map(|e| e.forecast.gaussian().cloned())
                        .collect();
                    files::gaussian_forecast_csv(&list)?
                }
                ModelKind::Lstm => {
                    let list: Vec<PointForecast> = of_kind
                        .iter()
                        .filter_map(|e| match &e.forecast {
                            ForecastRecord::Point(p) => Some(p.clone()),
                            ForecastRecord::Gaussian(_) => None,
                        })
                        .collect();
                    files::point_forecast_csv(&list)?
                }
            };
            files::atomic_write(dir.join(format!("forecasts_{kind}.csv")), forecast_csv.as_bytes())?;

            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["beam_id", "origin_time", "step", "allocated", "actual", "verdict"])
                .map_err(|e| Error::CsvParse(e.to_string()))?;
            for entry in &of_kind {
                for (step, (alloc, actual)) in entry
                    .plan
                    .amounts
                    .iter()
                    .zip(&entry.actual)
                    .enumerate()
                {
                    w.write_record(&[
                        entry.beam_id.clone(),
                        entry.origin_time.to_string(),
                        step.to_string(),
                        alloc.to_string(),
                        actual.to_string(),
                        classify_step(*alloc, *actual).as_str().to_string(),
                    ])
                    .map_err(|e| Error::CsvParse(e.to_string()))?;
                }
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::CsvParse(e.to_string()))?;
            files::atomic_write(dir.join(format!("allocations_{kind}.csv")), &bytes)?;
        }

        files::atomic_write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&self.report)?.as_bytes(),
        )?;

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "beam_id", "mae", "rmse"])
            .map_err(|e| Error::CsvParse(e.to_string()))?;
        for row in &self.per_beam {
            w.write_record(&[
                row.model.clone(),
                row.beam_id.clone(),
                row.mae.to_string(),
                row.rmse.to_string(),
            ])
            .map_err(|e| Error::CsvParse(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::CsvParse(e.to_string()))?;
        files::atomic_write(dir.join("errors.csv"), &bytes)?;

        files::atomic_write(
            dir.join("timings.json"),
            serde_json::to_string_pretty(&self.timings)?.as_bytes(),
        )?;
        Ok(())
    }
}
