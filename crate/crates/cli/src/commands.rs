//! Subcommand implementations.

use std::process::ExitCode;

use serde::Deserialize;

use crate::{
    decision, files, lstm, metrics, sff, sim, timeseries, verify, EvaluateArgs, ForecastArgs,
    GenDataArgs, GradcheckArgs, ModelArg, SimulateArgs, TrainArgs,
};
use crate::{Error, Path, Result};

pub fn gen_data(args: &GenDataArgs) -> Result<ExitCode> {
    let spec: timeseries::SyntheticSpec = read_json(&args.spec)?;
    let dataset = timeseries::generate_synthetic(&spec, args.seed)?;
    let mut buf = Vec::new();
    timeseries::write_csv(&dataset, &mut buf)?;
    files::atomic_write(&args.out, &buf)?;
    println!(
        "wrote {} beams x {} hours to {}",
        dataset.n_beams(),
        dataset.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Training config JSON. The seed is mandatory; everything else falls back
/// to the per-model defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    seed: u64,
    #[serde(default = "default_context_len")]
    context_len: usize,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_stride")]
    stride: usize,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    /// SFF only.
    hidden_dims: Option<Vec<usize>>,
    /// LSTM only.
    hidden_dim: Option<usize>,
}

fn default_context_len() -> usize {
    168
}

fn default_horizon() -> usize {
    24
}

fn default_stride() -> usize {
    1
}

pub fn train(args: &TrainArgs) -> Result<ExitCode> {
    let cfg: TrainConfig = read_json(&args.config)?;
    let dataset = timeseries::load_csv(&args.data)?;
    let windows = timeseries::make_windows(&dataset, cfg.context_len, cfg.horizon, cfg.stride)?;

    let checkpoint = match args.model {
        ModelArg::Sff => {
            if cfg.hidden_dim.is_some() {
                return Err(Error::InvalidConfig(
                    "`hidden_dim` is an LSTM option; SFF takes `hidden_dims`".into(),
                ));
            }
            let mut hyper = sff::SffHyper::new(cfg.seed);
            if let Some(v) = cfg.epochs {
                hyper.epochs = v;
            }
            if let Some(v) = cfg.batch_size {
                hyper.batch_size = v;
            }
            if let Some(v) = cfg.lr {
                hyper.lr = v;
            }
            if let Some(v) = cfg.hidden_dims.clone() {
                hyper.hidden_dims = v;
            }
            let model = sff::train_sff(&windows, &hyper, cfg.horizon)?;
            print_training_tail("sff", &model.training_log);
            files::ModelCheckpoint::Sff(model)
        }
        ModelArg::Lstm => {
            if cfg.hidden_dims.is_some() {
                return Err(Error::InvalidConfig(
                    "`hidden_dims` is an SFF option; LSTM takes `hidden_dim`".into(),
                ));
            }
            let mut hyper = lstm::LstmHyper::new(cfg.seed);
            if let Some(v) = cfg.epochs {
                hyper.epochs = v;
            }
            if let Some(v) = cfg.batch_size {
                hyper.batch_size = v;
            }
            if let Some(v) = cfg.lr {
                hyper.lr = v;
            }
            if let Some(v) = cfg.hidden_dim {
                hyper.hidden_dim = v;
            }
            let model = lstm::train_lstm(&windows, &hyper, cfg.horizon)?;
            print_training_tail("lstm", &model.training_log);
            files::ModelCheckpoint::Lstm(model)
        }
    };
    files::save_checkpoint(&args.out, &checkpoint)?;
    println!("saved checkpoint to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_training_tail(model: &str, log: &[f64]) {
    match (log.first(), log.last()) {
        (Some(first), Some(last)) => {
            println!("{model}: {} epochs, loss {first:.6} -> {last:.6}", log.len());
        }
        _ => println!("{model}: 0 epochs (checkpoint holds initial parameters)"),
    }
}

pub fn forecast(args: &ForecastArgs) -> Result<ExitCode> {
    let checkpoint = files::load_checkpoint(&args.model)?;
    let dataset = timeseries::load_csv(&args.data)?;
    let context_len = checkpoint.context_len() as i64;

    let csv = match &checkpoint {
        files::ModelCheckpoint::Sff(model) => {
            let mut list = Vec::with_capacity(dataset.n_beams());
            for series in &dataset.series {
                let context = series.slice_hours(args.origin - context_len, args.origin)?;
                list.push(model.predict(&series.beam_id, args.origin, context)?);
            }
            files::gaussian_forecast_csv(&list)?
        }
        files::ModelCheckpoint::Lstm(model) => {
            let mut list = Vec::with_capacity(dataset.n_beams());
            for series in &dataset.series {
                let context = series.slice_hours(args.origin - context_len, args.origin)?;
                list.push(model.predict(&series.beam_id, args.origin, context)?);
            }
            files::point_forecast_csv(&list)?
        }
    };
    files::atomic_write(&args.out, csv.as_bytes())?;
    println!(
        "wrote forecasts for {} beams at origin {} to {}",
        dataset.n_beams(),
        args.origin,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_policy(raw: &str) -> Result<decision::AllocationPolicy> {
    let policy = match raw.split_once(':') {
        None if raw == "point" => decision::AllocationPolicy::Point,
        Some(("quantile", p)) => decision::AllocationPolicy::Quantile {
            p: p.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad quantile `{p}`")))?,
        },
        Some(("headroom", f)) => decision::AllocationPolicy::Headroom {
            factor: f
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad headroom `{f}`")))?,
        },
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown policy `{raw}`; use point, quantile:P, or headroom:F"
            )))
        }
    };
    policy.validate()?;
    Ok(policy)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let policy = parse_policy(&args.policy)?;
    let forecasts = files::read_forecast_csv(&args.forecast)?;
    let dataset = timeseries::load_csv(&args.data)?;

    let mut records = Vec::new();
    match &forecasts {
        files::ForecastFile::Gaussian(list) => {
            for f in list {
                let actual = actual_for(&dataset, &f.beam_id, f.origin_time, f.horizon())?;
                let plan =
                    decision::decide_allocation(decision::ForecastSource::Gaussian(f), policy)?;
                let outcome = decision::account_provisioning(&plan, &actual)?;
                records.push(metrics::EvalRecord {
                    model: "sff".into(),
                    beam_id: f.beam_id.clone(),
                    point: f.mu.clone(),
                    actual,
                    gaussian: Some(f.clone()),
                    outcome,
                });
            }
        }
        files::ForecastFile::Point(list) => {
            for f in list {
                let actual = actual_for(&dataset, &f.beam_id, f.origin_time, f.horizon())?;
                let plan =
                    decision::decide_allocation(decision::ForecastSource::Point(f), policy)?;
                let outcome = decision::account_provisioning(&plan, &actual)?;
                records.push(metrics::EvalRecord {
                    model: "lstm".into(),
                    beam_id: f.beam_id.clone(),
                    point: f.values.clone(),
                    actual,
                    gaussian: None,
                    outcome,
                });
            }
        }
    }
    let report = metrics::summarize(&records)?;
    files::atomic_write(&args.out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!("wrote audit of {} forecasts to {}", records.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn actual_for(
    dataset: &timeseries::Dataset,
    beam_id: &str,
    origin: i64,
    horizon: usize,
) -> Result<Vec<f64>> {
    let series = dataset.beam(beam_id).ok_or_else(|| {
        Error::InvalidConfig(format!("beam {beam_id} not present in the data file"))
    })?;
    Ok(series.slice_hours(origin, origin + horizon as i64)?.to_vec())
}

pub fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let cfg: sim::SimConfig = read_json(&args.config)?;
    let log = sim::run(&cfg)?;
    log.write_dir(&args.out)?;
    println!(
        "simulated {} evaluations ({} files in {})",
        log.entries.len(),
        std::fs::read_dir(&args.out)?.count(),
        args.out.display()
    );
    for (model, report) in &log.report.models {
        let split = &log.report.provisioning_split[model];
        println!(
            "{model}: mae {:.4} rmse {:.4} over {:.2}% under {:.2}%",
            report.mae,
            report.rmse,
            100.0 * split.over,
            100.0 * split.under
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    let results = verify::run_gradcheck_suite(args.seed);
    let mut all_ok = true;
    for (name, err) in &results {
        let ok = *err <= verify::MAX_REL_ERROR;
        all_ok &= ok;
        println!(
            "{name}: max relative error {err:.3e} ({})",
            if ok { "ok" } else { "FAIL" }
        );
    }
    if all_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "gradient check exceeded {:e}; see failures above",
            verify::MAX_REL_ERROR
        );
        Ok(ExitCode::from(2))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}
