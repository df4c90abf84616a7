//! Forecast-quality metrics (MAE, RMSE, interval coverage) and report
//! assembly across a simulation log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decision::ProvisioningOutcome;
use crate::error::{Error, Result};
use crate::sff::{quantile_closed_form, GaussianForecast};

/// Mean absolute error.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok(pred
        .iter()
        .zip(actual)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok((pred
        .iter()
        .zip(actual)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt())
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "metric over {} vs {} entries",
            pred.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Fraction of actuals inside the central interval of the given nominal
/// level, bounds inclusive: `[q((1-level)/2), q((1+level)/2)]` per step.
pub fn interval_coverage(f: &GaussianForecast, actual: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability(level));
    }
    if actual.len() != f.horizon() {
        return Err(Error::ShapeMismatch(format!(
            "coverage over {} actuals vs horizon {}",
            actual.len(),
            f.horizon()
        )));
    }
    let lower = quantile_closed_form(f, (1.0 - level) / 2.0)?;
    let upper = quantile_closed_form(f, (1.0 + level) / 2.0)?;
    let inside = actual
        .iter()
        .zip(lower.iter().zip(&upper))
        .filter(|(y, (lo, hi))| **y >= **lo && **y <= **hi)
        .count();
    Ok(inside as f64 / actual.len() as f64)
}

/// One pooled quality record per model; coverage fields only exist for
/// probabilistic models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_90: Option<f64>,
}

/// Everything `summarize` needs from one (day, beam, model) evaluation.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub model: String,
    pub beam_id: String,
    /// Point forecast on the horizon (mu for Gaussian models).
    pub point: Vec<f64>,
    pub actual: Vec<f64>,
    /// Present for probabilistic models; drives interval coverage.
    pub gaussian: Option<GaussianForecast>,
    pub outcome: ProvisioningOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub mae: f64,
    pub rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_90: Option<f64>,
    pub points: usize,
    pub provisioning: ProvisioningOutcome,
}

/// Over/under rate pair in the shape used for side-by-side bar charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRates {
    pub over: f64,
    pub under: f64,
}

/// Aggregate report across all evaluated origins and beams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub models: BTreeMap<String, ModelReport>,
    /// `{model: {over, under}}` count-rate pairs.
    pub provisioning_split: BTreeMap<String, SplitRates>,
}

/// Per-beam error rows backing a bar-chart style comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamErrors {
    pub model: String,
    pub beam_id: String,
    pub mae: f64,
    pub rmse: f64,
}

/// Pools all horizon points per model: MAE/RMSE on point forecasts,
/// central-interval coverage at 50%/90% where distributions exist, and
/// merged provisioning rates.
pub fn summarize(records: &[EvalRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut by_model: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(&r.model).or_default().push(r);
    }

    let mut models = BTreeMap::new();
    let mut provisioning_split = BTreeMap::new();
    for (model, group) in by_model {
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        let mut points = 0usize;
        let mut inside_50 = 0usize;
        let mut inside_90 = 0usize;
        let mut gaussian_points = 0usize;
        let mut outcomes = Vec::with_capacity(group.len());

        for r in &group {
            check_lengths(&r.point, &r.actual)?;
            for (p, y) in r.point.iter().zip(&r.actual) {
                abs_sum += (p - y).abs();
                sq_sum += (p - y) * (p - y);
            }
            points += r.point.len();
            if let Some(g) = &r.gaussian {
                let c50 = interval_coverage(g, &r.actual, 0.5)?;
                let c90 = interval_coverage(g, &r.actual, 0.9)?;
                let h = r.actual.len() as f64;
                inside_50 += (c50 * h).round() as usize;
                inside_90 += (c90 * h).round() as usize;
                gaussian_points += r.actual.len();
            }
            outcomes.push(r.outcome.clone());
        }

        let probabilistic = gaussian_points == points && points > 0;
        let provisioning = ProvisioningOutcome::merge(&outcomes);
        provisioning_split.insert(
            model.to_string(),
            SplitRates {
                over: provisioning.over_rate,
                under: provisioning.under_rate,
            },
        );
        models.insert(
            model.to_string(),
            ModelReport {
                mae: abs_sum / points as f64,
                rmse: (sq_sum / points as f64).sqrt(),
                coverage_50: probabilistic.then(|| inside_50 as f64 / gaussian_points as f64),
                coverage_90: probabilistic.then(|| inside_90 as f64 / gaussian_points as f64),
                points,
                provisioning,
            },
        );
    }
    Ok(Report {
        models,
        provisioning_split,
    })
}

/// Per-(model, beam) MAE/RMSE over all pooled horizon points.
pub fn per_beam_errors(records: &[EvalRecord]) -> Result<Vec<BeamErrors>> {
    if records.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut pooled: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let entry = pooled
            .entry((r.model.clone(), r.beam_id.clone()))
            .or_default();
        entry.0.extend_from_slice(&r.point);
        entry.1.extend_from_slice(&r.actual);
    }
    pooled
        .into_iter()
        .map(|((model, beam_id), (pred, actual))| {
            Ok(BeamErrors {
                model,
                beam_id,
                mae: mae(&pred, &actual)?,
                rmse: rmse(&pred, &actual)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{account_provisioning, AllocationPlan};

    #[test]
    fn mae_rmse_closed_forms() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5);
        assert_eq!(rmse(&[1.0], &[1.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mae_scale_equivariant() {
        let a = [1.0, -2.0, 4.0];
        let b = [0.5, 1.0, -3.0];
        let k = -2.5;
        let ka: Vec<f64> = a.iter().map(|x| k * x).collect();
        let kb: Vec<f64> = b.iter().map(|x| k * x).collect();
        let lhs = mae(&ka, &kb).unwrap();
        let rhs = k.abs() * mae(&a, &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rmse_dominates_mae() {
        let pred = [1.0, 5.0, -2.0, 0.0];
        let actual = [0.0, 2.0, 1.0, 4.0];
        assert!(rmse(&pred, &actual).unwrap() >= mae(&pred, &actual).unwrap());
    }

    fn unit_gaussian(h: usize) -> GaussianForecast {
        GaussianForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            mu: vec![0.0; h],
            sigma: vec![1.0; h],
        }
    }

    #[test]
    fn coverage_full_when_actual_is_mu() {
        let f = unit_gaussian(4);
        for level in [0.1, 0.5, 0.9] {
            assert_eq!(interval_coverage(&f, &[0.0; 4], level).unwrap(), 1.0);
        }
    }

    #[test]
    fn coverage_half_for_one_far_point() {
        // level 0.5 bounds are +-0.674; 10 is far outside.
        let f = unit_gaussian(2);
        let cov = interval_coverage(&f, &[0.0, 10.0], 0.5).unwrap();
        assert_eq!(cov, 0.5);
    }

    #[test]
    fn coverage_monotone_in_level() {
        let f = unit_gaussian(5);
        let actual = [0.1, -0.9, 2.0, 0.5, -1.4];
        let c50 = interval_coverage(&f, &actual, 0.5).unwrap();
        let c90 = interval_coverage(&f, &actual, 0.9).unwrap();
        assert!(c90 >= c50);
    }

    fn record(model: &str, beam: &str, point: Vec<f64>, actual: Vec<f64>) -> EvalRecord {
        let plan = AllocationPlan {
            beam_id: beam.into(),
            origin_time: 0,
            amounts: point.clone(),
        };
        let outcome = account_provisioning(&plan, &actual).unwrap();
        EvalRecord {
            model: model.into(),
            beam_id: beam.into(),
            point,
            actual,
            gaussian: None,
            outcome,
        }
    }

    #[test]
    fn perfect_forecasts_summarize_to_zero_error() {
        let mut r = record("sff", "b0", vec![5.0, 6.0], vec![5.0, 6.0]);
        r.gaussian = Some(GaussianForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            mu: vec![5.0, 6.0],
            sigma: vec![1.0, 1.0],
        });
        let report = summarize(&[r]).unwrap();
        let m = &report.models["sff"];
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.coverage_50, Some(1.0));
        assert_eq!(m.coverage_90, Some(1.0));
    }

    #[test]
    fn deterministic_models_have_no_coverage() {
        let report = summarize(&[record("lstm", "b0", vec![1.0], vec![2.0])]).unwrap();
        let m = &report.models["lstm"];
        assert_eq!(m.coverage_50, None);
        assert_eq!(m.coverage_90, None);
        let json = serde_json::to_string(m).unwrap();
        assert!(!json.contains("coverage"), "{json}");
    }

    #[test]
    fn pooled_mae_matches_brute_force() {
        let records = vec![
            record("lstm", "b0", vec![1.0, 2.0], vec![1.5, 1.0]),
            record("lstm", "b1", vec![4.0, 0.0], vec![2.0, 1.0]),
        ];
        let report = summarize(&records).unwrap();
        // Brute force: re-walk every point.
        let mut errs = Vec::new();
        for r in &records {
            for (p, y) in r.point.iter().zip(&r.actual) {
                errs.push((p - y).abs());
            }
        }
        let brute = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((report.models["lstm"].mae - brute).abs() < 1e-15);
    }

    #[test]
    fn split_mirrors_merged_rates() {
        let records = vec![
            record("sff", "b0", vec![3.0, 1.0], vec![2.0, 2.0]),
            record("sff", "b1", vec![5.0, 1.0], vec![2.0, 2.0]),
        ];
        let report = summarize(&records).unwrap();
        let split = &report.provisioning_split["sff"];
        let merged = &report.models["sff"].provisioning;
        assert_eq!(split.over, merged.over_rate);
        assert_eq!(split.under, merged.under_rate);
        assert_eq!(split.over + split.under, 1.0);
    }

    #[test]
    fn empty_log_rejected() {
        assert!(matches!(summarize(&[]).unwrap_err(), Error::EmptyLog));
    }

    #[test]
    fn per_beam_errors_pool_by_beam() {
        let records = vec![
            record("lstm", "b0", vec![1.0], vec![2.0]),
            record("lstm", "b0", vec![3.0], vec![1.0]),
            record("lstm", "b1", vec![0.0], vec![0.0]),
        ];
        let rows = per_beam_errors(&records).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].beam_id, "b0");
        assert!((rows[0].mae - 1.5).abs() < 1e-15);
        assert_eq!(rows[1].mae, 0.0);
    }
}
