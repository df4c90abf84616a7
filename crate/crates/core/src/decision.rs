//! Decision engine: converts forecasts into allocation plans and audits
//! realized over/under-provisioning against actual traffic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::PointForecast;
use crate::sff::{quantile_closed_form, GaussianForecast, SamplePaths};

/// Per-step empirical quantiles across an ascending probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    pub probabilities: Vec<f64>,
    /// `probabilities.len() x H`; row p holds the quantile curve for p.
    pub values: Vec<Vec<f64>>,
}

impl QuantileGrid {
    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Row for probability `p` (exact match within 1e-9).
    pub fn row(&self, p: f64) -> Option<&[f64]> {
        self.probabilities
            .iter()
            .position(|q| (q - p).abs() < 1e-9)
            .map(|i| self.values[i].as_slice())
    }
}

/// Percentile grid 0.01..=0.99, the default handed to the decision engine.
pub fn percentile_grid() -> Vec<f64> {
    (1..=99).map(|k| f64::from(k) / 100.0).collect()
}

/// How the decision engine turns a forecast into allocation amounts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AllocationPolicy {
    /// Allocate the point forecast (mean for distributional models).
    Point,
    /// Allocate the p-quantile; requires a distributional forecast.
    Quantile { p: f64 },
    /// Allocate point * (1 + factor).
    Headroom { factor: f64 },
}

impl AllocationPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            AllocationPolicy::Point => Ok(()),
            AllocationPolicy::Quantile { p } => {
                if *p > 0.0 && *p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidProbability(*p))
                }
            }
            AllocationPolicy::Headroom { factor } => {
                if *factor >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "headroom factor must be >= 0, got {factor}"
                    )))
                }
            }
        }
    }
}

/// Forecast handed to [`decide_allocation`]; quantile policies need one of
/// the distributional variants.
#[derive(Debug, Clone, Copy)]
pub enum ForecastSource<'a> {
    Gaussian(&'a GaussianForecast),
    Point(&'a PointForecast),
    Quantiles(&'a QuantileGrid),
}

/// Resource amounts chosen for each horizon step, clamped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub beam_id: String,
    pub origin_time: i64,
    pub amounts: Vec<f64>,
}

/// Outcome of auditing one or more plans against realized traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisioningOutcome {
    pub over_count: usize,
    pub under_count: usize,
    pub exact_count: usize,
    /// over / (over + under); 0 when every step was exact.
    pub over_rate: f64,
    /// Complement of `over_rate`, so the two always sum to 1 exactly
    /// (0 when every step was exact).
    pub under_rate: f64,
    /// Total allocated excess, sum of (alloc - actual)+.
    pub over_volume: f64,
    /// Total shortfall, sum of (actual - alloc)+.
    pub under_volume: f64,
}

impl ProvisioningOutcome {
    pub fn total_steps(&self) -> usize {
        self.over_count + self.under_count + self.exact_count
    }

    /// Pools several audits into one outcome.
    pub fn merge(outcomes: &[ProvisioningOutcome]) -> ProvisioningOutcome {
        let mut over_count = 0;
        let mut under_count = 0;
        let mut exact_count = 0;
        let mut over_volume = 0.0;
        let mut under_volume = 0.0;
        for o in outcomes {
            over_count += o.over_count;
            under_count += o.under_count;
            exact_count += o.exact_count;
            over_volume += o.over_volume;
            under_volume += o.under_volume;
        }
        let (over_rate, under_rate) = rates(over_count, under_count);
        ProvisioningOutcome {
            over_count,
            under_count,
            exact_count,
            over_rate,
            under_rate,
            over_volume,
            under_volume,
        }
    }
}

fn rates(over: usize, under: usize) -> (f64, f64) {
    let decided = over + under;
    if decided == 0 {
        (0.0, 0.0)
    } else {
        let over_rate = over as f64 / decided as f64;
        (over_rate, 1.0 - over_rate)
    }
}

/// Empirical quantiles per horizon step: the smallest sample value whose
/// ECDF reaches `p` (left-continuous inverse, no interpolation).
pub fn ecdf_quantiles(paths: &SamplePaths, probabilities: &[f64]) -> Result<QuantileGrid> {
    if paths.n() == 0 {
        return Err(Error::InvalidConfig("no sample paths".into()));
    }
    for pair in probabilities.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidConfig(
                "probabilities must be strictly ascending".into(),
            ));
        }
    }
    for p in probabilities {
        if !(*p > 0.0 && *p < 1.0) {
            return Err(Error::InvalidProbability(*p));
        }
    }

    let n = paths.n();
    let horizon = paths.horizon();
    let mut values = vec![vec![0.0; horizon]; probabilities.len()];
    let mut column = vec![0.0; n];
    for t in 0..horizon {
        for (i, path) in paths.paths.iter().enumerate() {
            column[i] = path[t];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        for (pi, p) in probabilities.iter().enumerate() {
            // Smallest index k with (k+1)/n >= p.
            let k = ((p * n as f64).ceil() as usize).max(1) - 1;
            values[pi][t] = column[k.min(n - 1)];
        }
    }
    Ok(QuantileGrid {
        probabilities: probabilities.to_vec(),
        values,
    })
}

/// Applies the policy to a forecast, producing non-negative amounts.
pub fn decide_allocation(
    forecast: ForecastSource<'_>,
    policy: AllocationPolicy,
) -> Result<AllocationPlan> {
    policy.validate()?;
    let (beam_id, origin_time) = match forecast {
        ForecastSource::Gaussian(f) => (f.beam_id.clone(), f.origin_time),
        ForecastSource::Point(f) => (f.beam_id.clone(), f.origin_time),
        // Grids carry no identity; the caller owns labeling in that case.
        ForecastSource::Quantiles(_) => (String::new(), 0),
    };

    let amounts = match (forecast, policy) {
        (ForecastSource::Point(f), AllocationPolicy::Point) => f.values.clone(),
        (ForecastSource::Point(f), AllocationPolicy::Headroom { factor }) => {
            f.values.iter().map(|v| v * (1.0 + factor)).collect()
        }
        (ForecastSource::Gaussian(f), AllocationPolicy::Point) => f.mu.clone(),
        (ForecastSource::Gaussian(f), AllocationPolicy::Headroom { factor }) => {
            f.mu.iter().map(|v| v * (1.0 + factor)).collect()
        }
        (ForecastSource::Gaussian(f), AllocationPolicy::Quantile { p }) => {
            quantile_closed_form(f, p)?
        }
        (ForecastSource::Quantiles(grid), AllocationPolicy::Quantile { p }) => grid
            .row(p)
            .ok_or_else(|| {
                Error::IncompatiblePolicy(format!("quantile {p} not present in the grid"))
            })?
            .to_vec(),
        (ForecastSource::Quantiles(_), _) => {
            return Err(Error::IncompatiblePolicy(
                "quantile grids only support quantile policies".into(),
            ));
        }
        (ForecastSource::Point(_), AllocationPolicy::Quantile { .. }) => {
            return Err(Error::IncompatiblePolicy(
                "quantile policy requires a distributional forecast".into(),
            ));
        }
    };

    Ok(AllocationPlan {
        beam_id,
        origin_time,
        amounts: amounts.iter().map(|v| v.max(0.0)).collect(),
    })
}

/// Tie tolerance for classifying a step as exactly provisioned.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Per-step classification of allocated vs realized traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Over,
    Under,
    Exact,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Over => "over",
            Verdict::Under => "under",
            Verdict::Exact => "exact",
        }
    }
}

/// Sign of (alloc - actual) with the [`EXACT_TOLERANCE`] tie band.
pub fn classify_step(alloc: f64, actual: f64) -> Verdict {
    let diff = alloc - actual;
    if diff.abs() <= EXACT_TOLERANCE {
        Verdict::Exact
    } else if diff > 0.0 {
        Verdict::Over
    } else {
        Verdict::Under
    }
}

/// Classifies each step of a plan against realized traffic and aggregates
/// counts, rates, and volumes.
pub fn account_provisioning(plan: &AllocationPlan, actual: &[f64]) -> Result<ProvisioningOutcome> {
    if plan.amounts.len() != actual.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan has {} steps, actual has {}",
            plan.amounts.len(),
            actual.len()
        )));
    }
    let mut over_count = 0;
    let mut under_count = 0;
    let mut exact_count = 0;
    let mut over_volume = 0.0;
    let mut under_volume = 0.0;
    for (alloc, value) in plan.amounts.iter().zip(actual) {
        match classify_step(*alloc, *value) {
            Verdict::Exact => exact_count += 1,
            Verdict::Over => {
                over_count += 1;
                over_volume += alloc - value;
            }
            Verdict::Under => {
                under_count += 1;
                under_volume += value - alloc;
            }
        }
    }
    let (over_rate, under_rate) = rates(over_count, under_count);
    Ok(ProvisioningOutcome {
        over_count,
        under_count,
        exact_count,
        over_rate,
        under_rate,
        over_volume,
        under_volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(mu: f64, sigma: f64, h: usize) -> GaussianForecast {
        GaussianForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            mu: vec![mu; h],
            sigma: vec![sigma; h],
        }
    }

    #[test]
    fn ecdf_quantiles_small_sample() {
        // Samples per step: {1, 2, 3, 4}.
        let paths = SamplePaths {
            paths: vec![vec![3.0], vec![1.0], vec![4.0], vec![2.0]],
            seed: 0,
        };
        let grid = ecdf_quantiles(&paths, &[0.25, 0.5, 0.99]).unwrap();
        assert_eq!(grid.values[0][0], 1.0);
        assert_eq!(grid.values[1][0], 2.0);
        assert_eq!(grid.values[2][0], 4.0);
    }

    #[test]
    fn ecdf_single_sample_is_constant() {
        let paths = SamplePaths {
            paths: vec![vec![7.5, 2.0]],
            seed: 0,
        };
        let grid = ecdf_quantiles(&paths, &[0.01, 0.5, 0.99]).unwrap();
        for row in &grid.values {
            assert_eq!(row, &vec![7.5, 2.0]);
        }
    }

    #[test]
    fn ecdf_matches_closed_form_on_gaussian_samples() {
        let f = gaussian(0.0, 1.0, 2);
        let paths = crate::sff::sample_paths(&f, 10_000, 5);
        let grid = ecdf_quantiles(&paths, &[0.05, 0.5, 0.95]).unwrap();
        for (pi, p) in [0.05, 0.5, 0.95].iter().enumerate() {
            let closed = quantile_closed_form(&f, *p).unwrap();
            for (t, (got, want)) in grid.values[pi].iter().zip(&closed).enumerate() {
                let err = (got - want).abs();
                assert!(err < 0.05, "p={p} step={t} err={err}");
            }
        }
    }

    #[test]
    fn ecdf_rejects_bad_probabilities() {
        let paths = SamplePaths {
            paths: vec![vec![1.0]],
            seed: 0,
        };
        assert!(ecdf_quantiles(&paths, &[0.5, 0.5]).is_err());
        assert!(ecdf_quantiles(&paths, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn point_policy_passes_values_through() {
        let f = PointForecast {
            beam_id: "b0".into(),
            origin_time: 12,
            values: vec![10.0, 20.0],
        };
        let plan = decide_allocation(ForecastSource::Point(&f), AllocationPolicy::Point).unwrap();
        assert_eq!(plan.amounts, vec![10.0, 20.0]);
        assert_eq!(plan.beam_id, "b0");
        assert_eq!(plan.origin_time, 12);
    }

    #[test]
    fn quantile_policy_on_gaussian_uses_closed_form() {
        let f = gaussian(100.0, 10.0, 3);
        let plan = decide_allocation(
            ForecastSource::Gaussian(&f),
            AllocationPolicy::Quantile { p: 0.9 },
        )
        .unwrap();
        for amount in &plan.amounts {
            assert!((amount - 112.815_52).abs() < 1e-4, "amount {amount}");
        }
    }

    #[test]
    fn negative_point_forecast_clamped_to_zero() {
        let f = PointForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            values: vec![-5.0, 3.0],
        };
        let plan = decide_allocation(ForecastSource::Point(&f), AllocationPolicy::Point).unwrap();
        assert_eq!(plan.amounts, vec![0.0, 3.0]);
    }

    #[test]
    fn headroom_scales_point() {
        let f = PointForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            values: vec![10.0],
        };
        let plan = decide_allocation(
            ForecastSource::Point(&f),
            AllocationPolicy::Headroom { factor: 0.2 },
        )
        .unwrap();
        assert!((plan.amounts[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_policy_needs_distribution() {
        let f = PointForecast {
            beam_id: "b0".into(),
            origin_time: 0,
            values: vec![1.0],
        };
        let err = decide_allocation(
            ForecastSource::Point(&f),
            AllocationPolicy::Quantile { p: 0.9 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::IncompatiblePolicy(_)), "{err}");
    }

    #[test]
    fn grid_lookup_requires_listed_probability() {
        let grid = QuantileGrid {
            probabilities: vec![0.25, 0.75],
            values: vec![vec![1.0], vec![2.0]],
        };
        let ok = decide_allocation(
            ForecastSource::Quantiles(&grid),
            AllocationPolicy::Quantile { p: 0.75 },
        )
        .unwrap();
        assert_eq!(ok.amounts, vec![2.0]);
        assert!(decide_allocation(
            ForecastSource::Quantiles(&grid),
            AllocationPolicy::Quantile { p: 0.6 },
        )
        .is_err());
    }

    #[test]
    fn accounting_classifies_each_step() {
        let plan = AllocationPlan {
            beam_id: "b0".into(),
            origin_time: 0,
            amounts: vec![10.0, 20.0, 30.0],
        };
        let outcome = account_provisioning(&plan, &[12.0, 18.0, 30.0]).unwrap();
        assert_eq!(
            (outcome.over_count, outcome.under_count, outcome.exact_count),
            (1, 1, 1)
        );
        assert_eq!(outcome.over_rate, 0.5);
        assert_eq!(outcome.under_rate, 0.5);
        assert!((outcome.over_volume - 2.0).abs() < 1e-12);
        assert!((outcome.under_volume - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_allocation_is_all_exact() {
        let plan = AllocationPlan {
            beam_id: "b0".into(),
            origin_time: 0,
            amounts: vec![5.0, 6.0],
        };
        let outcome = account_provisioning(&plan, &[5.0, 6.0]).unwrap();
        assert_eq!(outcome.exact_count, 2);
        assert_eq!(outcome.over_rate, 0.0);
        assert_eq!(outcome.under_rate, 0.0);
        assert_eq!(outcome.over_volume, 0.0);
        assert_eq!(outcome.under_volume, 0.0);
    }

    #[test]
    fn rates_sum_to_one_without_ties() {
        let plan = AllocationPlan {
            beam_id: "b0".into(),
            origin_time: 0,
            amounts: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
        };
        let actual = [0.5, 2.5, 2.0, 4.5, 4.0, 6.5, 8.0];
        let outcome = account_provisioning(&plan, &actual).unwrap();
        assert_eq!(outcome.exact_count, 0);
        assert_eq!(outcome.over_rate + outcome.under_rate, 1.0);
    }

    #[test]
    fn merge_pools_counts_and_volumes() {
        let a = ProvisioningOutcome {
            over_count: 2,
            under_count: 1,
            exact_count: 0,
            over_rate: 2.0 / 3.0,
            under_rate: 1.0 / 3.0,
            over_volume: 4.0,
            under_volume: 1.0,
        };
        let b = ProvisioningOutcome {
            over_count: 0,
            under_count: 3,
            exact_count: 1,
            over_rate: 0.0,
            under_rate: 1.0,
            over_volume: 0.0,
            under_volume: 6.0,
        };
        let merged = ProvisioningOutcome::merge(&[a, b]);
        assert_eq!(merged.over_count, 2);
        assert_eq!(merged.under_count, 4);
        assert_eq!(merged.exact_count, 1);
        assert_eq!(merged.total_steps(), 7);
        assert!((merged.over_rate - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(merged.over_rate + merged.under_rate, 1.0);
        assert_eq!(merged.over_volume, 4.0);
        assert_eq!(merged.under_volume, 7.0);
    }
}
