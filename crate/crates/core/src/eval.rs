//! Evaluation harness: baseline forecaster, proximity matching, MAE/RMSE.
//!
//! Metrics are computed only on true post-cutoff observations that sit
//! within a fixed tolerance of a forecast grid step, never on interpolated
//! or padded grid values. All models are scored on the identical matched
//! sample pool per run; an event rejected by any forecaster is excluded
//! from every model's pool (paired comparison).

use crate::data::{grid_tau, ConjunctionEvent, GriddedSeries, Normalizer, GRID_LEN, STEPS_PER_DAY};
use crate::data::grid_event;
use crate::diffusion::{Denoiser, NoiseSchedule};
use crate::error::{CoreError, Result};
use crate::inpaint::{forecast, ForecastConfig, Mask};
use std::path::Path;

/// Default proximity tolerance: half a grid step.
pub const DEFAULT_TOLERANCE_HOURS: f64 = 0.5;

/// Mean absolute error, in the units of the inputs.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_metric_inputs(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Root mean squared error, in the units of the inputs.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_metric_inputs(y, yhat)?;
    let mse = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

fn check_metric_inputs(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(CoreError::data("metric on empty sample set is undefined".to_string()));
    }
    if y.len() != yhat.len() {
        return Err(CoreError::shape(format!(
            "metric inputs of lengths {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

/// Last-value-hold forecast: every unknown grid step receives the raw value
/// of the most recent observation at or before the cutoff.
///
/// Returns a full-length vector in metres; only positions at or after the
/// cutoff index are meaningful.
pub fn baseline_forecast(event: &ConjunctionEvent, cutoff_days: f64) -> Result<Vec<f64>> {
    let held = event.last_before_cutoff(cutoff_days).ok_or_else(|| {
        CoreError::data(format!(
            "event {}: no observation at or before the {cutoff_days}-day cutoff",
            event.event_id()
        ))
    })?;
    Ok(vec![held.sigma_m; GRID_LEN])
}

/// Match post-cutoff observations to forecast grid steps.
///
/// Each observation maps to its nearest grid step; matches farther than the
/// tolerance, or landing on a pre-cutoff (known) step, are dropped. When two
/// observations share a nearest step only the closer one matches (earlier
/// observation wins a distance tie), so matching is one-to-one.
pub fn match_true_samples(
    event: &ConjunctionEvent,
    cutoff_days: f64,
    tolerance_hours: f64,
) -> Vec<(usize, f64)> {
    let cutoff_index = match Mask::from_cutoff_days(cutoff_days) {
        Ok(m) => m.cutoff_index(),
        Err(_) => return Vec::new(),
    };
    let tolerance_days = tolerance_hours / 24.0;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; GRID_LEN]; // (distance, sigma)
    for obs in event.observations().iter().filter(|o| o.tau_days < cutoff_days) {
        let x = STEPS_PER_DAY * (crate::data::GRID_START_DAYS - obs.tau_days);
        let idx = ((x - 0.5).ceil().max(0.0) as usize).min(GRID_LEN - 1);
        if idx < cutoff_index {
            continue;
        }
        let distance = (obs.tau_days - grid_tau(idx)).abs();
        if distance > tolerance_days + 1e-12 {
            continue;
        }
        match best[idx] {
            Some((prev, _)) if prev <= distance => {}
            _ => best[idx] = Some((distance, obs.sigma_m)),
        }
    }
    best.iter()
        .enumerate()
        .filter_map(|(i, slot)| slot.map(|(_, sigma)| (i, sigma)))
        .collect()
}

/// A model's forecast for one event: metres per grid step, with an optional
/// uncertainty band.
#[derive(Clone, Debug)]
pub struct EvalForecast {
    pub values_m: Vec<f64>,
    pub band_m: Option<(Vec<f64>, Vec<f64>)>,
}

/// Anything the harness can score.
pub trait Forecaster: Sync {
    fn name(&self) -> &str;
    fn forecast_event(&self, event: &ConjunctionEvent, cutoff_days: f64) -> Result<EvalForecast>;
}

/// The naive last-value-hold model.
pub struct BaselineForecaster;

impl Forecaster for BaselineForecaster {
    fn name(&self) -> &str {
        "baseline"
    }

    fn forecast_event(&self, event: &ConjunctionEvent, cutoff_days: f64) -> Result<EvalForecast> {
        Ok(EvalForecast { values_m: baseline_forecast(event, cutoff_days)?, band_m: None })
    }
}

/// The diffusion inpainting model wrapped for evaluation.
pub struct DiffusionForecaster<'a, D: Denoiser + Sync + ?Sized> {
    pub denoiser: &'a D,
    pub schedule: &'a NoiseSchedule,
    pub normalizer: &'a Normalizer,
    pub config: ForecastConfig,
}

impl<D: Denoiser + Sync + ?Sized> Forecaster for DiffusionForecaster<'_, D> {
    fn name(&self) -> &str {
        "diffusion"
    }

    fn forecast_event(&self, event: &ConjunctionEvent, cutoff_days: f64) -> Result<EvalForecast> {
        let grid: GriddedSeries = grid_event(event, self.normalizer)?;
        let result = forecast(self.denoiser, self.schedule, &grid, self.normalizer, cutoff_days, &self.config)?;
        Ok(EvalForecast {
            values_m: result.point_estimate,
            band_m: Some((result.band_low, result.band_high)),
        })
    }
}

/// Per-event metric detail.
#[derive(Clone, Debug)]
pub struct EventMetrics {
    pub event_id: String,
    pub mae_m: f64,
    pub rmse_m: f64,
    pub n: usize,
}

/// Pooled metrics for one model at one cutoff.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub model: String,
    pub cutoff_days: f64,
    pub mae_m: f64,
    pub rmse_m: f64,
    /// Matched true samples pooled over all scored events.
    pub n: usize,
    /// Events contributing at least one matched sample.
    pub n_events: usize,
    /// Events dropped because some forecaster rejected them.
    pub excluded_events: usize,
    /// Fraction of matched samples inside the model's band, when it has one.
    pub band_coverage: Option<f64>,
    pub per_event: Vec<EventMetrics>,
}

/// Score every forecaster on the identical matched-sample pool.
pub fn evaluate(
    forecasters: &[&dyn Forecaster],
    events: &[ConjunctionEvent],
    cutoff_days: f64,
    tolerance_hours: f64,
) -> Result<Vec<MetricsReport>> {
    struct ScoredEvent<'e> {
        event: &'e ConjunctionEvent,
        matches: Vec<(usize, f64)>,
        forecasts: Vec<EvalForecast>,
    }

    let mut scored: Vec<ScoredEvent> = Vec::new();
    let mut excluded = 0usize;
    for event in events {
        let matches = match_true_samples(event, cutoff_days, tolerance_hours);
        let forecasts: Result<Vec<EvalForecast>> = forecasters
            .iter()
            .map(|f| f.forecast_event(event, cutoff_days))
            .collect();
        match forecasts {
            Ok(forecasts) => scored.push(ScoredEvent { event, matches, forecasts }),
            Err(_) => excluded += 1,
        }
    }

    let mut reports = Vec::with_capacity(forecasters.len());
    for (fi, forecaster) in forecasters.iter().enumerate() {
        let mut pool_y = Vec::new();
        let mut pool_yhat = Vec::new();
        let mut covered = 0usize;
        let mut band_total = 0usize;
        let mut per_event = Vec::new();
        for s in &scored {
            if s.matches.is_empty() {
                continue;
            }
            let fc = &s.forecasts[fi];
            let y: Vec<f64> = s.matches.iter().map(|&(_, sigma)| sigma).collect();
            let yhat: Vec<f64> = s.matches.iter().map(|&(i, _)| fc.values_m[i]).collect();
            if let Some((lo, hi)) = &fc.band_m {
                for &(i, sigma) in &s.matches {
                    band_total += 1;
                    if lo[i] <= sigma && sigma <= hi[i] {
                        covered += 1;
                    }
                }
            }
            per_event.push(EventMetrics {
                event_id: s.event.event_id().to_string(),
                mae_m: mae(&y, &yhat)?,
                rmse_m: rmse(&y, &yhat)?,
                n: y.len(),
            });
            pool_y.extend(y);
            pool_yhat.extend(yhat);
        }
        reports.push(MetricsReport {
            model: forecaster.name().to_string(),
            cutoff_days,
            mae_m: mae(&pool_y, &pool_yhat)?,
            rmse_m: rmse(&pool_y, &pool_yhat)?,
            n: pool_y.len(),
            n_events: per_event.len(),
            excluded_events: excluded,
            band_coverage: (band_total > 0).then(|| covered as f64 / band_total as f64),
            per_event,
        });
    }
    Ok(reports)
}

/// Write reports as `model,cutoff_days,n,mae_m,rmse_m` rows.
pub fn write_reports(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut out = String::from("model,cutoff_days,n,mae_m,rmse_m\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{},{}\n", r.model, r.cutoff_days, r.n, r.mae_m, r.rmse_m));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn event(id: &str, pairs: &[(f64, f64)]) -> ConjunctionEvent {
        ConjunctionEvent::new(
            id,
            pairs.iter().map(|&(t, s)| Observation { tau_days: t, sigma_m: s }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn metric_hand_values() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mae(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5).abs() < 1e-12);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535534).abs() < 1e-6);
        assert_eq!(mae(&[2.0], &[5.0]).unwrap(), 3.0);
        assert_eq!(rmse(&[2.0], &[5.0]).unwrap(), 3.0);
    }

    #[test]
    fn metrics_reject_empty_and_mismatched() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn baseline_holds_latest_pre_cutoff_value() {
        let e = event("e", &[(3.0, 8000.0), (2.2, 6000.0), (1.0, 999.0)]);
        let f = baseline_forecast(&e, 2.0).unwrap();
        assert!(f.iter().all(|&v| v == 6000.0));
        assert_eq!(f.len(), GRID_LEN);
    }

    #[test]
    fn baseline_rejects_event_without_pre_cutoff_observation() {
        let e = event("e", &[(1.5, 8000.0), (1.0, 999.0)]);
        assert!(baseline_forecast(&e, 2.0).is_err());
    }

    #[test]
    fn match_on_grid_step_exactly() {
        let tau = grid_tau(130);
        let e = event("e", &[(6.0, 100.0), (tau, 42.0)]);
        let matches = match_true_samples(&e, 2.0, 0.5);
        assert_eq!(matches, vec![(130, 42.0)]);
    }

    #[test]
    fn match_respects_tolerance() {
        // 45 minutes past the last grid step: nearest step is 167 at 45 min.
        let tau = grid_tau(167) - 45.0 / 1440.0; // 15 minutes to TCA
        let e = event("e", &[(6.0, 100.0), (tau, 42.0)]);
        assert!(((grid_tau(167) - tau) * 1440.0 - 45.0).abs() < 1e-9);
        assert!(match_true_samples(&e, 2.0, 0.5).is_empty());
        assert_eq!(match_true_samples(&e, 2.0, 1.0), vec![(167, 42.0)]);
    }

    #[test]
    fn competing_observations_keep_the_closer_one() {
        // Both nearest to step 130; the second is closer.
        let tau = grid_tau(130);
        let e = event("e", &[(6.0, 100.0), (tau + 0.012, 10.0), (tau + 0.001, 42.0)]);
        let matches = match_true_samples(&e, 2.0, 0.5);
        assert_eq!(matches, vec![(130, 42.0)]);
    }

    #[test]
    fn pre_cutoff_observations_never_match() {
        let e = event("e", &[(6.0, 100.0), (2.5, 50.0), (1.5, 42.0)]);
        let matches = match_true_samples(&e, 2.0, 0.5);
        assert_eq!(matches.len(), 1);
        assert!(matches[0].0 >= 121);
    }

    struct OracleForecaster;
    impl Forecaster for OracleForecaster {
        fn name(&self) -> &str {
            "oracle"
        }
        fn forecast_event(&self, event: &ConjunctionEvent, _cutoff: f64) -> Result<EvalForecast> {
            // Reads the true observations: zero error on matched samples.
            let mut values = vec![0.0; GRID_LEN];
            for (i, sigma) in match_true_samples(event, 2.0, 0.5) {
                values[i] = sigma;
            }
            Ok(EvalForecast { values_m: values, band_m: None })
        }
    }

    #[test]
    fn oracle_forecaster_scores_zero_and_baseline_positive() {
        let events = vec![
            event("a", &[(6.0, 1000.0), (3.0, 800.0), (grid_tau(140), 500.0)]),
            event("b", &[(6.5, 2000.0), (2.5, 1500.0), (grid_tau(150), 700.0)]),
        ];
        let baseline = BaselineForecaster;
        let oracle = OracleForecaster;
        let reports = evaluate(&[&baseline, &oracle], &events, 2.0, 0.5).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[1].mae_m, 0.0);
        assert!(reports[0].mae_m > 0.0);
        assert!(reports[0].rmse_m >= reports[0].mae_m);
        // Single matched sample per event, off by 300 and 800.
        assert_eq!(reports[0].n, 2);
        assert!((reports[0].mae_m - 550.0).abs() < 1e-9);
    }

    #[test]
    fn single_sample_error_is_both_metrics() {
        let events = vec![event("a", &[(6.0, 1000.0), (3.0, 600.0), (grid_tau(140), 500.0)])];
        let reports = evaluate(&[&BaselineForecaster], &events, 2.0, 0.5).unwrap();
        assert_eq!(reports[0].n, 1);
        assert!((reports[0].mae_m - 100.0).abs() < 1e-9);
        assert!((reports[0].rmse_m - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pooled_mae_is_weighted_mean_of_per_event_maes() {
        let events = vec![
            event("a", &[(6.0, 1000.0), (3.0, 800.0), (grid_tau(140), 500.0), (grid_tau(150), 400.0)]),
            event("b", &[(6.5, 2000.0), (2.5, 1500.0), (grid_tau(160), 700.0)]),
        ];
        let reports = evaluate(&[&BaselineForecaster], &events, 2.0, 0.5).unwrap();
        let r = &reports[0];
        let weighted: f64 =
            r.per_event.iter().map(|e| e.mae_m * e.n as f64).sum::<f64>() / r.n as f64;
        assert!((r.mae_m - weighted).abs() < 1e-9);
        assert_eq!(r.n, r.per_event.iter().map(|e| e.n).sum::<usize>());
    }

    #[test]
    fn rejected_event_is_excluded_for_all_models() {
        // Second event has no pre-cutoff observation: baseline rejects it, so
        // the oracle must not score it either.
        let events = vec![
            event("a", &[(6.0, 1000.0), (3.0, 800.0), (grid_tau(140), 500.0)]),
            event("b", &[(1.8, 1500.0), (grid_tau(150), 700.0)]),
        ];
        let reports = evaluate(&[&BaselineForecaster, &OracleForecaster], &events, 2.0, 0.5).unwrap();
        for r in &reports {
            assert_eq!(r.excluded_events, 1);
            assert_eq!(r.n_events, 1);
        }
    }
}
