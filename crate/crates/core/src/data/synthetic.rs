//! Synthetic conjunction-event generator.
//!
//! Stand-in for operator CDM archives: each event follows a log-linear
//! decay from a drawn seven-day uncertainty down to a drawn terminal
//! uncertainty, observed at Poisson-process times with multiplicative
//! log-normal jitter and an occasional regime jump (e.g. a new tracking
//! solution re-scaling the covariance).

use super::{ConjunctionEvent, Observation, GRID_START_DAYS};
use crate::error::{CoreError, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Generator parameters. Ranges are sampled log-uniformly.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    pub n_events: usize,
    /// Poisson intensity of observations, per day.
    pub cdm_rate_per_day: f64,
    /// Uncertainty at seven days out, metres.
    pub sigma7_range_m: (f64, f64),
    /// Uncertainty at closest approach, metres.
    pub sigma0_range_m: (f64, f64),
    /// Std of the log-normal multiplicative observation jitter.
    pub jitter_std: f64,
    /// Probability that an event contains one multiplicative jump.
    pub jump_probability: f64,
    /// Jump factor range.
    pub jump_factor_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_events: 1000,
            cdm_rate_per_day: 3.0,
            sigma7_range_m: (2_000.0, 50_000.0),
            sigma0_range_m: (50.0, 2_000.0),
            jitter_std: 0.1,
            jump_probability: 0.3,
            jump_factor_range: (0.5, 1.5),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("sigma7_range_m", self.sigma7_range_m),
            ("sigma0_range_m", self.sigma0_range_m),
            ("jump_factor_range", self.jump_factor_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo > 0.0 && hi >= lo) {
                return Err(CoreError::config(format!("{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
            }
        }
        if self.cdm_rate_per_day <= 0.0 {
            return Err(CoreError::config("cdm_rate_per_day must be positive".to_string()));
        }
        if self.jitter_std < 0.0 {
            return Err(CoreError::config("jitter_std must be non-negative".to_string()));
        }
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return Err(CoreError::config("jump_probability must be in [0, 1]".to_string()));
        }
        Ok(())
    }
}

/// Underlying decay curve: `sigma(tau) = sigma0 * (sigma7/sigma0)^(tau/7)`.
pub fn decay_curve(sigma7: f64, sigma0: f64, tau_days: f64) -> f64 {
    sigma0 * (sigma7 / sigma0).powf(tau_days / GRID_START_DAYS)
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Generate `n_events` events, each from its own RNG stream.
///
/// Draws with fewer than 3 observations, fewer than 2 observations at
/// `tau >= 2` days, or duplicate observation times are rejected and redrawn;
/// an event aborts after 1000 rejected draws.
pub fn generate_synthetic_events(config: &SyntheticConfig) -> Result<Vec<ConjunctionEvent>> {
    config.validate()?;
    (0..config.n_events)
        .map(|index| generate_event(config, index))
        .collect()
}

fn generate_event(config: &SyntheticConfig, index: usize) -> Result<ConjunctionEvent> {
    let mut rng = crate::rng::stream_rng(config.seed, crate::rng::streams::DATA + index as u64);
    let event_id = format!("ev-{index:06}");
    let poisson = Poisson::new(config.cdm_rate_per_day * GRID_START_DAYS)
        .map_err(|e| CoreError::config(format!("poisson rate: {e}")))?;

    for _attempt in 0..1000 {
        let sigma7 = log_uniform(&mut rng, config.sigma7_range_m);
        let sigma0 = log_uniform(&mut rng, config.sigma0_range_m);

        let count = poisson.sample(&mut rng) as usize;
        let mut taus: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..GRID_START_DAYS)).collect();
        taus.sort_by(|a, b| b.partial_cmp(a).expect("finite taus"));
        taus.dedup();

        if taus.len() < 3 || taus.iter().filter(|&&t| t >= 2.0).count() < 2 {
            continue;
        }

        let mut observations: Vec<Observation> = taus
            .iter()
            .map(|&tau| {
                let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * config.jitter_std;
                Observation {
                    tau_days: tau,
                    sigma_m: decay_curve(sigma7, sigma0, tau) * jitter.exp(),
                }
            })
            .collect();

        if rng.gen_bool(config.jump_probability) {
            let jump_tau = rng.gen_range(0.0..GRID_START_DAYS);
            let factor = log_uniform(&mut rng, config.jump_factor_range);
            for obs in observations.iter_mut().filter(|o| o.tau_days < jump_tau) {
                obs.sigma_m *= factor;
            }
        }

        return ConjunctionEvent::new(event_id, observations);
    }
    Err(CoreError::data(format!(
        "event {event_id}: 1000 consecutive draws rejected; rate {} too low for the minimum-observation rule",
        config.cdm_rate_per_day
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_hand_value() {
        // sigma7=10000, sigma0=100: sigma(3.5) = 100 * 100^0.5 = 1000.
        assert!((decay_curve(10_000.0, 100.0, 3.5) - 1000.0).abs() < 1e-9);
        assert!((decay_curve(10_000.0, 100.0, 7.0) - 10_000.0).abs() < 1e-9);
        assert!((decay_curve(10_000.0, 100.0, 0.0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_events_lie_on_curve_and_decrease() {
        let config = SyntheticConfig {
            n_events: 20,
            jitter_std: 0.0,
            jump_probability: 0.0,
            seed: 5,
            ..SyntheticConfig::default()
        };
        let events = generate_synthetic_events(&config).unwrap();
        for e in &events {
            let obs = e.observations();
            // sigma0 < sigma7 by the default ranges, so raw values decrease.
            for w in obs.windows(2) {
                assert!(w[0].sigma_m >= w[1].sigma_m, "event {}", e.event_id());
            }
            // The curve is log-linear in tau: every observation must sit on
            // the line through the endpoints in (tau, ln sigma) space.
            let (first, last) = (obs[0], obs[obs.len() - 1]);
            let slope = (first.sigma_m.ln() - last.sigma_m.ln()) / (first.tau_days - last.tau_days);
            for o in obs {
                let expect = last.sigma_m.ln() + slope * (o.tau_days - last.tau_days);
                assert!((o.sigma_m.ln() - expect).abs() < 1e-9, "event {}", e.event_id());
            }
        }
    }

    #[test]
    fn generated_events_satisfy_invariants_and_constraints() {
        let config = SyntheticConfig { n_events: 50, seed: 11, ..SyntheticConfig::default() };
        let events = generate_synthetic_events(&config).unwrap();
        assert_eq!(events.len(), 50);
        for e in &events {
            assert!(e.observations().len() >= 3);
            assert!(e.observations().iter().filter(|o| o.tau_days >= 2.0).count() >= 2);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let config = SyntheticConfig { n_events: 10, seed: 77, ..SyntheticConfig::default() };
        assert_eq!(
            generate_synthetic_events(&config).unwrap(),
            generate_synthetic_events(&config).unwrap()
        );
    }
}
