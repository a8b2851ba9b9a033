//! Event representation, normalization, gridding, synthetic generation, I/O.

mod gridding;
mod io;
mod synthetic;

pub use gridding::grid_event;
pub use io::{read_events, read_manifest, write_events, write_manifest, DatasetManifest, PartitionFiles};
pub use synthetic::{generate_synthetic_events, SyntheticConfig};

use crate::error::{CoreError, Result};
use rand::seq::SliceRandom;

/// Number of grid steps: hourly over seven days, last point one hour
/// before closest approach.
pub const GRID_LEN: usize = 168;
/// Grid steps per day.
pub const STEPS_PER_DAY: f64 = 24.0;
/// First grid point, in days to closest approach.
pub const GRID_START_DAYS: f64 = 7.0;

/// Days-to-TCA of grid step `i`.
pub fn grid_tau(i: usize) -> f64 {
    GRID_START_DAYS - i as f64 / STEPS_PER_DAY
}

/// One position-uncertainty observation of an event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Days to closest approach (decreasing over the life of the event).
    pub tau_days: f64,
    /// Along-track position uncertainty, metres.
    pub sigma_m: f64,
}

/// An event: irregularly-timed uncertainty observations, newest last.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjunctionEvent {
    event_id: String,
    observations: Vec<Observation>,
}

impl ConjunctionEvent {
    /// Validates: at least two observations, positive uncertainties,
    /// `tau_days` strictly decreasing and within `[0, 7]`.
    pub fn new(event_id: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let event_id = event_id.into();
        if observations.len() < 2 {
            return Err(CoreError::data(format!(
                "event {event_id}: needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        for (i, o) in observations.iter().enumerate() {
            if !(o.sigma_m > 0.0 && o.sigma_m.is_finite()) {
                return Err(CoreError::data(format!(
                    "event {event_id}: observation {i} has non-positive sigma {}",
                    o.sigma_m
                )));
            }
            if !(0.0..=GRID_START_DAYS).contains(&o.tau_days) {
                return Err(CoreError::data(format!(
                    "event {event_id}: observation {i} at tau {} outside [0, {GRID_START_DAYS}]",
                    o.tau_days
                )));
            }
            if i > 0 && observations[i - 1].tau_days <= o.tau_days {
                return Err(CoreError::data(format!(
                    "event {event_id}: tau_days not strictly decreasing at observation {i}"
                )));
            }
        }
        Ok(ConjunctionEvent { event_id, observations })
    }

    pub fn event_id(&self) -> &str {
        &self.event_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Most recent observation at or before the cutoff (smallest
    /// `tau_days >= cutoff`), if any.
    pub fn last_before_cutoff(&self, cutoff_days: f64) -> Option<Observation> {
        self.observations
            .iter()
            .take_while(|o| o.tau_days >= cutoff_days)
            .last()
            .copied()
    }
}

/// An event resampled onto the fixed hourly grid, in normalized units.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedSeries {
    pub event_id: String,
    /// Normalized values, length [`GRID_LEN`].
    pub values: Vec<f64>,
    /// True where a real observation was snapped to the step.
    pub obs_mask: Vec<bool>,
    /// True where left/right padding filled the step.
    pub pad_mask: Vec<bool>,
}

/// Invertible mapping between metres and normalized model units.
pub trait ValueScale {
    fn normalize(&self, sigma_m: f64) -> f64;
    fn denormalize(&self, unit: f64) -> f64;
}

/// Log10-then-affine normalizer mapping the training range onto [-1, 1].
///
/// Uncertainties below one metre are clamped to one metre before the log;
/// values outside the fitted range extrapolate linearly (no clipping).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    lo: f64,
    hi: f64,
}

impl Normalizer {
    pub fn from_bounds(lo: f64, hi: f64) -> Result<Self> {
        if !(hi - lo >= 1e-9 && lo.is_finite() && hi.is_finite()) {
            return Err(CoreError::config(format!(
                "normalizer needs hi - lo >= 1e-9, got lo={lo}, hi={hi}"
            )));
        }
        Ok(Normalizer { lo, hi })
    }

    /// Fit to the min/max of log10(sigma) over all training observations.
    pub fn fit(training_events: &[ConjunctionEvent]) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for event in training_events {
            for obs in event.observations() {
                let lg = obs.sigma_m.max(1.0).log10();
                lo = lo.min(lg);
                hi = hi.max(lg);
            }
        }
        if !lo.is_finite() {
            return Err(CoreError::data("normalizer fit: no observations".to_string()));
        }
        Normalizer::from_bounds(lo, hi).map_err(|_| {
            CoreError::config(format!(
                "normalizer fit: all observations identical (log10 range {:.3e})",
                hi - lo
            ))
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

impl ValueScale for Normalizer {
    fn normalize(&self, sigma_m: f64) -> f64 {
        let lg = sigma_m.max(1.0).log10();
        2.0 * (lg - self.lo) / (self.hi - self.lo) - 1.0
    }

    fn denormalize(&self, unit: f64) -> f64 {
        let lg = self.lo + (unit + 1.0) / 2.0 * (self.hi - self.lo);
        10f64.powf(lg)
    }
}

/// Event-level dataset partitions.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<ConjunctionEvent>,
    pub validation: Vec<ConjunctionEvent>,
    pub test: Vec<ConjunctionEvent>,
}

impl DatasetSplit {
    /// Partitions that came out empty (informational; a zero fraction is
    /// legitimate, but callers may want to warn).
    pub fn empty_partitions(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.train.is_empty() {
            out.push("train");
        }
        if self.validation.is_empty() {
            out.push("validation");
        }
        if self.test.is_empty() {
            out.push("test");
        }
        out
    }
}

/// Deterministic shuffled split by event.
///
/// Sizes use the floor-plus-remainder rule: each partition gets
/// `floor(fraction * n)` events, and the remainder is assigned one event at
/// a time in (train, validation, test) order.
pub fn split_dataset(
    mut events: Vec<ConjunctionEvent>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (ft, fv, fs) = fractions;
    if ft < 0.0 || fv < 0.0 || fs < 0.0 || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(CoreError::config(format!(
            "split fractions must be non-negative and sum to 1, got ({ft}, {fv}, {fs})"
        )));
    }
    let n = events.len();
    let mut rng = crate::rng::stream_rng(seed, crate::rng::streams::SPLIT);
    events.shuffle(&mut rng);

    let mut sizes = [
        (ft * n as f64).floor() as usize,
        (fv * n as f64).floor() as usize,
        (fs * n as f64).floor() as usize,
    ];
    let mut remainder = n - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        if remainder == 0 {
            break;
        }
        *s += 1;
        remainder -= 1;
    }

    let test = events.split_off(sizes[0] + sizes[1]);
    let validation = events.split_off(sizes[0]);
    Ok(DatasetSplit { train: events, validation, test })
}
