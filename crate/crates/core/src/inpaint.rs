//! Mask-conditioned reverse sampling: forecasting as inpainting.
//!
//! At every reverse step the known prefix is sampled from the closed-form
//! forward marginal at the target noise level while the unknown suffix comes
//! from the learned reverse step; the two are fused per element through the
//! mask. Because the marginal at step 0 is the identity and the last reverse
//! step is deterministic, the known region of the output equals the
//! conditioning series bit for bit.

use crate::autodiff::Tensor;
use crate::data::{GriddedSeries, Normalizer, ValueScale, GRID_LEN, GRID_START_DAYS, STEPS_PER_DAY};
use crate::diffusion::{forward_step, p_sample_step, q_sample, Denoiser, NoiseSchedule};
use crate::error::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;

/// Contiguous known-prefix / unknown-suffix mask over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    known: Vec<bool>,
    cutoff_index: usize,
}

impl Mask {
    /// Known steps are exactly the indices below `cutoff_index`.
    pub fn from_cutoff_index(len: usize, cutoff_index: usize) -> Result<Self> {
        if !(1..len).contains(&cutoff_index) {
            return Err(CoreError::config(format!(
                "cutoff index {cutoff_index} must leave at least one known and one unknown step in 0..{len}"
            )));
        }
        let known = (0..len).map(|i| i < cutoff_index).collect();
        Ok(Mask { known, cutoff_index })
    }

    /// Mask for the default grid: a step is known iff its days-to-TCA is at
    /// least `cutoff_days`.
    pub fn from_cutoff_days(cutoff_days: f64) -> Result<Self> {
        if !(cutoff_days > 1.0 / STEPS_PER_DAY && cutoff_days < GRID_START_DAYS) {
            return Err(CoreError::config(format!(
                "cutoff {cutoff_days} days outside ({}, {GRID_START_DAYS})",
                1.0 / STEPS_PER_DAY
            )));
        }
        let cutoff_index = (STEPS_PER_DAY * (GRID_START_DAYS - cutoff_days)).floor() as usize + 1;
        Mask::from_cutoff_index(GRID_LEN, cutoff_index.clamp(1, GRID_LEN - 1))
    }

    pub fn known(&self) -> &[bool] {
        &self.known
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// First unknown index.
    pub fn cutoff_index(&self) -> usize {
        self.cutoff_index
    }
}

/// Per-element fusion `m*known + (1-m)*unknown`, realised as selection so
/// non-finite values on the inactive side cannot leak through.
pub fn mask_combine(mask: &Mask, known_part: &Tensor, unknown_part: &Tensor) -> Result<Tensor> {
    if known_part.shape() != unknown_part.shape() {
        return Err(CoreError::shape(format!(
            "mask_combine: {:?} vs {:?}",
            known_part.shape(),
            unknown_part.shape()
        )));
    }
    let len = mask.len();
    if known_part.numel() % len != 0 || *known_part.shape().last().unwrap_or(&0) != len {
        return Err(CoreError::shape(format!(
            "mask_combine: mask of {len} steps against tensor {:?}",
            known_part.shape()
        )));
    }
    let data = known_part
        .data()
        .iter()
        .zip(unknown_part.data())
        .enumerate()
        .map(|(i, (k, u))| if mask.known[i % len] { *k } else { *u })
        .collect();
    Tensor::new(known_part.shape().to_vec(), data)
}

/// How the per-step point estimate is derived from the sampled trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointEstimate {
    Median,
    Mean,
}

/// Sampling configuration for a forecast.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForecastConfig {
    /// Number of sampled trajectories.
    pub num_samples: usize,
    /// Repeats of each reverse segment (1 = no resampling).
    pub resample_count: usize,
    /// Segment length for resampling.
    pub jump_length: usize,
    pub point_estimate: PointEstimate,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            num_samples: 32,
            resample_count: 1,
            jump_length: 1,
            point_estimate: PointEstimate::Median,
            seed: 0,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 1 || self.resample_count < 1 || self.jump_length < 1 {
            return Err(CoreError::config(format!(
                "forecast config must have num_samples, resample_count, jump_length >= 1, got ({}, {}, {})",
                self.num_samples, self.resample_count, self.jump_length
            )));
        }
        Ok(())
    }
}

/// Instrumentation from a repaint run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RepaintStats {
    /// Fused (known/unknown combined) reverse steps executed.
    pub fused_steps: usize,
}

/// One conditioned trajectory in normalized space.
///
/// `x0_known` is `[1,1,L]`; unknown positions of it are ignored.
pub fn repaint_sample<D: Denoiser + ?Sized, R: Rng>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    x0_known: &Tensor,
    mask: &Mask,
    config: &ForecastConfig,
    rng: &mut R,
) -> Result<Tensor> {
    repaint_sample_with_stats(denoiser, schedule, x0_known, mask, config, rng).map(|(x, _)| x)
}

/// `repaint_sample` plus step instrumentation.
pub fn repaint_sample_with_stats<D: Denoiser + ?Sized, R: Rng>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    x0_known: &Tensor,
    mask: &Mask,
    config: &ForecastConfig,
    rng: &mut R,
) -> Result<(Tensor, RepaintStats)> {
    config.validate()?;
    if x0_known.shape() != [1, 1, mask.len()] {
        return Err(CoreError::shape(format!(
            "repaint: conditioning must be [1,1,{}], got {:?}",
            mask.len(),
            x0_known.shape()
        )));
    }
    let mut draw = |shape: &[usize]| Tensor::randn(shape, rng);
    repaint_chain(denoiser, schedule, x0_known, mask, config, &mut draw)
}

/// The fused reverse chain, generic over the noise source so batched and
/// single-trajectory runs share one implementation.
fn repaint_chain<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    x0_known: &Tensor,
    mask: &Mask,
    config: &ForecastConfig,
    draw: &mut dyn FnMut(&[usize]) -> Tensor,
) -> Result<(Tensor, RepaintStats)> {
    let steps = schedule.steps();
    let shape = x0_known.shape().to_vec();
    let mut stats = RepaintStats::default();
    let mut x = draw(&shape);
    let mut t = steps;
    while t >= 1 {
        // Segment of fused steps covering t down to seg_lo.
        let seg_lo = t.saturating_sub(config.jump_length - 1).max(1);
        let mut x_low = x.clone();
        for pass in 1..=config.resample_count {
            x_low = x.clone();
            for s in (seg_lo..=t).rev() {
                let known_noise = draw(&shape);
                let known_part = q_sample(x0_known, s - 1, schedule, &known_noise)?;
                let reverse_noise = draw(&shape);
                let unknown_part = p_sample_step(denoiser, &x_low, s, schedule, &reverse_noise)?;
                x_low = mask_combine(mask, &known_part, &unknown_part)?;
                stats.fused_steps += 1;
            }
            if pass < config.resample_count {
                // Re-noise back up to level t and repeat the segment.
                let mut x_up = x_low.clone();
                for s in seg_lo..=t {
                    let noise = draw(&shape);
                    x_up = forward_step(&x_up, s, schedule, &noise)?;
                }
                x = x_up;
            }
        }
        x = x_low;
        t = seg_lo - 1;
    }
    Ok((x, stats))
}

/// A forecast: sampled trajectories in metres plus their aggregates.
#[derive(Clone, Debug)]
pub struct ForecastResult {
    pub event_id: String,
    /// `num_samples` rows of length `L`, metres.
    pub trajectories: Vec<Vec<f64>>,
    /// Per-step point estimate (median by default), metres.
    pub point_estimate: Vec<f64>,
    /// Per-step empirical 5% quantile, metres.
    pub band_low: Vec<f64>,
    /// Per-step empirical 95% quantile, metres.
    pub band_high: Vec<f64>,
    pub mask: Mask,
}

/// Default band quantiles.
pub const BAND_QUANTILES: (f64, f64) = (0.05, 0.95);

/// Run the conditioned sampler for an event grid and aggregate trajectories.
///
/// Trajectory `k` draws from a stream derived from `(config.seed, event id,
/// k)`, so results do not depend on scheduling order or on how trajectories
/// are chunked across threads.
pub fn forecast<D: Denoiser + Sync + ?Sized>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    grid: &GriddedSeries,
    normalizer: &Normalizer,
    cutoff_days: f64,
    config: &ForecastConfig,
) -> Result<ForecastResult> {
    config.validate()?;
    let mask = Mask::from_cutoff_days(cutoff_days)?;
    if grid.values.len() != mask.len() {
        return Err(CoreError::shape(format!(
            "grid of {} steps vs mask of {}",
            grid.values.len(),
            mask.len()
        )));
    }
    if !grid.obs_mask[..mask.cutoff_index()].iter().any(|&m| m) {
        return Err(CoreError::data(format!(
            "event {}: no observation at or before the {cutoff_days}-day cutoff",
            grid.event_id
        )));
    }

    let x0_known = Tensor::new(vec![1, 1, grid.values.len()], grid.values.clone())?;
    let salt = crate::rng::fnv1a(grid.event_id.as_bytes());
    let rng_for = |k: usize| -> ChaCha8Rng {
        crate::rng::stream_rng(
            config.seed,
            crate::rng::derived_stream(&[crate::rng::streams::FORECAST, salt, k as u64]),
        )
    };

    // Chunk trajectories; each chunk runs the chain batched over its rows.
    // Per-trajectory noise streams make the outcome independent of chunking.
    let n = config.num_samples;
    let chunk_size = n.div_ceil(rayon::current_num_threads().max(1)).max(1);
    let starts: Vec<usize> = (0..n).step_by(chunk_size).collect();
    let chunks: Vec<Vec<Vec<f64>>> = starts
        .par_iter()
        .map(|&start| {
            let count = chunk_size.min(n - start);
            let mut rngs: Vec<ChaCha8Rng> = (start..start + count).map(rng_for).collect();
            let (batch, _) = repaint_batched(denoiser, schedule, &x0_known, &mask, config, &mut rngs)?;
            let l = mask.len();
            Ok((0..count)
                .map(|row| {
                    batch.data()[row * l..][..l]
                        .iter()
                        .map(|&u| normalizer.denormalize(u))
                        .collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let trajectories: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let (point_estimate, band_low, band_high) =
        aggregate_with(&trajectories, BAND_QUANTILES.0, BAND_QUANTILES.1, config.point_estimate)?;

    Ok(ForecastResult {
        event_id: grid.event_id.clone(),
        trajectories,
        point_estimate,
        band_low,
        band_high,
        mask,
    })
}

/// Batched repaint: rows of the `[N,1,L]` state evolve exactly as `N`
/// independent `repaint_sample` calls with the matching RNG streams.
pub fn repaint_batched<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    x0_known: &Tensor,
    mask: &Mask,
    config: &ForecastConfig,
    rngs: &mut [ChaCha8Rng],
) -> Result<(Tensor, RepaintStats)> {
    let l = mask.len();
    let n = rngs.len();
    let x0_rows: Vec<f64> = std::iter::repeat(x0_known.data())
        .take(n)
        .flat_map(|row| row.iter().copied())
        .collect();
    let x0_batch = Tensor::new(vec![n, 1, l], x0_rows)?;
    let mut draw = |shape: &[usize]| {
        debug_assert_eq!(shape, [n, 1, l]);
        let mut data = Vec::with_capacity(n * l);
        for rng in rngs.iter_mut() {
            for _ in 0..l {
                data.push(rng.sample(rand_distr::StandardNormal));
            }
        }
        Tensor::new(shape.to_vec(), data).expect("noise shape")
    };
    repaint_chain(denoiser, schedule, &x0_batch, mask, config, &mut draw)
}

/// Per-step order statistics across trajectories.
///
/// Quantiles interpolate linearly between order statistics: at fraction `q`,
/// the value at rank `q (N-1)` with linear weight between neighbours.
pub fn aggregate(trajectories: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    aggregate_with(trajectories, BAND_QUANTILES.0, BAND_QUANTILES.1, PointEstimate::Median)
}

pub fn aggregate_with(
    trajectories: &[Vec<f64>],
    q_low: f64,
    q_high: f64,
    point: PointEstimate,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if trajectories.is_empty() {
        return Err(CoreError::data("aggregate: no trajectories".to_string()));
    }
    let l = trajectories[0].len();
    if trajectories.iter().any(|t| t.len() != l) {
        return Err(CoreError::shape("aggregate: ragged trajectory lengths".to_string()));
    }
    let mut mid = vec![0.0; l];
    let mut lo = vec![0.0; l];
    let mut hi = vec![0.0; l];
    let mut column = vec![0.0; trajectories.len()];
    for i in 0..l {
        for (k, t) in trajectories.iter().enumerate() {
            column[k] = t[i];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite trajectory values"));
        lo[i] = quantile_sorted(&column, q_low);
        hi[i] = quantile_sorted(&column, q_high);
        mid[i] = match point {
            PointEstimate::Median => quantile_sorted(&column, 0.5),
            PointEstimate::Mean => column.iter().sum::<f64>() / column.len() as f64,
        };
    }
    Ok((mid, lo, hi))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

impl ForecastResult {
    /// Tabular text: `tau_days,median_m,q05_m,q95_m,known_flag`, one row per
    /// grid step.
    pub fn write_table(&self, path: &Path) -> Result<()> {
        let mut out = String::from("tau_days,median_m,q05_m,q95_m,known_flag\n");
        for i in 0..self.point_estimate.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::data::grid_tau(i),
                self.point_estimate[i],
                self.band_low[i],
                self.band_high[i],
                u8::from(self.mask.known()[i]),
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Raw trajectories, one column per sample plus a leading tau column.
    pub fn write_trajectories(&self, path: &Path) -> Result<()> {
        let mut out = String::from("tau_days");
        for k in 0..self.trajectories.len() {
            out.push_str(&format!(",traj_{k}"));
        }
        out.push('\n');
        for i in 0..self.point_estimate.len() {
            out.push_str(&crate::data::grid_tau(i).to_string());
            for t in &self.trajectories {
                out.push(',');
                out.push_str(&t[i].to_string());
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
