//! Minibatch noise-prediction training over gridded events.

use crate::autodiff::{AdamConfig, AdamState, Tensor};
use crate::data::GriddedSeries;
use crate::diffusion::{training_loss, NoiseSchedule};
use crate::error::{CoreError, Result};
use crate::unet::UNet;
use rand::seq::SliceRandom;

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 80, batch_size: 16, learning_rate: 2e-4, seed: 0 }
    }
}

/// Per-epoch mean losses plus the final optimizer step count.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Train in place. `adam` carries the step counter across resumed runs.
///
/// Aborts with a numeric error naming the offending step if the loss stops
/// being finite; parameters are checked for NaN/Inf after every step.
pub fn train(
    unet: &mut UNet,
    schedule: &NoiseSchedule,
    grids: &[GriddedSeries],
    config: &TrainConfig,
    adam: &mut AdamState,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    if grids.is_empty() {
        return Err(CoreError::data("training set is empty".to_string()));
    }
    if config.batch_size == 0 {
        return Err(CoreError::config("batch_size must be >= 1".to_string()));
    }
    let length = grids[0].values.len();
    if grids.iter().any(|g| g.values.len() != length) {
        return Err(CoreError::shape("training grids have mixed lengths".to_string()));
    }

    let mut rng = crate::rng::stream_rng(config.seed, crate::rng::streams::TRAIN);
    let mut order: Vec<usize> = (0..grids.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut data = Vec::with_capacity(chunk.len() * length);
            for &gi in chunk {
                data.extend_from_slice(&grids[gi].values);
            }
            let x0 = Tensor::new(vec![chunk.len(), 1, length], data)?;
            let mut step = training_loss(unet, &x0, schedule, &mut rng)?;
            if !step.loss_value.is_finite() {
                return Err(CoreError::numeric(format!(
                    "loss became non-finite at optimizer step {}",
                    adam.step_count() + 1
                )));
            }
            step.graph.backward(step.loss)?;
            unet.apply_gradients(&step.graph, &step.param_vars, adam)?;
            unet.check_finite()?;
            epoch_loss += step.loss_value;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        on_epoch(epoch, mean);
        epoch_losses.push(mean);
    }

    Ok(TrainReport { epoch_losses, steps: adam.step_count() })
}

/// Fresh optimizer for a config.
pub fn optimizer_for(config: &TrainConfig) -> AdamState {
    AdamState::new(AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unet::UNetConfig;

    fn toy_grid(id: &str, phase: f64) -> GriddedSeries {
        let values: Vec<f64> = (0..32).map(|i| ((i as f64 + phase) * 0.3).sin() * 0.5).collect();
        GriddedSeries {
            event_id: id.to_string(),
            values,
            obs_mask: vec![true; 32],
            pad_mask: vec![false; 32],
        }
    }

    fn small_unet() -> UNet {
        UNet::new(
            UNetConfig {
                base_channels: 8,
                channel_mults: vec![1, 2],
                res_blocks_per_level: 1,
                groups: 4,
                time_embed_dim: 16,
                input_channels: 1,
                grid_length: 32,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn a_few_steps_reduce_loss_on_a_tiny_problem() {
        let mut unet = small_unet();
        let schedule = NoiseSchedule::linear(8, 1e-3, 0.2).unwrap();
        let grids = vec![toy_grid("a", 0.0), toy_grid("b", 1.0)];
        let config = TrainConfig { epochs: 30, batch_size: 2, learning_rate: 3e-3, seed: 1 };
        let mut adam = optimizer_for(&config);
        let report = train(&mut unet, &schedule, &grids, &config, &mut adam, |_, _| {}).unwrap();
        assert_eq!(report.steps, 30);
        let early: f64 = report.epoch_losses[..5].iter().sum::<f64>() / 5.0;
        let late: f64 = report.epoch_losses[25..].iter().sum::<f64>() / 5.0;
        assert!(late < early, "loss did not move: early {early}, late {late}");
    }

    #[test]
    fn training_is_seed_deterministic() {
        let run = || {
            let mut unet = small_unet();
            let schedule = NoiseSchedule::linear(8, 1e-3, 0.2).unwrap();
            let grids = vec![toy_grid("a", 0.0)];
            let config = TrainConfig { epochs: 3, batch_size: 1, learning_rate: 1e-3, seed: 9 };
            let mut adam = optimizer_for(&config);
            train(&mut unet, &schedule, &grids, &config, &mut adam, |_, _| {}).unwrap().epoch_losses
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_training_set_rejected() {
        let mut unet = small_unet();
        let schedule = NoiseSchedule::default_linear();
        let config = TrainConfig::default();
        let mut adam = optimizer_for(&config);
        assert!(train(&mut unet, &schedule, &[], &config, &mut adam, |_, _| {}).is_err());
    }
}
