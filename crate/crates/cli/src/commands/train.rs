use crate::config::RunConfig;
use crate::{CliError, TrainArgs};
use ndif_core::checkpoint::{load_checkpoint, save_checkpoint};
use ndif_core::data::grid_event;
use ndif_core::train::{train, TrainConfig};
use ndif_core::unet::UNet;
use ndif_core::AdamState;
use std::fmt::Write as _;

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut config = RunConfig::load(args.common.config.as_deref()).map_err(crate::UsageError)?;
    let seed = config.resolve_seed(args.common.seed);
    if let Some(v) = args.epochs {
        config.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.train.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        config.train.learning_rate = v;
    }

    let (manifest, events) = super::load_partition(&args.data, super::Partition::Train)?;

    // On resume the checkpoint's architecture, schedule, and normalizer win;
    // a fresh run takes them from the config and the dataset manifest.
    let (mut unet, schedule_spec, normalizer, start_steps) = match &args.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            (ck.unet, ck.schedule_spec, ck.normalizer, ck.train_steps)
        }
        None => (
            UNet::new(config.unet.clone(), seed)?,
            config.schedule,
            manifest.normalizer,
            0,
        ),
    };
    let schedule = schedule_spec.build()?;

    let mut grids = Vec::with_capacity(events.len());
    let mut skipped = 0usize;
    for event in &events {
        match grid_event(event, &normalizer) {
            Ok(g) => grids.push(g),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("note: skipped {skipped} event(s) too degenerate to grid");
    }

    let train_config = TrainConfig {
        epochs: config.train.epochs,
        batch_size: config.train.batch_size,
        learning_rate: config.train.learning_rate,
        seed,
    };
    let mut adam = AdamState::with_step_count(
        ndif_core::AdamConfig { learning_rate: train_config.learning_rate, ..Default::default() },
        start_steps,
    );

    std::fs::create_dir_all(&args.out).map_err(ndif_core::CoreError::from)?;
    let report = train(&mut unet, &schedule, &grids, &train_config, &mut adam, |epoch, loss| {
        eprintln!("epoch {epoch:4}  loss {loss:.6}");
    })?;

    let mut log = String::from("epoch,mean_loss\n");
    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{epoch},{loss}");
    }
    std::fs::write(args.out.join("loss_log.csv"), log).map_err(ndif_core::CoreError::from)?;

    save_checkpoint(
        &args.out.join("model.ndif"),
        &unet,
        &schedule_spec,
        &normalizer,
        report.steps,
    )?;
    config
        .echo(seed, &args.out.join("config_used.toml"))
        .map_err(ndif_core::CoreError::from)?;
    eprintln!(
        "trained {} epochs ({} total steps) on {} series -> {}",
        config.train.epochs,
        report.steps,
        grids.len(),
        args.out.join("model.ndif").display()
    );
    Ok(())
}
