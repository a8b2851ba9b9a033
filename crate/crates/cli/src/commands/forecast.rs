use crate::config::RunConfig;
use crate::{CliError, ForecastArgs, UsageError};
use ndif_core::data::grid_event;
use ndif_core::inpaint::forecast;

pub fn run(args: ForecastArgs) -> Result<(), CliError> {
    let mut config = RunConfig::load(args.common.config.as_deref()).map_err(UsageError)?;
    let seed = config.resolve_seed(args.common.seed);
    if let Some(n) = args.num_samples {
        config.forecast.num_samples = n;
    }

    let ck = super::load_model(&args.model)?;
    let schedule = ck.schedule_spec.build()?;
    let event = super::find_event(&args.data, &args.event_id)?;
    let grid = grid_event(&event, &ck.normalizer)?;

    let fc = config.forecast.forecast_config(seed);
    let result = forecast(&ck.unet, &schedule, &grid, &ck.normalizer, args.cutoff_days, &fc)?;

    std::fs::create_dir_all(&args.out).map_err(ndif_core::CoreError::from)?;
    result.write_table(&args.out.join(format!("forecast_{}.csv", args.event_id)))?;
    if args.trajectories {
        result.write_trajectories(&args.out.join(format!("trajectories_{}.csv", args.event_id)))?;
    }
    config
        .echo(seed, &args.out.join("config_used.toml"))
        .map_err(ndif_core::CoreError::from)?;
    eprintln!(
        "forecast for {} at {} days: {} trajectories -> {}",
        args.event_id,
        args.cutoff_days,
        result.trajectories.len(),
        args.out.display()
    );
    Ok(())
}
