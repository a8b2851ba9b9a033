use crate::config::RunConfig;
use crate::{CliError, SampleArgs, UsageError};
use ndif_core::data::{grid_tau, ValueScale};
use ndif_core::diffusion::sample_unconditional;

pub fn run(args: SampleArgs) -> Result<(), CliError> {
    let config = RunConfig::load(args.common.config.as_deref()).map_err(UsageError)?;
    let seed = config.resolve_seed(args.common.seed);
    if args.num_samples == 0 {
        return Err(UsageError("--num-samples must be at least 1".to_string()).into());
    }
    let ck = super::load_model(&args.model)?;
    let schedule = ck.schedule_spec.build()?;
    let length = ck.unet.config().grid_length;

    let mut rng = ndif_core::rng::stream_rng(seed, ndif_core::rng::streams::SAMPLE);
    let batch = sample_unconditional(&ck.unet, &schedule, length, args.num_samples, &mut rng)?;

    let mut out = String::new();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(args.num_samples);
    for k in 0..args.num_samples {
        let row: Vec<f64> = batch.data()[k * length..][..length]
            .iter()
            .map(|&u| ck.normalizer.denormalize(u))
            .collect();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
        rows.push(row);
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(ndif_core::CoreError::from)?;
        }
    }
    std::fs::write(&args.out, out).map_err(ndif_core::CoreError::from)?;

    if let Some(svg_dir) = &args.svg {
        std::fs::create_dir_all(svg_dir).map_err(ndif_core::CoreError::from)?;
        let taus: Vec<f64> = (0..length).map(grid_tau).collect();
        for (k, row) in rows.iter().enumerate() {
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = row.iter().cloned().fold(0.0f64, f64::max);
            let mut plot = crate::svg::Plot::new(&format!("generated series {k}"), lo, hi);
            plot.line(&taus, row, "#336699", false, "sampled series");
            std::fs::write(svg_dir.join(format!("sample_{k}.svg")), plot.render())
                .map_err(ndif_core::CoreError::from)?;
        }
    }

    let mut sidecar = args.out.clone();
    sidecar.set_extension("config.toml");
    config.echo(seed, &sidecar).map_err(ndif_core::CoreError::from)?;
    eprintln!("wrote {} samples to {}", args.num_samples, args.out.display());
    Ok(())
}
