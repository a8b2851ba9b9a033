use crate::config::RunConfig;
use crate::{CliError, GenDataArgs, UsageError};
use ndif_core::data::{
    generate_synthetic_events, split_dataset, write_events, write_manifest, DatasetManifest,
    Normalizer, PartitionFiles,
};

pub fn run(args: GenDataArgs) -> Result<(), CliError> {
    let mut config = RunConfig::load(args.common.config.as_deref()).map_err(UsageError)?;
    let seed = config.resolve_seed(args.common.seed);
    if let Some(n) = args.n_events {
        config.data.n_events = n;
    }
    if let Some(f) = args.fractions {
        config.data.fractions = f;
    }
    if config.data.n_events == 0 {
        return Err(UsageError("--n-events must be at least 1".to_string()).into());
    }

    if args.out.exists() && !args.force {
        return Err(UsageError(format!(
            "output directory {} exists; pass --force to overwrite",
            args.out.display()
        ))
        .into());
    }
    std::fs::create_dir_all(&args.out).map_err(ndif_core::CoreError::from)?;

    let events = generate_synthetic_events(&config.data.synthetic_config(seed))?;
    let split = split_dataset(events, config.data.fractions, seed)?;
    for name in split.empty_partitions() {
        eprintln!("note: {name} partition is empty");
    }
    let normalizer = Normalizer::fit(&split.train)?;

    let partitions = PartitionFiles {
        train: "train.csv".to_string(),
        validation: "val.csv".to_string(),
        test: "test.csv".to_string(),
    };
    write_events(&args.out.join(&partitions.train), &split.train)?;
    write_events(&args.out.join(&partitions.validation), &split.validation)?;
    write_events(&args.out.join(&partitions.test), &split.test)?;
    let manifest = DatasetManifest {
        seed,
        n_events: config.data.n_events,
        partition_counts: [split.train.len(), split.validation.len(), split.test.len()],
        partitions,
        normalizer,
    };
    write_manifest(&args.out.join("manifest.toml"), &manifest)?;
    config
        .echo(seed, &args.out.join("config_used.toml"))
        .map_err(ndif_core::CoreError::from)?;

    eprintln!(
        "wrote {} events ({}/{}/{}) to {}",
        manifest.n_events,
        manifest.partition_counts[0],
        manifest.partition_counts[1],
        manifest.partition_counts[2],
        args.out.display()
    );
    Ok(())
}
