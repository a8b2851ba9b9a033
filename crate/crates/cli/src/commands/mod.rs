pub mod eval;
pub mod forecast;
pub mod gen_data;
pub mod plot;
pub mod sample;
pub mod train;

use crate::CliError;
use ndif_core::checkpoint::{load_checkpoint, Checkpoint};
use ndif_core::data::{read_events, read_manifest, ConjunctionEvent, DatasetManifest};
use std::path::Path;

/// Load the manifest plus one partition's events.
pub fn load_partition(data_dir: &Path, which: Partition) -> Result<(DatasetManifest, Vec<ConjunctionEvent>), CliError> {
    let manifest = read_manifest(&data_dir.join("manifest.toml"))?;
    let file = match which {
        Partition::Train => &manifest.partitions.train,
        Partition::Validation => &manifest.partitions.validation,
        Partition::Test => &manifest.partitions.test,
    };
    let events = read_events(&data_dir.join(file))?;
    Ok((manifest, events))
}

#[derive(Clone, Copy)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// Find an event by id across all partitions.
pub fn find_event(data_dir: &Path, event_id: &str) -> Result<ConjunctionEvent, CliError> {
    let manifest = read_manifest(&data_dir.join("manifest.toml"))?;
    for file in [
        &manifest.partitions.train,
        &manifest.partitions.validation,
        &manifest.partitions.test,
    ] {
        let events = read_events(&data_dir.join(file))?;
        if let Some(event) = events.into_iter().find(|e| e.event_id() == event_id) {
            return Ok(event);
        }
    }
    Err(CliError::Core(ndif_core::CoreError::Data(format!(
        "event '{event_id}' not found in dataset {}",
        data_dir.display()
    ))))
}

pub fn load_model(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(load_checkpoint(path)?)
}
