//! Event files and the dataset manifest.
//!
//! Event file: tabular text, UTF-8, LF line endings, header
//! `event_id,tau_days,sigma_t_m`, one row per observation, events
//! contiguous. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces values exactly.

use super::{ConjunctionEvent, Normalizer, Observation};
use crate::error::{CoreError, Result};
use std::fs;
use std::path::Path;

pub const EVENT_FILE_HEADER: &str = "event_id,tau_days,sigma_t_m";

pub fn write_events(path: &Path, events: &[ConjunctionEvent]) -> Result<()> {
    let mut out = String::with_capacity(64 * events.len() + 32);
    out.push_str(EVENT_FILE_HEADER);
    out.push('\n');
    for event in events {
        for obs in event.observations() {
            out.push_str(event.event_id());
            out.push(',');
            out.push_str(&obs.tau_days.to_string());
            out.push(',');
            out.push_str(&obs.sigma_m.to_string());
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<ConjunctionEvent>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::format(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == EVENT_FILE_HEADER => {}
        Some((_, header)) => {
            return Err(CoreError::format(format!(
                "{}: line 1: expected header '{EVENT_FILE_HEADER}', got '{header}'",
                path.display()
            )))
        }
        None => return Err(CoreError::format(format!("{}: empty file", path.display()))),
    }

    let mut events = Vec::new();
    let mut seen_ids: Vec<String> = Vec::new();
    let mut current_id: Option<String> = None;
    let mut current_obs: Vec<Observation> = Vec::new();
    let mut current_start_line = 0usize;

    let flush = |id: Option<String>, obs: &mut Vec<Observation>, line: usize, events: &mut Vec<ConjunctionEvent>| -> Result<()> {
        if let Some(id) = id {
            let event = ConjunctionEvent::new(id, std::mem::take(obs)).map_err(|e| {
                CoreError::format(format!("rows ending at line {line}: {e}"))
            })?;
            events.push(event);
        }
        Ok(())
    };

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (id, tau_s, sigma_s) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(CoreError::format(format!(
                    "line {line_no}: expected 3 comma-separated fields, got '{line}'"
                )))
            }
        };
        let tau_days: f64 = tau_s.parse().map_err(|_| {
            CoreError::format(format!("line {line_no}: tau_days '{tau_s}' is not a number"))
        })?;
        let sigma_m: f64 = sigma_s.parse().map_err(|_| {
            CoreError::format(format!("line {line_no}: sigma_t_m '{sigma_s}' is not a number"))
        })?;
        if !(sigma_m > 0.0) {
            return Err(CoreError::format(format!(
                "line {line_no}: sigma_t_m must be positive, got {sigma_m}"
            )));
        }

        if current_id.as_deref() != Some(id) {
            flush(current_id.take(), &mut current_obs, line_no - 1, &mut events)?;
            if seen_ids.iter().any(|s| s == id) {
                return Err(CoreError::format(format!(
                    "line {line_no}: event '{id}' reappears after other events; rows per event must be contiguous"
                )));
            }
            seen_ids.push(id.to_string());
            current_id = Some(id.to_string());
            current_start_line = line_no;
        }
        if let Some(prev) = current_obs.last() {
            if prev.tau_days <= tau_days {
                return Err(CoreError::format(format!(
                    "line {line_no}: tau_days not strictly decreasing within event '{id}' (started line {current_start_line})"
                )));
            }
        }
        current_obs.push(Observation { tau_days, sigma_m });
    }
    let last_line = text.lines().count();
    flush(current_id, &mut current_obs, last_line, &mut events)?;
    Ok(events)
}

/// Partition file names inside a dataset directory.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartitionFiles {
    pub train: String,
    pub validation: String,
    pub test: String,
}

/// Manifest tying partition files to the normalizer fitted on train.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub n_events: usize,
    pub partitions: PartitionFiles,
    pub partition_counts: [usize; 3],
    pub normalizer: Normalizer,
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| CoreError::format(format!("manifest serialize: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::format(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CoreError::format(format!("{}: {e}", path.display())))
}
