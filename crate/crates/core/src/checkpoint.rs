//! Model checkpoint file.
//!
//! Layout: magic `NDIF1`, format version (u32 LE), header length (u32 LE),
//! a TOML header (network config, schedule parameters, normalizer constants,
//! training step count, tensor manifest), then raw little-endian f32 tensor
//! data at the manifest offsets.
//!
//! Training runs in f64; storage rounds to f32 (about 1e-7 relative), so a
//! resumed run is not bit-identical to an uninterrupted one. The loader
//! validates magic, version, and manifest/offset consistency.

use crate::data::Normalizer;
use crate::diffusion::NoiseSchedule;
use crate::error::{CoreError, Result};
use crate::unet::{UNet, UNetConfig};
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"NDIF1";
pub const FORMAT_VERSION: u32 = 1;

/// Linear-schedule parameters as stored in the header.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            steps: crate::diffusion::DEFAULT_STEPS,
            beta_start: crate::diffusion::DEFAULT_BETA_START,
            beta_end: crate::diffusion::DEFAULT_BETA_END,
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the data section.
    offset: u64,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
struct Header {
    unet: UNetConfig,
    schedule: ScheduleSpec,
    normalizer: Normalizer,
    train_steps: u64,
    tensors: Vec<TensorEntry>,
}

/// Everything needed to sample or keep training.
pub struct Checkpoint {
    pub unet: UNet,
    pub schedule_spec: ScheduleSpec,
    pub normalizer: Normalizer,
    pub train_steps: u64,
}

pub fn save_checkpoint(
    path: &Path,
    unet: &UNet,
    schedule_spec: &ScheduleSpec,
    normalizer: &Normalizer,
    train_steps: u64,
) -> Result<()> {
    let named = unet.named_tensors();
    let mut tensors = Vec::with_capacity(named.len());
    let mut offset = 0u64;
    for (name, tensor) in &named {
        tensors.push(TensorEntry { name: name.clone(), shape: tensor.shape().to_vec(), offset });
        offset += 4 * tensor.numel() as u64;
    }
    let header = Header {
        unet: unet.config().clone(),
        schedule: *schedule_spec,
        normalizer: *normalizer,
        train_steps,
        tensors,
    };
    let header_text =
        toml::to_string(&header).map_err(|e| CoreError::format(format!("checkpoint header: {e}")))?;

    let mut bytes = Vec::with_capacity(13 + header_text.len() + offset as usize);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_text.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header_text.as_bytes());
    for (_, tensor) in &named {
        for &v in tensor.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| CoreError::format(format!("{}: {e}", path.display())))?;
    if bytes.len() < 13 || &bytes[..5] != MAGIC {
        return Err(CoreError::format(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CoreError::format(format!(
            "{}: format version {version}, expected {FORMAT_VERSION}",
            path.display()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let data_start = 13 + header_len;
    if bytes.len() < data_start {
        return Err(CoreError::format(format!("{}: truncated header", path.display())));
    }
    let header_text = std::str::from_utf8(&bytes[13..data_start])
        .map_err(|e| CoreError::format(format!("{}: header not UTF-8: {e}", path.display())))?;
    let header: Header = toml::from_str(header_text)
        .map_err(|e| CoreError::format(format!("{}: header: {e}", path.display())))?;

    // Manifest consistency: offsets strictly sequential, data section exact.
    let mut expected_offset = 0u64;
    for entry in &header.tensors {
        if entry.offset != expected_offset {
            return Err(CoreError::format(format!(
                "{}: tensor {} at offset {}, expected {expected_offset}",
                path.display(),
                entry.name,
                entry.offset
            )));
        }
        expected_offset += 4 * entry.shape.iter().product::<usize>() as u64;
    }
    let data = &bytes[data_start..];
    if data.len() as u64 != expected_offset {
        return Err(CoreError::format(format!(
            "{}: data section holds {} bytes, manifest expects {expected_offset}",
            path.display(),
            data.len()
        )));
    }

    let mut unet = UNet::new(header.unet.clone(), 0)?;
    let mut loaded = std::collections::BTreeMap::new();
    for entry in &header.tensors {
        let numel: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let values: Vec<f64> = (0..numel)
            .map(|i| {
                let b = &data[start + 4 * i..start + 4 * i + 4];
                f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64
            })
            .collect();
        loaded.insert(entry.name.clone(), (entry.shape.clone(), values));
    }
    for (name, tensor) in unet.named_tensors_mut() {
        let (shape, values) = loaded.remove(&name).ok_or_else(|| {
            CoreError::format(format!("{}: tensor {name} missing from manifest", path.display()))
        })?;
        if shape != tensor.shape() {
            return Err(CoreError::format(format!(
                "{}: tensor {name} has shape {:?}, expected {:?}",
                path.display(),
                shape,
                tensor.shape()
            )));
        }
        tensor.data_mut().copy_from_slice(&values);
    }
    if let Some((name, _)) = loaded.into_iter().next() {
        return Err(CoreError::format(format!(
            "{}: manifest lists unknown tensor {name}",
            path.display()
        )));
    }

    Ok(Checkpoint {
        unet,
        schedule_spec: header.schedule,
        normalizer: header.normalizer,
        train_steps: header.train_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net() -> UNet {
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
            42,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_within_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ndif");
        let unet = small_net();
        let normalizer = Normalizer::from_bounds(1.5, 4.5).unwrap();
        save_checkpoint(&path, &unet, &ScheduleSpec::default(), &normalizer, 1234).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.train_steps, 1234);
        assert_eq!(ck.normalizer, normalizer);
        assert_eq!(ck.unet.config(), unet.config());
        for ((name_a, a), (_, b)) in unet.named_tensors().iter().zip(ck.unet.named_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                let scale = x.abs().max(1e-3);
                assert!((x - y).abs() / scale < 1e-6, "{name_a}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ndif");
        let b = dir.path().join("b.ndif");
        let unet = small_net();
        let normalizer = Normalizer::from_bounds(1.5, 4.5).unwrap();
        save_checkpoint(&a, &unet, &ScheduleSpec::default(), &normalizer, 7).unwrap();
        save_checkpoint(&b, &unet, &ScheduleSpec::default(), &normalizer, 7).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn rejects_bad_magic_version_and_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ndif");
        let unet = small_net();
        let normalizer = Normalizer::from_bounds(1.5, 4.5).unwrap();
        save_checkpoint(&path, &unet, &ScheduleSpec::default(), &normalizer, 0).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(load_checkpoint(&path).is_err());

        let mut bad_version = good.clone();
        bad_version[5] = 99;
        std::fs::write(&path, &bad_version).unwrap();
        assert!(load_checkpoint(&path).is_err());

        let mut truncated = good.clone();
        truncated.truncate(good.len() - 8);
        std::fs::write(&path, &truncated).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
