//! Diffusion-model forecasting of conjunction position uncertainty.
//!
//! The pipeline: conjunction events (irregular observations of along-track
//! position uncertainty vs. days-to-TCA) are resampled onto a fixed hourly
//! grid, a denoising diffusion model with a 1D U-Net backbone is trained on
//! the gridded series, and the unobserved tail of an event is forecast by
//! mask-conditioned inpainting with empirical uncertainty bands. An
//! evaluation harness scores forecasts against a last-value-hold baseline on
//! true observations near grid steps.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod inpaint;
pub mod rng;
pub mod train;
pub mod unet;

pub use autodiff::{AdamConfig, AdamState, Graph, Tensor, Var};
pub use error::{CoreError, Result};

/// Keep freed multi-megabyte tensor buffers pooled in-process instead of
/// returning them to the kernel, which would make every training step pay
/// page-fault and re-zeroing costs. Call once at process start in binaries
/// that run training or sampling loops; a no-op on non-glibc targets.
pub fn tune_allocator() {
    #[cfg(target_env = "gnu")]
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}
