//! Toy latent diffusion stack: exactly invertible space-to-depth codec, a
//! fixed-vocabulary text embedder, a dual-stream transformer with joint
//! self-attention over text and image tokens, rectified-flow and DDIM-style
//! schedules, and a CPU trainer with hand-written backprop.

pub mod codec;
pub mod model;
pub mod nn;
pub mod sample;
pub mod schedule;
pub mod train;
pub mod vocab;

pub use codec::LatentCodec;
pub use model::{DiTConfig, DiTModel};
pub use sample::sample_plain;
pub use schedule::{ddim_step, euler_step, forward_noise, NoiseSchedule, ScheduleKind};
pub use train::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig};
pub use vocab::Vocabulary;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error("checkpoint format problem: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
