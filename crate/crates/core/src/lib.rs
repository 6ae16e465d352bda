//! Compositional text-to-image generation at desk scale.
//!
//! The pipeline turns a prompt into a 2.5D semantic layout (boxes + depth
//! ranks + captions), paints a depth-ordered composite of independently
//! generated objects, and uses that composite as a noisy latent prior that
//! steers the first denoising steps of a toy latent flow-matching model.
//! Everything runs on CPU over a synthetic colored-shapes corpus, so every
//! stage is deterministic and testable end to end.
//!
//! Module map:
//! - [`layout`]: prompt DSL, rule planner, layout validation, mask rasterization
//! - [`llm`]: chat-completions planner client and 3D judge (offline-fixture capable)
//! - [`dataset`]: synthetic shapes corpus (images + captions + ground truth)
//! - [`diffusion`]: latent codec, schedules, dual-stream transformer, trainer
//! - [`compositor`]: object synthesis, segmentation, depth-aware compositing
//! - [`guided`]: prior latent init, reinforcement, spatial-controlled denoising
//! - [`eval`]: shape detector, spatial/count/occlusion metrics, suite runner
//! - [`cli`]: command implementations behind the `priorgen` binary

pub mod cli;
pub mod compositor;
pub mod dataset;
pub mod diffusion;
pub mod eval;
pub mod guided;
pub mod layout;
pub mod llm;
pub mod palette;
pub mod util;
