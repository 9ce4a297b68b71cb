//! Text destruction in latent space and background restoration by twin denoising passes.

mod noise;
mod restore;

pub use noise::{latent_replace, noise_fill};
pub use restore::{default_kv_layers, restore, DestructionConfig, RestoreMasks, RestoreReport, Restoration};
