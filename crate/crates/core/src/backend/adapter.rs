//! Contract for wiring a pretrained latent-diffusion model in as a backend.
//!
//! An adapter must:
//!
//! * enumerate self-attention layers `0..L` in network forward order and use
//!   the same index for the cross-attention layer of the same transformer
//!   block (for the SD 1.x U-Net, `L = 16`: six down-block layers, one
//!   mid-block layer, nine up-block layers);
//! * map pipeline timestep `t` in `0..=T` to the model's native timestep with
//!   [`native_timestep`], matching the schedule built by
//!   `Schedule::default_for(T)`;
//! * feed the prompt through the model's own text encoder and report word
//!   positions (sub-tokens included) in a [`TokenizedPrompt`](super::TokenizedPrompt);
//! * report raw `Q·Kᵀ` logits (before softmax, averaged over heads) for
//!   cross-attention, one map per prompt token;
//! * run without classifier-free guidance (guidance scale 1);
//! * clamp decoded pixels to the valid range.
//!
//! No pretrained runtime ships with this crate.

use crate::error::{Error, Result};

/// Spatial pooling of each SD 1.x self-attention layer relative to the latent, in forward order.
pub const SD15_LAYER_POOLING: [usize; 16] = [1, 1, 2, 2, 4, 4, 8, 4, 4, 4, 2, 2, 2, 1, 1, 1];

/// Native training timestep for pipeline index `t` of a `num_steps` schedule subsampled
/// from `train_steps`.
pub fn native_timestep(t: usize, num_steps: usize, train_steps: usize) -> Result<usize> {
    if t == 0 || t > num_steps || num_steps > train_steps {
        return Err(Error::contract(format!(
            "pipeline step {t} of {num_steps} cannot map onto {train_steps} training steps"
        )));
    }
    Ok(t * train_steps / num_steps - 1)
}

/// Per-layer pooling factors of a U-Net style attention stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pooling: Vec<usize>,
}

impl LayerLayout {
    pub fn new(pooling: Vec<usize>) -> Self {
        Self { pooling }
    }

    pub fn sd15() -> Self {
        Self::new(SD15_LAYER_POOLING.to_vec())
    }

    pub fn len(&self) -> usize {
        self.pooling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pooling.is_empty()
    }

    pub fn pooling(&self, layer: usize) -> Result<usize> {
        self.pooling
            .get(layer)
            .copied()
            .ok_or_else(|| Error::config(format!("unknown attention layer {layer}")))
    }

    pub fn layer_size(&self, layer: usize, (h, w): (usize, usize)) -> Result<(usize, usize)> {
        let p = self.pooling(layer)?;
        Ok((h.div_ceil(p), w.div_ceil(p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestep_mapping_covers_training_range() {
        assert_eq!(native_timestep(1, 50, 1000).unwrap(), 19);
        assert_eq!(native_timestep(50, 50, 1000).unwrap(), 999);
        assert!(native_timestep(0, 50, 1000).is_err());
    }

    #[test]
    fn sd15_resolutions_at_64() {
        let l = LayerLayout::sd15();
        assert_eq!(l.len(), 16);
        assert_eq!(l.layer_size(0, (64, 64)).unwrap(), (64, 64));
        assert_eq!(l.layer_size(6, (64, 64)).unwrap(), (8, 8));
        assert_eq!(l.layer_size(15, (64, 64)).unwrap(), (64, 64));
        assert!(matches!(l.layer_size(16, (64, 64)), Err(Error::Config(_))));
    }
}
