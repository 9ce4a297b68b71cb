//! The denoiser contract every pipeline stage talks to.
//!
//! A backend is stateless from the pipeline's point of view: attention
//! records flow out through the [`ObserverSet`] passed to each prediction,
//! and injected keys/values flow in through an [`InjectionPlan`]. That makes
//! one instance safe to share across threads; each concurrent pass brings
//! its own observers.

mod adapter;
mod prompt;
mod toy;

pub use adapter::{native_timestep, LayerLayout, SD15_LAYER_POOLING};
pub use prompt::{TokenizedPrompt, DEFAULT_PROMPT_WORDS};
pub use toy::{ToyBackend, ToyBackendSpec, ToyMode, TOY_DECODE_TOLERANCE};

use crate::atlas::{InjectionPlan, ObserverSet};
use crate::error::Result;
use crate::tensor::{Image, LatentTensor};

/// What a backend lets the pipeline observe and modify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub cross_attention_observable: bool,
    pub self_attention_hookable: bool,
}

pub trait DenoiserBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Image size `(height, width)` crops are resized to before encoding.
    fn native_size(&self) -> (usize, usize);

    /// Spatial downsampling between pixels and latent cells.
    fn downsample_factor(&self) -> usize;

    fn latent_channels(&self) -> usize;

    /// Latent shape of a native-size image.
    fn latent_shape(&self) -> (usize, usize, usize) {
        let (h, w) = self.native_size();
        let f = self.downsample_factor();
        (self.latent_channels(), h / f, w / f)
    }

    fn capabilities(&self) -> Capabilities;

    /// Number of self-attention layers, indexed `0..L` in forward order.
    /// Cross-attention layers share the same indices.
    fn num_attention_layers(&self) -> usize;

    /// Spatial size of `layer` for a latent of spatial size `latent`.
    fn layer_size(&self, layer: usize, latent: (usize, usize)) -> Result<(usize, usize)>;

    fn tokenize(&self, words: &[String]) -> Result<TokenizedPrompt>;

    fn encode(&self, image: &Image) -> Result<LatentTensor>;

    /// Decoded pixels are clamped to 0..=255.
    fn decode(&self, z: &LatentTensor) -> Result<Image>;

    /// Fire the cross-attention maps of `(z, t, prompt)` when only they are needed.
    /// The default runs a full prediction and drops the noise estimate.
    fn observe_cross_attention(
        &self,
        z: &LatentTensor,
        t: usize,
        prompt: &TokenizedPrompt,
        observers: &mut ObserverSet<'_>,
    ) -> Result<()> {
        self.predict_noise(z, t, Some(prompt), observers, None).map(|_| ())
    }

    /// Noise prediction at `(z, t)`.
    ///
    /// Fires cross-attention logits to `observers` when a prompt is given and
    /// self-attention keys/values (post-injection) for layers the observers
    /// ask for. Applies `injection` at the steps and layers it covers.
    fn predict_noise(
        &self,
        z: &LatentTensor,
        t: usize,
        prompt: Option<&TokenizedPrompt>,
        observers: &mut ObserverSet<'_>,
        injection: Option<&InjectionPlan<'_>>,
    ) -> Result<LatentTensor>;
}
