use std::collections::BTreeSet;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::atlas::{layer_masks, store_kv, InjectionPlan, KvRecorder, ObserverSet, StepWindow};
use crate::backend::DenoiserBackend;
use crate::destroy::noise::{latent_replace, noise_fill};
use crate::diffusion::{ddim_denoise_step, DiffusionTrajectory, Schedule};
use crate::error::{Error, Result};
use crate::localize::dilate;
use crate::tensor::{Image, LatentTensor, Mask};

/// First layer plus the last two.
pub fn default_kv_layers(num_layers: usize) -> BTreeSet<usize> {
    [0, num_layers.saturating_sub(2), num_layers.saturating_sub(1)]
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DestructionConfig {
    pub kv_window: StepWindow,
    /// `None` picks [`default_kv_layers`] for the backend.
    pub kv_layers: Option<BTreeSet<usize>>,
    /// Step at which background latents are copied back in; `None` disables it.
    pub replace_step: Option<usize>,
    pub k2: usize,
    pub noise_seed: u64,
    pub sigma_floor: f64,
    /// Prompt words for the edited pass; `None` runs it unprompted.
    pub prompt: Option<Vec<String>>,
    /// Keep every edited latent for inspection.
    pub keep_snapshots: bool,
}

impl Default for DestructionConfig {
    fn default() -> Self {
        Self {
            kv_window: StepWindow::new(1, 45),
            kv_layers: None,
            replace_step: Some(2),
            k2: 9,
            noise_seed: 0,
            sigma_floor: 1e-6,
            prompt: None,
            keep_snapshots: false,
        }
    }
}

impl DestructionConfig {
    pub fn validate(&self, num_steps: usize) -> Result<()> {
        if self.k2 == 0 || self.k2.is_multiple_of(2) {
            return Err(Error::config(format!("k2 must be odd and positive, got {}", self.k2)));
        }
        if let Some(r) = self.replace_step {
            if r == 0 || r > num_steps {
                return Err(Error::config(format!("replace step {r} outside [1, {num_steps}]")));
            }
        }
        let w = self.kv_window;
        if !w.is_empty() && (w.first == 0 || w.last > num_steps) {
            return Err(Error::config(format!(
                "kv window [{}, {}] outside [1, {num_steps}]",
                w.first, w.last
            )));
        }
        Ok(())
    }
}

/// Latent-resolution masks driving one restoration.
#[derive(Debug, Clone, PartialEq)]
pub struct RestoreMasks {
    /// Text region: destroyed and used for key/value combination.
    pub text: Mask,
    /// Region kept from the edited pass at the replacement step.
    pub replace: Mask,
}

impl RestoreMasks {
    /// Detected text: replacement keeps a `k2` dilation of the text mask.
    pub fn dilated(text_latent: &Mask, k2: usize) -> Result<Self> {
        Ok(Self {
            replace: dilate(text_latent, k2)?,
            text: text_latent.clone(),
        })
    }

    /// A user-drawn mask is used as is for replacement.
    pub fn exact(text_latent: &Mask) -> Self {
        Self {
            text: text_latent.clone(),
            replace: text_latent.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestoreReport {
    /// Steps whose edited prediction used combined keys/values, descending.
    pub kv_steps: Vec<usize>,
    pub replaced_at: Option<usize>,
    /// The text mask was empty, so the source reconstruction was returned.
    pub identity: bool,
}

#[derive(Debug, Clone)]
pub struct Restoration {
    pub image: Image,
    pub report: RestoreReport,
    /// Edited latents indexed by step, after any replacement at that step.
    pub snapshots: Option<DiffusionTrajectory>,
    pub latent: LatentTensor,
}

/// Destroy the text latents of `trajectory`'s start code and denoise back to an image.
///
/// Each step runs a source pass on the stored latent, whose keys/values replace the
/// edited pass's own outside the text mask, and an edited pass that moves the
/// destroyed latent one step. The source branch never advances on its own: its
/// next input is the stored latent again.
pub fn restore(
    trajectory: &DiffusionTrajectory,
    masks: &RestoreMasks,
    backend: &dyn DenoiserBackend,
    schedule: &Schedule,
    cfg: &DestructionConfig,
) -> Result<Restoration> {
    let steps = trajectory.num_steps();
    if schedule.num_steps() != steps {
        return Err(Error::contract(format!(
            "schedule has {} steps, trajectory {steps}",
            schedule.num_steps()
        )));
    }
    cfg.validate(steps)?;
    let spatial = trajectory.last().spatial();
    for (m, what) in [(&masks.text, "text"), (&masks.replace, "replace")] {
        if m.size() != spatial {
            return Err(Error::contract(format!(
                "{what} mask {:?} does not match latent {spatial:?}",
                m.size()
            )));
        }
    }
    if masks.text.is_empty() {
        let latent = trajectory.get(0)?.clone();
        return Ok(Restoration {
            image: backend.decode(&latent)?,
            report: RestoreReport {
                identity: true,
                ..Default::default()
            },
            snapshots: cfg
                .keep_snapshots
                .then(|| trajectory.clone()),
            latent,
        });
    }

    let layers = cfg
        .kv_layers
        .clone()
        .unwrap_or_else(|| default_kv_layers(backend.num_attention_layers()));
    if let Some(&bad) = layers.iter().find(|&&l| l >= backend.num_attention_layers()) {
        return Err(Error::config(format!(
            "kv layer {bad} out of range, backend has {}",
            backend.num_attention_layers()
        )));
    }
    let sizes = layers
        .iter()
        .map(|&l| backend.layer_size(l, spatial).map(|s| (l, s)))
        .collect::<Result<Vec<_>>>()?;
    let kv_masks = layer_masks(&masks.text, sizes);
    let prompt = match &cfg.prompt {
        Some(words) => Some(backend.tokenize(words)?),
        None => None,
    };

    let mut z = noise_fill(trajectory.last(), &masks.text, cfg.noise_seed, cfg.sigma_floor)?;
    let mut report = RestoreReport::default();
    let mut snapshots = cfg.keep_snapshots.then(|| vec![None; steps + 1]);
    if let Some(s) = snapshots.as_mut() {
        s[steps] = Some(z.clone());
    }
    for t in (1..=steps).rev() {
        if cfg.replace_step == Some(t) {
            z = latent_replace(&z, trajectory.get(t)?, &masks.replace)?;
            report.replaced_at = Some(t);
            if let Some(s) = snapshots.as_mut() {
                s[t] = Some(z.clone());
            }
        }
        let eps = if cfg.kv_window.contains(t) && !layers.is_empty() {
            let mut recorder = KvRecorder::new(layers.clone());
            backend
                .predict_noise(trajectory.get(t)?, t, prompt.as_ref(), &mut ObserverSet::with(&mut recorder), None)
                .map_err(|e| e.at_step(t))?;
            let store = store_kv(recorder, &layers, [t])?;
            let plan = InjectionPlan::new(StepWindow::new(t, t), layers.clone(), kv_masks.clone(), &store)?;
            report.kv_steps.push(t);
            backend
                .predict_noise(&z, t, prompt.as_ref(), &mut ObserverSet::none(), Some(&plan))
                .map_err(|e| e.at_step(t))?
        } else {
            backend
                .predict_noise(&z, t, prompt.as_ref(), &mut ObserverSet::none(), None)
                .map_err(|e| e.at_step(t))?
        };
        z = ddim_denoise_step(&z, &eps, t, schedule)?;
        if let Some(s) = snapshots.as_mut() {
            s[t - 1] = Some(z.clone());
        }
        debug!("restore step {t} done");
    }
    let snapshots = match snapshots {
        Some(s) => Some(DiffusionTrajectory::from_entries(
            s.into_iter().map(|z| z.expect("every step recorded")).collect(),
            steps,
        )?),
        None => None,
    };
    Ok(Restoration {
        image: backend.decode(&z)?,
        report,
        snapshots,
        latent: z,
    })
}
