use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::atlas::ObserverSet;
use crate::backend::{DenoiserBackend, TokenizedPrompt};
use crate::diffusion::{ddim_invert_step, Schedule};
use crate::error::{Error, Result};
use crate::io;
use crate::tensor::LatentTensor;

/// Latents `Z[0..=T]` saved during inversion; `Z[0]` is the encoded source.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTrajectory {
    entries: Vec<LatentTensor>,
}

impl DiffusionTrajectory {
    /// Checks the length and that every entry shares one shape.
    pub fn from_entries(entries: Vec<LatentTensor>, num_steps: usize) -> Result<Self> {
        if entries.len() != num_steps + 1 {
            return Err(Error::integrity(format!(
                "trajectory holds {} latents, expected {}",
                entries.len(),
                num_steps + 1
            )));
        }
        let shape = entries[0].shape();
        if let Some(t) = entries.iter().position(|z| z.shape() != shape) {
            return Err(Error::integrity(format!("trajectory entry {t} changes shape")));
        }
        Ok(Self { entries })
    }

    pub fn num_steps(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn get(&self, t: usize) -> Result<&LatentTensor> {
        self.entries
            .get(t)
            .ok_or_else(|| Error::integrity(format!("trajectory has no entry for step {t}")))
    }

    pub fn source(&self) -> &LatentTensor {
        &self.entries[0]
    }

    pub fn last(&self) -> &LatentTensor {
        self.entries.last().expect("trajectory is never empty")
    }

    pub fn entries(&self) -> &[LatentTensor] {
        &self.entries
    }

    /// Write `manifest.json` plus one raw little-endian file per step.
    pub fn dump(&self, dir: &Path, schedule: &Schedule) -> Result<()> {
        if schedule.num_steps() != self.num_steps() {
            return Err(Error::contract("schedule length does not match trajectory"));
        }
        io::ensure_dir(dir)?;
        let (c, h, w) = self.source().shape();
        let files: Vec<String> = (0..self.entries.len()).map(step_file).collect();
        for (z, name) in self.entries.iter().zip(&files) {
            io::write_f64s(&dir.join(name), z.data().iter().copied())?;
        }
        let manifest = TrajectoryManifest {
            shape: [c, h, w],
            dtype: "f64-le".into(),
            num_steps: self.num_steps(),
            schedule_hash: schedule.fingerprint(),
            files,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(path, e))
    }

    /// Load a dump written by [`DiffusionTrajectory::dump`]; the schedule must match the one it was made with.
    pub fn load(dir: &Path, schedule: &Schedule) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: TrajectoryManifest = serde_json::from_str(&text)?;
        if manifest.dtype != "f64-le" {
            return Err(Error::integrity(format!("unsupported dtype {}", manifest.dtype)));
        }
        if manifest.schedule_hash != schedule.fingerprint() {
            return Err(Error::integrity("trajectory was recorded with a different schedule"));
        }
        if manifest.files.len() != manifest.num_steps + 1 {
            return Err(Error::integrity("manifest file list has the wrong length"));
        }
        let [c, h, w] = manifest.shape;
        let entries = manifest
            .files
            .iter()
            .map(|name| {
                let values = io::read_f64s(&dir.join(name), c * h * w)?;
                let arr = Array3::from_shape_vec((c, h, w), values)
                    .map_err(|e| Error::integrity(e.to_string()))?;
                LatentTensor::new(arr)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries, manifest.num_steps)
    }
}

fn step_file(t: usize) -> String {
    format!("z_{t:03}.bin")
}

/// Sidecar describing a trajectory (or latent snapshot) dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub shape: [usize; 3],
    pub dtype: String,
    pub num_steps: usize,
    pub schedule_hash: String,
    pub files: Vec<String>,
}

/// DDIM-invert `z0` through every step of `schedule`.
///
/// With a prompt, each step first shows the prompted pass to the observers
/// (cross-attention capture), then makes an unprompted prediction whose noise
/// estimate drives the latent update. Without a prompt a single unprompted
/// prediction does both.
pub fn invert_trajectory(
    z0: &LatentTensor,
    backend: &dyn DenoiserBackend,
    schedule: &Schedule,
    prompt: Option<&TokenizedPrompt>,
    observers: &mut ObserverSet<'_>,
) -> Result<DiffusionTrajectory> {
    let steps = schedule.num_steps();
    let mut entries = Vec::with_capacity(steps + 1);
    entries.push(z0.clone());
    for t in 0..steps {
        let z = &entries[t];
        let eps = match prompt {
            Some(p) => {
                backend
                    .observe_cross_attention(z, t, p, observers)
                    .map_err(|e| e.at_step(t))?;
                backend
                    .predict_noise(z, t, None, &mut ObserverSet::none(), None)
                    .map_err(|e| e.at_step(t))?
            }
            None => backend
                .predict_noise(z, t, None, observers, None)
                .map_err(|e| e.at_step(t))?,
        };
        let next = ddim_invert_step(z, &eps, t + 1, schedule)?;
        entries.push(next);
    }
    DiffusionTrajectory::from_entries(entries, steps)
}
