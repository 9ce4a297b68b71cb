use log::{info, warn};

use crate::atlas::{aggregate_maps, AggregatedMap, AggregationScope, CrossAttentionCollector, ObserverSet, TokenMapStack};
use crate::backend::{DenoiserBackend, DEFAULT_PROMPT_WORDS};
use crate::diffusion::{invert_trajectory, DiffusionTrajectory, Schedule};
use crate::error::{Error, Result};
use crate::imageops::max_pool;
use crate::localize::crop::{crop_regions, CropRegion};
use crate::localize::morphology::extract_boxes;
use crate::localize::stages::{combine_stage2, finalize_mask, segment_stage1, segment_stage2, segment_stage3, Stage1};
use crate::par;
use crate::tensor::{Image, Mask, Rect};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeConfig {
    pub steps: usize,
    pub gamma: f64,
    pub k1: usize,
    pub stage2_k: usize,
    /// Inversion steps for the per-crop passes; `None` reuses `steps`.
    pub stage2_steps: Option<usize>,
    /// Fraction of the box size added on every side of a crop.
    pub crop_padding: f64,
    /// Smallest component kept as a box, in image pixels; `None` means four latent cells.
    pub min_box_area: Option<usize>,
    pub prompt: Vec<String>,
    pub seed: u64,
    pub scope: AggregationScope,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            gamma: 1.5,
            k1: 5,
            stage2_k: 2,
            stage2_steps: None,
            crop_padding: 0.1,
            min_box_area: None,
            prompt: DEFAULT_PROMPT_WORDS.iter().map(|w| w.to_string()).collect(),
            seed: 0,
            scope: AggregationScope::all(),
        }
    }
}

impl LocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.stage2_steps == Some(0) {
            return Err(Error::config("inversion needs at least one step"));
        }
        if self.k1 == 0 || self.k1.is_multiple_of(2) {
            return Err(Error::config(format!("k1 must be odd and positive, got {}", self.k1)));
        }
        if !(2..=3).contains(&self.stage2_k) {
            return Err(Error::config(format!("stage2_k must be 2 or 3, got {}", self.stage2_k)));
        }
        if !(self.crop_padding >= 0.0 && self.crop_padding.is_finite()) {
            return Err(Error::config("crop padding must be finite and >= 0"));
        }
        if self.prompt.is_empty() {
            return Err(Error::config("prompt needs at least one word"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// The masks of every stage, at image resolution unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct HierMask {
    pub m1: Mask,
    pub m2: Mask,
    pub m3: Mask,
    /// `m3` max-pooled to latent resolution.
    pub m3_latent: Mask,
    pub boxes: Vec<Rect>,
}

impl HierMask {
    pub fn empty(image: (usize, usize), factor: usize) -> Self {
        let m = Mask::empty(image.0, image.1);
        Self {
            m3_latent: max_pool(&m, factor),
            m1: m.clone(),
            m2: m.clone(),
            m3: m,
            boxes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub trajectory: DiffusionTrajectory,
    pub schedule: Schedule,
    pub masks: HierMask,
    /// Stage-1 aggregated map; absent when a user mask replaced stage 1.
    pub aggregated: Option<AggregatedMap>,
    /// Raw stage-1 attention maps; absent when a user mask replaced stage 1.
    pub attention: Option<TokenMapStack>,
    pub no_text: bool,
    /// Fallbacks taken along the way.
    pub warnings: Vec<String>,
}

struct CropOutcome {
    mask: Mask,
    warning: Option<String>,
}

fn stage2_crop(
    crop: &CropRegion,
    index: usize,
    backend: &dyn DenoiserBackend,
    cfg: &LocalizeConfig,
    schedule: &Schedule,
    m1: &Mask,
) -> Result<CropOutcome> {
    let z = backend.encode(&crop.native)?;
    let prompt = backend.tokenize(&cfg.prompt)?;
    let mut collector = CrossAttentionCollector::new(&prompt);
    invert_trajectory(&z, backend, schedule, Some(&prompt), &mut ObserverSet::with(&mut collector))?;
    let agg = aggregate_maps(&collector.into_stack()?, cfg.gamma, z.spatial(), &cfg.scope)?;
    let (sub, fallback) = segment_stage2(&agg, (crop.rect.height(), crop.rect.width()), cfg.stage2_k, cfg.seed)?;
    Ok(CropOutcome {
        mask: crop.place_mask(&sub, m1.size()).and(m1)?,
        warning: fallback.then(|| format!("stage 2: crop {index} degenerate, kept whole crop")),
    })
}

fn stage3_crop(crop: &CropRegion, index: usize, background: &Mask, seed: u64) -> Result<CropOutcome> {
    let reference = crop.crop_mask(background);
    let (sub, fallback) = segment_stage3(&crop.original, &reference, seed)?;
    Ok(CropOutcome {
        mask: crop.place_mask(&sub, background.size()),
        warning: fallback.then(|| format!("stage 3: crop {index} degenerate, no text kept")),
    })
}

fn collect(outcomes: Vec<Result<CropOutcome>>, warnings: &mut Vec<String>) -> Result<Vec<Mask>> {
    let mut masks = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let o = o?;
        warnings.extend(o.warning);
        masks.push(o.mask);
    }
    Ok(masks)
}

/// Invert the image and localize its text.
///
/// Without `user_mask` the inversion also captures cross-attention for the coarse
/// mask m1; with it, m1 is the user mask and the inversion runs unprompted.
/// Crops around m1's components are then refined by re-inverted attention (m2)
/// and by colour clustering (m3).
pub fn localize(
    image: &Image,
    backend: &dyn DenoiserBackend,
    cfg: &LocalizeConfig,
    user_mask: Option<&Mask>,
) -> Result<Localization> {
    cfg.validate()?;
    let size = image.size();
    let factor = backend.downsample_factor();
    if let Some(m) = user_mask {
        if m.size() != size {
            return Err(Error::contract(format!("user mask {:?} does not match image {size:?}", m.size())));
        }
    }
    let schedule = Schedule::default_for(cfg.steps)?;
    let z0 = backend.encode(image)?;
    let mut warnings = Vec::new();

    let (trajectory, m1, aggregated, attention) = match user_mask {
        Some(m) => {
            let traj = invert_trajectory(&z0, backend, &schedule, None, &mut ObserverSet::none())?;
            (traj, Some(m.clone()), None, None)
        }
        None => {
            let prompt = backend.tokenize(&cfg.prompt)?;
            let mut collector = CrossAttentionCollector::new(&prompt);
            let traj = invert_trajectory(&z0, backend, &schedule, Some(&prompt), &mut ObserverSet::with(&mut collector))?;
            let stack = collector.into_stack()?;
            let agg = aggregate_maps(&stack, cfg.gamma, z0.spatial(), &cfg.scope)?;
            let m1 = match segment_stage1(&agg, size, cfg.seed)? {
                Stage1::Found(m) => Some(m),
                Stage1::NoTextFound => {
                    warnings.push("stage 1: aggregated map degenerate, no text found".to_string());
                    None
                }
            };
            (traj, m1, Some(agg), Some(stack))
        }
    };

    let no_text = |trajectory, aggregated, attention, mut warnings: Vec<String>, reason: &str| {
        info!("{reason}");
        warnings.push(reason.to_string());
        Localization {
            trajectory,
            schedule: schedule.clone(),
            masks: HierMask::empty(size, factor),
            aggregated,
            attention,
            no_text: true,
            warnings,
        }
    };
    let Some(m1) = m1 else {
        return Ok(no_text(trajectory, aggregated, attention, warnings, "no text found"));
    };

    let min_area = cfg.min_box_area.unwrap_or(4 * factor * factor);
    let boxes = extract_boxes(&m1, min_area);
    let crops = crop_regions(image, &boxes, cfg.crop_padding, backend.native_size());
    if crops.is_empty() {
        let mut empty = no_text(trajectory, aggregated, attention, warnings, "no usable text boxes");
        empty.masks.m1 = m1;
        return Ok(empty);
    }

    let schedule2 = match cfg.stage2_steps {
        Some(s) if s != cfg.steps => Schedule::default_for(s)?,
        _ => schedule.clone(),
    };
    let placed = collect(
        par::map_range(crops.len(), |i| stage2_crop(&crops[i], i, backend, cfg, &schedule2, &m1)),
        &mut warnings,
    )?;
    let m2 = combine_stage2(size, &placed, cfg.k1)?;
    let background = m1.minus(&m2)?;
    let subs = collect(
        par::map_range(crops.len(), |i| stage3_crop(&crops[i], i, &background, cfg.seed)),
        &mut warnings,
    )?;
    let (m3, m3_latent) = finalize_mask(&m1, &subs, factor)?;
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Localization {
        trajectory,
        schedule,
        no_text: m3.is_empty(),
        masks: HierMask {
            m1,
            m2,
            m3,
            m3_latent,
            boxes: crops.iter().map(|c| c.bbox).collect(),
        },
        aggregated,
        attention,
        warnings,
    })
}
