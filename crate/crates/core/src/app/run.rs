//! Single-image runs and directory batches, with their on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use serde::{Deserialize, Serialize};

use crate::app::config::{BackendKind, NonDivisible, PipelineConfig};
use crate::backend::{DenoiserBackend, ToyBackend};
use crate::destroy::{restore, RestoreMasks, RestoreReport};
use crate::error::{Error, Result};
use crate::imageops::{resize_bicubic, resize_nearest, upsample_blocks};
use crate::io::{ensure_dir, read_image, read_mask, write_heatmap, write_image, write_mask};
use crate::localize::{localize, Localization};
use crate::metrics::{compare, MetricReport};
use crate::par;
use crate::tensor::{Image, Mask, Rect};

/// Build the backend a config asks for. Each call is an independent session.
pub fn make_backend(cfg: &PipelineConfig) -> Result<Box<dyn DenoiserBackend>> {
    match cfg.backend {
        BackendKind::Toy => Ok(Box::new(ToyBackend::new(cfg.toy_spec())?)),
        BackendKind::Adapter => Err(Error::config(
            "the adapter backend needs pretrained weights and is not bundled; use backend = toy",
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskAreas {
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
    pub m3_latent: usize,
}

/// Everything about one image that is a function of its inputs and the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub image: String,
    pub size: (usize, usize),
    pub backend: String,
    pub user_mask: bool,
    pub no_text: bool,
    pub dry_run: bool,
    pub areas: MaskAreas,
    pub boxes: Vec<Rect>,
    pub warnings: Vec<String>,
    pub restore: Option<RestoreReport>,
    pub metrics_full: Option<MetricReport>,
    pub metrics_background: Option<MetricReport>,
    pub schedule_hash: String,
}

/// Wall-clock seconds per stage. Kept apart from [`RunReport`] so reports stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub localize: f64,
    pub restore: f64,
    pub metrics: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub image: Option<Image>,
    pub localization: Localization,
    pub report: RunReport,
    pub timings: Timings,
    /// Image-resolution region where restoration may change pixels.
    pub footprint: Mask,
}

fn working_image(image: &Image, factor: usize, policy: NonDivisible) -> Result<Image> {
    let (h, w) = image.size();
    if h % factor == 0 && w % factor == 0 {
        return Ok(image.clone());
    }
    match policy {
        NonDivisible::Reject => Err(Error::contract(format!(
            "image {h}x{w} is not a multiple of {factor}; set non_divisible = resize to resample it"
        ))),
        NonDivisible::Resize => Ok(resize_bicubic(image, h.div_ceil(factor) * factor, w.div_ceil(factor) * factor).clamped()),
    }
}

/// Localize, destroy and restore one image in memory.
pub fn run_image(
    cfg: &PipelineConfig,
    backend: &dyn DenoiserBackend,
    name: &str,
    input: &Image,
    user_mask: Option<&Mask>,
) -> Result<RunOutput> {
    let started = Instant::now();
    let mut timings = Timings::default();
    let size = input.size();
    if let Some(m) = user_mask {
        if m.size() != size {
            return Err(Error::contract(format!("mask {:?} does not match image {size:?}", m.size())));
        }
    }
    let factor = backend.downsample_factor();
    let work = working_image(input, factor, cfg.non_divisible)?;
    let resized = work.size() != size;
    let work_mask = user_mask.map(|m| if resized { resize_nearest(m, work.height(), work.width()) } else { m.clone() });

    let t = Instant::now();
    let loc = localize(&work, backend, &cfg.localize_config(), work_mask.as_ref())?;
    timings.localize = t.elapsed().as_secs_f64();

    let masks = if user_mask.is_some() {
        RestoreMasks::exact(&loc.masks.m3_latent)
    } else {
        RestoreMasks::dilated(&loc.masks.m3_latent, cfg.k2)?
    };
    let footprint_work = upsample_blocks(&masks.replace, factor);
    let footprint = if resized { resize_nearest(&footprint_work, size.0, size.1) } else { footprint_work };

    let (image, restore_report) = if cfg.dry_run {
        (None, None)
    } else if loc.no_text {
        (Some(input.clone()), None)
    } else {
        let t = Instant::now();
        let dc = cfg.destruction_config(backend.num_attention_layers());
        let r = restore(&loc.trajectory, &masks, backend, &loc.schedule, &dc)?;
        timings.restore = t.elapsed().as_secs_f64();
        let out = if resized { resize_bicubic(&r.image, size.0, size.1).clamped() } else { r.image };
        (Some(out), Some(r.report))
    };

    let t = Instant::now();
    let (metrics_full, metrics_background) = match &image {
        Some(img) if size.0 >= 11 && size.1 >= 11 => (
            Some(compare(img, input, None)?),
            Some(compare(img, input, Some(&footprint))?),
        ),
        _ => (None, None),
    };
    timings.metrics = t.elapsed().as_secs_f64();
    timings.total = started.elapsed().as_secs_f64();

    let m = &loc.masks;
    let report = RunReport {
        image: name.to_string(),
        size,
        backend: backend.name().to_string(),
        user_mask: user_mask.is_some(),
        no_text: loc.no_text,
        dry_run: cfg.dry_run,
        areas: MaskAreas {
            m1: m.m1.count(),
            m2: m.m2.count(),
            m3: m.m3.count(),
            m3_latent: m.m3_latent.count(),
        },
        boxes: m.boxes.clone(),
        warnings: loc.warnings.clone(),
        restore: restore_report,
        metrics_full,
        metrics_background,
        schedule_hash: loc.schedule.fingerprint(),
    };
    Ok(RunOutput {
        image,
        localization: loc,
        report,
        timings,
        footprint,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write a run's artifacts into `dir`.
pub fn write_artifacts(cfg: &PipelineConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let m = &out.localization.masks;
    let size = out.report.size;
    let at_size = |mask: &Mask| if mask.size() == size { mask.clone() } else { resize_nearest(mask, size.0, size.1) };
    write_mask(&dir.join("m1.png"), &at_size(&m.m1))?;
    write_mask(&dir.join("m2.png"), &at_size(&m.m2))?;
    write_mask(&dir.join("m3.png"), &at_size(&m.m3))?;
    if let Some(agg) = &out.localization.aggregated {
        write_heatmap(&dir.join("aggregated.png"), agg.normalized.view())?;
    }
    if let Some(img) = &out.image {
        write_image(&dir.join("output.png"), img)?;
    }
    if cfg.dump_attention {
        let adir = dir.join("attention");
        ensure_dir(&adir)?;
        if let Some(stack) = &out.localization.attention {
            let latent = out.localization.trajectory.source().spatial();
            let mut words: Vec<String> = stack.tracked_words().to_vec();
            words.push(crate::atlas::END_TOKEN.to_string());
            for word in words {
                if let Some(map) = stack.mean_word_map(&word, latent) {
                    write_heatmap(&adir.join(format!("{word}.png")), map.view())?;
                }
            }
        }
        out.localization
            .trajectory
            .dump(&dir.join("trajectory"), &out.localization.schedule)?;
    }
    write_json(&dir.join("report.json"), &out.report)?;
    write_json(&dir.join("timings.json"), &out.timings)?;
    Ok(())
}

/// Read, run and write one image file.
pub fn run_file(cfg: &PipelineConfig, input: &Path, mask: Option<&Path>, out_dir: &Path) -> Result<RunOutput> {
    let backend = make_backend(cfg)?;
    let image = read_image(input)?;
    let user_mask = mask.map(read_mask).transpose()?;
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string());
    let out = run_image(cfg, backend.as_ref(), &name, &image, user_mask.as_ref())?;
    write_artifacts(cfg, &out, out_dir)?;
    info!("{name}: done in {:.2}s", out.timings.total);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub image: String,
    pub ok: bool,
    pub error: Option<String>,
    pub psnr_db: Option<f64>,
    pub mssim: Option<f64>,
    pub background_psnr_db: Option<f64>,
    pub background_mssim: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<BatchEntry>,
    pub failures: usize,
    pub mean_psnr_db: Option<f64>,
    pub mean_mssim: Option<f64>,
    pub mean_background_psnr_db: Option<f64>,
    pub mean_background_mssim: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl BatchReport {
    fn from_entries(images: Vec<BatchEntry>) -> Self {
        Self {
            failures: images.iter().filter(|e| !e.ok).count(),
            mean_psnr_db: mean(images.iter().map(|e| e.psnr_db)),
            mean_mssim: mean(images.iter().map(|e| e.mssim)),
            mean_background_psnr_db: mean(images.iter().map(|e| e.background_psnr_db)),
            mean_background_mssim: mean(images.iter().map(|e| e.background_mssim)),
            images,
        }
    }
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Run every PNG in `input_dir`; outputs go to `out_dir/<file stem>/`, the aggregate to
/// `out_dir/report.json`. A `mask_dir` supplies user masks by matching file name.
/// Per-image failures are recorded, not raised; configuration errors are raised.
pub fn batch(cfg: &PipelineConfig, input_dir: &Path, mask_dir: Option<&Path>, out_dir: &Path) -> Result<BatchReport> {
    cfg.validate()?;
    make_backend(cfg)?;
    ensure_dir(out_dir)?;
    let files = png_files(input_dir)?;
    let entries = par::map_jobs(files.len(), cfg.jobs, |i| {
        let path = &files[i];
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stem = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mask = mask_dir.map(|d| d.join(&name)).filter(|p| p.exists());
        match run_file(cfg, path, mask.as_deref(), &out_dir.join(&stem)) {
            Ok(out) => BatchEntry {
                image: name,
                ok: true,
                error: None,
                psnr_db: out.report.metrics_full.map(|m| m.psnr_db),
                mssim: out.report.metrics_full.map(|m| m.mssim),
                background_psnr_db: out.report.metrics_background.map(|m| m.psnr_db),
                background_mssim: out.report.metrics_background.map(|m| m.mssim),
            },
            Err(e) => {
                error!("{name}: {e}");
                BatchEntry {
                    image: name,
                    ok: false,
                    error: Some(e.to_string()),
                    psnr_db: None,
                    mssim: None,
                    background_psnr_db: None,
                    background_mssim: None,
                }
            }
        }
    });
    let report = BatchReport::from_entries(entries);
    write_json(&out_dir.join("report.json"), &report)?;
    // paths are left out so identical runs into different directories match byte for byte
    let settings = PipelineConfig {
        input: None,
        mask: None,
        output_dir: None,
        ..cfg.clone()
    };
    let path = out_dir.join("config.txt");
    fs::write(&path, settings.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
