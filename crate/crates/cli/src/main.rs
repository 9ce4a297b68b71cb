use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use textscrub::app::{batch, run_file, PipelineConfig};
use textscrub::Error;

/// Remove scene text from images with a training-free diffusion pipeline.
///
/// Settings are resolved as defaults, then flags, then the --config file,
/// later sources winning.
#[derive(Debug, Parser)]
#[command(name = "textscrub", version)]
struct Cli {
    /// Input PNG, or a directory of PNGs for batch mode.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Coarse text mask (PNG, 255 = text); a directory of same-named masks in batch mode.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// toy | adapter
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    k2: Option<String>,
    /// Inclusive step window such as 1-45, or none.
    #[arg(long)]
    kv_steps: Option<String>,
    /// front1+back2, none, or a list such as 0,14,15 or 0-15.
    #[arg(long)]
    kv_layers: Option<String>,
    /// Step for background latent replacement, or none.
    #[arg(long)]
    replace_step: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Also write per-word attention maps and the inversion trajectory.
    #[arg(long)]
    dump_attention: bool,
    /// Localize only; write masks but no output image.
    #[arg(long)]
    dry_run: bool,
    /// Flat key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Images processed at once in batch mode.
    #[arg(long)]
    jobs: Option<String>,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::default();
    let text_flags = [
        ("backend", &cli.backend),
        ("steps", &cli.steps),
        ("gamma", &cli.gamma),
        ("k1", &cli.k1),
        ("k2", &cli.k2),
        ("kv_steps", &cli.kv_steps),
        ("kv_layers", &cli.kv_layers),
        ("replace_step", &cli.replace_step),
        ("seed", &cli.seed),
        ("jobs", &cli.jobs),
    ];
    for (key, value) in text_flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if cli.dump_attention {
        cfg.dump_attention = true;
    }
    if cli.dry_run {
        cfg.dry_run = true;
    }
    if cli.input.is_some() {
        cfg.input.clone_from(&cli.input);
    }
    if cli.mask.is_some() {
        cfg.mask.clone_from(&cli.mask);
    }
    if cli.output_dir.is_some() {
        cfg.output_dir.clone_from(&cli.output_dir);
    }
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &PipelineConfig) -> Result<bool, Error> {
    let input = cfg.input.as_ref().ok_or_else(|| Error::Config("no input given".into()))?;
    let out = cfg.output_dir.as_ref().ok_or_else(|| Error::Config("no output directory given".into()))?;
    if input.is_dir() {
        let report = batch(cfg, input, cfg.mask.as_deref(), out)?;
        println!(
            "{} images, {} failed, mean background PSNR {}",
            report.images.len(),
            report.failures,
            report.mean_background_psnr_db.map_or("n/a".to_string(), |p| format!("{p:.2} dB"))
        );
        Ok(report.failures == 0)
    } else {
        textscrub::app::make_backend(cfg)?;
        match run_file(cfg, input, cfg.mask.as_deref(), out) {
            Ok(r) => {
                if let Some(m) = r.report.metrics_background {
                    println!("{}: background PSNR {:.2} dB, MSSIM {:.4}", r.report.image, m.psnr_db, m.mssim);
                } else {
                    println!("{}: masks written", r.report.image);
                }
                Ok(true)
            }
            Err(e @ Error::Config(_)) => Err(e),
            Err(e) => {
                error!("{}: {e}", input.display());
                Ok(false)
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = resolve(&cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
