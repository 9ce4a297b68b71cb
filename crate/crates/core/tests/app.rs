use std::fs;
use std::path::Path;

use textscrub::app::{batch, make_backend, run_file, run_image, BackendKind, NonDivisible, PipelineConfig};
use textscrub::fixtures::glyph_fixtures;
use textscrub::io::{read_image, write_image, write_mask};
use textscrub::metrics::PSNR_CAP_DB;
use textscrub::tensor::Image;
use textscrub::Error;

fn quick() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for (k, v) in [("steps", "20"), ("kv_steps", "1-19")] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn write_fixture(dir: &Path, index: usize) -> String {
    let f = &glyph_fixtures()[index];
    let name = format!("{}.png", f.name);
    write_image(&dir.join(&name), &f.image).unwrap();
    name
}

#[test]
fn single_run_writes_artifacts_and_keeps_background() {
    let tmp = tempfile::tempdir().unwrap();
    let name = write_fixture(tmp.path(), 2);
    let out_dir = tmp.path().join("out");
    let out = run_file(&quick(), &tmp.path().join(&name), None, &out_dir).unwrap();
    for f in ["m1.png", "m2.png", "m3.png", "aggregated.png", "output.png", "report.json", "timings.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let written = read_image(&out_dir.join("output.png")).unwrap();
    assert_eq!(written.size(), glyph_fixtures()[2].image.size());
    assert!(!out.report.user_mask && !out.report.no_text);
    let bg = out.report.metrics_background.unwrap();
    assert!(bg.psnr_db >= 35.0, "background PSNR {}", bg.psnr_db);
    assert!(out.report.metrics_full.unwrap().psnr_db < bg.psnr_db);
}

#[test]
fn user_mask_takes_the_mask_branch() {
    let tmp = tempfile::tempdir().unwrap();
    let f = &glyph_fixtures()[2];
    let name = write_fixture(tmp.path(), 2);
    let mask_path = tmp.path().join("mask.png");
    write_mask(&mask_path, &f.glyphs).unwrap();
    let out = run_file(&quick(), &tmp.path().join(&name), Some(&mask_path), &tmp.path().join("out")).unwrap();
    assert!(out.report.user_mask);
    assert_eq!(out.localization.masks.m1, f.glyphs);
    assert!(out.localization.aggregated.is_none());
    assert!(!tmp.path().join("out/aggregated.png").exists());
}

#[test]
fn dry_run_writes_masks_only() {
    let tmp = tempfile::tempdir().unwrap();
    let name = write_fixture(tmp.path(), 0);
    let mut cfg = quick();
    cfg.set("dry_run", "true").unwrap();
    let out = run_file(&cfg, &tmp.path().join(&name), None, &tmp.path().join("out")).unwrap();
    assert!(out.image.is_none() && out.report.restore.is_none());
    assert!(tmp.path().join("out/m3.png").is_file());
    assert!(!tmp.path().join("out/output.png").exists());
}

#[test]
fn blank_image_is_returned_unchanged() {
    let cfg = quick();
    let backend = make_backend(&cfg).unwrap();
    let blank = Image::filled(64, 64, [200.0, 190.0, 180.0]);
    let out = run_image(&cfg, backend.as_ref(), "blank", &blank, None).unwrap();
    assert!(out.report.no_text);
    assert_eq!(out.image.unwrap(), blank);
    assert_eq!(out.report.metrics_full.unwrap().psnr_db, PSNR_CAP_DB);
}

#[test]
fn non_divisible_images_follow_the_policy() {
    let cfg = quick();
    let backend = make_backend(&cfg).unwrap();
    let odd = Image::filled(66, 70, [10.0, 20.0, 30.0]);
    assert!(matches!(run_image(&cfg, backend.as_ref(), "odd", &odd, None), Err(Error::Contract(_))));
    let resize = PipelineConfig {
        non_divisible: NonDivisible::Resize,
        ..quick()
    };
    let out = run_image(&resize, backend.as_ref(), "odd", &odd, None).unwrap();
    assert_eq!(out.image.unwrap().size(), (66, 70));
}

#[test]
fn adapter_backend_is_a_config_error() {
    let cfg = PipelineConfig {
        backend: BackendKind::Adapter,
        ..quick()
    };
    assert!(matches!(make_backend(&cfg), Err(Error::Config(_))));
}

#[test]
fn batch_runs_every_png_and_records_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("in");
    fs::create_dir(&inputs).unwrap();
    write_fixture(&inputs, 0);
    write_fixture(&inputs, 2);
    write_image(&inputs.join("bad.png"), &Image::filled(30, 30, [0.0; 3])).unwrap();
    fs::write(inputs.join("notes.txt"), "skipped").unwrap();
    let out = tmp.path().join("out");
    let mut cfg = quick();
    cfg.set("jobs", "2").unwrap();
    let report = batch(&cfg, &inputs, None, &out).unwrap();
    assert_eq!(report.images.len(), 3);
    assert_eq!(report.failures, 1);
    let bad = report.images.iter().find(|e| e.image == "bad.png").unwrap();
    assert!(!bad.ok && bad.error.is_some());
    for stem in ["hello", "exit_small"] {
        assert!(out.join(stem).join("output.png").is_file(), "{stem}");
    }
    assert!(report.mean_background_psnr_db.unwrap() >= 35.0);
    let saved = PipelineConfig::parse(&fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(saved.jobs, 2);
    assert_eq!(saved.steps, 20);
}

#[test]
fn batch_on_an_empty_directory_is_an_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let report = batch(&quick(), tmp.path(), None, &tmp.path().join("out")).unwrap();
    assert!(report.images.is_empty());
    assert_eq!(report.failures, 0);
    assert!(report.mean_psnr_db.is_none());
    assert!(tmp.path().join("out/report.json").is_file());
}

#[test]
fn config_text_overrides_earlier_settings() {
    let mut cfg = PipelineConfig::default();
    cfg.set("seed", "5").unwrap();
    cfg.set("k1", "3").unwrap();
    cfg.apply_text("# later source wins\nseed = 7\n").unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.k1, 3);
    assert!(cfg.apply_text("nonsense = 1").is_err());
    assert!(cfg.apply_text("seed = 1\nseed = 2").is_err());
}
