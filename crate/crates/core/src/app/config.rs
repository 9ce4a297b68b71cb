//! Pipeline configuration and its flat `key = value` text form.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::atlas::StepWindow;
use crate::backend::{ToyBackendSpec, ToyMode, DEFAULT_PROMPT_WORDS};
use crate::destroy::{default_kv_layers, DestructionConfig};
use crate::error::{Error, Result};
use crate::localize::LocalizeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Toy,
    Adapter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerPolicy {
    /// First layer and the last two of whatever backend runs.
    FrontOneBackTwo,
    Explicit(BTreeSet<usize>),
}

impl LayerPolicy {
    pub fn resolve(&self, num_layers: usize) -> BTreeSet<usize> {
        match self {
            LayerPolicy::FrontOneBackTwo => default_kv_layers(num_layers),
            LayerPolicy::Explicit(set) => set.clone(),
        }
    }
}

/// What to do with images whose sides are not multiples of the latent factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonDivisible {
    Reject,
    Resize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub steps: usize,
    pub gamma: f64,
    pub k1: usize,
    pub k2: usize,
    pub kv_steps: StepWindow,
    pub kv_layers: LayerPolicy,
    pub replace_step: Option<usize>,
    pub prompt: Vec<String>,
    pub seed: u64,
    pub backend: BackendKind,
    pub stage2_k: usize,
    pub stage2_steps: Option<usize>,
    pub crop_padding: f64,
    pub sigma_floor: f64,
    pub restore_prompted: bool,
    pub dump_attention: bool,
    pub dry_run: bool,
    pub non_divisible: NonDivisible,
    pub toy_mode: ToyMode,
    pub toy_native_size: usize,
    pub toy_downsample: usize,
    pub jobs: usize,
    pub input: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let toy = ToyBackendSpec::default();
        Self {
            steps: 50,
            gamma: 1.5,
            k1: 5,
            k2: 9,
            kv_steps: StepWindow::new(1, 45),
            kv_layers: LayerPolicy::FrontOneBackTwo,
            replace_step: Some(2),
            prompt: DEFAULT_PROMPT_WORDS.iter().map(|w| w.to_string()).collect(),
            seed: 0,
            backend: BackendKind::Toy,
            stage2_k: 2,
            stage2_steps: None,
            crop_padding: 0.1,
            sigma_floor: 1e-6,
            restore_prompted: false,
            dump_attention: false,
            dry_run: false,
            non_divisible: NonDivisible::Reject,
            toy_mode: toy.mode,
            toy_native_size: toy.native_size.0,
            toy_downsample: toy.downsample_factor,
            jobs: 1,
            input: None,
            mask: None,
            output_dir: None,
        }
    }
}

const KEYS: &[&str] = &[
    "steps",
    "gamma",
    "k1",
    "k2",
    "kv_steps",
    "kv_layers",
    "replace_step",
    "prompt",
    "seed",
    "backend",
    "stage2_k",
    "stage2_steps",
    "crop_padding",
    "sigma_floor",
    "restore_prompted",
    "dump_attention",
    "dry_run",
    "non_divisible",
    "toy_mode",
    "toy_lambda",
    "toy_mix",
    "toy_native_size",
    "toy_downsample",
    "jobs",
    "input",
    "mask",
    "output_dir",
];

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::config(format!("{key} = '{value}': expected {expected}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

/// `first-last` or `none`.
pub fn parse_window(value: &str) -> Result<StepWindow> {
    if value == "none" {
        return Ok(StepWindow::EMPTY);
    }
    let (a, b) = value
        .split_once('-')
        .ok_or_else(|| bad("kv_steps", value, "FIRST-LAST or none"))?;
    let (a, b): (usize, usize) = (num("kv_steps", a.trim())?, num("kv_steps", b.trim())?);
    // either order is accepted; there is no step 0 to denoise, so "15-0" means 1..=15
    Ok(StepWindow::new(a.min(b).max(1), a.max(b)))
}

fn show_window(w: StepWindow) -> String {
    if w.is_empty() {
        "none".to_string()
    } else {
        format!("{}-{}", w.first, w.last)
    }
}

/// `front1+back2`, `none`, a comma list, or `a-b` ranges inside a comma list.
pub fn parse_layers(value: &str) -> Result<LayerPolicy> {
    match value {
        "front1+back2" => return Ok(LayerPolicy::FrontOneBackTwo),
        "none" => return Ok(LayerPolicy::Explicit(BTreeSet::new())),
        _ => {}
    }
    let mut set = BTreeSet::new();
    for part in value.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (num("kv_layers", a)?, num("kv_layers", b)?);
                set.extend(a.min(b)..=a.max(b));
            }
            None => {
                set.insert(num("kv_layers", part)?);
            }
        }
    }
    Ok(LayerPolicy::Explicit(set))
}

fn show_layers(p: &LayerPolicy) -> String {
    match p {
        LayerPolicy::FrontOneBackTwo => "front1+back2".to_string(),
        LayerPolicy::Explicit(s) if s.is_empty() => "none".to_string(),
        LayerPolicy::Explicit(s) => s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
    }
}

fn optional<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value == none {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

impl PipelineConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "steps" => self.steps = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "k1" => self.k1 = num(key, v)?,
            "k2" => self.k2 = num(key, v)?,
            "kv_steps" => self.kv_steps = parse_window(v)?,
            "kv_layers" => self.kv_layers = parse_layers(v)?,
            "replace_step" => self.replace_step = optional(key, v, "none")?,
            "prompt" => self.prompt = v.split_whitespace().map(str::to_string).collect(),
            "seed" => self.seed = num(key, v)?,
            "backend" => {
                self.backend = match v {
                    "toy" => BackendKind::Toy,
                    "adapter" => BackendKind::Adapter,
                    _ => return Err(bad(key, v, "toy or adapter")),
                }
            }
            "stage2_k" => self.stage2_k = num(key, v)?,
            "stage2_steps" => self.stage2_steps = optional(key, v, "default")?,
            "crop_padding" => self.crop_padding = num(key, v)?,
            "sigma_floor" => self.sigma_floor = num(key, v)?,
            "restore_prompted" => self.restore_prompted = boolean(key, v)?,
            "dump_attention" => self.dump_attention = boolean(key, v)?,
            "dry_run" => self.dry_run = boolean(key, v)?,
            "non_divisible" => {
                self.non_divisible = match v {
                    "reject" => NonDivisible::Reject,
                    "resize" => NonDivisible::Resize,
                    _ => return Err(bad(key, v, "reject or resize")),
                }
            }
            "toy_mode" => {
                let (lambda, mix) = self.toy_params();
                self.toy_mode = match v {
                    "zero" => ToyMode::ZeroEps,
                    "linear" => ToyMode::LinearEps { lambda },
                    "attentive" => ToyMode::Attentive { lambda, mix },
                    _ => return Err(bad(key, v, "zero, linear or attentive")),
                }
            }
            "toy_lambda" => {
                let l: f64 = num(key, v)?;
                match &mut self.toy_mode {
                    ToyMode::LinearEps { lambda } | ToyMode::Attentive { lambda, .. } => *lambda = l,
                    ToyMode::ZeroEps if l != 0.0 => return Err(bad(key, v, "0 for toy_mode = zero")),
                    ToyMode::ZeroEps => {}
                }
            }
            "toy_mix" => {
                let m: f64 = num(key, v)?;
                match &mut self.toy_mode {
                    ToyMode::Attentive { mix, .. } => *mix = m,
                    _ if m != 0.0 => return Err(bad(key, v, "0 unless toy_mode = attentive")),
                    _ => {}
                }
            }
            "toy_native_size" => self.toy_native_size = num(key, v)?,
            "toy_downsample" => self.toy_downsample = num(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            "input" => self.input = path(v),
            "mask" => self.mask = path(v),
            "output_dir" => self.output_dir = path(v),
            _ => return Err(Error::config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    fn toy_params(&self) -> (f64, f64) {
        match self.toy_mode {
            ToyMode::ZeroEps => (0.0, 0.0),
            ToyMode::LinearEps { lambda } => (lambda, 0.0),
            ToyMode::Attentive { lambda, mix } => (lambda, mix),
        }
    }

    fn get(&self, key: &str) -> String {
        let (lambda, mix) = self.toy_params();
        match key {
            "steps" => self.steps.to_string(),
            "gamma" => self.gamma.to_string(),
            "k1" => self.k1.to_string(),
            "k2" => self.k2.to_string(),
            "kv_steps" => show_window(self.kv_steps),
            "kv_layers" => show_layers(&self.kv_layers),
            "replace_step" => self.replace_step.map_or("none".into(), |s| s.to_string()),
            "prompt" => self.prompt.join(" "),
            "seed" => self.seed.to_string(),
            "backend" => match self.backend {
                BackendKind::Toy => "toy".into(),
                BackendKind::Adapter => "adapter".into(),
            },
            "stage2_k" => self.stage2_k.to_string(),
            "stage2_steps" => self.stage2_steps.map_or("default".into(), |s| s.to_string()),
            "crop_padding" => self.crop_padding.to_string(),
            "sigma_floor" => self.sigma_floor.to_string(),
            "restore_prompted" => self.restore_prompted.to_string(),
            "dump_attention" => self.dump_attention.to_string(),
            "dry_run" => self.dry_run.to_string(),
            "non_divisible" => match self.non_divisible {
                NonDivisible::Reject => "reject".into(),
                NonDivisible::Resize => "resize".into(),
            },
            "toy_mode" => match self.toy_mode {
                ToyMode::ZeroEps => "zero".into(),
                ToyMode::LinearEps { .. } => "linear".into(),
                ToyMode::Attentive { .. } => "attentive".into(),
            },
            "toy_lambda" => lambda.to_string(),
            "toy_mix" => mix.to_string(),
            "toy_native_size" => self.toy_native_size.to_string(),
            "toy_downsample" => self.toy_downsample.to_string(),
            "jobs" => self.jobs.to_string(),
            "input" => show_path(&self.input),
            "mask" => show_path(&self.mask),
            "output_dir" => show_path(&self.output_dir),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// One `key = value` line per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key);
            if value.is_empty() {
                let _ = writeln!(out, "{key} =");
            } else {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    /// Apply every setting in `text` on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps must be positive"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be positive"));
        }
        self.localize_config().validate()?;
        self.destruction_config(16).validate(self.steps)?;
        if self.toy_downsample == 0 || self.toy_native_size == 0 || !self.toy_native_size.is_multiple_of(self.toy_downsample) {
            return Err(Error::config("toy native size must be a positive multiple of the toy downsample factor"));
        }
        Ok(())
    }

    pub fn localize_config(&self) -> LocalizeConfig {
        LocalizeConfig {
            steps: self.steps,
            gamma: self.gamma,
            k1: self.k1,
            stage2_k: self.stage2_k,
            stage2_steps: self.stage2_steps,
            crop_padding: self.crop_padding,
            min_box_area: None,
            prompt: self.prompt.clone(),
            seed: self.seed,
            scope: Default::default(),
        }
    }

    pub fn destruction_config(&self, num_layers: usize) -> DestructionConfig {
        DestructionConfig {
            kv_window: self.kv_steps,
            kv_layers: Some(self.kv_layers.resolve(num_layers)),
            replace_step: self.replace_step,
            k2: self.k2,
            noise_seed: self.seed,
            sigma_floor: self.sigma_floor,
            prompt: self.restore_prompted.then(|| self.prompt.clone()),
            keep_snapshots: false,
        }
    }

    pub fn toy_spec(&self) -> ToyBackendSpec {
        ToyBackendSpec {
            mode: self.toy_mode,
            downsample_factor: self.toy_downsample,
            native_size: (self.toy_native_size, self.toy_native_size),
            ..ToyBackendSpec::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_byte_identical() {
        let text = PipelineConfig::default().to_text();
        let again = PipelineConfig::parse(&text).unwrap().to_text();
        assert_eq!(text, again);
        assert!(text.contains("kv_steps = 1-45\n"));
        assert!(text.contains("prompt = text letter character\n"));
    }

    #[test]
    fn non_default_round_trip() {
        let mut c = PipelineConfig::default();
        c.apply_text("gamma = 0.3\nkv_layers = 0-15\nreplace_step = none\nkv_steps = 15-0\ntoy_mode = linear\ntoy_lambda = 0.05\ninput = a/b.png\nstage2_steps = 20")
            .unwrap();
        assert_eq!(c.kv_layers, LayerPolicy::Explicit((0..16).collect()));
        assert_eq!(c.kv_steps, StepWindow::new(1, 15));
        let text = c.to_text();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), c);
        assert_eq!(PipelineConfig::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn errors_are_config_errors() {
        for bad in ["steps = many", "nope = 1", "dry_run = yes", "steps = 3\nsteps = 4", "no equals sign", "backend = gpu"] {
            assert!(matches!(PipelineConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
        let mut c = PipelineConfig::default();
        c.k2 = 4;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c = PipelineConfig::default();
        c.replace_step = Some(60);
        assert!(c.validate().is_err());
    }

    #[test]
    fn layer_policy_resolution() {
        assert_eq!(LayerPolicy::FrontOneBackTwo.resolve(16), [0, 14, 15].into_iter().collect());
        assert_eq!(parse_layers("3, 5").unwrap(), LayerPolicy::Explicit([3, 5].into_iter().collect()));
        assert_eq!(parse_window("none").unwrap(), StepWindow::EMPTY);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let c = PipelineConfig::parse("# tuned\n\nseed = 7\n").unwrap();
        assert_eq!(c.seed, 7);
    }
}
