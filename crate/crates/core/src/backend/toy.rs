//! A deterministic analytic backend for desk-scale runs and tests.
//!
//! Encoding is a lossless space-to-depth rearrangement (every `f × f` pixel
//! block becomes one latent cell with `3·f²` channels), so decode∘encode is
//! exact up to rounding. The noise predictor is a stack of single-head
//! self-attention layers with seeded random projections laid out like the
//! SD 1.x U-Net (16 layers, pooled resolutions). Cross-attention is
//! synthetic: tracked words see a text-evidence field plus a noise field
//! shared with the end token.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::atlas::{InjectionPlan, ObserverSet};
use crate::backend::{Capabilities, DenoiserBackend, LayerLayout, TokenizedPrompt};
use crate::error::{Error, Result};
use crate::imageops::{area_downsample, resize_nearest};
use crate::par;
use crate::tensor::{Image, LatentTensor, Mask};

/// decode(encode(x)) reproduces `x` to within this many intensity levels.
pub const TOY_DECODE_TOLERANCE: f64 = 1e-6;

const HEAD_DIM: usize = 8;
/// Logit gain on the text-evidence field.
const EVIDENCE_GAIN: f64 = 4.0;
/// Weight of the shared noise field in each tracked word's map.
const TRACKED_NOISE: f64 = 0.5;
const BOS_ID: u32 = 49406;
const EOS_ID: u32 = 49407;
const SUBWORD_CHARS: usize = 6;

/// How the toy predicts noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyMode {
    /// Always zero.
    ZeroEps,
    /// `lambda · z`.
    LinearEps { lambda: f64 },
    /// `lambda · z + mix · Σ_layers attention_output`.
    Attentive { lambda: f64, mix: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyBackendSpec {
    pub mode: ToyMode,
    /// Overrides content-derived text evidence with this binary image (at the input image's resolution).
    pub glyph_mask: Option<Mask>,
    pub attention_noise_seed: u64,
    pub weight_seed: u64,
    pub downsample_factor: usize,
    pub native_size: (usize, usize),
}

impl Default for ToyBackendSpec {
    fn default() -> Self {
        Self {
            mode: ToyMode::Attentive {
                lambda: 0.0,
                mix: 0.3,
            },
            glyph_mask: None,
            attention_noise_seed: 0,
            weight_seed: 0x5eed,
            downsample_factor: 4,
            native_size: (64, 64),
        }
    }
}

struct ToyLayer {
    wq: Array2<f64>,
    wk: Array2<f64>,
    wv: Array2<f64>,
    wo: Array2<f64>,
}

pub struct ToyBackend {
    spec: ToyBackendSpec,
    layout: LayerLayout,
    layers: Vec<ToyLayer>,
    channels: usize,
}

fn mix_seed(parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    parts.iter().fold(0x9e37_79b9_7f4a_7c15u64, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let v: f64 = StandardNormal.sample(rng);
        v * scale
    })
}

impl ToyBackend {
    pub fn new(spec: ToyBackendSpec) -> Result<Self> {
        let f = spec.downsample_factor;
        if f == 0 {
            return Err(Error::config("downsample factor must be positive"));
        }
        let (nh, nw) = spec.native_size;
        if nh == 0 || nw == 0 || nh % f != 0 || nw % f != 0 {
            return Err(Error::config(format!(
                "native size {nh}x{nw} must be a positive multiple of {f}"
            )));
        }
        match spec.mode {
            ToyMode::LinearEps { lambda } | ToyMode::Attentive { lambda, .. } if !lambda.is_finite() => {
                return Err(Error::config("toy lambda must be finite"));
            }
            ToyMode::Attentive { mix, .. } if !mix.is_finite() => {
                return Err(Error::config("toy mix must be finite"));
            }
            _ => {}
        }
        let channels = 3 * f * f;
        let layout = LayerLayout::sd15();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.weight_seed);
        let in_scale = 1.0 / (channels as f64).sqrt();
        let out_scale = 1.0 / ((HEAD_DIM * layout.len()) as f64).sqrt();
        let layers = (0..layout.len())
            .map(|_| ToyLayer {
                wq: gaussian_matrix(&mut rng, channels, HEAD_DIM, in_scale),
                wk: gaussian_matrix(&mut rng, channels, HEAD_DIM, in_scale),
                wv: gaussian_matrix(&mut rng, channels, HEAD_DIM, in_scale),
                wo: gaussian_matrix(&mut rng, HEAD_DIM, channels, out_scale),
            })
            .collect();
        Ok(Self {
            spec,
            layout,
            layers,
            channels,
        })
    }

    pub fn spec(&self) -> &ToyBackendSpec {
        &self.spec
    }

    fn check_channels(&self, z: &LatentTensor) -> Result<()> {
        if z.channels() != self.channels {
            return Err(Error::contract(format!(
                "latent has {} channels, toy expects {}",
                z.channels(),
                self.channels
            )));
        }
        Ok(())
    }

    /// Latent as a `(h·w) × channels` token matrix, row-major over space.
    fn tokens(z: &LatentTensor) -> Array2<f64> {
        let (c, h, w) = z.shape();
        let mut t = Array2::zeros((h * w, c));
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    t[[y * w + x, ch]] = z.data()[[ch, y, x]];
                }
            }
        }
        t
    }

    fn pool_tokens(tokens: ArrayView2<'_, f64>, (h, w): (usize, usize), p: usize) -> Array2<f64> {
        if p == 1 {
            return tokens.to_owned();
        }
        let (ph, pw) = (h.div_ceil(p), w.div_ceil(p));
        let mut out = Array2::zeros((ph * pw, tokens.ncols()));
        let mut counts = vec![0usize; ph * pw];
        for y in 0..h {
            for x in 0..w {
                let cell = (y / p) * pw + x / p;
                counts[cell] += 1;
                let mut row = out.row_mut(cell);
                row += &tokens.row(y * w + x);
            }
        }
        for (cell, n) in counts.into_iter().enumerate() {
            out.row_mut(cell).mapv_inplace(|v| v / n as f64);
        }
        out
    }

    /// Sum of every layer's attention output at latent resolution, as a token matrix.
    fn attention_chain(
        &self,
        z: &LatentTensor,
        step: usize,
        observers: &mut ObserverSet<'_>,
        injection: Option<&InjectionPlan<'_>>,
    ) -> Result<Array2<f64>> {
        let (h, w) = z.spatial();
        let mut hidden = Self::tokens(z);
        let mut delta = Array2::<f64>::zeros(hidden.raw_dim());
        let inv_sqrt_d = 1.0 / (HEAD_DIM as f64).sqrt();
        for (l, layer) in self.layers.iter().enumerate() {
            let p = self.layout.pooling(l)?;
            let (_, pw) = self.layout.layer_size(l, (h, w))?;
            let x = Self::pool_tokens(hidden.view(), (h, w), p);
            let q = x.dot(&layer.wq);
            let mut k = x.dot(&layer.wk);
            let mut v = x.dot(&layer.wv);
            if let Some(plan) = injection {
                if let Some((ki, vi)) = plan.inject(step, l, k.view(), v.view())? {
                    k = ki;
                    v = vi;
                }
            }
            if observers.wants_self_attention(l) {
                observers.self_attention(step, l, k.view(), v.view());
            }
            let n = x.nrows();
            let mut scores = q.dot(&k.t());
            let flat = scores
                .as_slice_mut()
                .expect("freshly computed scores are contiguous");
            par::for_each_chunk_mut(flat, n, |_, row| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for s in row.iter_mut() {
                    *s = ((*s - max) * inv_sqrt_d).exp();
                    sum += *s;
                }
                for s in row.iter_mut() {
                    *s /= sum;
                }
            });
            let out = scores.dot(&v).dot(&layer.wo);
            for y in 0..h {
                for xx in 0..w {
                    let src = out.row((y / p) * pw + xx / p);
                    let idx = y * w + xx;
                    let mut hrow = hidden.row_mut(idx);
                    hrow += &src;
                    let mut drow = delta.row_mut(idx);
                    drow += &src;
                }
            }
        }
        Ok(delta)
    }

    /// Text evidence per latent cell: within-cell spread plus contrast against the
    /// 3×3 neighbourhood, box-blurred once.
    fn content_evidence(&self, z: &LatentTensor) -> Array2<f64> {
        let f = self.spec.downsample_factor;
        let (_, h, w) = z.shape();
        let d = z.data();
        let mut means = Array3::<f64>::zeros((3, h, w));
        let mut spread = Array2::<f64>::zeros((h, w));
        let n = (f * f) as f64;
        for k in 0..3 {
            let block = d.slice(s![k * f * f..(k + 1) * f * f, .., ..]);
            for y in 0..h {
                for x in 0..w {
                    let vals = block.slice(s![.., y, x]);
                    let m = vals.sum() / n;
                    means[[k, y, x]] = m;
                    spread[[y, x]] += vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                }
            }
        }
        let raw = Array2::from_shape_fn((h, w), |(y, x)| {
            let mut contrast = 0.0;
            for k in 0..3 {
                let (mut acc, mut cnt) = (0.0, 0.0);
                for yy in y.saturating_sub(1)..(y + 2).min(h) {
                    for xx in x.saturating_sub(1)..(x + 2).min(w) {
                        acc += means[[k, yy, xx]];
                        cnt += 1.0;
                    }
                }
                contrast += (means[[k, y, x]] - acc / cnt).powi(2);
            }
            (spread[[y, x]] + contrast).sqrt()
        });
        Array2::from_shape_fn((h, w), |(y, x)| {
            let (mut acc, mut cnt) = (0.0, 0.0);
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    acc += raw[[yy, xx]];
                    cnt += 1.0;
                }
            }
            acc / cnt
        })
    }

    fn evidence(&self, z: &LatentTensor) -> Array2<f64> {
        let f = self.spec.downsample_factor;
        let (h, w) = z.spatial();
        match &self.spec.glyph_mask {
            Some(mask) => {
                let m = if mask.size() == (h * f, w * f) {
                    mask.clone()
                } else {
                    resize_nearest(mask, h * f, w * f)
                };
                let as_f = m.data().mapv(|b| if b { 1.0 } else { 0.0 });
                area_downsample(as_f.view(), f)
            }
            None => self.content_evidence(z),
        }
    }

    fn fire_cross_attention(
        &self,
        z: &LatentTensor,
        step: usize,
        prompt: &TokenizedPrompt,
        observers: &mut ObserverSet<'_>,
    ) -> Result<()> {
        let (h, w) = z.spatial();
        let evidence = self.evidence(z);
        let n_tokens = prompt.tokens().len();
        for l in 0..self.layout.len() {
            let p = self.layout.pooling(l)?;
            let (lh, lw) = self.layout.layer_size(l, (h, w))?;
            let ev = if p == 1 {
                evidence.clone()
            } else {
                Array2::from_shape_fn((lh, lw), |(i, j)| {
                    let block = evidence.slice(s![i * p..((i + 1) * p).min(h), j * p..((j + 1) * p).min(w)]);
                    block.sum() / block.len() as f64
                })
            };
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                self.spec.attention_noise_seed,
                step as u64,
                l as u64,
            ]));
            let noise = Array2::from_shape_simple_fn((lh, lw), || {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let mut logits = Array3::<f64>::zeros((n_tokens, lh, lw));
            for pos in 0..n_tokens {
                let mut slot = logits.index_axis_mut(Axis(0), pos);
                if pos == prompt.end_position() {
                    slot.assign(&noise);
                } else if prompt.is_tracked_position(pos) {
                    slot.assign(&(&ev * EVIDENCE_GAIN + &noise * TRACKED_NOISE));
                } else if pos != 0 && pos < prompt.end_position() {
                    slot.assign(&(&ev * (0.25 * EVIDENCE_GAIN) + &noise * TRACKED_NOISE));
                }
            }
            observers.cross_attention(step, l, logits.view());
        }
        Ok(())
    }
}

impl DenoiserBackend for ToyBackend {
    fn name(&self) -> &str {
        "toy"
    }

    fn native_size(&self) -> (usize, usize) {
        self.spec.native_size
    }

    fn downsample_factor(&self) -> usize {
        self.spec.downsample_factor
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            cross_attention_observable: true,
            self_attention_hookable: true,
        }
    }

    fn num_attention_layers(&self) -> usize {
        self.layout.len()
    }

    fn layer_size(&self, layer: usize, latent: (usize, usize)) -> Result<(usize, usize)> {
        self.layout.layer_size(layer, latent)
    }

    /// Whitespace words, each split into sub-tokens of at most six characters,
    /// wrapped in begin/end markers.
    fn tokenize(&self, words: &[String]) -> Result<TokenizedPrompt> {
        let mut tokens = vec![BOS_ID];
        let mut tracked = Vec::with_capacity(words.len());
        for word in words {
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(Error::config(format!("'{word}' is not a single prompt word")));
            }
            let chars: Vec<char> = word.chars().collect();
            let positions = chars
                .chunks(SUBWORD_CHARS)
                .map(|piece| {
                    let piece: String = piece.iter().collect();
                    let id = piece.bytes().fold(2166136261u32, |h, b| (h ^ u32::from(b)).wrapping_mul(16777619));
                    tokens.push(1000 + id % 40000);
                    tokens.len() - 1
                })
                .collect();
            tracked.push((word.clone(), positions));
        }
        tokens.push(EOS_ID);
        let end = tokens.len() - 1;
        TokenizedPrompt::new(tokens, tracked, end)
    }

    fn encode(&self, image: &Image) -> Result<LatentTensor> {
        let f = self.spec.downsample_factor;
        let (ih, iw) = image.size();
        if ih % f != 0 || iw % f != 0 || ih == 0 || iw == 0 {
            return Err(Error::contract(format!(
                "image {ih}x{iw} is not divisible by the downsample factor {f}"
            )));
        }
        let (h, w) = (ih / f, iw / f);
        let px = image.data();
        let data = Array3::from_shape_fn((3 * f * f, h, w), |(ch, y, x)| {
            let (k, rest) = (ch / (f * f), ch % (f * f));
            let (dy, dx) = (rest / f, rest % f);
            px[[y * f + dy, x * f + dx, k]] / 127.5 - 1.0
        });
        LatentTensor::new(data)
    }

    fn decode(&self, z: &LatentTensor) -> Result<Image> {
        let f = self.spec.downsample_factor;
        let (c, h, w) = z.shape();
        if c != self.channels {
            return Err(Error::contract(format!("latent has {c} channels, toy expects {}", self.channels)));
        }
        let d = z.data();
        let data = Array3::from_shape_fn((h * f, w * f, 3), |(py, px, k)| {
            let ch = (k * f + py % f) * f + px % f;
            ((d[[ch, py / f, px / f]] + 1.0) * 127.5).clamp(0.0, 255.0)
        });
        Image::new(data)
    }

    fn observe_cross_attention(
        &self,
        z: &LatentTensor,
        t: usize,
        prompt: &TokenizedPrompt,
        observers: &mut ObserverSet<'_>,
    ) -> Result<()> {
        if (0..self.layout.len()).any(|l| observers.wants_self_attention(l)) {
            return self.predict_noise(z, t, Some(prompt), observers, None).map(|_| ());
        }
        self.check_channels(z)?;
        if observers.wants_cross_attention() {
            self.fire_cross_attention(z, t, prompt, observers)?;
        }
        Ok(())
    }

    fn predict_noise(
        &self,
        z: &LatentTensor,
        t: usize,
        prompt: Option<&TokenizedPrompt>,
        observers: &mut ObserverSet<'_>,
        injection: Option<&InjectionPlan<'_>>,
    ) -> Result<LatentTensor> {
        self.check_channels(z)?;
        if let Some(plan) = injection {
            if let Some(&bad) = plan.layers().iter().find(|&&l| l >= self.layout.len()) {
                return Err(Error::config(format!(
                    "injection plan names layer {bad}, backend has {}",
                    self.layout.len()
                )));
            }
        }
        if let Some(p) = prompt {
            if observers.wants_cross_attention() {
                self.fire_cross_attention(z, t, p, observers)?;
            }
        }
        let (lambda, mix) = match self.spec.mode {
            ToyMode::ZeroEps => (0.0, 0.0),
            ToyMode::LinearEps { lambda } => (lambda, 0.0),
            ToyMode::Attentive { lambda, mix } => (lambda, mix),
        };
        let mut eps = z.data().mapv(|v| lambda * v);
        let attentive = matches!(self.spec.mode, ToyMode::Attentive { .. });
        let hooked = injection.is_some()
            || (0..self.layout.len()).any(|l| observers.wants_self_attention(l));
        if attentive || hooked {
            let delta = self.attention_chain(z, t, observers, injection)?;
            if attentive {
                let (_, h, w) = z.shape();
                for ch in 0..self.channels {
                    for y in 0..h {
                        for x in 0..w {
                            eps[[ch, y, x]] += mix * delta[[y * w + x, ch]];
                        }
                    }
                }
            }
        }
        LatentTensor::new(eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{CrossAttentionCollector, KvRecorder, AttentionObserver};
    use std::collections::BTreeSet;

    fn backend(mode: ToyMode) -> ToyBackend {
        ToyBackend::new(ToyBackendSpec {
            mode,
            ..Default::default()
        })
        .unwrap()
    }

    fn gradient(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |y, x| [(y * 3) as f64, (x * 2) as f64, 200.0 - (x + y) as f64])
    }

    #[test]
    fn native_latent_shape() {
        let b = backend(ToyMode::ZeroEps);
        assert_eq!(b.latent_shape(), (48, 16, 16));
        assert_eq!(b.encode(&gradient(64, 64)).unwrap().shape(), b.latent_shape());
    }

    #[test]
    fn constant_image_gives_constant_latent() {
        let b = backend(ToyMode::ZeroEps);
        let z = b.encode(&Image::filled(8, 8, [51.0, 51.0, 51.0])).unwrap();
        assert!(z.data().iter().all(|&v| v == z.data()[[0, 0, 0]]));
    }

    #[test]
    fn decode_inverts_encode() {
        let b = backend(ToyMode::ZeroEps);
        let img = gradient(64, 48);
        let back = b.decode(&b.encode(&img).unwrap()).unwrap();
        assert!(back.max_abs_diff(&img) < TOY_DECODE_TOLERANCE);
    }

    #[test]
    fn zero_latent_is_mid_gray() {
        let b = backend(ToyMode::ZeroEps);
        let img = b.decode(&LatentTensor::zeros((48, 2, 2))).unwrap();
        assert!(img.data().iter().all(|&v| v == 127.5));
    }

    #[test]
    fn decode_clamps() {
        let b = backend(ToyMode::ZeroEps);
        let img = b.decode(&LatentTensor::from_elem((48, 1, 1), 5.0).unwrap()).unwrap();
        assert!(img.data().iter().all(|&v| v == 255.0));
    }

    #[test]
    fn rejects_non_divisible_images() {
        let b = backend(ToyMode::ZeroEps);
        assert!(matches!(b.encode(&gradient(10, 8)), Err(Error::Contract(_))));
    }

    #[test]
    fn closed_form_modes() {
        let ones = LatentTensor::from_elem((48, 3, 3), 1.0).unwrap();
        let zero = backend(ToyMode::ZeroEps)
            .predict_noise(&ones, 5, None, &mut ObserverSet::none(), None)
            .unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        let lin = backend(ToyMode::LinearEps { lambda: 0.1 })
            .predict_noise(&ones, 5, None, &mut ObserverSet::none(), None)
            .unwrap();
        assert!(lin.data().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn deterministic_predictions() {
        let b = backend(ToyMode::Attentive { lambda: 0.05, mix: 1.0 });
        let z = b.encode(&gradient(32, 32)).unwrap();
        let a = b.predict_noise(&z, 3, None, &mut ObserverSet::none(), None).unwrap();
        let c = b.predict_noise(&z, 3, None, &mut ObserverSet::none(), None).unwrap();
        assert_eq!(a, c);
        let seq = par::sequential(|| b.predict_noise(&z, 3, None, &mut ObserverSet::none(), None).unwrap());
        assert_eq!(a, seq);
    }

    #[test]
    fn character_splits_into_two_subtokens() {
        let b = backend(ToyMode::ZeroEps);
        let words: Vec<String> = ["text", "letter", "character"].map(String::from).to_vec();
        let p = b.tokenize(&words).unwrap();
        assert_eq!(p.tracked_positions()[2].1.len(), 2);
        assert_eq!(p.end_position(), p.tokens().len() - 1);
    }

    #[test]
    fn recording_observer_sees_every_requested_layer() {
        let b = backend(ToyMode::ZeroEps);
        let z = b.encode(&gradient(32, 32)).unwrap();
        let mut rec = KvRecorder::new(BTreeSet::from([0, 6, 15]));
        b.predict_noise(&z, 2, None, &mut ObserverSet::with(&mut rec), None).unwrap();
        let keys: Vec<_> = rec.records().keys().copied().collect();
        assert_eq!(keys, vec![(2, 0), (2, 6), (2, 15)]);
        assert_eq!(rec.records()[&(2, 6)].keys.dim(), (1, HEAD_DIM));
        assert_eq!(rec.records()[&(2, 0)].keys.dim(), (64, HEAD_DIM));
    }

    #[test]
    fn glyph_mask_drives_tracked_maps() {
        let glyph = Mask::from_fn(64, 64, |y, x| (20..44).contains(&y) && ((8..16).contains(&x) || (36..52).contains(&x)));
        let b = ToyBackend::new(ToyBackendSpec {
            glyph_mask: Some(glyph.clone()),
            attention_noise_seed: 9,
            ..Default::default()
        })
        .unwrap();
        let z = b.encode(&gradient(64, 64)).unwrap();
        let words: Vec<String> = ["text", "letter", "character"].map(String::from).to_vec();
        let prompt = b.tokenize(&words).unwrap();
        let mut col = CrossAttentionCollector::new(&prompt);
        assert!(col.wants_cross_attention());
        b.predict_noise(&z, 0, Some(&prompt), &mut ObserverSet::with(&mut col), None).unwrap();
        let stack = col.into_stack().unwrap();
        assert_eq!(stack.len(), 16);
        let truth = crate::imageops::max_pool(&glyph, 4);
        for word in ["text", "letter", "character"] {
            let m = stack.get(0, 0, word).unwrap();
            let thresholded = Mask::new(m.mapv(|v| v > 0.5 * EVIDENCE_GAIN));
            let iou = thresholded.iou(&truth).unwrap();
            assert!(iou >= 0.8, "{word}: iou {iou}");
        }
    }

    #[test]
    fn unknown_injection_layer_is_config_error() {
        use crate::atlas::{InjectionPlan, KVStore, StepWindow};
        use std::collections::BTreeMap;
        let b = backend(ToyMode::ZeroEps);
        let store = KVStore::default();
        let plan = InjectionPlan::new(
            StepWindow::new(1, 1),
            BTreeSet::from([16]),
            BTreeMap::from([(16, vec![true; 4])]),
            &store,
        )
        .unwrap();
        let z = LatentTensor::zeros((48, 2, 2));
        assert!(matches!(
            b.predict_noise(&z, 1, None, &mut ObserverSet::none(), Some(&plan)),
            Err(Error::Config(_))
        ));
    }
}
