use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, ArrayView3, Axis};

use crate::atlas::AttentionObserver;
use crate::backend::TokenizedPrompt;
use crate::error::{Error, Result};
use crate::imageops::resize_bilinear;

/// Key of the end-of-text map in a [`TokenMapStack`].
pub const END_TOKEN: &str = "end";

/// Word-level cross-attention maps keyed by `(step, layer)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenMapStack {
    words: Vec<String>,
    records: BTreeMap<(usize, usize), BTreeMap<String, Array2<f64>>>,
}

impl TokenMapStack {
    /// An empty stack tracking `words` (the end map is implicit).
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        Self {
            words: words.into_iter().map(Into::into).collect(),
            records: BTreeMap::new(),
        }
    }

    pub fn tracked_words(&self) -> &[String] {
        &self.words
    }

    pub fn insert(&mut self, step: usize, layer: usize, word: &str, map: Array2<f64>) -> Result<()> {
        if word != END_TOKEN && !self.words.iter().any(|w| w == word) {
            return Err(Error::contract(format!("'{word}' is not a tracked word")));
        }
        if map.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("attention map holds non-finite values"));
        }
        self.records
            .entry((step, layer))
            .or_default()
            .insert(word.to_owned(), map);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of `(step, layer)` snapshots.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn steps(&self) -> BTreeSet<usize> {
        self.records.keys().map(|&(s, _)| s).collect()
    }

    pub fn get(&self, step: usize, layer: usize, word: &str) -> Option<&Array2<f64>> {
        self.records.get(&(step, layer)).and_then(|m| m.get(word))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &BTreeMap<String, Array2<f64>>)> {
        self.records.iter()
    }

    /// Every snapshot must carry every tracked word plus the end map.
    pub fn validate(&self) -> Result<()> {
        for (&(step, layer), maps) in &self.records {
            for w in self.words.iter().map(String::as_str).chain([END_TOKEN]) {
                if !maps.contains_key(w) {
                    return Err(Error::integrity(format!(
                        "step {step} layer {layer} lacks a map for '{w}'"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean over snapshots of one word's map, bilinearly resized to `size`.
    pub fn mean_word_map(&self, word: &str, size: (usize, usize)) -> Option<Array2<f64>> {
        let maps: Vec<_> = self.records.values().filter_map(|m| m.get(word)).collect();
        if maps.is_empty() {
            return None;
        }
        let mut acc = Array2::zeros(size);
        for m in &maps {
            acc += &resize_bilinear(m.view(), size.0, size.1);
        }
        Some(acc / maps.len() as f64)
    }
}

/// Observer that turns per-token logits into word-level maps.
///
/// A word split into several sub-tokens contributes the mean of its sub-token maps.
pub struct CrossAttentionCollector<'p> {
    prompt: &'p TokenizedPrompt,
    stack: TokenMapStack,
    error: Option<Error>,
}

impl<'p> CrossAttentionCollector<'p> {
    pub fn new(prompt: &'p TokenizedPrompt) -> Self {
        Self {
            prompt,
            stack: TokenMapStack::new(prompt.tracked_words()),
            error: None,
        }
    }

    pub fn into_stack(self) -> Result<TokenMapStack> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.stack.validate()?;
        Ok(self.stack)
    }
}

impl AttentionObserver for CrossAttentionCollector<'_> {
    fn wants_cross_attention(&self) -> bool {
        true
    }

    fn cross_attention(&mut self, step: usize, layer: usize, logits: ArrayView3<'_, f64>) {
        if self.error.is_some() {
            return;
        }
        let n_tokens = logits.len_of(Axis(0));
        let mut record = |word: &str, positions: &[usize]| -> Result<()> {
            if positions.iter().any(|&p| p >= n_tokens) {
                return Err(Error::contract(format!(
                    "logits cover {n_tokens} tokens but '{word}' sits at {positions:?}"
                )));
            }
            let mut acc = logits.index_axis(Axis(0), positions[0]).to_owned();
            for &p in &positions[1..] {
                acc += &logits.index_axis(Axis(0), p);
            }
            if positions.len() > 1 {
                acc /= positions.len() as f64;
            }
            self.stack.insert(step, layer, word, acc)
        };
        let result = self
            .prompt
            .tracked_positions()
            .iter()
            .try_for_each(|(word, positions)| record(word, positions))
            .and_then(|()| record(END_TOKEN, &[self.prompt.end_position()]));
        if let Err(e) = result {
            self.error = Some(e);
        }
    }
}

/// Which snapshots feed the mean of the aggregation. `None` on an axis means all of it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregationScope {
    /// Inclusive step range.
    pub steps: Option<(usize, usize)>,
    pub layers: Option<BTreeSet<usize>>,
}

impl AggregationScope {
    pub fn all() -> Self {
        Self::default()
    }

    fn admits(&self, step: usize, layer: usize) -> bool {
        self.steps.is_none_or(|(lo, hi)| (lo..=hi).contains(&step))
            && self.layers.as_ref().is_none_or(|l| l.contains(&layer))
    }
}

/// Aggregated text map at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMap {
    /// Mean of `Σ tokens − γ·end` before normalization.
    pub raw: Array2<f64>,
    /// `raw` min-max scaled to [0, 1]; all zeros when `raw` is flat.
    pub normalized: Array2<f64>,
    /// `raw` has no usable spread.
    pub flat: bool,
}

impl AggregatedMap {
    pub fn from_raw(raw: Array2<f64>) -> Self {
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let flat = !(hi - lo > 1e-12 * scale);
        let normalized = if flat {
            Array2::zeros(raw.raw_dim())
        } else {
            raw.mapv(|v| (v - lo) / (hi - lo))
        };
        Self {
            raw,
            normalized,
            flat,
        }
    }

    pub fn size(&self) -> (usize, usize) {
        self.raw.dim()
    }
}

/// Sum the tracked-word maps, subtract `gamma` times the end map, average over the selected
/// snapshots and min-max normalize. Every map is first resized bilinearly to `size`.
pub fn aggregate_maps(
    stack: &TokenMapStack,
    gamma: f64,
    size: (usize, usize),
    scope: &AggregationScope,
) -> Result<AggregatedMap> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    stack.validate()?;
    let (h, w) = size;
    let mut acc = Array2::<f64>::zeros(size);
    let mut count = 0usize;
    for (&(step, layer), maps) in stack.iter() {
        if !scope.admits(step, layer) {
            continue;
        }
        let mut snapshot = Array2::<f64>::zeros(size);
        for word in stack.tracked_words() {
            snapshot += &resize_bilinear(maps[word].view(), h, w);
        }
        snapshot.scaled_add(-gamma, &resize_bilinear(maps[END_TOKEN].view(), h, w));
        acc += &snapshot;
        count += 1;
    }
    if count == 0 {
        return Err(Error::contract("no attention snapshots to aggregate"));
    }
    Ok(AggregatedMap::from_raw(acc / count as f64))
}
