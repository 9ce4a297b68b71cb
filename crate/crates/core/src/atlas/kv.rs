use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::atlas::AttentionObserver;
use crate::error::{Error, Result};
use crate::imageops::resize_nearest;
use crate::io;
use crate::tensor::Mask;

/// An inclusive range of pipeline timesteps. `first > last` is the empty window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWindow {
    pub first: usize,
    pub last: usize,
}

impl StepWindow {
    pub const EMPTY: StepWindow = StepWindow { first: 1, last: 0 };

    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn is_empty(&self) -> bool {
        self.first > self.last
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.first && t <= self.last
    }

    pub fn steps(&self) -> impl DoubleEndedIterator<Item = usize> {
        self.first..=self.last
    }
}

/// Keys and values of one self-attention layer at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct KvRecord {
    pub keys: Array2<f64>,
    pub values: Array2<f64>,
}

impl KvRecord {
    pub fn spatial_tokens(&self) -> usize {
        self.keys.nrows()
    }
}

/// Self-attention records keyed by `(step, layer)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KVStore {
    records: BTreeMap<(usize, usize), KvRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KvManifestEntry {
    step: usize,
    layer: usize,
    tokens: usize,
    dim: usize,
    keys: String,
    values: String,
}

impl KVStore {
    pub fn get(&self, step: usize, layer: usize) -> Option<&KvRecord> {
        self.records.get(&(step, layer))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.records.keys().copied()
    }

    /// Write the store to `dir` as a manifest plus raw little-endian arrays.
    pub fn spill(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        let mut manifest = Vec::with_capacity(self.records.len());
        for (&(step, layer), rec) in &self.records {
            let stem = format!("s{step:03}_l{layer:02}");
            let entry = KvManifestEntry {
                step,
                layer,
                tokens: rec.keys.nrows(),
                dim: rec.keys.ncols(),
                keys: format!("{stem}_k.bin"),
                values: format!("{stem}_v.bin"),
            };
            io::write_f64s(&dir.join(&entry.keys), rec.keys.iter().copied())?;
            io::write_f64s(&dir.join(&entry.values), rec.values.iter().copied())?;
            manifest.push(entry);
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Vec<KvManifestEntry> = serde_json::from_str(&text)?;
        let mut records = BTreeMap::new();
        for e in manifest {
            let read = |name: &str| -> Result<Array2<f64>> {
                let v = io::read_f64s(&dir.join(name), e.tokens * e.dim)?;
                Array2::from_shape_vec((e.tokens, e.dim), v).map_err(|err| Error::integrity(err.to_string()))
            };
            records.insert(
                (e.step, e.layer),
                KvRecord {
                    keys: read(&e.keys)?,
                    values: read(&e.values)?,
                },
            );
        }
        Ok(Self { records })
    }
}

/// Observer capturing self-attention keys/values on a fixed layer set.
#[derive(Debug, Default)]
pub struct KvRecorder {
    layers: BTreeSet<usize>,
    records: BTreeMap<(usize, usize), KvRecord>,
}

impl KvRecorder {
    pub fn new(layers: BTreeSet<usize>) -> Self {
        Self {
            layers,
            records: BTreeMap::new(),
        }
    }

    pub fn records(&self) -> &BTreeMap<(usize, usize), KvRecord> {
        &self.records
    }
}

impl AttentionObserver for KvRecorder {
    fn wants_self_attention(&self, layer: usize) -> bool {
        self.layers.contains(&layer)
    }

    fn self_attention(
        &mut self,
        step: usize,
        layer: usize,
        keys: ArrayView2<'_, f64>,
        values: ArrayView2<'_, f64>,
    ) {
        self.records.insert(
            (step, layer),
            KvRecord {
                keys: keys.to_owned(),
                values: values.to_owned(),
            },
        );
    }
}

/// Keep exactly one record per `(step, layer)` of `steps × layers`; anything missing is an integrity error.
pub fn store_kv(
    recorder: KvRecorder,
    layers: &BTreeSet<usize>,
    steps: impl IntoIterator<Item = usize>,
) -> Result<KVStore> {
    let mut available = recorder.records;
    let mut records = BTreeMap::new();
    for step in steps {
        for &layer in layers {
            let rec = available.remove(&(step, layer)).ok_or_else(|| {
                Error::integrity(format!("no self-attention record for step {step} layer {layer}"))
            })?;
            records.insert((step, layer), rec);
        }
    }
    Ok(KVStore { records })
}

/// Masked key/value combination: rows where `mask` is set keep the edited pass,
/// the rest take the source pass. Every output row is a bit-exact copy of an input row.
pub fn combine_kv(
    k_edit: ArrayView2<'_, f64>,
    v_edit: ArrayView2<'_, f64>,
    k_src: ArrayView2<'_, f64>,
    v_src: ArrayView2<'_, f64>,
    mask: &[bool],
) -> Result<(Array2<f64>, Array2<f64>)> {
    if k_edit.dim() != k_src.dim() || v_edit.dim() != v_src.dim() || k_edit.nrows() != v_edit.nrows() {
        return Err(Error::contract(format!(
            "kv shapes disagree: K {:?}/{:?}, V {:?}/{:?}",
            k_edit.dim(),
            k_src.dim(),
            v_edit.dim(),
            v_src.dim()
        )));
    }
    if mask.len() != k_edit.nrows() {
        return Err(Error::contract(format!(
            "mask covers {} tokens, layer has {}",
            mask.len(),
            k_edit.nrows()
        )));
    }
    let pick = |edit: ArrayView2<'_, f64>, src: ArrayView2<'_, f64>| {
        let mut out = src.to_owned();
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            out.row_mut(i).assign(&edit.row(i));
        }
        out
    };
    Ok((pick(k_edit, k_src), pick(v_edit, v_src)))
}

/// Nearest-resize `mask` to each layer's resolution and flatten row-major.
pub fn layer_masks(
    mask: &Mask,
    layer_sizes: impl IntoIterator<Item = (usize, (usize, usize))>,
) -> BTreeMap<usize, Vec<bool>> {
    layer_sizes
        .into_iter()
        .map(|(layer, (h, w))| (layer, resize_nearest(mask, h, w).data().iter().copied().collect()))
        .collect()
}

/// Where and how recorded source keys/values replace an edited pass's own.
#[derive(Debug, Clone)]
pub struct InjectionPlan<'a> {
    window: StepWindow,
    layers: BTreeSet<usize>,
    masks: BTreeMap<usize, Vec<bool>>,
    source: &'a KVStore,
}

impl<'a> InjectionPlan<'a> {
    /// Every layer in `layers` needs a mask, and every mask must match the stored token count.
    pub fn new(
        window: StepWindow,
        layers: BTreeSet<usize>,
        masks: BTreeMap<usize, Vec<bool>>,
        source: &'a KVStore,
    ) -> Result<Self> {
        for &layer in &layers {
            let mask = masks
                .get(&layer)
                .ok_or_else(|| Error::config(format!("no injection mask for layer {layer}")))?;
            for (step, rec) in source.records.iter().filter(|((_, l), _)| *l == layer) {
                if rec.spatial_tokens() != mask.len() {
                    return Err(Error::contract(format!(
                        "layer {layer} mask has {} tokens, record at step {} has {}",
                        mask.len(),
                        step.0,
                        rec.spatial_tokens()
                    )));
                }
            }
        }
        Ok(Self {
            window,
            layers,
            masks,
            source,
        })
    }

    pub fn window(&self) -> StepWindow {
        self.window
    }

    pub fn layers(&self) -> &BTreeSet<usize> {
        &self.layers
    }

    pub fn applies(&self, step: usize, layer: usize) -> bool {
        self.window.contains(step) && self.layers.contains(&layer)
    }

    /// Combined `(K, V)` for `(step, layer)`, or `None` when the plan does not cover it.
    pub fn inject(
        &self,
        step: usize,
        layer: usize,
        keys: ArrayView2<'_, f64>,
        values: ArrayView2<'_, f64>,
    ) -> Result<Option<(Array2<f64>, Array2<f64>)>> {
        if !self.applies(step, layer) {
            return Ok(None);
        }
        let src = self.source.get(step, layer).ok_or_else(|| {
            Error::integrity(format!("injection needs a source record for step {step} layer {layer}"))
        })?;
        combine_kv(keys, values, src.keys.view(), src.values.view(), &self.masks[&layer]).map(Some)
    }
}
