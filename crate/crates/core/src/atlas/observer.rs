use ndarray::{ArrayView2, ArrayView3};

/// Receives attention internals while a backend predicts noise.
///
/// Every hook has a no-op default so observers implement only what they
/// record. Backends consult the `wants_*` methods before materializing
/// anything expensive.
pub trait AttentionObserver {
    fn wants_cross_attention(&self) -> bool {
        false
    }

    fn wants_self_attention(&self, _layer: usize) -> bool {
        false
    }

    /// Raw pre-softmax `Q·Kᵀ` logits of one cross-attention layer, shaped `(prompt_tokens, h, w)`.
    fn cross_attention(&mut self, _step: usize, _layer: usize, _logits: ArrayView3<'_, f64>) {}

    /// Keys and values (`spatial_tokens × dim`) a self-attention layer actually attended with,
    /// after any injection.
    fn self_attention(
        &mut self,
        _step: usize,
        _layer: usize,
        _keys: ArrayView2<'_, f64>,
        _values: ArrayView2<'_, f64>,
    ) {
    }
}

/// The observers attached to one prediction.
#[derive(Default)]
pub struct ObserverSet<'a> {
    observers: Vec<&'a mut dyn AttentionObserver>,
}

impl<'a> ObserverSet<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with(observer: &'a mut dyn AttentionObserver) -> Self {
        Self {
            observers: vec![observer],
        }
    }

    pub fn push(&mut self, observer: &'a mut dyn AttentionObserver) {
        self.observers.push(observer);
    }

    pub fn is_empty(&self) -> bool {
        self.observers.is_empty()
    }

    pub fn wants_cross_attention(&self) -> bool {
        self.observers.iter().any(|o| o.wants_cross_attention())
    }

    pub fn wants_self_attention(&self, layer: usize) -> bool {
        self.observers.iter().any(|o| o.wants_self_attention(layer))
    }

    pub fn cross_attention(&mut self, step: usize, layer: usize, logits: ArrayView3<'_, f64>) {
        for o in self.observers.iter_mut().filter(|o| o.wants_cross_attention()) {
            o.cross_attention(step, layer, logits);
        }
    }

    pub fn self_attention(
        &mut self,
        step: usize,
        layer: usize,
        keys: ArrayView2<'_, f64>,
        values: ArrayView2<'_, f64>,
    ) {
        for o in self.observers.iter_mut().filter(|o| o.wants_self_attention(layer)) {
            o.self_attention(step, layer, keys, values);
        }
    }
}
