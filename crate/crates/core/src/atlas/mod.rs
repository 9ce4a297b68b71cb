//! Attention bookkeeping: cross-attention map capture and aggregation,
//! self-attention key/value recording and masked substitution.

mod kv;
mod maps;
mod observer;

pub use kv::{
    combine_kv, layer_masks, store_kv, InjectionPlan, KVStore, KvRecord, KvRecorder, StepWindow,
};
pub use maps::{
    aggregate_maps, AggregatedMap, AggregationScope, CrossAttentionCollector, TokenMapStack,
    END_TOKEN,
};
pub use observer::{AttentionObserver, ObserverSet};
