//! Hierarchical text localization: attention map clustering, crop refinement, colour refinement.

mod crop;
mod kmeans;
mod morphology;
mod pipeline;
mod stages;

pub use crop::{crop_regions, pad_rect, CropRegion};
pub use kmeans::{kmeans, kmeans_points, ClusterResult};
pub use morphology::{connected_components, dilate, extract_boxes, Component};
pub use pipeline::{localize, HierMask, LocalizeConfig, Localization};
pub use stages::{combine_stage2, finalize_mask, segment_stage1, segment_stage2, segment_stage3, Stage1};
