//! The three mask-refinement stages and their combination.

use log::warn;

use crate::atlas::AggregatedMap;
use crate::error::{Error, Result};
use crate::imageops::{max_pool, resize_nearest};
use crate::localize::kmeans::{kmeans, kmeans_points};
use crate::localize::morphology::dilate;
use crate::tensor::{Image, Mask};

/// Result of the first, coarse stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage1 {
    Found(Mask),
    NoTextFound,
}

fn cluster_mask(agg: &AggregatedMap, k: usize, keep: usize, seed: u64) -> Result<Mask> {
    let (h, w) = agg.size();
    if agg.flat {
        return Err(Error::DegenerateClustering { k, distinct: 1 });
    }
    let values: Vec<f64> = agg.normalized.iter().copied().collect();
    let result = kmeans(&values, k, seed)?;
    Ok(Mask::from_fn(h, w, |y, x| result.assignments[y * w + x] < keep))
}

/// 3-means over the aggregated map; the two brightest clusters, upsampled to `image_size`.
pub fn segment_stage1(agg: &AggregatedMap, image_size: (usize, usize), seed: u64) -> Result<Stage1> {
    match cluster_mask(agg, 3, 2, seed) {
        Ok(m) => Ok(Stage1::Found(resize_nearest(&m, image_size.0, image_size.1))),
        Err(Error::DegenerateClustering { .. }) => Ok(Stage1::NoTextFound),
        Err(e) => Err(e),
    }
}

/// `k`-means over a crop's aggregated map; the brightest cluster, resized to `crop_size`.
/// A degenerate map keeps the whole crop. The flag reports that fallback.
pub fn segment_stage2(agg: &AggregatedMap, crop_size: (usize, usize), k: usize, seed: u64) -> Result<(Mask, bool)> {
    match cluster_mask(agg, k, 1, seed) {
        Ok(m) => Ok((resize_nearest(&m, crop_size.0, crop_size.1), false)),
        Err(Error::DegenerateClustering { .. }) => {
            warn!("stage-2 clustering degenerate, keeping whole crop");
            Ok((Mask::full(crop_size.0, crop_size.1), true))
        }
        Err(e) => Err(e),
    }
}

/// 2-means over the crop's pixel colours. The cluster that overlaps the background
/// reference `reference` less is the text. With an empty reference the smaller
/// cluster wins; equal overlaps pick the brighter-ordered first cluster.
/// A degenerate crop yields an empty mask. The flag reports that fallback.
pub fn segment_stage3(sub_image: &Image, reference: &Mask, seed: u64) -> Result<(Mask, bool)> {
    let (h, w) = sub_image.size();
    if reference.size() != (h, w) {
        return Err(Error::contract(format!(
            "reference mask {:?} does not match crop {:?}",
            reference.size(),
            (h, w)
        )));
    }
    let points: Vec<f64> = sub_image.data().iter().copied().collect();
    let result = match kmeans_points(&points, 3, 2, seed) {
        Ok(r) => r,
        Err(Error::DegenerateClustering { .. }) => {
            warn!("stage-3 clustering degenerate, no text in crop");
            return Ok((Mask::empty(h, w), true));
        }
        Err(e) => return Err(e),
    };
    let mut overlap = [0usize; 2];
    for (i, &a) in result.assignments.iter().enumerate() {
        if reference.get(i / w, i % w) {
            overlap[a] += 1;
        }
    }
    let text = if reference.is_empty() {
        let sizes = result.sizes();
        usize::from(sizes[1] < sizes[0])
    } else if overlap[0] <= overlap[1] {
        0
    } else {
        1
    };
    Ok((Mask::from_fn(h, w, |y, x| result.assignments[y * w + x] == text), false))
}

/// Union of the stage-2 sub-masks (already placed in image coordinates and clipped to m1),
/// dilated by `k1`.
pub fn combine_stage2(size: (usize, usize), placed: &[Mask], k1: usize) -> Result<Mask> {
    let mut union = Mask::empty(size.0, size.1);
    for m in placed {
        union = union.or(m)?;
    }
    dilate(&union, k1)
}

/// `m3 = m1 ∧ ⋃ sub_masks` and its max-pooled latent version.
pub fn finalize_mask(m1: &Mask, sub_masks: &[Mask], factor: usize) -> Result<(Mask, Mask)> {
    let (h, w) = m1.size();
    let mut union = Mask::empty(h, w);
    for m in sub_masks {
        union = union.or(m)?;
    }
    let m3 = m1.and(&union)?;
    let latent = max_pool(&m3, factor);
    Ok((m3, latent))
}
