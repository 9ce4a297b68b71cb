//! Binary mask morphology: 8-connected components, square dilation, box extraction.

use crate::error::{Error, Result};
use crate::tensor::{Mask, Rect};

/// One 8-connected component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pixels: usize,
    pub bounds: Rect,
}

pub fn connected_components(mask: &Mask) -> Vec<Component> {
    let (h, w) = mask.size();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if !mask.get(y0, x0) || seen[y0 * w + x0] {
                continue;
            }
            seen[y0 * w + x0] = true;
            stack.push((y0, x0));
            let mut bounds = Rect::new(y0, x0, y0 + 1, x0 + 1);
            let mut pixels = 0;
            while let Some((y, x)) = stack.pop() {
                pixels += 1;
                bounds = bounds.union(&Rect::new(y, x, y + 1, x + 1));
                for ny in y.saturating_sub(1)..(y + 2).min(h) {
                    for nx in x.saturating_sub(1)..(x + 2).min(w) {
                        if mask.get(ny, nx) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            stack.push((ny, nx));
                        }
                    }
                }
            }
            out.push(Component { pixels, bounds });
        }
    }
    out
}

/// Bounding boxes of components with at least `min_pixels` pixels; overlapping boxes are merged.
pub fn extract_boxes(mask: &Mask, min_pixels: usize) -> Vec<Rect> {
    let mut boxes: Vec<Rect> = connected_components(mask)
        .into_iter()
        .filter(|c| c.pixels >= min_pixels)
        .map(|c| c.bounds)
        .collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                if boxes[i].intersects(&boxes[j]) {
                    let b = boxes.swap_remove(j);
                    boxes[i] = boxes[i].union(&b);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    boxes.sort_by_key(|r| (r.y0, r.x0, r.y1, r.x1));
    boxes
}

/// Dilation by a `k × k` square centred on each pixel. `k` must be odd.
pub fn dilate(mask: &Mask, k: usize) -> Result<Mask> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::config(format!("dilation kernel must be odd and positive, got {k}")));
    }
    let r = k / 2;
    let (h, w) = mask.size();
    let horiz = Mask::from_fn(h, w, |y, x| {
        (x.saturating_sub(r)..(x + r + 1).min(w)).any(|xx| mask.get(y, xx))
    });
    Ok(Mask::from_fn(h, w, |y, x| {
        (y.saturating_sub(r)..(y + r + 1).min(h)).any(|yy| horiz.get(yy, x))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blobs_two_boxes() {
        let m = Mask::from_fn(10, 10, |y, x| (y < 2 && x < 2) || (y >= 7 && x >= 6));
        let boxes = extract_boxes(&m, 1);
        assert_eq!(boxes, vec![Rect::new(0, 0, 2, 2), Rect::new(7, 6, 10, 10)]);
    }

    #[test]
    fn diagonal_neighbours_connect() {
        let m = Mask::from_fn(4, 4, |y, x| y == x);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixels, 4);
        assert_eq!(comps[0].bounds, Rect::new(0, 0, 4, 4));
    }

    #[test]
    fn empty_mask_no_boxes() {
        assert!(extract_boxes(&Mask::empty(5, 5), 1).is_empty());
    }

    #[test]
    fn area_filter_and_merge() {
        // an L-shape whose box swallows a separate dot
        let m = Mask::from_fn(8, 8, |y, x| (x == 0 && y < 6) || (y == 5 && x < 6) || (y == 2 && x == 3));
        assert_eq!(extract_boxes(&m, 2), vec![Rect::new(0, 0, 6, 6)]);
        assert_eq!(extract_boxes(&m, 1), vec![Rect::new(0, 0, 6, 6)]);
        let dot = Mask::from_fn(8, 8, |y, x| y == 2 && x == 3);
        assert!(extract_boxes(&dot, 2).is_empty());
    }

    #[test]
    fn single_pixel_dilates_to_square() {
        let mut m = Mask::empty(9, 9);
        m.set(4, 4, true);
        let d = dilate(&m, 5).unwrap();
        assert_eq!(d.count(), 25);
        assert!(d.get(2, 2) && d.get(6, 6) && !d.get(1, 4) && !d.get(4, 7));
        assert!(dilate(&m, 4).is_err());
        assert_eq!(dilate(&m, 1).unwrap(), m);
    }

    #[test]
    fn dilation_clips_at_border() {
        let mut m = Mask::empty(3, 3);
        m.set(0, 0, true);
        assert_eq!(dilate(&m, 3).unwrap().count(), 4);
    }
}
