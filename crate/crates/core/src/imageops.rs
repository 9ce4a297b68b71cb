//! Resampling and pooling for maps, masks and images.

use ndarray::{Array2, Array3, ArrayView2};

use crate::tensor::{Image, Mask};

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(src: ArrayView2<'_, f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (in_h, in_w) = src.dim();
    if (in_h, in_w) == (out_h, out_w) {
        return src.to_owned();
    }
    let ys: Vec<(usize, usize, f64)> = (0..out_h).map(|i| linear_tap(i, in_h, out_h)).collect();
    let xs: Vec<(usize, usize, f64)> = (0..out_w).map(|j| linear_tap(j, in_w, out_w)).collect();
    Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let (y0, y1, fy) = ys[i];
        let (x0, x1, fx) = xs[j];
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bottom = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

fn linear_tap(i: usize, n_in: usize, n_out: usize) -> (usize, usize, f64) {
    let pos = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).max(0.0);
    let lo = (pos.floor() as usize).min(n_in - 1);
    let hi = (lo + 1).min(n_in - 1);
    (lo, hi, pos - lo as f64)
}

fn nearest_index(i: usize, n_in: usize, n_out: usize) -> usize {
    (((i as f64 + 0.5) * n_in as f64 / n_out as f64).floor() as usize).min(n_in - 1)
}

/// Nearest-neighbour resize; binary masks stay binary.
pub fn resize_nearest(mask: &Mask, out_h: usize, out_w: usize) -> Mask {
    let (in_h, in_w) = mask.size();
    Mask::from_fn(out_h, out_w, |y, x| {
        mask.get(nearest_index(y, in_h, out_h), nearest_index(x, in_w, out_w))
    })
}

/// Downsample by `factor` where any set pixel marks its output cell. Partial edge blocks count.
pub fn max_pool(mask: &Mask, factor: usize) -> Mask {
    let (h, w) = mask.size();
    let (oh, ow) = (h.div_ceil(factor), w.div_ceil(factor));
    let mut out = Mask::empty(oh, ow);
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) {
                out.set(y / factor, x / factor, true);
            }
        }
    }
    out
}

/// Replicate each cell into a `factor × factor` block.
pub fn upsample_blocks(mask: &Mask, factor: usize) -> Mask {
    let (h, w) = mask.size();
    Mask::from_fn(h * factor, w * factor, |y, x| mask.get(y / factor, x / factor))
}

/// Mean over `factor × factor` blocks. Trailing rows/columns that do not fill a block are dropped.
pub fn area_downsample(src: ArrayView2<'_, f64>, factor: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let (oh, ow) = (h / factor, w / factor);
    let norm = (factor * factor) as f64;
    Array2::from_shape_fn((oh, ow), |(i, j)| {
        let mut s = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                s += src[[i * factor + dy, j * factor + dx]];
            }
        }
        s / norm
    })
}

/// Keys cubic kernel with a = -0.5.
fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * A
    } else {
        0.0
    }
}

/// Per-output-index filter taps `(first_source_index, weights)`.
/// When shrinking, the kernel is stretched so the result is antialiased.
fn cubic_taps(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = n_in as f64 / n_out as f64;
    let stretch = scale.max(1.0);
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(n_in);
            let mut w: Vec<f64> = (lo..hi)
                .map(|k| cubic((k as f64 + 0.5 - center) / stretch))
                .collect();
            let sum: f64 = w.iter().sum();
            if sum != 0.0 {
                w.iter_mut().for_each(|v| *v /= sum);
            }
            (lo, w)
        })
        .collect()
}

/// Separable bicubic resize of an RGB image. Output is not clamped.
pub fn resize_bicubic(img: &Image, out_h: usize, out_w: usize) -> Image {
    let (in_h, in_w) = img.size();
    if (in_h, in_w) == (out_h, out_w) {
        return img.clone();
    }
    let src = img.data();
    let xt = cubic_taps(in_w, out_w);
    let yt = cubic_taps(in_h, out_h);
    let mut horiz = Array3::<f64>::zeros((in_h, out_w, 3));
    for y in 0..in_h {
        for (j, (lo, w)) in xt.iter().enumerate() {
            for c in 0..3 {
                horiz[[y, j, c]] = w
                    .iter()
                    .enumerate()
                    .map(|(k, wk)| wk * src[[y, lo + k, c]])
                    .sum();
            }
        }
    }
    let mut out = Array3::<f64>::zeros((out_h, out_w, 3));
    for (i, (lo, w)) in yt.iter().enumerate() {
        for x in 0..out_w {
            for c in 0..3 {
                out[[i, x, c]] = w
                    .iter()
                    .enumerate()
                    .map(|(k, wk)| wk * horiz[[lo + k, x, c]])
                    .sum();
            }
        }
    }
    Image::new(out).expect("bicubic of finite image is finite")
}
