use log::warn;

use crate::imageops::resize_bicubic;
use crate::tensor::{Image, Mask, Rect};

/// A padded region cut from the source image, plus its resize to the backend's native input size.
#[derive(Debug, Clone, PartialEq)]
pub struct CropRegion {
    /// The unpadded box this crop was made for.
    pub bbox: Rect,
    /// The padded, clamped region actually cut.
    pub rect: Rect,
    /// Pixels of `rect` at source resolution.
    pub original: Image,
    /// `original` resized to the native input size.
    pub native: Image,
}

impl CropRegion {
    /// Write `edited` (at native size) back into `canvas` over `rect`.
    /// An unmodified native crop restores the original pixels exactly.
    pub fn paste_back(&self, canvas: &mut Image, edited: &Image) {
        let patch = if *edited == self.native {
            self.original.clone()
        } else {
            resize_bicubic(edited, self.rect.height(), self.rect.width())
        };
        let data = canvas.data_mut();
        for y in 0..self.rect.height() {
            for x in 0..self.rect.width() {
                for c in 0..3 {
                    data[[self.rect.y0 + y, self.rect.x0 + x, c]] = patch.data()[[y, x, c]];
                }
            }
        }
    }

    /// The part of an image-sized mask under `rect`.
    pub fn crop_mask(&self, mask: &Mask) -> Mask {
        Mask::from_fn(self.rect.height(), self.rect.width(), |y, x| {
            mask.get(self.rect.y0 + y, self.rect.x0 + x)
        })
    }

    /// Place a `rect`-sized mask into an otherwise empty image-sized mask.
    pub fn place_mask(&self, sub: &Mask, image_size: (usize, usize)) -> Mask {
        let mut out = Mask::empty(image_size.0, image_size.1);
        for y in 0..self.rect.height() {
            for x in 0..self.rect.width() {
                if sub.get(y, x) {
                    out.set(self.rect.y0 + y, self.rect.x0 + x, true);
                }
            }
        }
        out
    }
}

/// Pad `r` by `padding` of its size on every side, clamped to the image.
pub fn pad_rect(r: &Rect, padding: f64, (h, w): (usize, usize)) -> Rect {
    let py = (r.height() as f64 * padding).round() as usize;
    let px = (r.width() as f64 * padding).round() as usize;
    Rect::new(
        r.y0.saturating_sub(py),
        r.x0.saturating_sub(px),
        (r.y1 + py).min(h),
        (r.x1 + px).min(w),
    )
}

/// Cut each box (padded) out of `image` and resize it bicubically to `native`.
/// Zero-area boxes are skipped.
pub fn crop_regions(image: &Image, boxes: &[Rect], padding: f64, native: (usize, usize)) -> Vec<CropRegion> {
    boxes
        .iter()
        .filter_map(|b| {
            if b.area() == 0 || !b.within(image.height(), image.width()) {
                warn!("skipping unusable crop box {b:?}");
                return None;
            }
            let rect = pad_rect(b, padding, image.size());
            let original = Image::from_fn(rect.height(), rect.width(), |y, x| {
                image.pixel(rect.y0 + y, rect.x0 + x)
            });
            let native = resize_bicubic(&original, native.0, native.1);
            Some(CropRegion {
                bbox: *b,
                rect,
                original,
                native,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |y, x| {
            let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
            [
                128.0 + 80.0 * (fx * 3.0).sin(),
                100.0 + 60.0 * (fy * 2.5).cos(),
                60.0 + 150.0 * fx * fy,
            ]
        })
    }

    #[test]
    fn full_image_box() {
        let img = smooth(40, 60);
        let crops = crop_regions(&img, &[Rect::new(0, 0, 40, 60)], 0.1, (64, 64));
        assert_eq!(crops[0].rect, Rect::new(0, 0, 40, 60));
        assert_eq!(crops[0].native, resize_bicubic(&img, 64, 64));
    }

    #[test]
    fn untouched_paste_back_is_exact() {
        let img = smooth(50, 70);
        let crops = crop_regions(&img, &[Rect::new(10, 20, 30, 45)], 0.1, (64, 64));
        let mut canvas = Image::filled(50, 70, [0.0; 3]);
        crops[0].paste_back(&mut canvas, &crops[0].native);
        let r = crops[0].rect;
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                assert_eq!(canvas.pixel(y, x), img.pixel(y, x));
            }
        }
    }

    #[test]
    fn resampling_round_trip_within_two_levels() {
        let img = smooth(60, 120);
        let b = Rect::new(10, 10, 50, 110);
        let crop = &crop_regions(&img, &[b], 0.0, (512, 512))[0];
        assert_eq!(crop.rect.height(), 40);
        assert_eq!(crop.rect.width(), 100);
        let back = resize_bicubic(&crop.native, 40, 100);
        let err = back.max_abs_diff(&crop.original);
        assert!(err <= 2.0, "round trip error {err}");
    }

    #[test]
    fn padding_clamps_and_skips_empty() {
        let img = smooth(20, 20);
        let crops = crop_regions(&img, &[Rect::new(0, 0, 10, 10), Rect::new(5, 5, 5, 9)], 0.1, (8, 8));
        assert_eq!(crops.len(), 1);
        assert_eq!(crops[0].rect, Rect::new(0, 0, 11, 11));
    }

    #[test]
    fn mask_crop_and_place_are_inverse() {
        let img = smooth(20, 20);
        let crop = &crop_regions(&img, &[Rect::new(4, 4, 12, 14)], 0.0, (8, 8))[0];
        let m = Mask::from_fn(20, 20, |y, x| (y + x) % 3 == 0);
        let placed = crop.place_mask(&crop.crop_mask(&m), (20, 20));
        let inside = Mask::from_fn(20, 20, |y, x| crop.rect.contains(y, x));
        assert_eq!(placed, m.and(&inside).unwrap());
    }
}
