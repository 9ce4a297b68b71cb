//! Array types shared by every stage: latents, pixel images and binary masks.

use ndarray::{Array2, Array3, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Which space a [`LatentTensor`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Latent,
    Image,
}

/// A `(channels, height, width)` array of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    data: Array3<f64>,
    space: SpaceTag,
}

impl LatentTensor {
    /// Wrap a latent array. Rejects NaN and infinities.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        Self::with_space(data, SpaceTag::Latent)
    }

    pub fn with_space(data: Array3<f64>, space: SpaceTag) -> Result<Self> {
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("latent holds non-finite value {bad}")));
        }
        Ok(Self { data, space })
    }

    /// Build from an array already known to be finite (results of finite arithmetic on finite inputs).
    pub(crate) fn from_finite(data: Array3<f64>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            data,
            space: SpaceTag::Latent,
        }
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Self::from_finite(Array3::zeros(shape))
    }

    pub fn from_elem(shape: (usize, usize, usize), v: f64) -> Result<Self> {
        Self::new(Array3::from_elem(shape, v))
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    /// Spatial size `(height, width)`.
    pub fn spatial(&self) -> (usize, usize) {
        let (_, h, w) = self.data.dim();
        (h, w)
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), c)
    }

    pub fn ensure_same_shape(&self, other: &LatentTensor, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "{what}: shape {:?} does not match {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `a·self + b·other`, elementwise.
    pub fn affine_combine(&self, a: f64, other: &LatentTensor, b: f64) -> Result<LatentTensor> {
        self.ensure_same_shape(other, "affine combination")?;
        let data = Zip::from(&self.data)
            .and(&other.data)
            .map_collect(|&x, &y| a * x + b * y);
        LatentTensor::new(data)
    }

    pub fn max_abs_diff(&self, other: &LatentTensor) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .fold(0.0f64, |m, &a, &b| m.max((a - b).abs()))
    }
}

/// An RGB image with channel values on the 0..=255 scale, stored as `(height, width, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array3<f64>,
}

impl Image {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.dim().2 != 3 {
            return Err(Error::contract(format!(
                "image must have 3 channels, got {}",
                data.dim().2
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("image holds non-finite values"));
        }
        Ok(Self { data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self {
            data: Array3::from_shape_fn((height, width, 3), |(_, _, c)| rgb[c]),
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Array3::zeros((height, width, 3));
        for y in 0..height {
            for x in 0..width {
                let px = f(y, x);
                for c in 0..3 {
                    data[[y, x, c]] = px[c];
                }
            }
        }
        Self { data }
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    /// `(height, width)`.
    pub fn size(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        [
            self.data[[y, x, 0]],
            self.data[[y, x, 1]],
            self.data[[y, x, 2]],
        ]
    }

    /// Clamp to 0..=255.
    pub fn clamped(&self) -> Image {
        Image {
            data: self.data.mapv(|v| v.clamp(0.0, 255.0)),
        }
    }

    /// Round to 8 bits per channel, clamping out-of-range values.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let (h, w) = self.size();
        image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let p = self.pixel(y as usize, x as usize);
            image::Rgb(p.map(|v| v.round().clamp(0.0, 255.0) as u8))
        })
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Image {
        let (w, h) = img.dimensions();
        Image::from_fn(h as usize, w as usize, |y, x| {
            img.get_pixel(x as u32, y as u32).0.map(f64::from)
        })
    }

    /// Rec. 601 luma.
    pub fn luma(&self) -> Array2<f64> {
        let (h, w) = self.size();
        Array2::from_shape_fn((h, w), |(y, x)| {
            0.299 * self.data[[y, x, 0]] + 0.587 * self.data[[y, x, 1]] + 0.114 * self.data[[y, x, 2]]
        })
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .fold(0.0f64, |m, &a, &b| m.max((a - b).abs()))
    }
}

/// A binary 2-D mask; `true` marks text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    data: Array2<bool>,
}

impl Mask {
    pub fn new(data: Array2<bool>) -> Self {
        Self { data }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self::new(Array2::from_elem((height, width), false))
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::new(Array2::from_elem((height, width), true))
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        Self::new(Array2::from_shape_fn((height, width), |(y, x)| f(y, x)))
    }

    pub fn data(&self) -> &Array2<bool> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<bool> {
        &mut self.data
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    /// `(height, width)`.
    pub fn size(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[[y, x]]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[[y, x]] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    fn check(&self, other: &Mask, what: &str) -> Result<()> {
        if self.size() != other.size() {
            return Err(Error::contract(format!(
                "{what}: mask size {:?} does not match {:?}",
                self.size(),
                other.size()
            )));
        }
        Ok(())
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.check(other, "mask intersection")?;
        Ok(Mask::new(
            Zip::from(&self.data).and(&other.data).map_collect(|&a, &b| a && b),
        ))
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.check(other, "mask union")?;
        Ok(Mask::new(
            Zip::from(&self.data).and(&other.data).map_collect(|&a, &b| a || b),
        ))
    }

    /// `self ∧ ¬other`.
    pub fn minus(&self, other: &Mask) -> Result<Mask> {
        self.check(other, "mask difference")?;
        Ok(Mask::new(
            Zip::from(&self.data).and(&other.data).map_collect(|&a, &b| a && !b),
        ))
    }

    pub fn not(&self) -> Mask {
        Mask::new(self.data.mapv(|b| !b))
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.size() == other.size()
            && Zip::from(&self.data)
                .and(&other.data)
                .fold(true, |ok, &a, &b| ok && (!a || b))
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &Mask) -> Result<f64> {
        self.check(other, "iou")?;
        let (inter, union) = Zip::from(&self.data)
            .and(&other.data)
            .fold((0usize, 0usize), |(i, u), &a, &b| {
                (i + usize::from(a && b), u + usize::from(a || b))
            });
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        let (h, w) = self.size();
        image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([if self.data[[y as usize, x as usize]] { 255 } else { 0 }])
        })
    }

    /// Pixels at or above 128 are text.
    pub fn from_luma8(img: &image::GrayImage) -> Mask {
        let (w, h) = img.dimensions();
        Mask::from_fn(h as usize, w as usize, |y, x| {
            img.get_pixel(x as u32, y as u32).0[0] >= 128
        })
    }
}

/// An axis-aligned rectangle in pixel coordinates; `y1`/`x1` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl Rect {
    pub fn new(y0: usize, x0: usize, y1: usize, x1: usize) -> Self {
        Self { y0, x0, y1, x1 }
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.y0 < other.y1 && other.y0 < self.y1 && self.x0 < other.x1 && other.x0 < self.x1
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.y0.min(other.y0),
            self.x0.min(other.x0),
            self.y1.max(other.y1),
            self.x1.max(other.x1),
        )
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.y0 && y < self.y1 && x >= self.x0 && x < self.x1
    }

    pub fn within(&self, height: usize, width: usize) -> bool {
        self.y0 <= self.y1 && self.x0 <= self.x1 && self.y1 <= height && self.x1 <= width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_latents() {
        let mut a = Array3::zeros((1, 2, 2));
        a[[0, 1, 1]] = f64::NAN;
        assert!(matches!(LatentTensor::new(a), Err(Error::Contract(_))));
    }

    #[test]
    fn mask_algebra() {
        let a = Mask::from_fn(3, 3, |y, _| y == 0);
        let b = Mask::from_fn(3, 3, |_, x| x == 0);
        assert_eq!(a.and(&b).unwrap().count(), 1);
        assert_eq!(a.or(&b).unwrap().count(), 5);
        assert_eq!(a.minus(&b).unwrap().count(), 2);
        assert!((a.iou(&b).unwrap() - 0.2).abs() < 1e-15);
        assert!(a.and(&b).unwrap().is_subset_of(&a));
        assert!(a.and(&Mask::empty(2, 2)).is_err());
    }

    #[test]
    fn mask_png_levels() {
        let m = Mask::from_fn(4, 5, |y, x| (x + y) % 2 == 0);
        assert_eq!(Mask::from_luma8(&m.to_luma8()), m);
    }
}
