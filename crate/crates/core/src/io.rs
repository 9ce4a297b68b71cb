//! File formats: PNG images, PNG masks, heatmaps and raw little-endian arrays.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::tensor::{Image, Mask};

pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Image::from_rgb8(&img.to_rgb8()))
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    img.to_rgb8().save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Single-channel 8-bit mask: 0 background, 255 text. Reading thresholds at 128.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Mask::from_luma8(&img.to_luma8()))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    mask.to_luma8().save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Min-max scaled 8-bit grayscale rendering of a real map. Flat maps render black.
pub fn heatmap(map: ArrayView2<'_, f64>) -> image::GrayImage {
    let (lo, hi) = map
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let (h, w) = map.dim();
    image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = map[[y as usize, x as usize]];
        let level = if range > 0.0 { (v - lo) / range * 255.0 } else { 0.0 };
        image::Luma([level.round().clamp(0.0, 255.0) as u8])
    })
}

pub fn write_heatmap(path: &Path, map: ArrayView2<'_, f64>) -> Result<()> {
    heatmap(map).save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_f64s(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read exactly `expected` little-endian f64 values.
pub fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::integrity(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_survives_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let m = Mask::from_fn(7, 11, |y, x| (y * 3 + x) % 4 == 0);
        write_mask(&p, &m).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
    }

    #[test]
    fn raw_arrays_check_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        write_f64s(&p, [1.0, -2.5, 3.25]).unwrap();
        assert_eq!(read_f64s(&p, 3).unwrap(), vec![1.0, -2.5, 3.25]);
        assert!(matches!(read_f64s(&p, 4), Err(Error::Integrity(_))));
    }

    #[test]
    fn heatmap_spans_full_range() {
        let m = ndarray::array![[0.0, 0.5], [1.0, 2.0]];
        let h = heatmap(m.view());
        assert_eq!(h.get_pixel(0, 0).0[0], 0);
        assert_eq!(h.get_pixel(1, 1).0[0], 255);
    }
}
