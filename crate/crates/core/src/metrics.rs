//! Image similarity: PSNR and mean structural similarity.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Image, Mask};

/// Reported in place of infinity for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;
const MAX_VALUE: f64 = 255.0;
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * MAX_VALUE) * (0.01 * MAX_VALUE);
const C2: f64 = (0.03 * MAX_VALUE) * (0.03 * MAX_VALUE);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    FullImage,
    BackgroundOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub mssim: f64,
    pub region: Region,
}

fn same_size(a: &Image, b: &Image) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::contract(format!("images differ in size: {:?} vs {:?}", a.size(), b.size())));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (MAX_VALUE * MAX_VALUE / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Peak signal-to-noise ratio over all pixels and channels, in dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    same_size(a, b)?;
    let n = a.data().len() as f64;
    let sse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(psnr_from_mse(sse / n))
}

/// PSNR over the pixels outside `exclude`. With nothing left to compare, the cap.
pub fn psnr_masked(a: &Image, b: &Image, exclude: &Mask) -> Result<f64> {
    same_size(a, b)?;
    if exclude.size() != a.size() {
        return Err(Error::contract("mask does not match image size"));
    }
    let (mut sse, mut n) = (0.0, 0usize);
    for ((y, x), &skip) in exclude.data().indexed_iter() {
        if skip {
            continue;
        }
        for c in 0..3 {
            sse += (a.data()[[y, x, c]] - b.data()[[y, x, c]]).powi(2);
        }
        n += 3;
    }
    Ok(if n == 0 { PSNR_CAP_DB } else { psnr_from_mse(sse / n as f64) })
}

fn gaussian_window() -> Vec<f64> {
    let r = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(src: &Array2<f64>, g: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let (oh, ow) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let rows = Array2::from_shape_fn((h, ow), |(y, x)| (0..WINDOW).map(|i| g[i] * src[[y, x + i]]).sum::<f64>());
    Array2::from_shape_fn((oh, ow), |(y, x)| (0..WINDOW).map(|i| g[i] * rows[[y + i, x]]).sum())
}

/// Local SSIM at every valid window position of the luma channels.
pub fn ssim_map(a: &Image, b: &Image) -> Result<Array2<f64>> {
    same_size(a, b)?;
    let (h, w) = a.size();
    if h < WINDOW || w < WINDOW {
        return Err(Error::contract(format!("images of {h}x{w} are smaller than the {WINDOW}x{WINDOW} window")));
    }
    let (la, lb) = (a.luma(), b.luma());
    let g = gaussian_window();
    let mu_a = filter_valid(&la, &g);
    let mu_b = filter_valid(&lb, &g);
    let e_aa = filter_valid(&(&la * &la), &g);
    let e_bb = filter_valid(&(&lb * &lb), &g);
    let e_ab = filter_valid(&(&la * &lb), &g);
    Ok(Array2::from_shape_fn(mu_a.dim(), |ix| {
        let (ma, mb) = (mu_a[ix], mu_b[ix]);
        let va = e_aa[ix] - ma * ma;
        let vb = e_bb[ix] - mb * mb;
        let cov = e_ab[ix] - ma * mb;
        ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2))
    }))
}

/// Mean SSIM on Rec. 601 luma, 11×11 Gaussian windows with σ = 1.5.
pub fn mssim(a: &Image, b: &Image) -> Result<f64> {
    let map = ssim_map(a, b)?;
    Ok(map.sum() / map.len() as f64)
}

/// Mean SSIM over windows centred outside `exclude`. With no such window, 1.
pub fn mssim_masked(a: &Image, b: &Image, exclude: &Mask) -> Result<f64> {
    if exclude.size() != a.size() {
        return Err(Error::contract("mask does not match image size"));
    }
    let map = ssim_map(a, b)?;
    let r = WINDOW / 2;
    let (mut sum, mut n) = (0.0, 0usize);
    for ((y, x), v) in map.indexed_iter() {
        if !exclude.get(y + r, x + r) {
            sum += v;
            n += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Both metrics, over the whole image or only outside `exclude`.
pub fn compare(a: &Image, b: &Image, exclude: Option<&Mask>) -> Result<MetricReport> {
    Ok(match exclude {
        None => MetricReport {
            psnr_db: psnr(a, b)?,
            mssim: mssim(a, b)?,
            region: Region::FullImage,
        },
        Some(m) => MetricReport {
            psnr_db: psnr_masked(a, b, m)?,
            mssim: mssim_masked(a, b, m)?,
            region: Region::BackgroundOnly,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |y, x| {
            let v = 128.0 + 60.0 * ((x as f64) * 0.7).sin() + 40.0 * ((y as f64) * 0.45).cos();
            [v, 255.0 - v, (v * 0.5 + 30.0) % 255.0]
        })
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Image::filled(8, 8, [0.0; 3]);
        let b = Image::filled(8, 8, [255.0; 3]);
        assert!(psnr(&a, &b).unwrap().abs() < 1e-12);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let t = texture(16, 16);
        let shifted = Image::from_fn(16, 16, |y, x| t.pixel(y, x).map(|v| v + 1.0));
        let expected = 10.0 * (255.0f64 * 255.0).log10();
        assert!((psnr(&t, &shifted).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn psnr_masked_ignores_excluded_pixels() {
        let a = texture(12, 12);
        let mut b = a.clone();
        b.data_mut()[[3, 4, 0]] += 50.0;
        let mut m = Mask::empty(12, 12);
        m.set(3, 4, true);
        assert_eq!(psnr_masked(&a, &b, &m).unwrap(), PSNR_CAP_DB);
        assert!(psnr(&a, &b).unwrap() < PSNR_CAP_DB);
    }

    #[test]
    fn mssim_identity_and_inversion() {
        let t = texture(32, 32);
        assert_eq!(mssim(&t, &t).unwrap(), 1.0);
        let inv = Image::from_fn(32, 32, |y, x| t.pixel(y, x).map(|v| 255.0 - v));
        assert!(mssim(&t, &inv).unwrap() < 0.1);
    }

    #[test]
    fn mssim_constants_reduce_to_luminance_term() {
        let a = Image::filled(16, 16, [100.0; 3]);
        let b = Image::filled(16, 16, [150.0; 3]);
        let expected = (2.0 * 100.0 * 150.0 + C1) / (100.0f64.powi(2) + 150.0f64.powi(2) + C1);
        assert!((mssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_size_checked() {
        let a = texture(20, 24);
        let b = Image::from_fn(20, 24, |y, x| a.pixel(y, x).map(|v| (v + (x % 5) as f64 * 3.0).min(255.0)));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((mssim(&a, &b).unwrap() - mssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!(mssim(&texture(10, 30), &texture(10, 30)).is_err());
        assert!(psnr(&texture(10, 30), &texture(10, 31)).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let a = texture(16, 16);
        let noisy = |amp: f64| Image::from_fn(16, 16, |y, x| a.pixel(y, x).map(|v| v + amp * if (x + y) % 2 == 0 { 1.0 } else { -1.0 }));
        let p: Vec<f64> = [1.0, 4.0, 16.0].iter().map(|&amp| psnr(&a, &noisy(amp)).unwrap()).collect();
        assert!(p[0] > p[1] && p[1] > p[2]);
    }
}
