use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{LatentTensor, Mask};

fn check_mask(z: &LatentTensor, mask: &Mask, what: &str) -> Result<()> {
    if mask.size() != z.spatial() {
        return Err(Error::contract(format!(
            "{what}: mask {:?} does not match latent {:?}",
            mask.size(),
            z.spatial()
        )));
    }
    Ok(())
}

/// Overwrite the masked cells of `z` with Gaussian draws matching each channel's
/// mean and variance over the whole latent. Channels whose variance is at most
/// `sigma_floor` are filled with their mean.
pub fn noise_fill(z: &LatentTensor, mask: &Mask, seed: u64, sigma_floor: f64) -> Result<LatentTensor> {
    check_mask(z, mask, "noise fill")?;
    if !(sigma_floor >= 0.0 && sigma_floor.is_finite()) {
        return Err(Error::config(format!("sigma floor must be finite and >= 0, got {sigma_floor}")));
    }
    let mut out = z.data().clone();
    if mask.is_empty() {
        return LatentTensor::new(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = z.shape();
    let n = (h * w) as f64;
    for ch in 0..c {
        let plane = z.channel(ch);
        let mean = plane.sum() / n;
        let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var <= sigma_floor { 0.0 } else { var.sqrt() };
        for y in 0..h {
            for x in 0..w {
                if mask.get(y, x) {
                    let draw: f64 = StandardNormal.sample(&mut rng);
                    out[[ch, y, x]] = mean + std * draw;
                }
            }
        }
    }
    LatentTensor::new(out)
}

/// Source latent outside `mask`, edited latent inside it. Cells are copied, not blended.
pub fn latent_replace(z_edit: &LatentTensor, z_src: &LatentTensor, mask: &Mask) -> Result<LatentTensor> {
    z_edit.ensure_same_shape(z_src, "latent replace")?;
    check_mask(z_edit, mask, "latent replace")?;
    let mut out = z_src.data().clone();
    let (c, h, w) = z_edit.shape();
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) {
                for ch in 0..c {
                    out[[ch, y, x]] = z_edit.data()[[ch, y, x]];
                }
            }
        }
    }
    LatentTensor::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn ramp(c: usize, h: usize, w: usize) -> LatentTensor {
        LatentTensor::new(Array3::from_shape_fn((c, h, w), |(k, y, x)| {
            (k as f64 + 1.0) * ((y * w + x) as f64 / (h * w) as f64) - 0.3 * k as f64
        }))
        .unwrap()
    }

    #[test]
    fn empty_mask_is_identity() {
        let z = ramp(2, 5, 5);
        assert_eq!(noise_fill(&z, &Mask::empty(5, 5), 3, 1e-6).unwrap(), z);
    }

    #[test]
    fn fill_matches_channel_statistics() {
        let z = ramp(2, 128, 128);
        let out = noise_fill(&z, &Mask::full(128, 128), 11, 1e-6).unwrap();
        let n = (128 * 128) as f64;
        for ch in 0..2 {
            let src = z.channel(ch);
            let mu = src.sum() / n;
            let var = src.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let got = out.channel(ch);
            let m = got.sum() / n;
            let v = got.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!((m - mu).abs() < 3.0 * (var / n).sqrt(), "mean {m} vs {mu}");
            assert!((v / var - 1.0).abs() < 0.1, "variance {v} vs {var}");
        }
    }

    #[test]
    fn outside_untouched_and_constant_fills_mean() {
        let z = LatentTensor::from_elem((3, 6, 6), 0.7).unwrap();
        let mask = Mask::from_fn(6, 6, |y, _| y < 3);
        let out = noise_fill(&z, &mask, 0, 1e-6).unwrap();
        let first = out.data()[[0, 0, 0]];
        assert!((first - 0.7).abs() < 1e-12);
        assert!(out.data().iter().take(18).all(|&v| v == first));
        assert_eq!(out.max_abs_diff(&z), (first - 0.7).abs());
        let r = ramp(1, 6, 6);
        let out = noise_fill(&r, &mask, 0, 1e-6).unwrap();
        for y in 3..6 {
            for x in 0..6 {
                assert_eq!(out.data()[[0, y, x]], r.data()[[0, y, x]]);
            }
        }
    }

    #[test]
    fn fill_is_seeded() {
        let z = ramp(2, 8, 8);
        let m = Mask::full(8, 8);
        assert_eq!(noise_fill(&z, &m, 5, 1e-6).unwrap(), noise_fill(&z, &m, 5, 1e-6).unwrap());
        assert_ne!(noise_fill(&z, &m, 5, 1e-6).unwrap(), noise_fill(&z, &m, 6, 1e-6).unwrap());
    }

    #[test]
    fn replace_extremes_and_idempotence() {
        let a = ramp(2, 4, 4);
        let b = LatentTensor::zeros((2, 4, 4));
        assert_eq!(latent_replace(&a, &b, &Mask::full(4, 4)).unwrap(), a);
        assert_eq!(latent_replace(&a, &b, &Mask::empty(4, 4)).unwrap(), b);
        let m = Mask::from_fn(4, 4, |y, x| y == x);
        let once = latent_replace(&a, &b, &m).unwrap();
        assert_eq!(latent_replace(&once, &b, &m).unwrap(), once);
        assert!(latent_replace(&a, &LatentTensor::zeros((2, 4, 5)), &m).is_err());
    }
}
