use ndarray::Zip;

use crate::diffusion::Schedule;
use crate::error::{Error, Result};
use crate::tensor::LatentTensor;

/// `sqrt(ab_t)·z0 + sqrt(1 - ab_t)·noise`. `t = 0` is the identity.
pub fn forward_diffuse(
    z0: &LatentTensor,
    t: usize,
    noise: &LatentTensor,
    schedule: &Schedule,
) -> Result<LatentTensor> {
    if t > schedule.num_steps() {
        return Err(Error::contract(format!("timestep {t} beyond schedule")));
    }
    let ab = schedule.alpha_bar(t);
    z0.affine_combine(ab.sqrt(), noise, (1.0 - ab).sqrt())
}

/// `(latent, eps)` coefficients of the step `t -> t-1`.
pub fn denoise_coefficients(schedule: &Schedule, t: usize) -> Result<(f64, f64)> {
    schedule.check_step(t)?;
    let (ab_t, ab_prev) = (schedule.alpha_bar(t), schedule.alpha_bar(t - 1));
    Ok((
        (ab_prev / ab_t).sqrt(),
        ab_prev.sqrt() * ((1.0 / ab_prev - 1.0).sqrt() - (1.0 / ab_t - 1.0).sqrt()),
    ))
}

/// `(latent, eps)` coefficients of the step `t-1 -> t`, the exact inverse of the denoising step.
pub fn invert_coefficients(schedule: &Schedule, t: usize) -> Result<(f64, f64)> {
    schedule.check_step(t)?;
    let (ab_t, ab_prev) = (schedule.alpha_bar(t), schedule.alpha_bar(t - 1));
    Ok((
        (ab_t / ab_prev).sqrt(),
        ab_t.sqrt() * ((1.0 / ab_t - 1.0).sqrt() - (1.0 / ab_prev - 1.0).sqrt()),
    ))
}

fn step(z: &LatentTensor, eps: &LatentTensor, (a, b): (f64, f64)) -> Result<LatentTensor> {
    z.ensure_same_shape(eps, "ddim step")?;
    let data = Zip::from(z.data())
        .and(eps.data())
        .map_collect(|&z, &e| a * z + b * e);
    LatentTensor::new(data)
}

/// One deterministic DDIM denoising step from `t` to `t - 1`, given the noise prediction at `(z_t, t)`.
pub fn ddim_denoise_step(
    z_t: &LatentTensor,
    eps: &LatentTensor,
    t: usize,
    schedule: &Schedule,
) -> Result<LatentTensor> {
    step(z_t, eps, denoise_coefficients(schedule, t)?)
}

/// One DDIM inversion step from `t - 1` to `t`, given the noise prediction at `(z_prev, t - 1)`.
pub fn ddim_invert_step(
    z_prev: &LatentTensor,
    eps: &LatentTensor,
    t: usize,
    schedule: &Schedule,
) -> Result<LatentTensor> {
    step(z_prev, eps, invert_coefficients(schedule, t)?)
}
