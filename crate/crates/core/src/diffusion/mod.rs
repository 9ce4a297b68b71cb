//! Noise schedules, deterministic DDIM steps and inversion trajectories.
//!
//! Timesteps are pipeline indices `0..=T`. `alpha_bar[t]` is the cumulative
//! product of `1 - beta` up to `t`, with `alpha_bar[0] = 1`. Mapping these
//! indices onto a pretrained model's native timesteps is the backend's job.

mod ddim;
mod schedule;
mod trajectory;

pub use ddim::{ddim_denoise_step, ddim_invert_step, denoise_coefficients, forward_diffuse, invert_coefficients};
pub use schedule::{make_schedule, Schedule, DEFAULT_BETA_RANGE, DEFAULT_TRAIN_STEPS};
pub use trajectory::{invert_trajectory, DiffusionTrajectory, TrajectoryManifest};
