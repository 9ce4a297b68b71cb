pub mod app;
pub mod atlas;
pub mod backend;
pub mod destroy;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod imageops;
pub mod io;
pub mod localize;
pub mod metrics;
pub mod par;
pub mod tensor;

pub use error::{Error, Result};
