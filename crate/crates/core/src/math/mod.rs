//! Dense math kernel: MLP with reverse-mode gradients, diagonal-Gaussian
//! action head, and Adam. Generic over the scalar type.

pub mod adam;
pub mod gaussian;
pub mod mlp;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use gaussian::{clamp_log_std, GaussianHead, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{Activation, Layer, Mlp, MlpCache, MlpGrads};
