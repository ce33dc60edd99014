//! The space-squeeze network: a 1x1 spectral embedding, squeeze-and-excitation
//! gating over its channels, two stride-2 3x3 blocks, global average pooling and
//! a linear classifier.
//!
//! Channel widths default to 16/12/12 with an excitation bottleneck of 4, which
//! puts the parameter count at 3,427 (3,279 without the SE block):
//!
//! | layer  | formula                   | count |
//! |--------|---------------------------|-------|
//! | conv1  | 1·1·11·16 + 16            | 192   |
//! | se.fc1 | 4·16 + 4                  | 68    |
//! | se.fc2 | 16·4 + 16                 | 80    |
//! | conv2  | 3·3·16·12 + 12            | 1740  |
//! | conv3  | 3·3·12·12 + 12            | 1308  |
//! | head   | 3·12 + 3                  | 39    |
//!
//! Padding is "same" everywhere and every convolution carries a bias. conv2 and
//! conv3 are structurally identical; any spectral/spatial specialization between
//! them is learned, not imposed.

mod config;
mod network;
mod params;
mod se;

pub use config::{energies_kev, NetworkConfig, ENERGY_LEVELS};
pub use network::{
    forward, loss_and_grads, loss_and_grads_chunked, predict, predict_proba, ForwardTrace,
    GradPair,
};
pub use params::{HeadParams, ParamSet, SeParams, PARAM_NAMES};
pub use se::{se_apply, se_backward, se_excitation, se_forward, SeCache};
