//! Synthetic cohort generation, preprocessing, augmentation, stratified
//! splitting and on-disk formats.
//!
//! Preprocessing order: background-aware normalization, centering on a square
//! canvas (fill 0), then corner-aligned bilinear resize.

mod augment;
mod manifest;
mod normalize;
mod phantom;
mod resize;
mod source;
mod split;
pub mod svol;
mod volume;

pub use augment::{augment, flip_horizontal, rotate, AugmentPlan, MAX_ROTATION_DEG};
pub use manifest::{Manifest, ManifestEntry, SplitRole, MANIFEST_FILE};
pub use normalize::{normalize, NormConstants};
pub use phantom::{
    generate_phantom, ClassTemplate, PhantomCase, PhantomSetSpec, PhantomSpec, SpectralCurve,
};
pub use resize::{pad_to_square, resize_bilinear};
pub use source::{fit_constants, preprocess, CaseSource, InMemorySource, PreparedSet, TrackingSource};
pub use split::{split_dataset, stratified_kfold, stratified_split, FoldSplit, Role};
pub use svol::{svol_read, svol_write};
pub use volume::{Label, RawVolume, SpectralVolume, BACKGROUND};
