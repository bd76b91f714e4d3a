//! Ensemble fusion and evaluation for volumetric brain-tumour segmentations.
//!
//! The crate covers the non-neural half of a BraTS-style pipeline: NIfTI-1
//! volume I/O, ET/TC/WT region semantics, intensity normalisation and seeded
//! augmentations, sliding-window tiling, softmax averaging, majority vote and
//! STAPLE fusion, the small-ET relabelling rule, Dice/HD95 metrics, and
//! summary/ranking reports. [`synth`] provides phantoms and noisy raters so
//! everything can be exercised without trained networks.

pub mod error;
pub mod fusion;
pub mod metrics;
pub mod nifti;
#[cfg(feature = "pipeline")]
pub mod pipeline;
pub mod postprocess;
pub mod preprocess;
pub mod regions;
pub mod report;
pub mod synth;
pub mod tiling;
pub mod volume;

pub use error::{Error, Result};
pub use regions::{recompose_labels, region_mask, Region, RegionMask};
pub use volume::{
    crop, embed, nonzero_bbox, BBox, Geometry, LabelMap, ProbMap, Shape, Spatial, Volume, LABELS,
};
