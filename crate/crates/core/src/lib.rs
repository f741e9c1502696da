//! Loudness measurement, lookahead limiting with exact stem propagation,
//! limiter-based training-data augmentation, loud evaluation-set building
//! and source-separation metrics.

pub mod audio;
pub mod augment;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod limiter;
pub mod loudness;
pub mod metrics;
pub mod synth;

pub use audio::{AudioClip, StemName, StemSet, TrackManifest};
pub use error::{Error, Result};
