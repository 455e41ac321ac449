//! Numerical core for joint-stream multiple instance learning on
//! histopathology slides.
//!
//! The crate is `no_std` and only needs an allocator. It covers the image
//! model and patch extraction, the Fourier and Haar transforms used for the
//! frequency-domain streams, feature bags, the three attention aggregators
//! with hand-written backward passes, the asymmetric multi-label loss, the
//! Adam training loop and the evaluation metrics. File formats, PNG decoding
//! and the command line live in the `jointstream` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod math;

pub mod attention;
pub mod features;
pub mod frequency;
pub mod imaging;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod training;

pub use attention::{HeadKind, HeadParams, MrlPooling};
pub use features::{Domain, FactorLabels, FeatureBag, RawLabels};
pub use imaging::{RasterImage, RoiMask, Semantics};
pub use loss::AslConfig;
pub use matrix::Matrix;

/// Number of diagnostic factors predicted per slide.
pub const NUM_FACTORS: usize = 6;

/// Factor names in label order.
pub const FACTOR_NAMES: [&str; NUM_FACTORS] = ["ER", "PR", "HER2", "HG", "MS", "ALN"];
