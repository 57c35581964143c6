//! Self-configuring evolving fuzzy image segmentation.
//!
//! The crate learns to tune the single parameter of a parent segmentation
//! algorithm (global threshold, region-growing similarity, or statistical
//! region merging scale) from expert-corrected masks:
//!
//! * [`keyfeat`] sizes the feature window from the data, detects seed points
//!   and extracts a 108-column texture/statistics vector around each one;
//! * [`featsel`] prunes correlated columns and runs an ensemble of six
//!   unsupervised selectors;
//! * [`segmenters`] holds the parent algorithms, classical baselines, the
//!   exhaustive best-parameter search and STAPLE fusion;
//! * [`fuzzy`] builds Takagi–Sugeno rule bases by subtractive clustering and
//!   evolves them from feedback;
//! * [`pipeline`] wires everything into the self-configure / train / evolve
//!   loop and the multi-run experiment harness.
//!
//! The accompanying book (`book/`) walks through each stage; its code
//! listings are compiled and run as doctests of this crate.

pub mod error;
pub mod featsel;
pub mod fuzzy;
pub mod keyfeat;
pub mod metrics;
pub mod pipeline;
pub mod segmenters;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/segmenters.md")]
    mod segmenters {}
    #[doc = include_str!("../../../book/src/fuzzy.md")]
    mod fuzzy {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
