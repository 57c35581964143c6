//! Image and mask primitives, Jaccard evaluation, and the summary statistics
//! reported for every experiment (mean, σ, 95% CI, t-tests).

mod image;
pub mod io;
mod stats;

pub use self::image::{BinaryMask, GrayImage};
pub use self::stats::{
    jaccard, mean, median, paired_t_test, population_variance, sample_sd, summarize, t_critical,
    welch_t_test, ScoreSummary, TTest,
};
