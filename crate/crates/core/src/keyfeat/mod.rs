//! Self-configuration front end: window sizing, seed detection, the
//! 108-column feature extractor and the stacked per-image feature matrix.

mod features;
pub mod glcm;
mod matrix;
mod plane;
mod seeds;
pub mod transforms;

use serde::{Deserialize, Serialize};

pub use self::features::{
    binned_mode, extract_features, feature_names, image_feature_block, reduce_seed_features,
    ImageFeatureBlock, StatRow, N_STAT_ROWS, N_TOTAL_FEATURES,
};
pub use self::matrix::{FeatureMatrix, RowLabel};
pub use self::seeds::{
    detect_seed_points, detect_seed_points_with, grid_points, Extremum, SeedOrdering, SeedPoint,
    DESCRIPTOR_LEN,
};

use crate::error::{Error, Result};
use crate::metrics::{median, GrayImage};

/// Smallest admissible feature window side.
pub const MIN_WINDOW: usize = 8;

/// Window side from the dataset's image sizes:
/// `round(0.1 · max(median rows, median cols))`, at least [`MIN_WINDOW`].
pub fn compute_window_size(dims: &[(usize, usize)]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::contract("window size needs at least one image"));
    }
    if dims.iter().any(|&(r, c)| r == 0 || c == 0) {
        return Err(Error::contract("image dimensions must be positive"));
    }
    let rows: Vec<f64> = dims.iter().map(|d| d.0 as f64).collect();
    let cols: Vec<f64> = dims.iter().map(|d| d.1 as f64).collect();
    let z = (0.1 * median(&rows).max(median(&cols))).round() as usize;
    Ok(z.max(MIN_WINDOW))
}

/// Per-column z-score statistics computed on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalization {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            sd: vec![1.0; width],
        }
    }

    /// Column means and population standard deviations of `rows`.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::contract("normalization needs at least one row"))?;
        let width = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        sd.iter_mut().for_each(|s| *s = s.sqrt());
        Ok(Self { mean, sd })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Zero-variance columns are only centered.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { v - m })
            .collect()
    }
}

/// Learned configuration: window side, selected raw columns and their
/// normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConfig {
    pub window_z: usize,
    pub n_total_features: usize,
    pub selected_columns: Vec<usize>,
    pub normalization: Normalization,
}

impl SelfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_z < MIN_WINDOW {
            return Err(Error::contract(format!(
                "window {} below minimum",
                self.window_z
            )));
        }
        if self.n_total_features != N_TOTAL_FEATURES {
            return Err(Error::contract("raw feature width must be 108"));
        }
        if self.selected_columns.is_empty() {
            return Err(Error::contract("no selected columns"));
        }
        if !self.selected_columns.windows(2).all(|w| w[0] < w[1])
            || *self.selected_columns.last().unwrap() >= N_TOTAL_FEATURES
        {
            return Err(Error::contract(
                "selected columns must be strictly increasing and < 108",
            ));
        }
        if self.normalization.width() != self.selected_columns.len() {
            return Err(Error::contract(
                "normalization width differs from selection",
            ));
        }
        Ok(())
    }

    /// The eight statistic rows of a block restricted to the selected columns.
    pub fn select(&self, block: &ImageFeatureBlock) -> Vec<Vec<f64>> {
        block
            .rows
            .iter()
            .map(|r| self.selected_columns.iter().map(|&c| r[c]).collect())
            .collect()
    }

    /// [`SelfConfig::select`] followed by normalization.
    pub fn project(&self, block: &ImageFeatureBlock) -> Vec<Vec<f64>> {
        self.select(block)
            .iter()
            .map(|r| self.normalization.apply(r))
            .collect()
    }
}

/// Seeds plus feature block of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAnalysis {
    pub seeds: Vec<SeedPoint>,
    pub block: ImageFeatureBlock,
}

impl ImageAnalysis {
    /// Highest-response seed, preferring extrema whose sign matches `prefer`.
    pub fn strongest_seed(&self, prefer: Option<Extremum>) -> &SeedPoint {
        prefer
            .and_then(|kind| strongest(self.seeds.iter().filter(|s| s.extremum == kind)))
            .or_else(|| strongest(self.seeds.iter()))
            .expect("analysis always has at least one seed")
    }
}

fn strongest<'a>(seeds: impl Iterator<Item = &'a SeedPoint>) -> Option<&'a SeedPoint> {
    seeds.fold(None, |acc: Option<&SeedPoint>, s| match acc {
        Some(a) if a.response >= s.response => Some(a),
        _ => Some(s),
    })
}

/// Detects seeds and builds the feature block of one image.
pub fn analyze_image(
    image_id: &str,
    img: &GrayImage,
    z: usize,
    ordering: SeedOrdering,
) -> Result<ImageAnalysis> {
    let seeds = detect_seed_points_with(img, z, ordering)?;
    let block = image_feature_block(image_id, img, &seeds, z)?;
    Ok(ImageAnalysis { seeds, block })
}
