use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::glcm::{texture, Direction};
use super::seeds::{SeedPoint, DESCRIPTOR_LEN};
use super::transforms::{dct2, feature_window, gradient_magnitude, haar_approximation};
use crate::error::{Error, Result};
use crate::metrics::{median, population_variance, GrayImage};

/// Width of the raw feature vector.
pub const N_TOTAL_FEATURES: usize = 108;
/// Number of per-image statistic rows.
pub const N_STAT_ROWS: usize = 8;

const MODE_BINS: usize = 64;

const SOURCES: [&str; 4] = ["rc", "dc", "ac", "gm"];
const WINDOW_STATS: [&str; 8] = [
    "mean",
    "median",
    "sd",
    "covariance",
    "mode",
    "range",
    "min",
    "max",
];
const DESCRIPTOR_STATS: [&str; 8] = [
    "mean",
    "median",
    "sd",
    "covariance",
    "range",
    "min_nonzero",
    "max",
    "zero_population",
];
const TEXTURE_STATS: [&str; 4] = ["contrast", "correlation", "energy", "homogeneity"];

/// Order of the statistic rows in an image feature block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatRow {
    Mean,
    Median,
    Mode,
    Sd,
    Covariance,
    Range,
    Min,
    Max,
}

impl StatRow {
    pub const ALL: [StatRow; N_STAT_ROWS] = [
        StatRow::Mean,
        StatRow::Median,
        StatRow::Mode,
        StatRow::Sd,
        StatRow::Covariance,
        StatRow::Range,
        StatRow::Min,
        StatRow::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatRow::Mean => "mean",
            StatRow::Median => "median",
            StatRow::Mode => "mode",
            StatRow::Sd => "sd",
            StatRow::Covariance => "covariance",
            StatRow::Range => "range",
            StatRow::Min => "min",
            StatRow::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<StatRow> {
        StatRow::ALL.into_iter().find(|r| r.name() == s)
    }
}

/// Column identifiers of the 108-wide raw feature vector, in emission order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_TOTAL_FEATURES);
    for src in SOURCES {
        for stat in WINDOW_STATS {
            names.push(format!("{src}_{stat}"));
        }
    }
    for stat in DESCRIPTOR_STATS {
        names.push(format!("ds_{stat}"));
    }
    for src in SOURCES {
        for dir in Direction::ALL {
            for stat in TEXTURE_STATS {
                names.push(format!("{src}_glcm{:03}_{stat}", dir.degrees()));
            }
        }
    }
    for stat in TEXTURE_STATS {
        names.push(format!("ds_glcm000_{stat}"));
    }
    debug_assert_eq!(names.len(), N_TOTAL_FEATURES);
    names
}

/// Most populated of 64 equal bins over `[min, max]`, reported as the bin
/// center. Ties go to the lower bin; constant input returns the constant.
pub fn binned_mode(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let mut counts = [0usize; MODE_BINS];
    for &v in values {
        let b = (((v - lo) / span * MODE_BINS as f64).floor() as usize).min(MODE_BINS - 1);
        counts[b] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    lo + (best as f64 + 0.5) * span / MODE_BINS as f64
}

struct Basic {
    mean: f64,
    median: f64,
    sd: f64,
    variance: f64,
    mode: f64,
    min: f64,
    max: f64,
}

fn basic(values: &[f64]) -> Basic {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (mean, variance) = if min == max {
        (min, 0.0)
    } else {
        (
            values.iter().sum::<f64>() / values.len() as f64,
            population_variance(values),
        )
    };
    Basic {
        mean,
        median: median(values),
        sd: variance.sqrt(),
        variance,
        mode: binned_mode(values),
        min,
        max,
    }
}

fn window_stats(m: &DMatrix<f64>) -> [f64; 8] {
    let b = basic(m.as_slice());
    [
        b.mean,
        b.median,
        b.sd,
        b.variance,
        b.mode,
        b.max - b.min,
        b.min,
        b.max,
    ]
}

fn descriptor_stats(d: &[f64]) -> [f64; 8] {
    let b = basic(d);
    let min_nonzero = d
        .iter()
        .copied()
        .filter(|&v| v != 0.0)
        .fold(f64::INFINITY, f64::min);
    let min_nonzero = if min_nonzero.is_finite() {
        min_nonzero
    } else {
        0.0
    };
    let zeros = d.iter().filter(|&&v| v == 0.0).count() as f64;
    [
        b.mean,
        b.median,
        b.sd,
        b.variance,
        b.max - b.min,
        min_nonzero,
        b.max,
        zeros,
    ]
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// The 108 raw features of the `z×z` window around `seed`.
///
/// Column groups, in order: eight window statistics for the raw window, its
/// DCT, its Haar approximation and its gradient magnitude (32); eight
/// descriptor statistics (8); four GLCM statistics in four directions for
/// each of the four window sources (64); four GLCM statistics of the
/// descriptor at 0° (4).
pub fn extract_features(img: &GrayImage, seed: &SeedPoint, z: usize) -> Result<Vec<f64>> {
    if seed.x >= img.width() || seed.y >= img.height() {
        return Err(Error::contract(format!(
            "seed ({}, {}) outside {}x{} image",
            seed.x,
            seed.y,
            img.width(),
            img.height()
        )));
    }
    if seed.descriptor.len() != DESCRIPTOR_LEN {
        return Err(Error::contract(format!(
            "descriptor has {} entries, expected {DESCRIPTOR_LEN}",
            seed.descriptor.len()
        )));
    }
    let rc = feature_window(img, seed.x, seed.y, z);
    if rc.nrows() < 2 || rc.ncols() < 2 {
        return Err(Error::contract("feature window must be at least 2x2"));
    }
    let sources = [dct2(&rc), haar_approximation(&rc), gradient_magnitude(&rc)];
    let sources = [&rc, &sources[0], &sources[1], &sources[2]];

    let mut out = Vec::with_capacity(N_TOTAL_FEATURES);
    for m in sources {
        out.extend(window_stats(m));
    }
    out.extend(descriptor_stats(&seed.descriptor));
    for m in sources {
        for dir in Direction::ALL {
            out.extend(texture(m, dir).to_array());
        }
    }
    let ds = DMatrix::from_row_slice(1, DESCRIPTOR_LEN, &seed.descriptor);
    out.extend(texture(&ds, Direction::Deg0).to_array());
    debug_assert_eq!(out.len(), N_TOTAL_FEATURES);
    Ok(out.into_iter().map(sanitize).collect())
}

/// `S_T × N_T` block of one image: each column of the per-seed feature
/// matrix reduced by the eight row statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeatureBlock {
    pub image_id: String,
    pub rows: Vec<Vec<f64>>,
}

impl ImageFeatureBlock {
    pub fn row(&self, stat: StatRow) -> &[f64] {
        let i = StatRow::ALL.iter().position(|&s| s == stat).unwrap();
        &self.rows[i]
    }
}

/// Reduces per-seed feature rows to the eight statistic rows.
pub fn reduce_seed_features(image_id: &str, per_seed: &[Vec<f64>]) -> Result<ImageFeatureBlock> {
    if per_seed.is_empty() {
        return Err(Error::contract("no seed features to reduce"));
    }
    let width = per_seed[0].len();
    let mut rows = vec![vec![0.0; width]; N_STAT_ROWS];
    let mut column = Vec::with_capacity(per_seed.len());
    for j in 0..width {
        column.clear();
        column.extend(per_seed.iter().map(|r| r[j]));
        let b = basic(&column);
        let stats = [
            b.mean,
            b.median,
            b.mode,
            b.sd,
            b.variance,
            b.max - b.min,
            b.min,
            b.max,
        ];
        for (row, v) in rows.iter_mut().zip(stats) {
            row[j] = sanitize(v);
        }
    }
    Ok(ImageFeatureBlock {
        image_id: image_id.to_string(),
        rows,
    })
}

/// Per-seed features for every seed, then the eight-row reduction.
pub fn image_feature_block(
    image_id: &str,
    img: &GrayImage,
    seeds: &[SeedPoint],
    z: usize,
) -> Result<ImageFeatureBlock> {
    let per_seed = seeds
        .iter()
        .map(|s| extract_features(img, s, z))
        .collect::<Result<Vec<_>>>()?;
    reduce_seed_features(image_id, &per_seed)
}
