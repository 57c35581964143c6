//! Parent segmenters, classical baselines, the exhaustive best-parameter
//! search and STAPLE fusion.

mod baseline;
mod region;
mod srm;
mod staple;
mod threshold;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::baseline::{
    baseline_threshold, huang_threshold, kittler_threshold, local_mean_sd, niblack_thresholds,
    otsu_threshold, Baseline, NIBLACK_K, NIBLACK_WINDOW,
};
pub use self::region::region_grow;
pub use self::srm::{region_count, srm_regions, srm_segment};
pub use self::staple::{
    staple, staple_fuse, StapleResult, STAPLE_INIT, STAPLE_MAX_ITER, STAPLE_TOL,
};
pub use self::threshold::{label_components, largest_component, threshold_raw, threshold_segment};

use crate::error::{Error, Result};
use crate::metrics::{jaccard, BinaryMask, GrayImage};

/// Whether objects are darker or brighter than their surroundings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Dark,
    Bright,
}

impl Polarity {
    #[inline]
    pub fn is_object(self, v: f64, t: f64) -> bool {
        match self {
            Polarity::Dark => v <= t,
            Polarity::Bright => v >= t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmenterKind {
    Threshold,
    RegionGrow,
    Srm,
}

impl SegmenterKind {
    pub const ALL: [SegmenterKind; 3] = [
        SegmenterKind::Threshold,
        SegmenterKind::RegionGrow,
        SegmenterKind::Srm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SegmenterKind::Threshold => "threshold",
            SegmenterKind::RegionGrow => "region_grow",
            SegmenterKind::Srm => "srm",
        }
    }

    /// Short label used in reports and on the command line.
    pub fn short(self) -> &'static str {
        match self {
            SegmenterKind::Threshold => "thr",
            SegmenterKind::RegionGrow => "rg",
            SegmenterKind::Srm => "srm",
        }
    }

    pub fn parse(s: &str) -> Option<SegmenterKind> {
        SegmenterKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.short() == s)
    }
}

/// A parent algorithm with its parameter grid and default value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterSpec {
    pub kind: SegmenterKind,
    pub grid: Vec<f64>,
    pub default: f64,
}

impl SegmenterSpec {
    /// Thresholds `0, 1/255, …, 1`, default 128/255 (mid-gray).
    pub fn threshold() -> Self {
        Self {
            kind: SegmenterKind::Threshold,
            grid: (0..=255).map(|i| i as f64 / 255.0).collect(),
            default: 128.0 / 255.0,
        }
    }

    /// Similarities `0.01 … 0.50` in steps of 0.01, default 0.17.
    pub fn region_grow() -> Self {
        Self {
            kind: SegmenterKind::RegionGrow,
            grid: (1..=50).map(|i| i as f64 / 100.0).collect(),
            default: 0.17,
        }
    }

    /// Scales `1, 2, 4, …, 256`, default 32.
    pub fn srm() -> Self {
        Self {
            kind: SegmenterKind::Srm,
            grid: (0..=8).map(|i| (1u32 << i) as f64).collect(),
            default: 32.0,
        }
    }

    pub fn for_kind(kind: SegmenterKind) -> Self {
        match kind {
            SegmenterKind::Threshold => Self::threshold(),
            SegmenterKind::RegionGrow => Self::region_grow(),
            SegmenterKind::Srm => Self::srm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::contract("parameter grid is empty"));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::contract(
                "parameter grid must be strictly increasing",
            ));
        }
        if !self.grid.contains(&self.default) {
            return Err(Error::contract(format!(
                "default {} is not a grid value",
                self.default
            )));
        }
        Ok(())
    }

    /// Grid value closest to `v` (ties to the smaller value).
    pub fn snap(&self, v: f64) -> f64 {
        self.grid
            .iter()
            .copied()
            .fold(None, |best: Option<f64>, g| match best {
                Some(b) if (b - v).abs() <= (g - v).abs() => Some(b),
                _ => Some(g),
            })
            .unwrap_or(v)
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }
}

/// Per-image inputs the parent algorithms need besides the parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentContext {
    pub polarity: Polarity,
    /// Seed for region growing and the SRM object region, `(x, y)`.
    pub seed: (usize, usize),
    /// Keep only the largest connected component after thresholding.
    pub keep_largest: bool,
}

impl SegmentContext {
    pub fn new(polarity: Polarity, seed: (usize, usize)) -> Self {
        Self {
            polarity,
            seed,
            keep_largest: true,
        }
    }
}

/// Runs `kind` with parameter `param`.
pub fn segment(
    kind: SegmenterKind,
    img: &GrayImage,
    param: f64,
    ctx: &SegmentContext,
) -> Result<BinaryMask> {
    match kind {
        SegmenterKind::Threshold => {
            let raw = threshold_raw(img, param, ctx.polarity)?;
            Ok(if ctx.keep_largest {
                largest_component(&raw)
            } else {
                raw
            })
        }
        SegmenterKind::RegionGrow => region_grow(img, &[ctx.seed], param),
        SegmenterKind::Srm => srm_segment(img, param, ctx.seed),
    }
}

/// Best grid parameter of one image against its gold standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParamRecord {
    pub image_id: String,
    pub param: f64,
    pub score: f64,
}

/// Jaccard score of every grid value, in grid order.
pub fn grid_scores(
    img: &GrayImage,
    gold: &BinaryMask,
    spec: &SegmenterSpec,
    ctx: &SegmentContext,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if img.dims() != gold.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: gold.dims(),
        });
    }
    spec.grid
        .par_iter()
        .map(|&p| jaccard(&segment(spec.kind, img, p, ctx)?, gold))
        .collect()
}

/// Exhaustive search over the grid; ties go to the smallest parameter.
pub fn best_parameter_search(
    image_id: &str,
    img: &GrayImage,
    gold: &BinaryMask,
    spec: &SegmenterSpec,
    ctx: &SegmentContext,
) -> Result<BestParamRecord> {
    let scores = grid_scores(img, gold, spec, ctx)?;
    let (i, score) =
        scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, s)| {
                if s > best.1 {
                    (i, s)
                } else {
                    best
                }
            });
    Ok(BestParamRecord {
        image_id: image_id.to_string(),
        param: spec.grid[i],
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_specs_are_valid() {
        for k in SegmenterKind::ALL {
            let s = SegmenterSpec::for_kind(k);
            s.validate().unwrap();
            assert_eq!(SegmenterKind::parse(k.short()), Some(k));
            assert_eq!(SegmenterKind::parse(k.name()), Some(k));
        }
        assert_eq!(SegmenterSpec::threshold().grid.len(), 256);
        assert!(SegmenterSpec::region_grow().grid.contains(&0.12));
        assert!(SegmenterSpec::srm().grid.contains(&64.0));
    }

    #[test]
    fn invalid_specs() {
        let mut s = SegmenterSpec::srm();
        s.default = 33.0;
        assert!(s.validate().is_err());
        s.grid = vec![];
        assert!(s.validate().is_err());
        let s = SegmenterSpec {
            kind: SegmenterKind::Threshold,
            grid: vec![0.2, 0.1],
            default: 0.1,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn snapping() {
        let s = SegmenterSpec::srm();
        assert_eq!(s.snap(45.0), 32.0);
        assert_eq!(s.snap(48.0), 32.0);
        assert_eq!(s.snap(1000.0), 256.0);
        assert_eq!(s.snap(-3.0), 1.0);
    }

    #[test]
    fn search_finds_the_generating_threshold() {
        let img = GrayImage::from_fn(20, 20, |x, y| {
            let d = ((x as f64 - 10.0).powi(2) + (y as f64 - 9.0).powi(2)).sqrt();
            (d / 15.0).min(1.0)
        });
        let spec = SegmenterSpec::threshold();
        let ctx = SegmentContext::new(Polarity::Dark, (10, 9));
        let gold = threshold_segment(&img, spec.grid[90], Polarity::Dark).unwrap();
        let rec = best_parameter_search("a", &img, &gold, &spec, &ctx).unwrap();
        assert_eq!(rec.score, 1.0);
        let at_default = jaccard(
            &segment(spec.kind, &img, spec.default, &ctx).unwrap(),
            &gold,
        )
        .unwrap();
        assert!(rec.score >= at_default);
    }
}
