use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::featsel::{self_select_with, SelectionTrace, SelectorParams};
use crate::fuzzy::{novel_rows, ClusterParams, Pruning, RuleBase};
use crate::keyfeat::{
    analyze_image, compute_window_size, Extremum, FeatureMatrix, ImageAnalysis, Normalization,
    SeedOrdering, SelfConfig, N_TOTAL_FEATURES,
};
use crate::metrics::population_variance;
use crate::segmenters::{
    best_parameter_search, BestParamRecord, Polarity, SegmentContext, SegmenterSpec,
};

/// Seeds and feature blocks of every dataset image, computed with a window
/// sized from all image dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBank {
    pub window_z: usize,
    pub ordering: SeedOrdering,
    /// In dataset order.
    pub analyses: Vec<ImageAnalysis>,
}

impl FeatureBank {
    pub fn build(ds: &Dataset, ordering: SeedOrdering) -> Result<Self> {
        let window_z = compute_window_size(&ds.dims())?;
        let analyses = ds
            .samples()
            .par_iter()
            .map(|s| analyze_image(&s.id, &s.image, window_z, ordering))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            window_z,
            ordering,
            analyses,
        })
    }

    /// F_3 over the given images, eight rows per image.
    pub fn f3(&self, images: &[usize]) -> FeatureMatrix {
        let blocks: Vec<_> = images
            .iter()
            .map(|&i| self.analyses[i].block.clone())
            .collect();
        FeatureMatrix::from_blocks(&blocks)
    }
}

/// Dark objects sit at DoG maxima, bright ones at minima.
pub fn preferred_extremum(polarity: Polarity) -> Extremum {
    match polarity {
        Polarity::Dark => Extremum::Maximum,
        Polarity::Bright => Extremum::Minimum,
    }
}

/// Segmentation context of one image: its strongest seed of the matching
/// polarity.
pub fn segment_context(
    analysis: &ImageAnalysis,
    polarity: Polarity,
    keep_largest: bool,
) -> SegmentContext {
    let s = analysis.strongest_seed(Some(preferred_extremum(polarity)));
    SegmentContext {
        polarity,
        seed: (s.x, s.y),
        keep_largest,
    }
}

/// Outcome of feature selection over a set of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub trace: SelectionTrace,
    /// Raw column indices, strictly increasing, never empty.
    pub columns: Vec<usize>,
    /// The selectors left nothing and the highest-variance column was used.
    pub fallback: bool,
}

/// Index of the column with the largest population variance; ties go to the
/// lower index.
pub fn highest_variance_column(f: &DMatrix<f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..f.ncols() {
        let col: Vec<f64> = f.column(j).iter().copied().collect();
        let v = population_variance(&col);
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

pub fn select_features(
    bank: &FeatureBank,
    images: &[usize],
    params: &SelectorParams,
) -> Result<Selection> {
    if images.is_empty() {
        return Err(Error::contract(
            "feature selection needs at least one image",
        ));
    }
    let f3 = bank.f3(images);
    let trace = self_select_with(&f3.data, params)?;
    let (columns, fallback) = if trace.final_columns.is_empty() {
        (vec![highest_variance_column(&f3.data)], true)
    } else {
        (trace.final_columns.clone(), false)
    };
    Ok(Selection {
        trace,
        columns,
        fallback,
    })
}

/// Attaches normalization statistics fitted on the given images' rows.
pub fn fit_config(
    bank: &FeatureBank,
    selection: &Selection,
    images: &[usize],
) -> Result<SelfConfig> {
    if images.is_empty() {
        return Err(Error::contract("normalization needs at least one image"));
    }
    let mut config = SelfConfig {
        window_z: bank.window_z,
        n_total_features: N_TOTAL_FEATURES,
        selected_columns: selection.columns.clone(),
        normalization: Normalization::identity(selection.columns.len()),
    };
    let rows: Vec<Vec<f64>> = images
        .iter()
        .flat_map(|&i| config.select(&bank.analyses[i].block))
        .collect();
    config.normalization = Normalization::fit(&rows)?;
    config.validate()?;
    Ok(config)
}

/// Selection over `selection_images`, normalization over `normalization_images`.
pub fn self_configure(
    bank: &FeatureBank,
    selection_images: &[usize],
    normalization_images: &[usize],
    params: &SelectorParams,
) -> Result<(SelfConfig, Selection)> {
    let selection = select_features(bank, selection_images, params)?;
    let config = fit_config(bank, &selection, normalization_images)?;
    Ok((config, selection))
}

/// Best grid parameter of every image against its gold mask, in dataset order.
pub fn offline_best_params(
    ds: &Dataset,
    contexts: &[SegmentContext],
    spec: &SegmenterSpec,
) -> Result<Vec<BestParamRecord>> {
    if contexts.len() != ds.len() {
        return Err(Error::contract(
            "one segmentation context per image required",
        ));
    }
    ds.samples()
        .iter()
        .zip(contexts)
        .map(|(s, ctx)| best_parameter_search(&s.id, &s.image, &s.gold, spec, ctx))
        .collect()
}

/// Initial rule base from the training images in order. The first image
/// contributes all eight rows; later images only rows that are not already
/// represented in `M`/`O`.
pub fn train(
    bank: &FeatureBank,
    config: &SelfConfig,
    best: &[BestParamRecord],
    images: &[usize],
    pruning: Pruning,
    cluster: ClusterParams,
) -> Result<RuleBase> {
    let (&first, rest) = images
        .split_first()
        .ok_or_else(|| Error::contract("training split is empty"))?;
    let mut m = config.project(&bank.analyses[first].block);
    let mut o = vec![best[first].param; m.len()];
    for &i in rest {
        let rows = config.project(&bank.analyses[i].block);
        let t = best[i].param;
        for k in novel_rows(&m, &o, &rows, t, &pruning) {
            m.push(rows[k].clone());
            o.push(t);
        }
    }
    RuleBase::from_normalized(config.normalization.clone(), m, o, pruning, cluster)
}
