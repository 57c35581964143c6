use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Scope};
use super::configure::{fit_config, segment_context, select_features, train, FeatureBank};
use super::dataset::{random_splits, Dataset};
use super::evolve::EvolvingSegmenter;
use crate::error::{Error, Result};
use crate::keyfeat::{analyze_image, ImageAnalysis};
use crate::metrics::GrayImage;
use crate::segmenters::{best_parameter_search, SegmentContext};

pub const MODEL_FORMAT: u32 = 1;

/// A trained segmenter plus what is needed to analyse new images the same
/// way and the split it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: u32,
    pub pipeline: PipelineConfig,
    pub segmenter: EvolvingSegmenter,
    pub train_ids: Vec<String>,
    /// Held-out images in stream order.
    pub test_ids: Vec<String>,
}

impl TrainedModel {
    /// Seeds and features of a new image under the trained window and
    /// ordering.
    pub fn analyze(&self, image_id: &str, img: &GrayImage) -> Result<ImageAnalysis> {
        analyze_image(
            image_id,
            img,
            self.segmenter.config.window_z,
            self.pipeline.seed_ordering,
        )
    }

    pub fn context(&self, analysis: &ImageAnalysis) -> SegmentContext {
        segment_context(analysis, self.pipeline.polarity, self.pipeline.keep_largest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported model format {} (expected {MODEL_FORMAT})",
                m.format
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Self-configures and trains on the training half of split `run`. Gold
/// masks of the test images are never read.
pub fn train_model(ds: &Dataset, cfg: &PipelineConfig, run: usize) -> Result<TrainedModel> {
    cfg.validate()?;
    let split = random_splits(ds.len(), run + 1, cfg.seed, cfg.train_fraction)
        .pop()
        .expect("at least one split");
    let bank = FeatureBank::build(ds, cfg.seed_ordering)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let selection_images = match cfg.selection_scope {
        Scope::All => &all,
        Scope::Training => &split.train,
    };
    let selection = select_features(&bank, selection_images, &cfg.selectors)?;
    let norm_images = match cfg.normalization_scope {
        Scope::All => &all,
        Scope::Training => &split.train,
    };
    let config = fit_config(&bank, &selection, norm_images)?;
    let spec = cfg.spec()?;
    // Only training images get a best parameter; the rest stay unset.
    let mut best = vec![None; ds.len()];
    for &i in &split.train {
        let s = ds.sample(i);
        let ctx = segment_context(&bank.analyses[i], cfg.polarity, cfg.keep_largest);
        best[i] = Some(best_parameter_search(
            &s.id, &s.image, &s.gold, &spec, &ctx,
        )?);
    }
    let records: Vec<_> = best
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or(crate::segmenters::BestParamRecord {
                image_id: ds.sample(i).id.clone(),
                param: f64::NAN,
                score: f64::NAN,
            })
        })
        .collect();
    let pruning = cfg.pruning(config.selected_columns.len(), &spec);
    let rb = train(&bank, &config, &records, &split.train, pruning, cfg.cluster)?;
    let ids = |v: &[usize]| v.iter().map(|&i| ds.sample(i).id.clone()).collect();
    Ok(TrainedModel {
        format: MODEL_FORMAT,
        pipeline: cfg.clone(),
        segmenter: EvolvingSegmenter::new(config, spec, rb)?,
        train_ids: ids(&split.train),
        test_ids: ids(&split.test),
    })
}
