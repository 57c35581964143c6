use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{aggregate, Aggregate, RuleBase};
use crate::keyfeat::{ImageAnalysis, SelfConfig};
use crate::metrics::{jaccard, summarize, BinaryMask, GrayImage, ScoreSummary};
use crate::segmenters::{best_parameter_search, segment, SegmentContext, SegmenterSpec};

/// What the system shows for one image before feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub image_id: String,
    /// One inferred parameter per statistic row.
    pub t_o: Vec<f64>,
    pub aggregate: Aggregate,
    /// Aggregated parameter clamped and snapped to the grid.
    pub t_star: f64,
    pub mask: BinaryMask,
    pub rule_count: usize,
}

/// One processed image of the online stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEntry {
    pub image_id: String,
    pub t_o: Vec<f64>,
    pub t_star: f64,
    /// Jaccard of the proposed mask against the correction.
    pub score: f64,
    /// Best grid parameter against the correction.
    pub t_b: f64,
    pub best_score: f64,
    pub appended: usize,
    pub discarded: usize,
    pub rule_count: usize,
    pub m_rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionLog {
    pub entries: Vec<EvolutionEntry>,
    /// Images without feedback; the rule base was left untouched.
    pub skipped: Vec<String>,
}

impl EvolutionLog {
    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn rule_counts(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.rule_count).collect()
    }

    pub fn summary(&self) -> Result<ScoreSummary> {
        summarize(&self.scores())
    }
}

/// Supplies the corrected mask for a proposal. `None` means no feedback
/// arrived and the image is skipped.
pub trait FeedbackProvider {
    fn feedback(&mut self, image_id: &str, proposal: &BinaryMask) -> Option<BinaryMask>;
}

/// Batch mode: the stored gold standard plays the expert.
pub struct GoldFeedback<'a> {
    pub golds: Vec<(&'a str, &'a BinaryMask)>,
}

impl FeedbackProvider for GoldFeedback<'_> {
    fn feedback(&mut self, image_id: &str, _proposal: &BinaryMask) -> Option<BinaryMask> {
        self.golds
            .iter()
            .find(|(id, _)| *id == image_id)
            .map(|(_, g)| (*g).clone())
    }
}

/// Accepts every proposal unchanged.
pub struct AcceptAll;

impl FeedbackProvider for AcceptAll {
    fn feedback(&mut self, _image_id: &str, proposal: &BinaryMask) -> Option<BinaryMask> {
        Some(proposal.clone())
    }
}

/// Everything the online loop needs about one image.
#[derive(Debug, Clone, Copy)]
pub struct StreamItem<'a> {
    pub image_id: &'a str,
    pub image: &'a GrayImage,
    pub analysis: &'a ImageAnalysis,
    pub context: SegmentContext,
}

/// A trained rule base driving one parent algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvingSegmenter {
    pub config: SelfConfig,
    pub spec: SegmenterSpec,
    pub rule_base: RuleBase,
}

impl EvolvingSegmenter {
    pub fn new(config: SelfConfig, spec: SegmenterSpec, rule_base: RuleBase) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        if rule_base.input_dim != config.selected_columns.len() {
            return Err(Error::contract(
                "rule base width differs from the selected features",
            ));
        }
        Ok(Self {
            config,
            spec,
            rule_base,
        })
    }

    /// Parameter for an image: infer on each statistic row, blend, clamp to
    /// the grid range and snap.
    pub fn infer(&self, analysis: &ImageAnalysis) -> Result<(Vec<f64>, Aggregate, f64)> {
        let rows = self.config.select(&analysis.block);
        let t_o = self.rule_base.infer(&rows)?;
        let agg = aggregate(&t_o)?;
        let t_star = self
            .spec
            .snap(agg.value.clamp(self.spec.lo(), self.spec.hi()));
        Ok((t_o, agg, t_star))
    }

    pub fn propose(&self, item: &StreamItem<'_>) -> Result<Proposal> {
        let (t_o, aggregate, t_star) = self.infer(item.analysis)?;
        let mask = segment(self.spec.kind, item.image, t_star, &item.context)?;
        Ok(Proposal {
            image_id: item.image_id.to_string(),
            t_o,
            aggregate,
            t_star,
            mask,
            rule_count: self.rule_base.rule_count(),
        })
    }

    /// Scores the proposal against the correction, finds the best parameter
    /// for the correction and evolves the rule base with it.
    pub fn learn(
        &mut self,
        item: &StreamItem<'_>,
        proposal: &Proposal,
        corrected: &BinaryMask,
    ) -> Result<EvolutionEntry> {
        if corrected.dims() != item.image.dims() {
            return Err(Error::DimensionMismatch {
                expected: item.image.dims(),
                actual: corrected.dims(),
            });
        }
        let score = jaccard(&proposal.mask, corrected)?;
        let best = best_parameter_search(
            item.image_id,
            item.image,
            corrected,
            &self.spec,
            &item.context,
        )?;
        let rows = self.config.select(&item.analysis.block);
        let outcome = self.rule_base.prune_and_evolve(&rows, best.param)?;
        Ok(EvolutionEntry {
            image_id: item.image_id.to_string(),
            t_o: proposal.t_o.clone(),
            t_star: proposal.t_star,
            score,
            t_b: best.param,
            best_score: best.score,
            appended: outcome.appended,
            discarded: outcome.discarded,
            rule_count: outcome.rules,
            m_rows: self.rule_base.m_matrix.len(),
        })
    }
}

/// Runs the online loop over `items` in order. Returns the log and the
/// proposed mask of every item that received feedback.
pub fn evolve_stream_with_masks(
    seg: &mut EvolvingSegmenter,
    items: &[StreamItem<'_>],
    feedback: &mut dyn FeedbackProvider,
) -> Result<(EvolutionLog, Vec<BinaryMask>)> {
    let mut log = EvolutionLog::default();
    let mut masks = Vec::with_capacity(items.len());
    for item in items {
        let proposal = seg.propose(item)?;
        match feedback.feedback(item.image_id, &proposal.mask) {
            Some(corrected) => {
                log.entries.push(seg.learn(item, &proposal, &corrected)?);
                masks.push(proposal.mask);
            }
            None => log.skipped.push(item.image_id.to_string()),
        }
    }
    Ok((log, masks))
}

pub fn evolve_stream(
    seg: &mut EvolvingSegmenter,
    items: &[StreamItem<'_>],
    feedback: &mut dyn FeedbackProvider,
) -> Result<EvolutionLog> {
    Ok(evolve_stream_with_masks(seg, items, feedback)?.0)
}
