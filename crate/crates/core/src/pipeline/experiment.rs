use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Scope};
use super::configure::{
    fit_config, offline_best_params, segment_context, select_features, train, FeatureBank,
    Selection,
};
use super::dataset::{random_splits, Dataset, Split};
use super::evolve::{
    evolve_stream_with_masks, EvolutionLog, EvolvingSegmenter, GoldFeedback, StreamItem,
};
use crate::error::{Error, Result};
use crate::metrics::{
    jaccard, mean, paired_t_test, summarize, welch_t_test, BinaryMask, ScoreSummary, TTest,
};
use crate::segmenters::{
    segment, staple_fuse, BestParamRecord, SegmentContext, SegmenterKind, SegmenterSpec,
};

/// A t-test in a serializable form; an undefined statistic is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub df: f64,
    pub degenerate: bool,
}

impl Comparison {
    fn new(label: &str, test: &str, t: TTest) -> Self {
        Self {
            label: label.to_string(),
            test: test.to_string(),
            statistic: t.statistic.is_finite().then_some(t.statistic),
            p_value: t.p_value,
            df: t.df,
            degenerate: t.degenerate,
        }
    }
}

/// Scores of one method on the test images of a run, in stream order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub scores: Vec<f64>,
    pub summary: ScoreSummary,
}

impl MethodScores {
    fn new(scores: Vec<f64>) -> Result<Self> {
        let summary = summarize(&scores)?;
        Ok(Self { scores, summary })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub selected_columns: Vec<usize>,
    pub selection_fallback: bool,
    pub initial_rules: usize,
    pub initial_m_rows: usize,
    pub default: MethodScores,
    pub maa: MethodScores,
    pub scefis: MethodScores,
    pub fusion: Option<MethodScores>,
    pub log: EvolutionLog,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: PipelineConfig,
    pub spec: SegmenterSpec,
    pub n_images: usize,
    pub window_z: usize,
    /// Dataset-wide selection; absent when selection runs per training split.
    pub selection: Option<Selection>,
    pub best_params: Vec<BestParamRecord>,
    pub runs: Vec<RunReport>,
    /// Summaries of the per-run means.
    pub overall: Vec<(String, ScoreSummary)>,
}

/// Data shared by all runs of an experiment.
struct Prepared<'a> {
    ds: &'a Dataset,
    cfg: &'a PipelineConfig,
    bank: FeatureBank,
    contexts: Vec<SegmentContext>,
    /// Main parent first, then the fusion parents.
    parents: Vec<(SegmenterSpec, Vec<BestParamRecord>)>,
    default_scores: Vec<f64>,
    selection: Option<Selection>,
}

impl<'a> Prepared<'a> {
    fn new(ds: &'a Dataset, cfg: &'a PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let bank = FeatureBank::build(ds, cfg.seed_ordering)?;
        let contexts: Vec<SegmentContext> = bank
            .analyses
            .iter()
            .map(|a| segment_context(a, cfg.polarity, cfg.keep_largest))
            .collect();
        let mut kinds = vec![cfg.segmenter];
        for &k in &cfg.fusion {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        let parents = kinds
            .into_iter()
            .map(|k| {
                let spec = cfg.spec_for(k)?;
                let best = offline_best_params(ds, &contexts, &spec)?;
                Ok((spec, best))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = &parents[0].0;
        let default_scores = ds
            .samples()
            .par_iter()
            .zip(&contexts)
            .map(|(s, ctx)| jaccard(&segment(spec.kind, &s.image, spec.default, ctx)?, &s.gold))
            .collect::<Result<Vec<_>>>()?;
        let selection = match cfg.selection_scope {
            Scope::All => {
                let all: Vec<usize> = (0..ds.len()).collect();
                Some(select_features(&bank, &all, &cfg.selectors)?)
            }
            Scope::Training => None,
        };
        Ok(Self {
            ds,
            cfg,
            bank,
            contexts,
            parents,
            default_scores,
            selection,
        })
    }

    fn items(&self, images: &[usize]) -> Vec<StreamItem<'_>> {
        images
            .iter()
            .map(|&i| StreamItem {
                image_id: &self.ds.sample(i).id,
                image: &self.ds.sample(i).image,
                analysis: &self.bank.analyses[i],
                context: self.contexts[i],
            })
            .collect()
    }

    fn run(&self, run: usize, split: &Split) -> Result<RunReport> {
        let cfg = self.cfg;
        let selection = match &self.selection {
            Some(s) => s.clone(),
            None => select_features(&self.bank, &split.train, &cfg.selectors)?,
        };
        let all: Vec<usize> = (0..self.ds.len()).collect();
        let norm_images = match cfg.normalization_scope {
            Scope::Training => &split.train,
            Scope::All => &all,
        };
        let config = fit_config(&self.bank, &selection, norm_images)?;
        let items = self.items(&split.test);
        let golds: Vec<(&str, &BinaryMask)> = split
            .test
            .iter()
            .map(|&i| (self.ds.sample(i).id.as_str(), &self.ds.sample(i).gold))
            .collect();

        let mut logs = Vec::new();
        let mut masks = Vec::new();
        let mut initial = (0, 0);
        for (k, (spec, best)) in self.parents.iter().enumerate() {
            let pruning = cfg.pruning(config.selected_columns.len(), spec);
            let rb = train(
                &self.bank,
                &config,
                best,
                &split.train,
                pruning,
                cfg.cluster,
            )?;
            if k == 0 {
                initial = (rb.rule_count(), rb.m_matrix.len());
            }
            let mut seg = EvolvingSegmenter::new(config.clone(), spec.clone(), rb)?;
            let mut feedback = GoldFeedback {
                golds: golds.clone(),
            };
            let (log, m) = evolve_stream_with_masks(&mut seg, &items, &mut feedback)?;
            logs.push(log);
            masks.push(m);
        }

        let best = &self.parents[0].1;
        let default =
            MethodScores::new(split.test.iter().map(|&i| self.default_scores[i]).collect())?;
        let maa = MethodScores::new(split.test.iter().map(|&i| best[i].score).collect())?;
        let log = logs.swap_remove(0);
        let scefis = MethodScores::new(log.scores())?;
        let fusion = if self.parents.len() > 1 {
            let scores = (0..split.test.len())
                .map(|j| {
                    let raters: Vec<BinaryMask> = masks.iter().map(|m| m[j].clone()).collect();
                    jaccard(&staple_fuse(&raters)?, &self.ds.sample(split.test[j]).gold)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(MethodScores::new(scores)?)
        } else {
            None
        };

        let mut comparisons = Vec::new();
        if split.test.len() >= 2 {
            for (label, other) in [
                ("scefis-default", &default.scores),
                ("scefis-maa", &maa.scores),
            ] {
                comparisons.push(Comparison::new(
                    label,
                    "paired",
                    paired_t_test(&scefis.scores, other)?,
                ));
                comparisons.push(Comparison::new(
                    label,
                    "welch",
                    welch_t_test(&scefis.scores, other)?,
                ));
            }
        }
        let ids = |v: &[usize]| v.iter().map(|&i| self.ds.sample(i).id.clone()).collect();
        Ok(RunReport {
            run,
            train_ids: ids(&split.train),
            test_ids: ids(&split.test),
            selected_columns: config.selected_columns,
            selection_fallback: selection.fallback,
            initial_rules: initial.0,
            initial_m_rows: initial.1,
            default,
            maa,
            scefis,
            fusion,
            log,
            comparisons,
        })
    }
}

/// Repeated train/evolve cycles over seeded random splits. Batch mode: the
/// gold masks of the test images act as the expert's corrections.
pub fn run_experiment(ds: &Dataset, cfg: &PipelineConfig) -> Result<ExperimentReport> {
    let prepared = Prepared::new(ds, cfg)?;
    let splits = random_splits(ds.len(), cfg.runs, cfg.seed, cfg.train_fraction);
    let runs = splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| prepared.run(r, split))
        .collect::<Result<Vec<_>>>()?;
    let mut overall = Vec::new();
    let mut push = |name: &str, f: &dyn Fn(&RunReport) -> Option<f64>| -> Result<()> {
        let means: Vec<f64> = runs.iter().filter_map(f).collect();
        if !means.is_empty() {
            overall.push((name.to_string(), summarize(&means)?));
        }
        Ok(())
    };
    push("default", &|r| Some(r.default.summary.mean))?;
    push("maa", &|r| Some(r.maa.summary.mean))?;
    push("scefis", &|r| Some(r.scefis.summary.mean))?;
    push("fusion", &|r| r.fusion.as_ref().map(|f| f.summary.mean))?;
    let spec = prepared.parents[0].0.clone();
    let best_params = prepared.parents[0].1.clone();
    Ok(ExperimentReport {
        config: cfg.clone(),
        spec,
        n_images: ds.len(),
        window_z: prepared.bank.window_z,
        selection: prepared.selection,
        best_params,
        runs,
        overall,
    })
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Mean over runs of a method's per-run mean.
    pub fn mean_of(&self, method: &str) -> Option<f64> {
        self.overall
            .iter()
            .find(|(n, _)| n == method)
            .map(|(_, s)| s.mean)
    }

    /// Each run's `(default, maa, scefis)` means.
    pub fn run_means(&self) -> Vec<(f64, f64, f64)> {
        self.runs
            .iter()
            .map(|r| {
                (
                    r.default.summary.mean,
                    r.maa.summary.mean,
                    r.scefis.summary.mean,
                )
            })
            .collect()
    }

    pub fn kind(&self) -> SegmenterKind {
        self.spec.kind
    }
}

/// Mean of the MAA scores over a set of best-parameter records.
pub fn maa_mean(records: &[BestParamRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::contract("no records"));
    }
    Ok(mean(&records.iter().map(|r| r.score).collect::<Vec<_>>()))
}
