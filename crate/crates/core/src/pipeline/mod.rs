//! End-to-end orchestration: self-configuration, offline best-parameter
//! search, training, the online evolving loop and the repeated-split
//! experiment harness.

mod config;
mod configure;
mod dataset;
mod evolve;
mod experiment;
mod model;
pub mod report;

pub use self::config::{PipelineConfig, Scope};
pub use self::configure::{
    fit_config, highest_variance_column, offline_best_params, preferred_extremum, segment_context,
    select_features, self_configure, train, FeatureBank, Selection,
};
pub use self::dataset::{random_splits, train_size, Dataset, Sample, Split};
pub use self::evolve::{
    evolve_stream, evolve_stream_with_masks, AcceptAll, EvolutionEntry, EvolutionLog,
    EvolvingSegmenter, FeedbackProvider, GoldFeedback, Proposal, StreamItem,
};
pub use self::experiment::{
    maa_mean, run_experiment, Comparison, ExperimentReport, MethodScores, RunReport,
};
pub use self::model::{train_model, TrainedModel, MODEL_FORMAT};
