//! Per-aspect sentiment classifiers and the one-stage and two-stage
//! pipelines built from them.

mod model;
mod pipeline;
mod rebalance;
mod selection;

pub use model::{
    encode_labels, train_classifier, ClassifierKind, ClassifierModel, Hyperparams, LogregFit, LogregProblem,
};
pub use pipeline::{
    feature_matrix, predict_corpus, prediction_header, read_predictions, split_indices, Architecture,
    AspectModels, AspectPipeline, Featurizer, Manifest, PipelineOptions, PredictSummary, SentimentVector, Split,
};
pub use rebalance::{interpolate, random_oversample, smote};
pub use selection::{model_selection, selection_table_csv, FeatureSetup, SelectionRow};
