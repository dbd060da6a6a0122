//! Random forest classifier, evaluation schemes and reports.

mod eval;
mod forest;
mod report;
mod split;
mod tree;

use thiserror::Error;

use crate::model::Word;

pub use eval::{
    evaluate, evaluate_table, featurize_dataset, Aggregate, EvalReport, FeatureTable, FoldResult, Scheme,
    SessionSummary, CHANCE_LEVEL,
};
pub use forest::{fit_classes, fit_forest, predict, Criterion, ForestModel, ForestParams, MaxFeatures, Prediction};
pub use report::{
    confusion_csv, flat_csv, reference_points, summary_text, write_report, ReferencePoint,
};
pub use split::{
    all_session_folds, global_5fold, loso_splits, session_7fold, stratified_kfold, SampleIndex, Split,
};
pub use tree::{DecisionTree, Node};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("session {session} has {found} batches, expected {expected}")]
    MissingBatch {
        session: String,
        expected: usize,
        found: usize,
    },
    #[error("label {word} has {count} samples, need at least {needed}")]
    TooFewPerLabel { word: Word, count: usize, needed: usize },
    #[error("dataset has {found} sessions, expected {expected}")]
    WrongSessionCount { expected: usize, found: usize },
    #[error("unknown session {0}")]
    UnknownSession(String),
}
