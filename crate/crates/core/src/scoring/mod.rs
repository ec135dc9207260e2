//! Soft-label text scoring: featurization, training, splits, model selection.

pub mod cv;
pub mod features;
pub mod model;
pub mod predictions;
pub mod split;

pub use cv::{
    compact_candidates, default_candidates, items_from_store, nested_cv, retrain_and_calibrate,
    CandidateModel, CvConfig, CvItem, CvOutcome, CvReport, FoldResult,
};
pub use features::{featurize, FeatureConfig, FeatureVector};
pub use model::{
    default_grid, expected_score, predicted_presence, train_hard, train_soft, Hyper, LabelMode,
    SoftClassifier, TrainingExample,
};
pub use predictions::{import_predictions, PredictionTable};
pub use split::{stratified_kfold, stratified_split, Split};
