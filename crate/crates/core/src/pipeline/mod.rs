//! Datasets, splits, training, cross-validation and evaluation.

pub mod dataset;
pub mod metrics;
pub mod split;
pub mod synth;
pub mod train;

pub use dataset::{argmax, one_hot, ImageData, MultimodalDataset, CLASS_NAMES, POSITIVE_CLASS};
pub use metrics::{evaluate, mean_std, roc_auc, ClassMetrics, LossRecord, MetricsReport, RocPoint};
pub use split::{holdout_split, kfold_split, FoldMasks, Folds};
pub use synth::{synth_generate, SynthConfig, CLINICAL_FEATURES};
pub use train::{
    aggregate, build_views, class_similarity_gap, embed, fit, forward, image_features, make_folds, objective,
    predict_probabilities, prepare_encoder, run_cv, train_one_fold, CvReport, CvRun, Embedding, FoldReport, ModelParams,
    ModelState, SplitMode, TrainConfig, TrainingLabels, ViewInputs,
};
