//! Experiments and property suites built on the stimulus, encoder, learning
//! and signature layers.

pub mod auc;
pub mod corpus;
pub mod equivariance;
pub mod experiment;
pub mod invariance;
pub mod parity;
pub mod report;
pub mod similarity;
pub mod tuning;

pub use auc::{roc_auc, AucTable};
pub use corpus::{derive_seed, Corpus, StimulusSpec};
pub use equivariance::{equivariance_residual, OffsetField};
pub use experiment::{
    ica_contrast, pair_matching_experiment, similarity_experiment, Model, PairMatchingConfig, PairScorer,
    RepresentationScorer, SimilarityConfig, Split, StageMatrices, TemplateBank, TuningContrast,
};
pub use invariance::invariance_profile;
pub use parity::{parity_of_vector, Parity, ParityResult};
pub use report::{verify, Check, PropertyReport, Severity, VerifySpec};
pub use similarity::{pearson, similarity_matrix, SimilarityMatrix, Stage};
pub use tuning::{symmetry_index, tuning_curve, TuningCurve};
