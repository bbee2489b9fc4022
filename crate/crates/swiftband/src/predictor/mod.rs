//! Performance predictors: feature extraction from partially trained
//! trials, an ε-SVR trained by pairwise dual ascent, the same regressor
//! trained by annealing a QUBO encoding of its dual, and fit-quality
//! evaluation.

pub mod anneal;
pub mod eval;
pub mod features;
pub mod qubo;
pub mod svr;

pub use anneal::{simulated_anneal, AnnealOutcome, AnnealSchedule};
pub use eval::{r_squared, PredictionEval};
pub use features::{extract_features, features_from_curve, FeatureVector};
pub use qubo::{svr_to_qubo, train_qsvr, QsvrEncoding, QsvrParams, QsvrSolution, QuboProblem};
pub use svr::{dual_problem, loocv_std, train_svr, SvrModel, SvrParams};
