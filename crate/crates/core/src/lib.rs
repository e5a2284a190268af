//! Identify and remove biased training points from tabular datasets.
//!
//! The pipeline generates synthetic pairs of individuals that differ only in
//! a binary sensitive attribute, finds the pairs a trained classifier treats
//! differently, ranks training rows by their influence on those unfair
//! predictions and greedily drops the top-ranked rows until individual
//! discrimination stops improving.
//!
//! Modules, bottom-up:
//!
//! - [`data`]: CSV loading, one-hot / min-max encoding, splits.
//! - [`model`]: two-hidden-layer tanh classifier with exact gradients and
//!   Hessian-vector products.
//! - [`influence`]: damped inverse-HVP solvers and influence ranking.
//! - [`fairness`]: similar-pair generation and the fairness metrics.
//! - [`debias`]: the sort-then-drop-chunks loop.
//! - [`experiment`]: hyperparameter grid runner and report emission.

pub mod data;
pub mod debias;
mod error;
pub mod experiment;
pub mod fairness;
pub mod influence;
pub mod model;

pub use data::{Dataset, FeatureSchema, RowId, SplitSpec};
pub use debias::{debias_data, debias_data_with, DebiasConfig, DebiasReport};
pub use error::{Error, Result};
pub use fairness::SimilarityConfig;
pub use influence::{InfluenceRanking, InfluenceSet, SolverConfig};
pub use model::{Classifier, Hyperparameters, Mlp};
