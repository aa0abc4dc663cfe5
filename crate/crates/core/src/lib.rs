//! Interpretable rule extraction from tree ensembles.
//!
//! A random forest supplies candidate nodes; each node becomes a rule
//! `conditions ⇒ node mean`. A sparse set of non-negative rule weights is
//! fit so that the weighted average of the node means over the rules a case
//! satisfies predicts its label. Predictions decompose into those rules,
//! which are rendered as ordinal-language clauses and as a rule graph.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64`/`*F32` aliases below name the common instantiations.

pub mod cascade;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod interpret;
pub mod nodeharvest;
pub mod persist;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type DatasetF64 = dataset::Dataset<f64>;
pub type DatasetF32 = dataset::Dataset<f32>;
pub type TreeF64 = ensemble::Tree<f64>;
pub type ForestF64 = ensemble::Forest<f64>;
pub type ForestF32 = ensemble::Forest<f32>;
pub type BoostedEnsembleF64 = ensemble::BoostedEnsemble<f64>;
pub type RuleF64 = nodeharvest::Rule<f64>;
pub type HarvestModelF64 = nodeharvest::HarvestModel<f64>;
pub type HarvestModelF32 = nodeharvest::HarvestModel<f32>;
pub type ExplanationF64 = nodeharvest::Explanation<f64>;
pub type CascadeModelF64 = cascade::CascadeModel<f64>;
pub type LmsirModelF64 = cascade::LmsirModel<f64>;
pub type SavedModelF64 = persist::SavedModel<f64>;
