//! Node Harvest: rules from forest nodes, non-negative rule weights, and the
//! weighted-average predictor with per-case explanations.

mod candidates;
mod model;
mod optimize;
mod rule;

use serde::{Deserialize, Serialize};

pub use candidates::{harvest_candidates, CandidateParams, CandidateSet};
pub use model::{
    classify, explain, optimize_weights, predict, ActiveRule, Decision, Explanation, HarvestModel,
    TrainingSummary, SURROGATE, TOP_MARKS,
};
pub use optimize::{objective, solve, SolverParams, SolverReport};
pub use rule::{merge_conditions, NodeUid, Rule};

use crate::dataset::Dataset;
use crate::ensemble::{grow_forest, ForestParams};
use crate::error::Result;
use crate::scalar::Scalar;

/// Settings for the full forest → candidates → weights pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestConfig {
    pub forest: ForestParams,
    pub candidates: CandidateParams,
    pub solver: SolverParams,
}

/// Trains a forest on `d`, harvests its nodes and fits rule weights.
pub fn fit_harvest<T: Scalar>(
    d: &Dataset<T>,
    config: &HarvestConfig,
    seed: u64,
) -> Result<HarvestModel<T>> {
    d.require_labels()?;
    let forest = grow_forest(d, &config.forest, seed)?;
    let params = CandidateParams {
        seed: config.candidates.seed.wrapping_add(seed),
        ..config.candidates.clone()
    };
    let candidates = harvest_candidates(&forest, d, &params)?;
    optimize_weights(&candidates, d, &config.solver)
}
