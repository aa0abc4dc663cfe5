//! Candidate-node generators and base learners: CART trees, random forests
//! and gradient-boosted ensembles.

mod boost;
mod forest;
mod split;
mod tree;

pub use boost::{
    boost_fit, boost_predict, BoostParams, BoostStage, BoostedEnsemble, EarlyStopping, Loss,
};
pub use forest::{grow_forest, predict_forest, Forest, ForestParams};
pub use split::{Direction, SplitTest};
pub use tree::{grow_tree, Criterion, Tree, TreeNode, TreeParams};
