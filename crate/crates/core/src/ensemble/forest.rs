use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Tree, TreeParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features sampled per split; `None` means ⌈√n_features⌉.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 300,
            max_depth: 4,
            min_samples_leaf: 10,
            mtry: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mtry = self.resolved_mtry(n_features);
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidParam(
                "n_trees, max_depth and min_samples_leaf must be at least 1".into(),
            ));
        }
        if mtry == 0 || mtry > n_features {
            return Err(Error::InvalidParam(format!(
                "mtry {mtry} must be in [1, {n_features}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<T: Scalar> {
    pub trees: Vec<Tree<T>>,
    pub params: ForestParams,
    pub seed: u64,
}

impl<T: Scalar> Forest<T> {
    /// Mean of the per-tree predictions.
    pub fn predict(&self, x: &[T]) -> T {
        let sum: T = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / T::of_usize(self.trees.len())
    }
}

/// Random forest; tree `i` draws from its own stream seeded with `seed + i`,
/// so the result does not depend on thread count.
pub fn grow_forest<T: Scalar>(
    d: &Dataset<T>,
    params: &ForestParams,
    seed: u64,
) -> Result<Forest<T>> {
    params.validate(d.n_features())?;
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        mtry: Some(params.resolved_mtry(d.n_features())),
    };
    let n = d.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(d, &rows, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        params: params.clone(),
        seed,
    })
}

pub fn predict_forest<T: Scalar>(f: &Forest<T>, x: &[T]) -> T {
    f.predict(x)
}
