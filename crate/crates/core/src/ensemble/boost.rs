//! Stagewise gradient boosting with regression trees.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_on_response, Criterion, Tree, TreeParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Binomial deviance on a 0/1 target; predictions are probabilities.
    Logistic,
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub holdout_fraction: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub early_stopping: Option<EarlyStopping>,
    /// Restrict splits to these feature indices; all features when `None`.
    pub features: Option<Vec<usize>>,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 200,
            learning_rate: 0.1,
            max_depth: 2,
            min_samples_leaf: 5,
            early_stopping: Some(EarlyStopping {
                holdout_fraction: 0.2,
                patience: 20,
            }),
            features: None,
        }
    }
}

/// One boosting stage: a tree plus its learning-rate-scaled leaf values (indexed by node id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostStage<T: Scalar> {
    pub tree: Tree<T>,
    pub leaf_values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostedEnsemble<T: Scalar> {
    pub loss: Loss,
    pub initial_score: T,
    pub learning_rate: T,
    pub stages: Vec<BoostStage<T>>,
    /// Mean training loss after 0, 1, … stages on the rows the stages were fit to.
    pub training_loss: Vec<f64>,
}

impl<T: Scalar> BoostedEnsemble<T> {
    pub fn raw_score(&self, x: &[T]) -> T {
        let mut score = self.initial_score;
        for stage in &self.stages {
            score += stage.leaf_values[stage.tree.leaf_for(x)];
        }
        score
    }

    pub fn predict(&self, x: &[T]) -> T {
        let raw = self.raw_score(x);
        match self.loss {
            Loss::Squared => raw,
            Loss::Logistic => sigmoid(raw),
        }
    }
}

pub fn boost_predict<T: Scalar>(b: &BoostedEnsemble<T>, x: &[T]) -> T {
    b.predict(x)
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn mean_loss(loss: Loss, y: &[f64], score: &[f64], rows: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&r| match loss {
            Loss::Squared => (y[r] - score[r]).powi(2),
            // log(1 + e^z) - y z, written to avoid overflow
            Loss::Logistic => {
                let z = score[r];
                z.max(0.0) + (-z.abs()).exp().ln_1p() - y[r] * z
            }
        })
        .sum();
    total / rows.len() as f64
}

pub fn boost_fit<T: Scalar>(
    d: &Dataset<T>,
    loss: Loss,
    params: &BoostParams,
    seed: u64,
) -> Result<BoostedEnsemble<T>> {
    if params.n_stages == 0 {
        return Err(Error::InvalidParam(
            "boosting needs at least one stage".into(),
        ));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "learning rate {} outside (0, 1]",
            params.learning_rate
        )));
    }
    let y: Vec<f64> = match loss {
        Loss::Logistic => d.require_labels()?.iter().map(|&b| b as f64).collect(),
        Loss::Squared => d
            .real_target()
            .ok_or_else(|| Error::InvalidData("squared loss needs a real target".into()))?
            .iter()
            .map(|v| v.as_f64())
            .collect(),
    };
    let n = d.n_rows();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut holdout = Vec::new();
    if let Some(es) = &params.early_stopping {
        let n_hold = (n as f64 * es.holdout_fraction).round() as usize;
        if n_hold >= 1 && n - n_hold >= 2 * params.min_samples_leaf {
            rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            holdout = rows.split_off(n - n_hold);
            rows.sort_unstable();
            holdout.sort_unstable();
        }
    }

    let initial = match loss {
        Loss::Squared => rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64,
        Loss::Logistic => {
            let p = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
            if p <= 0.0 || p >= 1.0 {
                return Err(Error::Fit(
                    "logistic boosting needs both classes in the training rows".into(),
                ));
            }
            (p / (1.0 - p)).ln()
        }
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        mtry: None,
    };
    let lr = params.learning_rate;
    let mut score = vec![initial; n];
    let mut model = BoostedEnsemble {
        loss,
        initial_score: T::of(initial),
        learning_rate: T::of(lr),
        stages: Vec::new(),
        training_loss: vec![mean_loss(loss, &y, &score, &rows)],
    };
    let mut best = (f64::INFINITY, 0usize);
    // trees never consume randomness when every pool feature is considered
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut response = vec![T::zero(); n];
    for stage in 0..params.n_stages {
        for &r in &rows {
            let g = match loss {
                Loss::Squared => y[r] - score[r],
                Loss::Logistic => y[r] - 1.0 / (1.0 + (-score[r]).exp()),
            };
            response[r] = T::of(g);
        }
        let tree = grow_on_response(
            d,
            &rows,
            &response,
            Criterion::Variance,
            &tree_params,
            params.features.as_deref(),
            &mut rng,
        )?;
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        for &r in &rows {
            let leaf = tree.leaf_for(d.row(r));
            num[leaf] += response[r].as_f64();
            den[leaf] += match loss {
                Loss::Squared => 1.0,
                Loss::Logistic => {
                    let p = 1.0 / (1.0 + (-score[r]).exp());
                    p * (1.0 - p)
                }
            };
        }
        let leaf_values: Vec<T> = tree
            .nodes
            .iter()
            .map(|node| {
                if !node.is_leaf() || den[node.id] <= 0.0 {
                    T::zero()
                } else {
                    T::of(lr * num[node.id] / den[node.id].max(1e-12))
                }
            })
            .collect();
        for (r, s) in score.iter_mut().enumerate() {
            *s += leaf_values[tree.leaf_for(d.row(r))].as_f64();
        }
        model.stages.push(BoostStage { tree, leaf_values });
        model.training_loss.push(mean_loss(loss, &y, &score, &rows));

        if let (Some(es), false) = (&params.early_stopping, holdout.is_empty()) {
            let hold_loss = mean_loss(loss, &y, &score, &holdout);
            if hold_loss < best.0 {
                best = (hold_loss, stage + 1);
            } else if stage + 1 - best.1 >= es.patience {
                break;
            }
        }
    }
    if !holdout.is_empty() && best.1 >= 1 {
        model.stages.truncate(best.1);
        model.training_loss.truncate(best.1 + 1);
    }
    Ok(model)
}
