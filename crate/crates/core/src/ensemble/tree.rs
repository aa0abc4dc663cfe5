//! CART trees grown by greedy recursive partitioning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::SplitTest;
use crate::dataset::{Dataset, Target};
use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// Split quality measure. Both reduce to the same sum-of-squares gain for a
/// 0/1 response; Gini decrease is exactly twice the variance decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features sampled per split; `None` considers every candidate feature.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_samples_leaf: 1,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TreeNode<T: Scalar> {
    pub id: usize,
    /// Test sending rows left; always `Le`. Absent at leaves.
    pub split: Option<SplitTest<T>>,
    pub mean_response: T,
    pub sample_count: usize,
    pub depth: usize,
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
}

impl<T: Scalar> TreeNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<TreeNode<T>>,
    pub criterion: Criterion,
    pub params: TreeParams,
}

impl<T: Scalar> Tree<T> {
    pub fn root(&self) -> &TreeNode<T> {
        &self.nodes[0]
    }

    pub fn leaf_for(&self, x: &[T]) -> usize {
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            match (node.split, node.children) {
                (Some(split), Some((left, right))) => {
                    id = if split.matches(x) { left } else { right }
                }
                _ => return id,
            }
        }
    }

    pub fn predict(&self, x: &[T]) -> T {
        self.nodes[self.leaf_for(x)].mean_response
    }

    /// Tests on the path from the root to `id`, root first.
    pub fn path_conditions(&self, id: usize) -> Vec<SplitTest<T>> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            let p = &self.nodes[parent];
            let split = p.split.expect("internal node has a split");
            let (left, _) = p.children.expect("internal node has children");
            out.push(if left == cur { split } else { split.negate() });
            cur = parent;
        }
        out.reverse();
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Grows a tree on `rows` of `d` using its own target (binary → Gini, real → variance).
pub fn grow_tree<T: Scalar, R: Rng>(
    d: &Dataset<T>,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree<T>> {
    let (response, criterion) = match d.target() {
        Target::Binary(labels) => (
            labels.iter().map(|&b| T::of(b as f64)).collect::<Vec<_>>(),
            Criterion::Gini,
        ),
        Target::Real(values) => (values.clone(), Criterion::Variance),
        Target::Category { .. } => {
            return Err(Error::InvalidData(
                "trees need a binary or real target".into(),
            ));
        }
    };
    grow_on_response(d, rows, &response, criterion, params, None, rng)
}

/// Grows a tree against an arbitrary response vector indexed by dataset row.
pub(crate) fn grow_on_response<T: Scalar, R: Rng>(
    d: &Dataset<T>,
    rows: &[usize],
    response: &[T],
    criterion: Criterion,
    params: &TreeParams,
    feature_pool: Option<&[usize]>,
    rng: &mut R,
) -> Result<Tree<T>> {
    if rows.is_empty() {
        return Err(Error::Fit(
            "cannot grow a tree on an empty row subset".into(),
        ));
    }
    if params.max_depth == 0 || params.min_samples_leaf == 0 {
        return Err(Error::InvalidParam(
            "max_depth and min_samples_leaf must be at least 1".into(),
        ));
    }
    let pool: Vec<usize> = match feature_pool {
        Some(p) => p.to_vec(),
        None => (0..d.n_features()).collect(),
    };
    if pool.is_empty() || pool.iter().any(|&f| f >= d.n_features()) {
        return Err(Error::InvalidParam("feature pool out of range".into()));
    }
    let mtry = params.mtry.unwrap_or(pool.len());
    if mtry == 0 || mtry > pool.len() {
        return Err(Error::InvalidParam(format!(
            "mtry {mtry} must be in [1, {}]",
            pool.len()
        )));
    }
    let mut grower = Grower {
        d,
        response,
        params,
        pool,
        mtry,
        rng,
        nodes: Vec::new(),
    };
    grower.grow(rows.to_vec(), 0, None);
    Ok(Tree {
        nodes: grower.nodes,
        criterion,
        params: params.clone(),
    })
}

struct Grower<'a, T: Scalar, R: Rng> {
    d: &'a Dataset<T>,
    response: &'a [T],
    params: &'a TreeParams,
    pool: Vec<usize>,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<TreeNode<T>>,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

impl<T: Scalar, R: Rng> Grower<'_, T, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.response[r].as_f64()).sum();
        self.nodes.push(TreeNode {
            id,
            split: None,
            mean_response: T::of(sum / n as f64),
            sample_count: n,
            depth,
            children: None,
            parent,
        });
        let first = self.response[rows[0]];
        let pure = rows.iter().all(|&r| self.response[r] == first);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf || pure {
            return id;
        }
        let Some(best) = self.best_split(&rows, sum) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.d.value(r, best.feature) <= best.threshold);
        let split = SplitTest::le(best.feature, best.threshold);
        let l = self.grow(left, depth + 1, Some(id));
        let r = self.grow(right, depth + 1, Some(id));
        let node = &mut self.nodes[id];
        node.split = Some(split);
        node.children = Some((l, r));
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        if self.mtry >= self.pool.len() {
            return self.pool.clone();
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(self.rng, self.pool.len(), self.mtry)
            .into_iter()
            .map(|i| self.pool[i])
            .collect();
        picked.sort_unstable();
        picked
    }

    /// Exhaustive midpoint search; ties keep the lowest feature, then lowest threshold.
    fn best_split(&mut self, rows: &[usize], total: f64) -> Option<BestSplit<T>> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let base = total * total / n as f64;
        let sumsq: f64 = rows
            .iter()
            .map(|&r| self.response[r].as_f64().powi(2))
            .sum();
        let floor = 1e-12 * (sumsq - base).abs().max(f64::MIN_POSITIVE);
        let mut best: Option<BestSplit<T>> = None;
        let mut pairs: Vec<(T, f64)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&r| (self.d.value(r, f), self.response[r].as_f64())),
            );
            pairs.sort_by(|a, b| cmp(&a.0, &b.0));
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += pairs[i].1;
                let n_left = i + 1;
                if pairs[i].0 == pairs[i + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64
                    - base;
                if gain <= floor {
                    continue;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
                    let mut threshold = lo + (hi - lo) / T::of(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureGroup, FeatureMeta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn one_d(x: &[f64], y: &[u8]) -> Dataset<f64> {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        Dataset::new(
            x.iter().map(|&v| vec![v]).collect(),
            meta,
            "label",
            Target::Binary(y.to_vec()),
            None,
        )
        .unwrap()
    }

    fn fit(d: &Dataset<f64>, params: TreeParams) -> Tree<f64> {
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        grow_tree(d, &rows, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    /// Exhaustive oracle over the candidate midpoints of a 1-D binary problem (weighted Gini).
    fn brute_force_best(x: &[f64], y: &[u8]) -> (f64, f64) {
        let gini = |ys: &[u8]| {
            if ys.is_empty() {
                return 0.0;
            }
            let p = ys.iter().map(|&b| b as f64).sum::<f64>() / ys.len() as f64;
            ys.len() as f64 * 2.0 * p * (1.0 - p)
        };
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<u8> = x
                .iter()
                .zip(y)
                .filter(|(v, _)| **v <= t)
                .map(|(_, &b)| b)
                .collect();
            let right: Vec<u8> = x
                .iter()
                .zip(y)
                .filter(|(v, _)| **v > t)
                .map(|(_, &b)| b)
                .collect();
            let gain = gini(y) - gini(&left) - gini(&right);
            if gain > best.1 {
                best = (t, gain);
            }
        }
        best
    }

    #[test]
    fn pure_node_is_single_leaf() {
        let tree = fit(&one_d(&[0.0, 1.0, 2.0], &[1, 1, 1]), TreeParams::default());
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.root().mean_response, 1.0);
    }

    #[test]
    fn one_d_split_matches_exhaustive_search() {
        let (x, y) = ([0.0, 1.0, 2.0, 3.0], [0, 0, 1, 1]);
        let (t_oracle, _) = brute_force_best(&x, &y);
        assert_eq!(t_oracle, 1.5);
        let tree = fit(&one_d(&x, &y), TreeParams::default());
        let split = tree.root().split.unwrap();
        assert_eq!((split.feature_index, split.threshold), (0, 1.5));
        let (l, r) = tree.root().children.unwrap();
        assert_eq!(tree.nodes[l].mean_response, 0.0);
        assert_eq!(tree.nodes[r].mean_response, 1.0);
        assert_eq!(tree.predict(&[0.7]), 0.0);
        assert_eq!(tree.predict(&[1.5]), 0.0);
        assert_eq!(tree.predict(&[1.51]), 1.0);
    }

    #[test]
    fn stump_has_at_most_three_nodes() {
        let d = one_d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0, 1, 0, 1, 1, 0]);
        let tree = fit(
            &d,
            TreeParams {
                max_depth: 1,
                ..Default::default()
            },
        );
        assert!(tree.nodes.len() <= 3);
    }

    #[test]
    fn equal_gain_prefers_lowest_threshold() {
        // thresholds 0.5 and 2.5 both isolate one row of the minority pattern
        let tree = fit(
            &one_d(&[0.0, 1.0, 2.0, 3.0], &[1, 0, 0, 1]),
            TreeParams {
                max_depth: 1,
                ..Default::default()
            },
        );
        assert_eq!(tree.root().split.unwrap().threshold, 0.5);
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        let meta = (0..2)
            .map(|i| FeatureMeta {
                name: format!("f{i}"),
                group: FeatureGroup::Derived,
                index: i,
            })
            .collect();
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ];
        let d = Dataset::new(rows, meta, "y", Target::Binary(vec![0, 0, 1, 1]), None).unwrap();
        let tree = fit(&d, TreeParams::default());
        assert_eq!(tree.root().split.unwrap().feature_index, 0);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        let tree = fit(
            &one_d(&x, &y),
            TreeParams {
                max_depth: 10,
                min_samples_leaf: 4,
                mtry: None,
            },
        );
        for node in &tree.nodes {
            assert!(node.sample_count >= 4);
            if let Some((l, r)) = node.children {
                assert_eq!(
                    node.sample_count,
                    tree.nodes[l].sample_count + tree.nodes[r].sample_count
                );
            }
        }
    }

    #[test]
    fn path_conditions_follow_routing() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let y: Vec<u8> = (0..16).map(|i| u8::from((4..12).contains(&i))).collect();
        let tree = fit(
            &one_d(&x, &y),
            TreeParams {
                max_depth: 3,
                ..Default::default()
            },
        );
        for v in &x {
            let leaf = tree.leaf_for(&[*v]);
            assert!(tree.path_conditions(leaf).iter().all(|c| c.matches(&[*v])));
        }
    }

    #[test]
    fn regression_tree_on_real_target() {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let d = Dataset::new(
            (0..8).map(|i| vec![i as f64]).collect(),
            meta,
            "y",
            Target::Real(vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0]),
            None,
        )
        .unwrap();
        let tree = fit(&d, TreeParams::default());
        assert_eq!(tree.criterion, Criterion::Variance);
        assert_eq!(tree.root().split.unwrap().threshold, 3.5);
        assert_eq!(tree.predict(&[6.0]), 5.0);
    }

    #[test]
    fn empty_subset_is_an_error() {
        let d = one_d(&[0.0], &[1]);
        assert!(grow_tree(
            &d,
            &[],
            &TreeParams::default(),
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn f32_tree() {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let d: Dataset<f32> = Dataset::new(
            (0..4).map(|i| vec![i as f32]).collect(),
            meta,
            "y",
            Target::Binary(vec![0, 0, 1, 1]),
            None,
        )
        .unwrap();
        let tree = grow_tree(
            &d,
            &[0, 1, 2, 3],
            &TreeParams::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(tree.root().split.unwrap().threshold, 1.5f32);
    }
}
