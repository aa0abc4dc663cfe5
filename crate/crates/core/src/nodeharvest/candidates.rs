use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rule::{merge_conditions, NodeUid, Rule};
use crate::dataset::Dataset;
use crate::ensemble::Forest;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateParams {
    pub max_conditions: usize,
    pub min_samples: usize,
    pub max_candidates: usize,
    pub seed: u64,
}

impl Default for CandidateParams {
    fn default() -> Self {
        CandidateParams {
            max_conditions: 5,
            min_samples: 10,
            max_candidates: 1500,
            seed: 0,
        }
    }
}

/// Rules harvested from a forest with their training-set membership.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T: Scalar> {
    /// Root rule first; all weights zero.
    pub rules: Vec<Rule<T>>,
    /// Sorted training rows satisfying each rule.
    pub members: Vec<Vec<u32>>,
    pub n_rows: usize,
    pub dedup_count: usize,
}

impl<T: Scalar> CandidateSet<T> {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_member(&self, row: usize, rule: usize) -> bool {
        self.members[rule].binary_search(&(row as u32)).is_ok()
    }

    /// Dense `n_rows × n_rules` incidence matrix.
    pub fn membership_matrix(&self) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.rules.len()]; self.n_rows];
        for (j, rows) in self.members.iter().enumerate() {
            for &r in rows {
                m[r as usize][j] = true;
            }
        }
        m
    }

    /// Builds a candidate set from explicit rules, recomputing `mu` and
    /// `sample_count` on `d`. The first rule must have no conditions.
    pub fn from_rules(rules: Vec<Rule<T>>, d: &Dataset<T>) -> Result<Self> {
        let labels = d.require_labels()?;
        if rules.first().is_none_or(|r| !r.is_root()) {
            return Err(Error::InvalidParam(
                "first candidate must be the unconditional root rule".into(),
            ));
        }
        let mut out_rules = Vec::with_capacity(rules.len());
        let mut members = Vec::with_capacity(rules.len());
        for mut rule in rules {
            let rows = member_rows(&rule, d);
            if rows.is_empty() {
                return Err(Error::InvalidData(format!(
                    "rule {} matches no training rows",
                    rule.node_uid
                )));
            }
            set_stats(&mut rule, &rows, labels);
            rule.weight = T::zero();
            out_rules.push(rule);
            members.push(rows);
        }
        Ok(CandidateSet {
            rules: out_rules,
            members,
            n_rows: d.n_rows(),
            dedup_count: 0,
        })
    }
}

fn member_rows<T: Scalar>(rule: &Rule<T>, d: &Dataset<T>) -> Vec<u32> {
    (0..d.n_rows())
        .filter(|&r| rule.matches(d.row(r)))
        .map(|r| r as u32)
        .collect()
}

fn set_stats<T: Scalar>(rule: &mut Rule<T>, rows: &[u32], labels: &[u8]) {
    let pos = rows.iter().filter(|&&r| labels[r as usize] == 1).count();
    rule.sample_count = rows.len();
    rule.mu = T::of(pos as f64 / rows.len() as f64);
}

/// Every non-root node of every tree becomes a rule over its merged path
/// conditions; per-tree roots collapse into one shared root rule. Node means
/// and counts are recomputed on `d`, not on bootstrap resamples.
pub fn harvest_candidates<T: Scalar>(
    f: &Forest<T>,
    d: &Dataset<T>,
    params: &CandidateParams,
) -> Result<CandidateSet<T>> {
    let labels = d.require_labels()?;
    if params.max_conditions == 0 || params.min_samples == 0 || params.max_candidates == 0 {
        return Err(Error::InvalidParam(
            "candidate limits must be at least 1".into(),
        ));
    }
    let mut seen = HashSet::new();
    let mut dedup_count = 0;
    let mut shapes = Vec::new();
    for (t, tree) in f.trees.iter().enumerate() {
        for node in tree.nodes.iter().skip(1) {
            let conditions = merge_conditions(&tree.path_conditions(node.id));
            if conditions.len() > params.max_conditions {
                continue;
            }
            let rule = Rule {
                node_uid: NodeUid {
                    tree: t,
                    node: node.id,
                },
                conditions,
                mu: T::zero(),
                sample_count: 0,
                weight: T::zero(),
            };
            if seen.insert(rule.condition_key()) {
                shapes.push(rule);
            } else {
                dedup_count += 1;
            }
        }
    }
    let mut scored: Vec<(Rule<T>, Vec<u32>)> = shapes
        .into_par_iter()
        .map(|mut rule| {
            let rows = member_rows(&rule, d);
            if !rows.is_empty() {
                set_stats(&mut rule, &rows, labels);
            }
            (rule, rows)
        })
        .filter(|(_, rows)| rows.len() >= params.min_samples)
        .collect();
    let budget = params.max_candidates.saturating_sub(1);
    if scored.len() > budget {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut keep: Vec<usize> =
            rand::seq::index::sample(&mut rng, scored.len(), budget).into_vec();
        keep.sort_unstable();
        let mut it = keep.into_iter().peekable();
        scored = scored
            .into_iter()
            .enumerate()
            .filter_map(|(i, item)| {
                if it.peek() == Some(&i) {
                    it.next();
                    Some(item)
                } else {
                    None
                }
            })
            .collect();
    }

    let mut root = Rule {
        node_uid: NodeUid::ROOT,
        conditions: Vec::new(),
        mu: T::zero(),
        sample_count: 0,
        weight: T::zero(),
    };
    let all: Vec<u32> = (0..d.n_rows() as u32).collect();
    set_stats(&mut root, &all, labels);
    let mut rules = vec![root];
    let mut members = vec![all];
    for (rule, rows) in scored {
        rules.push(rule);
        members.push(rows);
    }
    Ok(CandidateSet {
        rules,
        members,
        n_rows: d.n_rows(),
        dedup_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureGroup, FeatureMeta, Target};
    use crate::ensemble::{grow_forest, ForestParams, SplitTest};

    fn one_d() -> Dataset<f64> {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        Dataset::new(
            (0..4).map(|i| vec![i as f64]).collect(),
            meta,
            "y",
            Target::Binary(vec![0, 0, 1, 1]),
            None,
        )
        .unwrap()
    }

    fn loose() -> CandidateParams {
        CandidateParams {
            min_samples: 1,
            ..Default::default()
        }
    }

    #[test]
    fn stump_yields_root_and_both_sides() {
        let d = one_d();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            mtry: None,
            bootstrap: false,
        };
        let forest = grow_forest(&d, &params, 0).unwrap();
        let c = harvest_candidates(&forest, &d, &loose()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.rules[0].is_root());
        assert_eq!(c.rules[1].conditions, vec![SplitTest::le(0, 1.5)]);
        assert_eq!(c.rules[2].conditions, vec![SplitTest::gt(0, 1.5)]);
        assert_eq!((c.rules[1].mu, c.rules[2].mu), (0.0, 1.0));
        assert_eq!(c.dedup_count, 0);
        assert!(c.membership_matrix().iter().all(|row| row[0]));
    }

    #[test]
    fn identical_stumps_are_deduplicated() {
        let d = one_d();
        let params = ForestParams {
            n_trees: 2,
            max_depth: 1,
            min_samples_leaf: 1,
            mtry: None,
            bootstrap: false,
        };
        let forest = grow_forest(&d, &params, 0).unwrap();
        let c = harvest_candidates(&forest, &d, &loose()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.dedup_count, 2);
    }

    /// Depth-2 tree: root on f0, left child on f1, right child on f2.
    fn depth_two_forest() -> Forest<f64> {
        use crate::ensemble::{Criterion, Tree, TreeNode, TreeParams};
        let node = |id, split: Option<SplitTest<f64>>, depth, children, parent| TreeNode {
            id,
            split,
            mean_response: 0.5,
            sample_count: 1,
            depth,
            children,
            parent,
        };
        let nodes = vec![
            node(0, Some(SplitTest::le(0, 0.5)), 0, Some((1, 4)), None),
            node(1, Some(SplitTest::le(1, 0.5)), 1, Some((2, 3)), Some(0)),
            node(2, None, 2, None, Some(1)),
            node(3, None, 2, None, Some(1)),
            node(4, Some(SplitTest::le(2, 0.5)), 1, Some((5, 6)), Some(0)),
            node(5, None, 2, None, Some(4)),
            node(6, None, 2, None, Some(4)),
        ];
        let tree = Tree {
            nodes,
            criterion: Criterion::Gini,
            params: TreeParams::default(),
        };
        Forest {
            trees: vec![tree],
            params: ForestParams::default(),
            seed: 0,
        }
    }

    #[test]
    fn max_conditions_filters_deep_nodes() {
        let meta = (0..3)
            .map(|i| FeatureMeta {
                name: format!("f{i}"),
                group: FeatureGroup::Derived,
                index: i,
            })
            .collect();
        // all eight corners of the unit cube, so every node has members
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..3).map(|b| ((i >> b) & 1) as f64).collect())
            .collect();
        let d = Dataset::new(
            rows,
            meta,
            "y",
            Target::Binary(vec![0, 1, 0, 1, 1, 0, 0, 1]),
            None,
        )
        .unwrap();
        let forest = depth_two_forest();
        let all = harvest_candidates(&forest, &d, &loose()).unwrap();
        assert_eq!(all.len(), 7);
        let shallow = harvest_candidates(
            &forest,
            &d,
            &CandidateParams {
                max_conditions: 1,
                ..loose()
            },
        )
        .unwrap();
        assert_eq!(shallow.len(), 3);
        assert!(shallow.rules.iter().all(|r| r.conditions.len() <= 1));
    }

    #[test]
    fn same_feature_paths_merge_before_filtering() {
        // root x <= 3.5, children x <= 1.5 / x <= 5.5 on one feature: the outer
        // grandchildren merge to a single bound and survive max_conditions = 1
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let d = Dataset::new(
            (0..8).map(|i| vec![i as f64]).collect(),
            meta,
            "y",
            Target::Binary(vec![0, 1, 0, 0, 1, 1, 0, 1]),
            None,
        )
        .unwrap();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 2,
            min_samples_leaf: 1,
            mtry: None,
            bootstrap: false,
        };
        let forest = grow_forest(&d, &params, 0).unwrap();
        assert_eq!(forest.trees[0].nodes.len(), 7);
        let shallow = harvest_candidates(
            &forest,
            &d,
            &CandidateParams {
                max_conditions: 1,
                ..loose()
            },
        )
        .unwrap();
        let conds: Vec<Vec<SplitTest<f64>>> =
            shallow.rules.iter().map(|r| r.conditions.clone()).collect();
        assert_eq!(
            conds,
            vec![
                vec![],
                vec![SplitTest::le(0, 3.5)],
                vec![SplitTest::le(0, 1.5)],
                vec![SplitTest::gt(0, 3.5)],
                vec![SplitTest::gt(0, 5.5)],
            ]
        );
    }

    #[test]
    fn counts_match_membership_and_subsampling_keeps_root() {
        let x: Vec<f64> = (0..60).map(f64::from).collect();
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let labels = (0..60).map(|i| u8::from(i % 7 < 3)).collect();
        let d = Dataset::new(
            x.iter().map(|&v| vec![v]).collect(),
            meta,
            "y",
            Target::Binary(labels),
            None,
        )
        .unwrap();
        let params = ForestParams {
            n_trees: 20,
            max_depth: 3,
            min_samples_leaf: 2,
            mtry: None,
            bootstrap: true,
        };
        let forest = grow_forest(&d, &params, 3).unwrap();
        let c = harvest_candidates(
            &forest,
            &d,
            &CandidateParams {
                min_samples: 2,
                ..Default::default()
            },
        )
        .unwrap();
        for (rule, rows) in c.rules.iter().zip(&c.members) {
            assert_eq!(rule.sample_count, rows.len());
            assert!(rule.sample_count >= 2);
            assert!((0.0..=1.0).contains(&rule.mu));
        }
        let small = harvest_candidates(
            &forest,
            &d,
            &CandidateParams {
                min_samples: 2,
                max_candidates: 5,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(small.len(), 5);
        assert!(small.rules[0].is_root());
        let again = harvest_candidates(
            &forest,
            &d,
            &CandidateParams {
                min_samples: 2,
                max_candidates: 5,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(small, again);
    }
}
