use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Direction, SplitTest};
use crate::scalar::Scalar;

/// Position of a rule's source node: `(tree index, node id)`.
/// The shared root rule is `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeUid {
    pub tree: usize,
    pub node: usize,
}

impl NodeUid {
    pub const ROOT: NodeUid = NodeUid { tree: 0, node: 0 };
}

impl fmt::Display for NodeUid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}n{}", self.tree, self.node)
    }
}

/// `conditions ⇒ mu`: a conjunction of node tests and the positive fraction
/// of training rows satisfying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Rule<T: Scalar> {
    pub node_uid: NodeUid,
    pub conditions: Vec<SplitTest<T>>,
    pub mu: T,
    pub sample_count: usize,
    pub weight: T,
}

impl<T: Scalar> Rule<T> {
    pub fn is_root(&self) -> bool {
        self.conditions.is_empty()
    }

    #[inline]
    pub fn matches(&self, x: &[T]) -> bool {
        self.conditions.iter().all(|c| c.matches(x))
    }

    /// True when every condition of `self` also appears in `other`.
    pub fn conditions_subset_of(&self, other: &Rule<T>) -> bool {
        self.conditions
            .iter()
            .all(|c| other.conditions.iter().any(|o| o.same_as(c)))
    }

    pub(crate) fn condition_key(&self) -> Vec<(usize, Direction, u64)> {
        self.conditions
            .iter()
            .map(|c| (c.feature_index, c.direction, c.threshold.as_f64().to_bits()))
            .collect()
    }
}

/// Collapses a root-to-node path into at most one lower and one upper bound
/// per feature, ordered by feature with the lower bound (`>`) first.
pub fn merge_conditions<T: Scalar>(path: &[SplitTest<T>]) -> Vec<SplitTest<T>> {
    let mut merged: Vec<SplitTest<T>> = Vec::new();
    for test in path {
        match merged
            .iter_mut()
            .find(|m| m.feature_index == test.feature_index && m.direction == test.direction)
        {
            Some(existing) => {
                let tighter = match test.direction {
                    Direction::Le => test.threshold < existing.threshold,
                    Direction::Gt => test.threshold > existing.threshold,
                };
                if tighter {
                    existing.threshold = test.threshold;
                }
            }
            None => merged.push(*test),
        }
    }
    merged.sort_by(|a, b| {
        a.feature_index
            .cmp(&b.feature_index)
            .then_with(|| match (a.direction, b.direction) {
                (Direction::Gt, Direction::Le) => Ordering::Less,
                (Direction::Le, Direction::Gt) => Ordering::Greater,
                _ => Ordering::Equal,
            })
    });
    merged
}
