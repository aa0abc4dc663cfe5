use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Side of a threshold a test selects. `Le` is inclusive: `x <= t` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Le,
    Gt,
}

/// A single binary node test `x[feature] <= threshold` (or `>`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SplitTest<T: Scalar> {
    pub feature_index: usize,
    pub threshold: T,
    pub direction: Direction,
}

impl<T: Scalar> SplitTest<T> {
    pub fn le(feature_index: usize, threshold: T) -> Self {
        SplitTest {
            feature_index,
            threshold,
            direction: Direction::Le,
        }
    }

    pub fn gt(feature_index: usize, threshold: T) -> Self {
        SplitTest {
            feature_index,
            threshold,
            direction: Direction::Gt,
        }
    }

    #[inline]
    pub fn matches(&self, x: &[T]) -> bool {
        let v = x[self.feature_index];
        match self.direction {
            Direction::Le => v <= self.threshold,
            Direction::Gt => v > self.threshold,
        }
    }

    pub fn negate(&self) -> Self {
        let direction = match self.direction {
            Direction::Le => Direction::Gt,
            Direction::Gt => Direction::Le,
        };
        SplitTest { direction, ..*self }
    }

    /// Exact identity, comparing thresholds bitwise.
    pub fn same_as(&self, other: &Self) -> bool {
        self.feature_index == other.feature_index
            && self.direction == other.direction
            && self.threshold.as_f64().to_bits() == other.threshold.as_f64().to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn le_is_inclusive() {
        let t = SplitTest::le(0, 1.5);
        assert!(t.matches(&[1.5]));
        assert!(!t.matches(&[1.6]));
        assert!(!t.negate().matches(&[1.5]));
        assert!(t.negate().matches(&[1.6]));
    }
}
