use std::fmt;

use serde::{Deserialize, Serialize};

use super::candidates::CandidateSet;
use super::optimize::{solve, SolverParams, SolverReport};
use super::rule::{NodeUid, Rule};
use crate::dataset::{all_quantiles, Dataset, FeatureMeta, QuantileSummary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Name of the training objective recorded in model metadata.
pub const SURROGATE: &str = "squared_error_of_weighted_average";

/// Numerals are placed on at most this many of the heaviest active rules.
pub const TOP_MARKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_rows: usize,
    pub positive_fraction: f64,
    pub n_candidates: usize,
    pub surrogate: String,
    pub objective: f64,
    pub root_objective: f64,
    pub iterations: usize,
}

/// The selected weighted rules, root first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HarvestModel<T: Scalar> {
    pub rules: Vec<Rule<T>>,
    pub features: Vec<FeatureMeta>,
    pub quantiles: Vec<QuantileSummary<T>>,
    pub decision_threshold: T,
    pub training: TrainingSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Malignant,
    Benign,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Malignant => "malignant",
            Decision::Benign => "benign",
        })
    }
}

/// Malignant iff `p >= threshold`.
pub fn classify<T: Scalar>(p: T, threshold: T) -> Result<Decision> {
    if !(threshold >= T::zero() && threshold <= T::one()) {
        return Err(Error::InvalidParam(format!(
            "decision threshold {threshold} outside [0, 1]"
        )));
    }
    Ok(if p >= threshold {
        Decision::Malignant
    } else {
        Decision::Benign
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ActiveRule<T: Scalar> {
    /// Index into `HarvestModel::rules`.
    pub rule_index: usize,
    pub node_uid: NodeUid,
    pub weight: T,
    pub mu: T,
    pub sample_count: usize,
    pub numeral: Option<u8>,
}

/// The rules a case satisfies and how they combine into its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Explanation<T: Scalar> {
    pub case_id: Option<String>,
    /// Sorted by weight descending, then node uid ascending.
    pub active: Vec<ActiveRule<T>>,
    /// `(numeral, rule index)` for the heaviest positive-weight active rules.
    pub top_k_marks: Vec<(u8, usize)>,
    pub probability: T,
    pub decision: Decision,
}

impl<T: Scalar> HarvestModel<T> {
    pub fn root(&self) -> &Rule<T> {
        &self.rules[0]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// `Σ w μ / Σ w` over the rules `x` satisfies; root mean when that weight is zero.
    pub fn predict(&self, x: &[T]) -> T {
        weighted_average(self.rules.iter().filter(|r| r.matches(x)), self.root().mu)
    }

    pub fn classify(&self, p: T) -> Decision {
        if p >= self.decision_threshold {
            Decision::Malignant
        } else {
            Decision::Benign
        }
    }

    pub fn explain(&self, x: &[T], case_id: Option<String>) -> Explanation<T> {
        let probability = self.predict(x);
        let mut active: Vec<ActiveRule<T>> = self
            .rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.matches(x))
            .map(|(i, r)| ActiveRule {
                rule_index: i,
                node_uid: r.node_uid,
                weight: r.weight,
                mu: r.mu,
                sample_count: r.sample_count,
                numeral: None,
            })
            .collect();
        active.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.node_uid.cmp(&b.node_uid))
        });
        let mut top_k_marks = Vec::new();
        for a in active
            .iter_mut()
            .filter(|a| a.weight > T::zero())
            .take(TOP_MARKS)
        {
            let numeral = top_k_marks.len() as u8 + 1;
            a.numeral = Some(numeral);
            top_k_marks.push((numeral, a.rule_index));
        }
        Explanation {
            case_id,
            active,
            top_k_marks,
            probability,
            decision: self.classify(probability),
        }
    }

    /// Same model with every weight multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut m = self.clone();
        m.rules.iter_mut().for_each(|r| r.weight *= c);
        m
    }

    /// Model with only the root rule.
    pub fn root_only(d: &Dataset<T>) -> Result<Self> {
        let labels = d.require_labels()?;
        let pos = labels.iter().filter(|&&b| b == 1).count();
        let fraction = pos as f64 / labels.len() as f64;
        let root = Rule {
            node_uid: NodeUid::ROOT,
            conditions: Vec::new(),
            mu: T::of(fraction),
            sample_count: d.n_rows(),
            weight: T::one(),
        };
        let objective = labels.iter().map(|&y| (y as f64 - fraction).powi(2)).sum();
        Ok(HarvestModel {
            rules: vec![root],
            features: d.meta().to_vec(),
            quantiles: all_quantiles(d),
            decision_threshold: T::of(0.5),
            training: TrainingSummary {
                n_rows: d.n_rows(),
                positive_fraction: fraction,
                n_candidates: 1,
                surrogate: SURROGATE.into(),
                objective,
                root_objective: objective,
                iterations: 0,
            },
        })
    }
}

/// Shared by `predict` and `explain` so both produce identical bits.
fn weighted_average<'a, T: Scalar>(rules: impl Iterator<Item = &'a Rule<T>>, fallback: T) -> T {
    let (mut num, mut den) = (T::zero(), T::zero());
    for r in rules {
        num += r.weight * r.mu;
        den += r.weight;
    }
    if den > T::zero() {
        num / den
    } else {
        fallback
    }
}

pub fn predict<T: Scalar>(m: &HarvestModel<T>, x: &[T]) -> T {
    m.predict(x)
}

pub fn explain<T: Scalar>(m: &HarvestModel<T>, x: &[T]) -> Explanation<T> {
    m.explain(x, None)
}

/// Fits rule weights on `d` and keeps the root plus every positive-weight rule.
pub fn optimize_weights<T: Scalar>(
    c: &CandidateSet<T>,
    d: &Dataset<T>,
    params: &SolverParams,
) -> Result<HarvestModel<T>> {
    let labels = d.require_labels()?;
    if c.n_rows != d.n_rows() {
        return Err(Error::InvalidData(
            "candidate set was built on a different dataset".into(),
        ));
    }
    let (weights, report) = solve(c, labels, params)?;
    Ok(assemble(c, d, &weights, report))
}

fn assemble<T: Scalar>(
    c: &CandidateSet<T>,
    d: &Dataset<T>,
    weights: &[f64],
    report: SolverReport,
) -> HarvestModel<T> {
    let rules = c
        .rules
        .iter()
        .zip(weights)
        .enumerate()
        .filter(|(j, (_, &w))| *j == 0 || w > 0.0)
        .map(|(_, (r, &w))| Rule {
            weight: T::of(w),
            ..r.clone()
        })
        .collect();
    HarvestModel {
        rules,
        features: d.meta().to_vec(),
        quantiles: all_quantiles(d),
        decision_threshold: T::of(0.5),
        training: TrainingSummary {
            n_rows: d.n_rows(),
            positive_fraction: d.positive_fraction().unwrap_or(0.0),
            n_candidates: c.len(),
            surrogate: SURROGATE.into(),
            objective: report.objective,
            root_objective: report.root_objective,
            iterations: report.iterations,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureGroup, Target};
    use crate::ensemble::SplitTest;

    fn d627() -> Dataset<f64> {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let rows = (0..627).map(|i| vec![i as f64]).collect();
        let labels = (0..627).map(|i| u8::from(i < 245)).collect();
        Dataset::new(rows, meta, "y", Target::Binary(labels), None).unwrap()
    }

    fn model_with(rules: Vec<(Vec<SplitTest<f64>>, f64, f64)>) -> HarvestModel<f64> {
        let mut m = HarvestModel::root_only(&d627()).unwrap();
        for (i, (conditions, mu, weight)) in rules.into_iter().enumerate() {
            m.rules.push(Rule {
                node_uid: NodeUid {
                    tree: 1,
                    node: i + 1,
                },
                conditions,
                mu,
                sample_count: 10,
                weight,
            });
        }
        m
    }

    #[test]
    fn root_only_predicts_base_rate() {
        let m = HarvestModel::root_only(&d627()).unwrap();
        assert_eq!(m.predict(&[3.0]), 245.0 / 627.0);
        assert!((m.predict(&[3.0]) - 0.3907).abs() < 5e-5);
        let e = m.explain(&[3.0], None);
        assert_eq!(e.active.len(), 1);
        assert_eq!(e.top_k_marks, vec![(1, 0)]);
        assert_eq!(e.probability, m.predict(&[3.0]));
    }

    #[test]
    fn symmetric_average() {
        let mut m = model_with(vec![
            (vec![SplitTest::le(0, 10.0)], 0.2, 0.5),
            (vec![SplitTest::le(0, 20.0)], 0.8, 0.5),
        ]);
        m.rules[0].weight = 0.0;
        assert_eq!(m.predict(&[1.0]), 0.5);
    }

    #[test]
    fn zero_active_weight_falls_back_to_root_mean() {
        let mut m = model_with(vec![(vec![SplitTest::le(0, 10.0)], 0.9, 1.0)]);
        m.rules[0].weight = 0.0;
        assert_eq!(m.predict(&[50.0]), m.root().mu);
        assert_eq!(m.predict(&[5.0]), 0.9);
    }

    #[test]
    fn scaling_preserves_prediction() {
        let m = model_with(vec![
            (vec![SplitTest::le(0, 10.0)], 0.07, 0.22),
            (vec![SplitTest::le(0, 30.0)], 0.64, 0.78),
        ]);
        for s in [1e-3, 0.5, 2.0, 1e3] {
            let p = m.scaled(s).predict(&[1.0]);
            assert!((p - m.predict(&[1.0])).abs() <= 1e-15, "{s}");
        }
    }

    #[test]
    fn six_active_rules_get_four_numerals_in_weight_order() {
        let weights = [0.05, 0.3, 0.1, 0.2, 0.15, 0.12];
        let rules = weights
            .iter()
            .map(|&w| (vec![SplitTest::le(0, 100.0)], 0.5, w))
            .collect();
        let mut m = model_with(rules);
        m.rules[0].weight = 0.08;
        let e = m.explain(&[1.0], Some("case".into()));
        assert_eq!(e.active.len(), 7);
        assert_eq!(e.top_k_marks.len(), 4);
        let marked: Vec<f64> = e
            .top_k_marks
            .iter()
            .map(|&(_, i)| m.rules[i].weight)
            .collect();
        assert_eq!(marked, vec![0.3, 0.2, 0.15, 0.12]);
        assert_eq!(
            e.top_k_marks.iter().map(|m| m.0).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
    }

    #[test]
    fn weight_ties_go_to_lower_node_uid() {
        let rules = [0.4, 0.3, 0.2, 0.1, 0.1]
            .iter()
            .map(|&w| (vec![SplitTest::le(0, 100.0)], 0.5, w))
            .collect();
        let mut m = model_with(rules);
        m.rules[0].weight = 0.0;
        let e = m.explain(&[1.0], None);
        // rules 4 and 5 (node uids t1n4, t1n5) tie at 0.1; the numeral goes to t1n4
        assert_eq!(e.top_k_marks[3].1, 4);
        assert_eq!(e.active[4].node_uid, NodeUid { tree: 1, node: 5 });
        assert_eq!(e.active.iter().filter(|a| a.numeral.is_some()).count(), 4);
    }

    #[test]
    fn numerals_only_for_positive_weights() {
        let mut m = model_with(vec![(vec![SplitTest::le(0, 100.0)], 0.5, 0.3)]);
        m.rules[0].weight = 0.0;
        let e = m.explain(&[1.0], None);
        assert_eq!(e.top_k_marks.len(), 1);
    }

    #[test]
    fn decision_rule_is_inclusive() {
        assert_eq!(classify(0.45, 0.5).unwrap(), Decision::Benign);
        assert_eq!(classify(0.64, 0.5).unwrap(), Decision::Malignant);
        assert_eq!(classify(0.5, 0.5).unwrap(), Decision::Malignant);
        assert!(classify(0.5, 1.5).is_err());
        assert!(classify(0.5, -0.1).is_err());
    }
}
