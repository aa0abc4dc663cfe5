//! Ordinal-language rendering of rules and the rule-graph view of a model.

mod graph;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use graph::{
    edges, emit_graph, graph_spec, GraphAxes, GraphFormat, GraphNode, GraphSpec, Legend, MIN_AREA,
};

use crate::dataset::{FeatureGroup, FeatureMeta, QuantileSummary};
use crate::ensemble::Direction;
use crate::error::{Error, Result};
use crate::nodeharvest::{Explanation, HarvestModel, NodeUid, Rule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrdinalCategory {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl OrdinalCategory {
    /// Labels of the quantile points min, Q1, median, Q3, max.
    pub const ALL: [OrdinalCategory; 5] = [
        OrdinalCategory::VeryLow,
        OrdinalCategory::Low,
        OrdinalCategory::Medium,
        OrdinalCategory::High,
        OrdinalCategory::VeryHigh,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OrdinalCategory::VeryLow => "VeryLow",
            OrdinalCategory::Low => "Low",
            OrdinalCategory::Medium => "Medium",
            OrdinalCategory::High => "High",
            OrdinalCategory::VeryHigh => "VeryHigh",
        }
    }
}

impl fmt::Display for OrdinalCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label of the quantile point nearest to `threshold`; ties go to the lower
/// label. Outside `[min, max]` the extreme labels apply, and a constant
/// feature maps everything to `Medium`.
pub fn ordinalize<T: Scalar>(threshold: T, q: &QuantileSummary<T>) -> OrdinalCategory {
    let points = q.points();
    if points[0] == points[4] {
        return OrdinalCategory::Medium;
    }
    if threshold < points[0] {
        return OrdinalCategory::VeryLow;
    }
    if threshold > points[4] {
        return OrdinalCategory::VeryHigh;
    }
    let mut best = 0;
    let mut best_dist = (threshold - points[0]).abs();
    for (i, p) in points.iter().enumerate().skip(1) {
        let dist = (threshold - *p).abs();
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    OrdinalCategory::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Clause<T: Scalar> {
    pub feature: String,
    pub group: FeatureGroup,
    /// `"at most"` or `"above"`.
    pub phrase: String,
    pub category: OrdinalCategory,
    pub threshold: T,
}

impl<T: Scalar> fmt::Display for Clause<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.feature, self.phrase, self.category)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RenderedRule<T: Scalar> {
    pub node_uid: NodeUid,
    pub clauses: Vec<Clause<T>>,
    pub mu: T,
    pub weight: T,
    pub sample_count: usize,
    pub numeral: Option<u8>,
}

impl<T: Scalar> RenderedRule<T> {
    /// The condition as text; `"always"` for the root rule.
    pub fn condition_text(&self) -> String {
        if self.clauses.is_empty() {
            return "always".into();
        }
        self.clauses
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

impl<T: Scalar> fmt::Display for RenderedRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} => mu = {:.4}",
            self.condition_text(),
            self.mu.as_f64()
        )
    }
}

pub fn render_rule<T: Scalar>(
    r: &Rule<T>,
    meta: &[FeatureMeta],
    quantiles: &[QuantileSummary<T>],
) -> Result<RenderedRule<T>> {
    let mut clauses = Vec::with_capacity(r.conditions.len());
    for c in &r.conditions {
        let fm = meta
            .iter()
            .find(|m| m.index == c.feature_index)
            .ok_or_else(|| {
                Error::InvalidData(format!("no metadata for feature index {}", c.feature_index))
            })?;
        let q = quantiles
            .iter()
            .find(|q| q.feature_index == c.feature_index)
            .ok_or_else(|| Error::InvalidData(format!("no quantiles for feature {:?}", fm.name)))?;
        let phrase = match c.direction {
            Direction::Le => "at most",
            Direction::Gt => "above",
        };
        clauses.push(Clause {
            feature: fm.name.clone(),
            group: fm.group,
            phrase: phrase.into(),
            category: ordinalize(c.threshold, q),
            threshold: c.threshold,
        });
    }
    Ok(RenderedRule {
        node_uid: r.node_uid,
        clauses,
        mu: r.mu,
        weight: r.weight,
        sample_count: r.sample_count,
        numeral: None,
    })
}

/// Active rules of `e` in explanation order, numerals attached.
pub fn render_explanation<T: Scalar>(
    m: &HarvestModel<T>,
    e: &Explanation<T>,
) -> Result<Vec<RenderedRule<T>>> {
    e.active
        .iter()
        .map(|a| {
            let mut r = render_rule(&m.rules[a.rule_index], &m.features, &m.quantiles)?;
            r.numeral = a.numeral;
            Ok(r)
        })
        .collect()
}

/// Plain-text explanation: one line per active rule, then the probability.
pub fn explanation_text<T: Scalar>(m: &HarvestModel<T>, e: &Explanation<T>) -> Result<String> {
    let mut out = String::new();
    if let Some(id) = &e.case_id {
        out.push_str(&format!("case {id}\n"));
    }
    for r in render_explanation(m, e)? {
        let mark = r
            .numeral
            .map_or_else(|| "   ".to_string(), |n| format!("[{n}]"));
        out.push_str(&format!(
            "{mark} w = {:.4}  mu = {:.4}  n = {:<5} {}\n",
            r.weight.as_f64(),
            r.mu.as_f64(),
            r.sample_count,
            r.condition_text()
        ));
    }
    out.push_str(&format!(
        "p = {:.4} -> {}\n",
        e.probability.as_f64(),
        e.decision
    ));
    Ok(out)
}
