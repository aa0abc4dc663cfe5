use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::render_rule;
use crate::dataset::FeatureGroup;
use crate::error::{Error, Result};
use crate::nodeharvest::{Explanation, HarvestModel, NodeUid, Rule};
use crate::scalar::Scalar;

/// Drawn area of a zero-weight node, relative to the heaviest node.
pub const MIN_AREA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Svg,
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(GraphFormat::Svg),
            "dot" | "gv" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            _ => Err(Error::UnsupportedFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub rule_index: usize,
    pub node_uid: NodeUid,
    /// Node mean.
    pub x: f64,
    /// Training sample count.
    pub y: usize,
    pub weight: f64,
    /// Weight relative to the heaviest rule.
    pub area: f64,
    pub highlighted: bool,
    pub numeral: Option<u8>,
    /// Feature group most represented in the conditions, or `"root"`.
    pub group: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphAxes {
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub numeral: u8,
    pub rule_index: usize,
    pub text: String,
    pub clauses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub nodes: Vec<GraphNode>,
    /// `(a, b)`: rule `a`'s conditions are a proper subset of rule `b`'s,
    /// with no rule strictly between them.
    pub edges: Vec<(usize, usize)>,
    pub axes: GraphAxes,
    pub probability: Option<f64>,
    pub case_id: Option<String>,
    pub legends: Vec<Legend>,
}

fn proper_subset<T: Scalar>(a: &Rule<T>, b: &Rule<T>) -> bool {
    a.conditions.len() < b.conditions.len() && a.conditions_subset_of(b)
}

/// Transitive reduction of condition-set containment.
pub fn edges<T: Scalar>(rules: &[Rule<T>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (b, rb) in rules.iter().enumerate() {
        let parents: Vec<usize> = (0..rules.len())
            .filter(|&a| proper_subset(&rules[a], rb))
            .collect();
        for &a in &parents {
            if !parents.iter().any(|&c| proper_subset(&rules[a], &rules[c])) {
                out.push((a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

fn dominant_group<T: Scalar>(r: &Rule<T>, m: &HarvestModel<T>) -> String {
    if r.is_root() {
        return "root".into();
    }
    let mut counts = [0usize; FeatureGroup::ALL.len()];
    for c in &r.conditions {
        if let Some(fm) = m.features.iter().find(|f| f.index == c.feature_index) {
            counts[FeatureGroup::ALL
                .iter()
                .position(|g| *g == fm.group)
                .unwrap()] += 1;
        }
    }
    let best = (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
    FeatureGroup::ALL[best].as_str().to_string()
}

pub fn graph_spec<T: Scalar>(m: &HarvestModel<T>, e: Option<&Explanation<T>>) -> Result<GraphSpec> {
    if m.rules.is_empty() {
        return Err(Error::InvalidData("model has no rules".into()));
    }
    let max_weight = m
        .rules
        .iter()
        .map(|r| r.weight.as_f64())
        .fold(0.0, f64::max);
    let mut nodes = Vec::with_capacity(m.rules.len());
    for (i, r) in m.rules.iter().enumerate() {
        let active = e.and_then(|e| e.active.iter().find(|a| a.rule_index == i));
        let weight = r.weight.as_f64();
        nodes.push(GraphNode {
            rule_index: i,
            node_uid: r.node_uid,
            x: r.mu.as_f64(),
            y: r.sample_count,
            weight,
            area: if max_weight > 0.0 {
                weight / max_weight
            } else {
                0.0
            },
            highlighted: active.is_some(),
            numeral: active.and_then(|a| a.numeral),
            group: dominant_group(r, m),
            label: render_rule(r, &m.features, &m.quantiles)?.condition_text(),
        });
    }
    let mut legends = Vec::new();
    if let Some(e) = e {
        for &(numeral, idx) in &e.top_k_marks {
            let rendered = render_rule(&m.rules[idx], &m.features, &m.quantiles)?;
            legends.push(Legend {
                numeral,
                rule_index: idx,
                text: rendered.condition_text(),
                clauses: rendered.clauses.iter().map(|c| c.to_string()).collect(),
            });
        }
    }
    let y_max = m.rules.iter().map(|r| r.sample_count).max().unwrap_or(0);
    Ok(GraphSpec {
        nodes,
        edges: edges(&m.rules),
        axes: GraphAxes {
            x_label: "node mean (positive fraction)".into(),
            y_label: "node sample size".into(),
            x_range: (0.0, 1.0),
            y_range: (0, y_max),
        },
        probability: e.map(|e| e.probability.as_f64()),
        case_id: e.and_then(|e| e.case_id.clone()),
        legends,
    })
}

/// Renders the rule graph; identical inputs give identical bytes.
pub fn emit_graph<T: Scalar>(
    m: &HarvestModel<T>,
    e: Option<&Explanation<T>>,
    format: GraphFormat,
) -> Result<Vec<u8>> {
    let spec = graph_spec(m, e)?;
    Ok(match format {
        GraphFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(&spec)?;
            bytes.push(b'\n');
            bytes
        }
        GraphFormat::Dot => dot(&spec).into_bytes(),
        GraphFormat::Svg => svg(&spec).into_bytes(),
    })
}

fn color(group: &str) -> &'static str {
    match group {
        "kinetic" => "#1f77b4",
        "morphologic" => "#ff7f0e",
        "texture_t1w" => "#2ca02c",
        "t2w" => "#d62728",
        "dispersion" => "#9467bd",
        "single_time_point" => "#8c564b",
        "derived" => "#7f7f7f",
        _ => "#c7c7c7",
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot(spec: &GraphSpec) -> String {
    let mut s = String::from(
        "digraph harvest {\n  node [shape=circle, style=filled, fontname=\"Helvetica\"];\n",
    );
    if let Some(p) = spec.probability {
        let _ = writeln!(s, "  label=\"p = {p:.4}\";");
    }
    let y_max = spec.axes.y_range.1.max(1) as f64;
    for n in &spec.nodes {
        let mut label = n.label.replace('"', "\\\"");
        if let Some(k) = n.numeral {
            label = format!("[{k}] {label}");
        }
        let _ = writeln!(
            s,
            "  r{} [label=\"{}\\nmu={:.3} n={} w={:.4}\", pos=\"{:.4},{:.4}!\", width={:.4}, fillcolor=\"{}\", penwidth={}];",
            n.rule_index,
            label,
            n.x,
            n.y,
            n.weight,
            n.x * 10.0,
            n.y as f64 / y_max * 6.0,
            0.2 + n.area.max(MIN_AREA).sqrt(),
            color(&n.group),
            if n.highlighted { 3 } else { 1 }
        );
    }
    for (a, b) in &spec.edges {
        let _ = writeln!(s, "  r{a} -> r{b};");
    }
    s.push_str("}\n");
    s
}

const WIDTH: f64 = 760.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const PLOT_H: f64 = 400.0;
const MAX_RADIUS: f64 = 28.0;

fn svg(spec: &GraphSpec) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let bottom = TOP + PLOT_H;
    let height = bottom + 60.0 + 18.0 * spec.legends.len() as f64;
    let y_max = spec.axes.y_range.1.max(1) as f64;
    let px = |x: f64| LEFT + x * plot_w;
    let py = |y: usize| bottom - y as f64 / y_max * (PLOT_H - MAX_RADIUS);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{bottom}" x2="{:.2}" y2="{bottom}" stroke="black"/>"#,
        px(1.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{bottom}" x2="{LEFT}" y2="{TOP}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let x = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x:.2}</text>"#,
            px(x),
            bottom + 16.0
        );
    }
    for i in 0..=4 {
        let y = (y_max * i as f64 / 4.0).round() as usize;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y}</text>"#,
            LEFT - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        px(0.5),
        bottom + 34.0,
        escape(&spec.axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        escape(&spec.axes.y_label)
    );
    for (a, b) in &spec.edges {
        let (na, nb) = (&spec.nodes[*a], &spec.nodes[*b]);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-width="0.6"/>"##,
            px(na.x),
            py(na.y),
            px(nb.x),
            py(nb.y)
        );
    }
    // heavier nodes first so small ones stay visible on top
    let mut order: Vec<&GraphNode> = spec.nodes.iter().collect();
    order.sort_by(|a, b| {
        b.area
            .total_cmp(&a.area)
            .then(a.rule_index.cmp(&b.rule_index))
    });
    for n in order {
        let r = MAX_RADIUS * n.area.max(MIN_AREA).sqrt();
        let (stroke, width, opacity) = if n.highlighted {
            ("black", 2.0, 0.9)
        } else {
            ("#bbbbbb", 0.8, 0.35)
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="{}" fill-opacity="{opacity}" stroke="{stroke}" stroke-width="{width}"><title>{}</title></circle>"#,
            px(n.x),
            py(n.y),
            color(&n.group),
            escape(&format!(
                "{} mu={:.3} n={} w={:.4}",
                n.label, n.x, n.y, n.weight
            ))
        );
        if let Some(k) = n.numeral {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-weight="bold">{k}</text>"#,
                px(n.x),
                py(n.y) + 4.0
            );
        }
    }
    if let Some(p) = spec.probability {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{bottom}" x2="{:.2}" y2="{TOP}" stroke="black" stroke-dasharray="4 3"/>"#,
            px(p),
            px(p)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">p = {p:.3}</text>"#,
            px(p),
            TOP - 8.0
        );
    }
    for (i, l) in spec.legends.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="{:.2}">{}: {}</text>"#,
            bottom + 56.0 + 18.0 * i as f64,
            l.numeral,
            escape(&l.text)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureMeta, QuantileSummary};
    use crate::ensemble::SplitTest;
    use crate::nodeharvest::{TrainingSummary, SURROGATE};

    fn model(rules: Vec<Rule<f64>>) -> HarvestModel<f64> {
        HarvestModel {
            rules,
            features: (0..3)
                .map(|i| FeatureMeta {
                    name: format!("f{i}"),
                    group: FeatureGroup::ALL[i],
                    index: i,
                })
                .collect(),
            quantiles: (0..3)
                .map(|i| QuantileSummary {
                    feature_index: i,
                    q0_min: 0.0,
                    q1: 0.25,
                    q2_median: 0.5,
                    q3: 0.75,
                    q4_max: 1.0,
                })
                .collect(),
            decision_threshold: 0.5,
            training: TrainingSummary {
                n_rows: 100,
                positive_fraction: 0.4,
                n_candidates: 1,
                surrogate: SURROGATE.into(),
                objective: 0.0,
                root_objective: 0.0,
                iterations: 0,
            },
        }
    }

    fn rule(node: usize, conditions: Vec<SplitTest<f64>>, mu: f64, weight: f64) -> Rule<f64> {
        Rule {
            node_uid: NodeUid { tree: 0, node },
            conditions,
            mu,
            sample_count: 100 / (node + 1),
            weight,
        }
    }

    #[test]
    fn root_only_graph() {
        let m = model(vec![rule(0, vec![], 0.4, 0.0)]);
        let spec = graph_spec(&m, None).unwrap();
        assert_eq!(spec.nodes.len(), 1);
        assert_eq!(spec.nodes[0].x, 0.4);
        assert!(spec.edges.is_empty());
        let svg = emit_graph(&m, None, GraphFormat::Svg).unwrap();
        assert_eq!(
            String::from_utf8(svg).unwrap().matches("<circle").count(),
            1
        );
    }

    #[test]
    fn containment_edges_are_reduced() {
        let a = SplitTest::le(0, 0.5);
        let b = SplitTest::gt(1, 0.5);
        let m = model(vec![
            rule(0, vec![], 0.4, 0.1),
            rule(1, vec![a], 0.2, 0.3),
            rule(2, vec![a, b], 0.6, 0.3),
            rule(3, vec![b], 0.7, 0.3),
        ]);
        assert_eq!(edges(&m.rules), vec![(0, 1), (0, 3), (1, 2), (3, 2)]);
    }

    #[test]
    fn unknown_format() {
        assert!(matches!(
            "png".parse::<GraphFormat>(),
            Err(Error::UnsupportedFormat(_))
        ));
        assert_eq!("SVG".parse::<GraphFormat>().unwrap(), GraphFormat::Svg);
    }

    #[test]
    fn output_is_deterministic_and_escaped() {
        let mut m = model(vec![
            rule(0, vec![], 0.4, 0.2),
            rule(1, vec![SplitTest::le(0, 0.5)], 0.9, 0.8),
        ]);
        m.features[0].name = "a<b & \"c\"".into();
        let e = m.explain(&[0.1, 0.0, 0.0], Some("case-1".into()));
        for format in [GraphFormat::Svg, GraphFormat::Dot, GraphFormat::Json] {
            assert_eq!(
                emit_graph(&m, Some(&e), format).unwrap(),
                emit_graph(&m, Some(&e), format).unwrap()
            );
        }
        let svg = String::from_utf8(emit_graph(&m, Some(&e), GraphFormat::Svg).unwrap()).unwrap();
        assert!(svg.contains("a&lt;b &amp; &quot;c&quot;"));
        assert!(!svg.contains("a<b"));
    }
}
