//! Non-negative rule weights for the weighted-average predictor.
//!
//! For training row `i` with active rule set `G_i`, the prediction is
//! `p_i = Σ_{j∈G_i} w_j μ_j / Σ_{j∈G_i} w_j`, and the solver minimizes
//! `Σ_i (y_i − p_i)²` over `w ≥ 0`. Dividing by the active weight sum is the
//! per-row sum-to-one normalization, so every `w ≥ 0` with a positive root
//! weight is feasible and the objective is invariant to rescaling `w`.
//!
//! The solver is cyclic coordinate descent. Each coordinate is minimized
//! along `w_j ∈ [0, ∞)` with projected Newton steps and backtracking; a
//! global log-scale scan of every coordinate runs on the first sweep and
//! before convergence is accepted, so coordinates can jump between zero and
//! large values. Every accepted move strictly lowers the objective.

use serde::{Deserialize, Serialize};

use super::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Maximum coordinate sweeps.
    pub max_iterations: usize,
    /// Stop when a sweep lowers the objective by less than this fraction.
    pub tolerance: f64,
    /// Non-root weights below this fraction of the total are dropped.
    pub weight_tolerance: f64,
    /// Starting weight of every non-root rule (the root starts at 1).
    pub init_epsilon: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iterations: 10_000,
            tolerance: 1e-8,
            weight_tolerance: 1e-5,
            init_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// `Σ (y − p)²` at the returned weights.
    pub objective: f64,
    /// Objective of the root-only model (constant base-rate prediction).
    pub root_objective: f64,
    pub iterations: usize,
    /// Objective after each sweep of the run that produced the weights.
    pub trace: Vec<f64>,
}

/// Training objective for arbitrary weights; rows with zero active weight
/// predict the root mean.
pub fn objective<T: Scalar>(c: &CandidateSet<T>, labels: &[u8], weights: &[f64]) -> f64 {
    let p = Problem::new(c, labels);
    let (num, den) = p.accumulate(weights);
    p.total(&num, &den)
}

/// Solves for weights; returns them normalized to sum to 1.
pub fn solve<T: Scalar>(
    c: &CandidateSet<T>,
    labels: &[u8],
    params: &SolverParams,
) -> Result<(Vec<f64>, SolverReport)> {
    if labels.len() != c.n_rows {
        return Err(Error::InvalidData(
            "labels do not match the candidate set".into(),
        ));
    }
    if c.is_empty() || !c.rules[0].is_root() {
        return Err(Error::InvalidData(
            "candidate set must start with the root rule".into(),
        ));
    }
    if params.max_iterations == 0 || !(params.init_epsilon >= 0.0) {
        return Err(Error::InvalidParam(
            "solver needs at least one iteration and a non-negative epsilon".into(),
        ));
    }
    let problem = Problem::new(c, labels);
    let m = c.len();
    let mut root_only = vec![0.0; m];
    root_only[0] = 1.0;
    let (num, den) = problem.accumulate(&root_only);
    let root_objective = problem.total(&num, &den);

    let mut start = vec![params.init_epsilon; m];
    start[0] = 1.0;
    let active: Vec<bool> = vec![true; m];
    let mut best = problem.descend(start, &active, params);
    if m > 1 {
        // second start from uniform weights; keeps the better local optimum
        let uniform = problem.descend(vec![1.0 / m as f64; m], &active, params);
        if uniform.objective < best.objective {
            best = uniform;
        }
    }

    // drop negligible weights, then re-polish on the survivors
    let total: f64 = best.weights.iter().sum();
    let cutoff = params.weight_tolerance * total;
    let keep: Vec<bool> = best
        .weights
        .iter()
        .enumerate()
        .map(|(j, &w)| j == 0 || w >= cutoff)
        .collect();
    if keep.iter().zip(&best.weights).any(|(&k, &w)| !k && w > 0.0) {
        let pruned: Vec<f64> = best
            .weights
            .iter()
            .zip(&keep)
            .map(|(&w, &k)| if k { w } else { 0.0 })
            .collect();
        let polished = problem.descend(pruned, &keep, params);
        if polished.objective <= best.objective + 1e-9 * (1.0 + best.objective) {
            best = polished;
        }
    }
    if best.objective > root_objective {
        best = Run {
            weights: root_only,
            objective: root_objective,
            iterations: 0,
            trace: vec![root_objective],
        };
    }
    let total: f64 = best.weights.iter().sum();
    let weights: Vec<f64> = best.weights.iter().map(|w| w / total).collect();
    let (num, den) = problem.accumulate(&weights);
    let objective = problem.total(&num, &den);
    Ok((
        weights,
        SolverReport {
            objective,
            root_objective,
            iterations: best.iterations,
            trace: best.trace,
        },
    ))
}

struct Run {
    weights: Vec<f64>,
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
}

struct Problem<'a> {
    y: Vec<f64>,
    mu: Vec<f64>,
    cols: &'a [Vec<u32>],
    root_mu: f64,
}

/// Log-spaced scan points, relative to the current total weight.
const SCAN_LOW: i32 = -40;
const SCAN_HIGH: i32 = 16;
const SCAN_STEP: f64 = 0.25;

impl<'a> Problem<'a> {
    fn new<T: Scalar>(c: &'a CandidateSet<T>, labels: &[u8]) -> Self {
        Problem {
            y: labels.iter().map(|&b| b as f64).collect(),
            mu: c.rules.iter().map(|r| r.mu.as_f64()).collect(),
            cols: &c.members,
            root_mu: c.rules[0].mu.as_f64(),
        }
    }

    fn accumulate(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.y.len();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for (j, rows) in self.cols.iter().enumerate() {
            if w[j] == 0.0 {
                continue;
            }
            let wm = w[j] * self.mu[j];
            for &r in rows {
                num[r as usize] += wm;
                den[r as usize] += w[j];
            }
        }
        (num, den)
    }

    #[inline]
    fn pred(&self, num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            self.root_mu
        }
    }

    fn total(&self, num: &[f64], den: &[f64]) -> f64 {
        self.y
            .iter()
            .enumerate()
            .map(|(i, &y)| (y - self.pred(num[i], den[i])).powi(2))
            .sum()
    }

    /// Row-local loss over coordinate `j`'s rows if its weight were `w`.
    fn line(&self, j: usize, a: &[f64], b: &[f64], w: f64) -> f64 {
        let mu = self.mu[j];
        self.cols[j]
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&r, (&ai, &bi))| {
                let d = bi + w;
                let p = if d > 0.0 {
                    (ai + w * mu) / d
                } else {
                    self.root_mu
                };
                (self.y[r as usize] - p).powi(2)
            })
            .sum()
    }

    /// First and second derivative of `line` at `w > 0`.
    fn line_derivatives(&self, j: usize, a: &[f64], b: &[f64], w: f64) -> (f64, f64) {
        let mu = self.mu[j];
        let (mut g, mut h) = (0.0, 0.0);
        for (&r, (&ai, &bi)) in self.cols[j].iter().zip(a.iter().zip(b)) {
            let d = bi + w;
            if d <= 0.0 {
                continue;
            }
            let p = (ai + w * mu) / d;
            let y = self.y[r as usize];
            g += -2.0 * (y - p) * (mu - p) / d;
            h += 2.0 * (mu - p) * (mu + 2.0 * y - 3.0 * p) / (d * d);
        }
        (g, h)
    }

    fn descend(&self, mut w: Vec<f64>, active: &[bool], params: &SolverParams) -> Run {
        let m = w.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let (mut num, mut den) = self.accumulate(&w);
        let mut current = self.total(&num, &den);
        let mut trace = vec![current];
        let mut scan = true;
        let mut iterations = 0;
        while iterations < params.max_iterations {
            iterations += 1;
            let before = current;
            let scale: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            for j in 0..m {
                if !active[j] {
                    continue;
                }
                let rows = &self.cols[j];
                a.clear();
                b.clear();
                for &r in rows {
                    let r = r as usize;
                    let bi = den[r] - w[j];
                    // cancellation leaves tiny residues when w_j dominates the row
                    if bi <= 1e-13 * den[r] {
                        a.push(0.0);
                        b.push(0.0);
                    } else {
                        a.push(num[r] - w[j] * self.mu[j]);
                        b.push(bi);
                    }
                }
                let h0 = self.line(j, &a, &b, w[j]);
                let (w_new, h_new) = if scan {
                    self.scan_coordinate(j, &a, &b, w[j], h0, scale)
                } else {
                    self.newton_coordinate(j, &a, &b, w[j], h0, scale)
                };
                if h_new < h0 && w_new != w[j] {
                    let dw = w_new - w[j];
                    let dwm = dw * self.mu[j];
                    for &r in rows {
                        num[r as usize] += dwm;
                        den[r as usize] += dw;
                    }
                    w[j] = w_new;
                }
            }
            // rescale to unit total and refresh sums from scratch to shed drift
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.iter_mut().for_each(|x| *x /= total);
            }
            (num, den) = self.accumulate(&w);
            let after = self.total(&num, &den);
            current = after;
            trace.push(current);
            let small = before - after <= params.tolerance * before.abs().max(f64::MIN_POSITIVE);
            if small {
                if scan {
                    break;
                }
                scan = true;
            } else {
                scan = false;
            }
        }
        let objective = self.total(&num, &den);
        Run {
            weights: w,
            objective,
            iterations,
            trace,
        }
    }

    /// Projected Newton with backtracking along one coordinate.
    fn newton_coordinate(
        &self,
        j: usize,
        a: &[f64],
        b: &[f64],
        w0: f64,
        h0: f64,
        scale: f64,
    ) -> (f64, f64) {
        let (mut w, mut h) = (w0, h0);
        if w == 0.0 {
            let probe = 1e-6 * scale;
            let hp = self.line(j, a, b, probe);
            if hp >= h {
                return (w, h);
            }
            (w, h) = (probe, hp);
        }
        for _ in 0..8 {
            let (g, curv) = self.line_derivatives(j, a, b, w);
            let step = if curv > 0.0 {
                -g / curv
            } else {
                -g.signum() * w
            };
            if !step.is_finite() || step.abs() <= 1e-12 * (w + scale) {
                break;
            }
            let mut cand = (w + step).max(0.0);
            let mut hc = self.line(j, a, b, cand);
            let mut tries = 0;
            while hc >= h && tries < 30 {
                cand = 0.5 * (w + cand);
                hc = self.line(j, a, b, cand);
                tries += 1;
            }
            if hc >= h {
                break;
            }
            let moved = (cand - w).abs();
            (w, h) = (cand, hc);
            if moved <= 1e-10 * (w + scale) {
                break;
            }
        }
        (w, h)
    }

    /// Global scan over zero and a log grid, refined by golden section.
    fn scan_coordinate(
        &self,
        j: usize,
        a: &[f64],
        b: &[f64],
        w0: f64,
        h0: f64,
        scale: f64,
    ) -> (f64, f64) {
        let mut grid: Vec<f64> = vec![0.0];
        let mut e = SCAN_LOW;
        while e <= SCAN_HIGH {
            grid.push(scale * 10f64.powf(e as f64 * SCAN_STEP));
            e += 1;
        }
        let values: Vec<f64> = grid.iter().map(|&w| self.line(j, a, b, w)).collect();
        let (k, _) = values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        let (mut best_w, mut best_h) = (w0, h0);
        if values[k] < best_h {
            (best_w, best_h) = (grid[k], values[k]);
        }
        // golden-section in log space between the grid neighbours of k
        if k > 0 {
            let lo = grid[k - 1].max(grid[1] * 10f64.powf(-SCAN_STEP));
            let hi = grid
                .get(k + 1)
                .copied()
                .unwrap_or(grid[k] * 10f64.powf(SCAN_STEP));
            let (mut x0, mut x1) = (lo.ln(), hi.ln());
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = x1 - phi * (x1 - x0);
            let mut d = x0 + phi * (x1 - x0);
            let mut hc = self.line(j, a, b, c.exp());
            let mut hd = self.line(j, a, b, d.exp());
            for _ in 0..40 {
                if hc < hd {
                    x1 = d;
                    d = c;
                    hd = hc;
                    c = x1 - phi * (x1 - x0);
                    hc = self.line(j, a, b, c.exp());
                } else {
                    x0 = c;
                    c = d;
                    hc = hd;
                    d = x0 + phi * (x1 - x0);
                    hd = self.line(j, a, b, d.exp());
                }
            }
            for (x, h) in [(c, hc), (d, hd)] {
                if h < best_h {
                    (best_w, best_h) = (x.exp(), h);
                }
            }
        }
        if best_w > 0.0 {
            return self.newton_coordinate(j, a, b, best_w, best_h, scale);
        }
        (best_w, best_h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, FeatureGroup, FeatureMeta, Target};
    use crate::ensemble::SplitTest;
    use crate::nodeharvest::{NodeUid, Rule};

    fn rule(conditions: Vec<SplitTest<f64>>, node: usize) -> Rule<f64> {
        Rule {
            node_uid: NodeUid { tree: 0, node },
            conditions,
            mu: 0.0,
            sample_count: 0,
            weight: 0.0,
        }
    }

    fn one_d(labels: &[u8]) -> Dataset<f64> {
        let meta = vec![FeatureMeta {
            name: "f0".into(),
            group: FeatureGroup::Derived,
            index: 0,
        }];
        let rows = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::new(rows, meta, "y", Target::Binary(labels.to_vec()), None).unwrap()
    }

    /// Exhaustive search over the weight simplex at the given resolution.
    fn grid_oracle(c: &CandidateSet<f64>, labels: &[u8], steps: usize) -> f64 {
        fn rec(
            c: &CandidateSet<f64>,
            labels: &[u8],
            w: &mut Vec<f64>,
            left: usize,
            steps: usize,
            best: &mut f64,
        ) {
            let j = w.len();
            if j + 1 == c.len() {
                w.push(left as f64 / steps as f64);
                *best = best.min(objective(c, labels, w));
                w.pop();
                return;
            }
            for k in 0..=left {
                w.push(k as f64 / steps as f64);
                rec(c, labels, w, left - k, steps, best);
                w.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(c, labels, &mut Vec::new(), steps, steps, &mut best);
        best
    }

    #[test]
    fn root_only_predicts_base_rate() {
        let labels = [0, 1, 1, 0, 0];
        let d = one_d(&labels);
        let c = CandidateSet::from_rules(vec![rule(vec![], 0)], &d).unwrap();
        let (w, report) = solve(&c, &labels, &SolverParams::default()).unwrap();
        assert_eq!(w, vec![1.0]);
        assert!((report.objective - report.root_objective).abs() < 1e-15);
        assert!((report.root_objective - 5.0 * 0.4 * 0.6).abs() < 1e-12);
    }

    #[test]
    fn pure_disjoint_rules_reach_zero_objective() {
        let labels = [0, 0, 0, 1, 1, 1];
        let d = one_d(&labels);
        let c = CandidateSet::from_rules(
            vec![
                rule(vec![], 0),
                rule(vec![SplitTest::le(0, 2.5)], 1),
                rule(vec![SplitTest::gt(0, 2.5)], 2),
            ],
            &d,
        )
        .unwrap();
        let (w, report) = solve(&c, &labels, &SolverParams::default()).unwrap();
        // root weight vanishes relative to the pure rules
        assert!(report.objective < 1e-6, "{report:?}");
        assert!(
            w[0] / (w[0] + w[1]) < 1e-3 && w[0] / (w[0] + w[2]) < 1e-3,
            "{w:?}"
        );
        let oracle = grid_oracle(&c, &labels, 100);
        assert_eq!(oracle, 0.0);
        assert!(report.objective <= oracle + 1e-3);
    }

    #[test]
    fn matches_grid_on_overlapping_rules() {
        let labels = [0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1];
        let d = one_d(&labels);
        let c = CandidateSet::from_rules(
            vec![
                rule(vec![], 0),
                rule(vec![SplitTest::le(0, 5.5)], 1),
                rule(vec![SplitTest::gt(0, 3.5)], 2),
                rule(vec![SplitTest::gt(0, 3.5), SplitTest::le(0, 8.5)], 3),
            ],
            &d,
        )
        .unwrap();
        let (_, report) = solve(&c, &labels, &SolverParams::default()).unwrap();
        let oracle = grid_oracle(&c, &labels, 50);
        assert!(
            report.objective <= oracle + 1e-3,
            "{} vs {oracle}",
            report.objective
        );
        assert!(report.objective <= report.root_objective);
        for w in report.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
        }
    }
}
