//! ROC analysis, regression and category metrics, bootstrap intervals and
//! k-fold cross-validation of the model-fitting pipelines.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    cascade_fit, categories, lmsir_fit, stage_population, BiradsCategory, CascadeParams,
};
use crate::dataset::{quantile_sorted, Dataset, FoldPlan};
use crate::ensemble::BoostParams;
use crate::error::{Error, Result};
use crate::nodeharvest::{fit_harvest, HarvestConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub curve: Vec<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// `twice_area / (2 · n_pos · n_neg)`, evaluated from whichever side of one
/// half is smaller so that an AUC and its label-flipped twin sum to exactly 1.
fn auc_from_counts(twice_area: u128, n_pos: usize, n_neg: usize) -> f64 {
    let m = 2 * n_pos as u128 * n_neg as u128;
    if 2 * twice_area <= m {
        twice_area as f64 / m as f64
    } else {
        1.0 - (m - twice_area) as f64 / m as f64
    }
}

/// ROC curve and area; tied scores count one half, as in the Mann–Whitney statistic.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidData(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidData(format!("non-finite score {s}")));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidData("ROC analysis needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    let mut curve = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocResult {
        auc: auc_from_counts(twice_area, n_pos, n_neg),
        curve,
        n_pos,
        n_neg,
    })
}

pub fn rmse<T: Scalar>(predicted: &[T], actual: &[T]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::InvalidData(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p.as_f64() - a.as_f64()).powi(2))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    /// Categories that occur among the actual values, in their natural order.
    pub per_category: Vec<CategoryScore>,
    pub overall: f64,
}

impl CategoryAccuracy {
    pub fn get(&self, category: &str) -> Option<f64> {
        self.per_category
            .iter()
            .find(|c| c.category == category)
            .map(|c| c.accuracy)
    }
}

pub fn category_accuracy<C: Ord + Clone + fmt::Display>(
    predicted: &[C],
    actual: &[C],
) -> Result<CategoryAccuracy> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(Error::InvalidData(
            "category lists must have equal non-zero length".into(),
        ));
    }
    let mut cats: Vec<C> = actual.to_vec();
    cats.sort();
    cats.dedup();
    let per_category = cats
        .into_iter()
        .map(|c| {
            let total = actual.iter().filter(|a| **a == c).count();
            let correct = actual
                .iter()
                .zip(predicted)
                .filter(|(a, p)| **a == c && *p == *a)
                .count();
            CategoryScore {
                category: c.to_string(),
                correct,
                total,
                accuracy: correct as f64 / total as f64,
            }
        })
        .collect();
    let correct = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    Ok(CategoryAccuracy {
        per_category,
        overall: correct as f64 / actual.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapParams {
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            n_resamples: 2000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

/// Percentile bootstrap of `stat` over `n` items. Resamples where `stat`
/// is undefined are skipped.
pub fn bootstrap_ci<F>(n: usize, stat: F, params: &BootstrapParams) -> Result<ConfidenceInterval>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if n == 0 || params.n_resamples == 0 || !(params.level > 0.0 && params.level < 1.0) {
        return Err(Error::InvalidParam(
            "bootstrap needs data, resamples and a level in (0, 1)".into(),
        ));
    }
    let mut values: Vec<f64> = (0..params.n_resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(b as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    if values.is_empty() {
        return Err(Error::Fit(
            "statistic undefined on every bootstrap resample".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - params.level) / 2.0;
    Ok(ConfidenceInterval {
        level: params.level,
        lower: quantile_sorted(&values, alpha),
        upper: quantile_sorted(&values, 1.0 - alpha),
        n_resamples: params.n_resamples,
        seed: params.seed,
    })
}

fn auc_ci(scores: &[f64], labels: &[u8], params: &BootstrapParams) -> Result<ConfidenceInterval> {
    bootstrap_ci(
        scores.len(),
        |idx| {
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            roc_auc(&s, &y).ok().map(|r| r.auc)
        },
        params,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Harvest,
    Cascade,
    Lmsir,
    /// Scores every case 0.5; a reference point for the binary metrics.
    Constant,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Harvest => "harvest",
            Task::Cascade => "cascade",
            Task::Lmsir => "lmsir",
            Task::Constant => "constant",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harvest" => Ok(Task::Harvest),
            "cascade" => Ok(Task::Cascade),
            "lmsir" => Ok(Task::Lmsir),
            "constant" => Ok(Task::Constant),
            _ => Err(Error::InvalidParam(format!(
                "unknown task `{s}` (expected harvest, cascade, lmsir or constant)"
            ))),
        }
    }
}

/// Test-fold predictions of one fitted pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldOutput {
    Scores(Vec<f64>),
    Cascade {
        categories: Vec<BiradsCategory>,
        stage_probabilities: Vec<[f64; 3]>,
    },
    Values(Vec<f64>),
}

/// A model-fitting recipe: fit on `train`, predict `test`.
pub trait Pipeline<T: Scalar>: Sync {
    fn task(&self) -> Task;
    fn fit_predict(&self, train: &Dataset<T>, test: &Dataset<T>, seed: u64) -> Result<FoldOutput>;
}

pub struct HarvestPipeline(pub HarvestConfig);
pub struct CascadePipeline(pub CascadeParams);
pub struct LmsirPipeline(pub BoostParams);
pub struct ConstantPipeline;

fn predict_rows<T: Scalar>(d: &Dataset<T>, f: impl Fn(&[T]) -> T) -> Vec<f64> {
    d.rows().map(|x| f(x).as_f64()).collect()
}

impl<T: Scalar> Pipeline<T> for HarvestPipeline {
    fn task(&self) -> Task {
        Task::Harvest
    }

    fn fit_predict(&self, train: &Dataset<T>, test: &Dataset<T>, seed: u64) -> Result<FoldOutput> {
        let m = fit_harvest(train, &self.0, seed)?;
        Ok(FoldOutput::Scores(predict_rows(test, |x| m.predict(x))))
    }
}

impl<T: Scalar> Pipeline<T> for CascadePipeline {
    fn task(&self) -> Task {
        Task::Cascade
    }

    fn fit_predict(&self, train: &Dataset<T>, test: &Dataset<T>, seed: u64) -> Result<FoldOutput> {
        let m = cascade_fit(train, &self.0, seed)?;
        let (categories, stage_probabilities) = test
            .rows()
            .map(|x| {
                let (c, p) = m.predict(x);
                (c, p.map(|v| v.as_f64()))
            })
            .unzip();
        Ok(FoldOutput::Cascade {
            categories,
            stage_probabilities,
        })
    }
}

impl<T: Scalar> Pipeline<T> for LmsirPipeline {
    fn task(&self) -> Task {
        Task::Lmsir
    }

    fn fit_predict(&self, train: &Dataset<T>, test: &Dataset<T>, seed: u64) -> Result<FoldOutput> {
        let m = lmsir_fit(train, &self.0, seed)?;
        Ok(FoldOutput::Values(predict_rows(test, |x| m.predict(x))))
    }
}

impl<T: Scalar> Pipeline<T> for ConstantPipeline {
    fn task(&self) -> Task {
        Task::Constant
    }

    fn fit_predict(&self, train: &Dataset<T>, test: &Dataset<T>, _seed: u64) -> Result<FoldOutput> {
        train.require_labels()?;
        Ok(FoldOutput::Scores(vec![0.5; test.n_rows()]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Same order as `CvReport::metrics`; `None` where undefined on this fold.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub per_fold: Vec<Option<f64>>,
    /// Median and quartiles of the defined per-fold values.
    pub median: Option<f64>,
    pub iqr: Option<(f64, f64)>,
    /// The metric computed once over all out-of-fold predictions.
    pub pooled: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub row_id: String,
    pub fold: usize,
    pub prediction: f64,
    pub category: Option<BiradsCategory>,
    pub stage_probabilities: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub task: Task,
    pub k: usize,
    pub n_rows: usize,
    pub fold_seed: u64,
    pub model_seed: u64,
    pub folds: Vec<FoldSummary>,
    pub metrics: Vec<MetricSummary>,
    pub category_accuracy: Option<CategoryAccuracy>,
    pub out_of_fold: Vec<OutOfFold>,
}

impl CvReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Human-readable report: per-fold rows, then median/IQR, pooled value and CI.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "task {}  folds {}  rows {}  fold seed {}  model seed {}",
            self.task, self.k, self.n_rows, self.fold_seed, self.model_seed
        );
        let _ = write!(s, "{:>5} {:>8} {:>7}", "fold", "n_train", "n_test");
        for m in &self.metrics {
            let _ = write!(s, " {:>12}", m.name);
        }
        s.push('\n');
        for f in &self.folds {
            let _ = write!(s, "{:>5} {:>8} {:>7}", f.fold, f.n_train, f.n_test);
            for v in &f.values {
                let _ = write!(s, " {:>12}", fmt_opt(*v));
            }
            s.push('\n');
        }
        s.push('\n');
        for m in &self.metrics {
            let median = fmt_opt(m.median);
            let iqr = m
                .iqr
                .map_or("n/a".to_string(), |(a, b)| format!("[{a:.4}-{b:.4}]"));
            let pooled = fmt_opt(m.pooled);
            let ci = m.ci.as_ref().map_or(String::new(), |c| {
                format!(
                    "  {:.0}% CI ({:.4}-{:.4})",
                    c.level * 100.0,
                    c.lower,
                    c.upper
                )
            });
            let _ = writeln!(
                s,
                "{:<12} median {median} IQR: {iqr}  pooled {pooled}{ci}",
                m.name
            );
        }
        if let Some(acc) = &self.category_accuracy {
            s.push('\n');
            for c in &acc.per_category {
                let _ = writeln!(
                    s,
                    "{} ({:.0}% accuracy, {}/{})",
                    c.category,
                    100.0 * c.accuracy,
                    c.correct,
                    c.total
                );
            }
            let _ = writeln!(s, "overall ({:.0}% accuracy)", 100.0 * acc.overall);
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |v| format!("{v:.4}"))
}

fn summarize(
    name: &str,
    per_fold: Vec<Option<f64>>,
    pooled: Option<f64>,
    ci: Option<ConfidenceInterval>,
) -> MetricSummary {
    let mut defined: Vec<f64> = per_fold.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    let (median, iqr) = if defined.is_empty() {
        (None, None)
    } else {
        (
            Some(quantile_sorted(&defined, 0.5)),
            Some((
                quantile_sorted(&defined, 0.25),
                quantile_sorted(&defined, 0.75),
            )),
        )
    };
    MetricSummary {
        name: name.into(),
        per_fold,
        median,
        iqr,
        pooled,
        ci,
    }
}

fn binary_accuracy(scores: &[f64], labels: &[u8]) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| (**s >= 0.5) == (**y == 1))
        .count();
    correct as f64 / labels.len() as f64
}

/// Fits `pipeline` on every training split of `plan` (folds in parallel, fold
/// `f` seeded with `seed + f`) and scores the pooled out-of-fold predictions.
pub fn cross_validate<T: Scalar, P: Pipeline<T> + ?Sized>(
    d: &Dataset<T>,
    pipeline: &P,
    plan: &FoldPlan,
    bootstrap: &BootstrapParams,
    seed: u64,
) -> Result<CvReport> {
    if plan.assignments.len() != d.n_rows() || plan.assignments.iter().any(|&f| f >= plan.k) {
        return Err(Error::InvalidParam(
            "fold plan does not match the dataset".into(),
        ));
    }
    if plan.fold_sizes().contains(&0) {
        return Err(Error::InvalidParam("fold plan has an empty fold".into()));
    }
    let task = pipeline.task();
    let labels = match task {
        Task::Harvest | Task::Constant => Some(d.require_labels()?),
        _ => None,
    };
    if let Some(labels) = labels {
        for f in 0..plan.k {
            let train = plan.train_rows(f);
            for class in [0u8, 1] {
                if !train.iter().any(|&r| labels[r] == class) {
                    return Err(Error::Fit(format!(
                        "training split of fold {f} has no rows of class {class}"
                    )));
                }
            }
        }
    }
    let outputs: Vec<(Vec<usize>, usize, FoldOutput)> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train_rows = plan.train_rows(f);
            let test_rows = plan.test_rows(f);
            let out = pipeline.fit_predict(
                &d.select_rows(&train_rows)?,
                &d.select_rows(&test_rows)?,
                seed.wrapping_add(f as u64),
            )?;
            Ok((test_rows, train_rows.len(), out))
        })
        .collect::<Result<_>>()?;

    let n = d.n_rows();
    let ids = d.row_ids();
    let mut oof: Vec<Option<OutOfFold>> = vec![None; n];
    let mut metrics = Vec::new();
    let mut fold_values: Vec<Vec<Option<f64>>> = vec![Vec::new(); plan.k];
    let mut category_acc = None;
    let mut push_metric =
        |metrics: &mut Vec<MetricSummary>, name: &str, per: Vec<Option<f64>>, pooled, ci| {
            for (f, v) in per.iter().enumerate() {
                fold_values[f].push(*v);
            }
            metrics.push(summarize(name, per, pooled, ci));
        };

    match task {
        Task::Harvest | Task::Constant => {
            let labels = labels.unwrap();
            let mut pooled = vec![0.0; n];
            let (mut aucs, mut accs) = (Vec::new(), Vec::new());
            for (f, (rows, _, out)) in outputs.iter().enumerate() {
                let FoldOutput::Scores(s) = out else {
                    unreachable!()
                };
                let y: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
                aucs.push(roc_auc(s, &y).ok().map(|r| r.auc));
                accs.push(Some(binary_accuracy(s, &y)));
                for (&r, &p) in rows.iter().zip(s) {
                    pooled[r] = p;
                    oof[r] = Some(OutOfFold {
                        row_id: ids[r].clone(),
                        fold: f,
                        prediction: p,
                        category: None,
                        stage_probabilities: None,
                    });
                }
            }
            let pooled_auc = roc_auc(&pooled, labels)?.auc;
            let ci = auc_ci(&pooled, labels, bootstrap)?;
            push_metric(&mut metrics, "auc", aucs, Some(pooled_auc), Some(ci));
            push_metric(
                &mut metrics,
                "accuracy",
                accs,
                Some(binary_accuracy(&pooled, labels)),
                None,
            );
        }
        Task::Lmsir => {
            let y: Vec<f64> = d
                .real_target()
                .ok_or_else(|| Error::InvalidData("ratio task needs a numeric target".into()))?
                .iter()
                .map(|v| v.as_f64())
                .collect();
            let mut pooled = vec![0.0; n];
            let mut per = Vec::new();
            for (f, (rows, _, out)) in outputs.iter().enumerate() {
                let FoldOutput::Values(v) = out else {
                    unreachable!()
                };
                let actual: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
                per.push(Some(rmse(v, &actual)?));
                for (&r, &p) in rows.iter().zip(v) {
                    pooled[r] = p;
                    oof[r] = Some(OutOfFold {
                        row_id: ids[r].clone(),
                        fold: f,
                        prediction: p,
                        category: None,
                        stage_probabilities: None,
                    });
                }
            }
            let pooled_rmse = rmse(&pooled, &y)?;
            let ci = bootstrap_ci(
                n,
                |idx| {
                    let sse: f64 = idx.iter().map(|&i| (pooled[i] - y[i]).powi(2)).sum();
                    Some((sse / idx.len() as f64).sqrt())
                },
                bootstrap,
            )?;
            push_metric(&mut metrics, "rmse", per, Some(pooled_rmse), Some(ci));
        }
        Task::Cascade => {
            let actual = categories(d)?;
            let mut pooled_cat = vec![BiradsCategory::None; n];
            let mut pooled_p = vec![[0.0; 3]; n];
            let mut fold_acc = Vec::new();
            for (f, (rows, _, out)) in outputs.iter().enumerate() {
                let FoldOutput::Cascade {
                    categories,
                    stage_probabilities,
                } = out
                else {
                    unreachable!()
                };
                let truth: Vec<BiradsCategory> = rows.iter().map(|&r| actual[r]).collect();
                fold_acc.push(Some(category_accuracy(categories, &truth)?.overall));
                for (i, &r) in rows.iter().enumerate() {
                    pooled_cat[r] = categories[i];
                    pooled_p[r] = stage_probabilities[i];
                    oof[r] = Some(OutOfFold {
                        row_id: ids[r].clone(),
                        fold: f,
                        prediction: stage_probabilities[i][0],
                        category: Some(categories[i]),
                        stage_probabilities: Some(stage_probabilities[i]),
                    });
                }
            }
            for k in 0..3 {
                let per: Vec<Option<f64>> = outputs
                    .iter()
                    .map(|(rows, _, out)| {
                        let FoldOutput::Cascade {
                            stage_probabilities,
                            ..
                        } = out
                        else {
                            unreachable!()
                        };
                        let truth: Vec<BiradsCategory> = rows.iter().map(|&r| actual[r]).collect();
                        let (members, y) = stage_population(&truth, k);
                        let s: Vec<f64> =
                            members.iter().map(|&i| stage_probabilities[i][k]).collect();
                        roc_auc(&s, &y).ok().map(|r| r.auc)
                    })
                    .collect();
                let (members, y) = stage_population(&actual, k);
                let s: Vec<f64> = members.iter().map(|&r| pooled_p[r][k]).collect();
                let pooled = roc_auc(&s, &y).ok().map(|r| r.auc);
                let ci = if pooled.is_some() {
                    auc_ci(&s, &y, bootstrap).ok()
                } else {
                    None
                };
                push_metric(
                    &mut metrics,
                    &format!("stage{}_auc", k + 1),
                    per,
                    pooled,
                    ci,
                );
            }
            let acc = category_accuracy(&pooled_cat, &actual)?;
            push_metric(&mut metrics, "accuracy", fold_acc, Some(acc.overall), None);
            category_acc = Some(acc);
        }
    }

    let folds = outputs
        .iter()
        .enumerate()
        .map(|(f, (rows, n_train, _))| FoldSummary {
            fold: f,
            n_train: *n_train,
            n_test: rows.len(),
            values: fold_values[f].clone(),
        })
        .collect();
    Ok(CvReport {
        task,
        k: plan.k,
        n_rows: n,
        fold_seed: plan.seed,
        model_seed: seed,
        folds,
        metrics,
        category_accuracy: category_acc,
        out_of_fold: oof
            .into_iter()
            .map(|o| o.expect("every row is in one test fold"))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{stratified_kfold, synthesize, SynthSpec, SynthTarget};

    /// Mann–Whitney over all positive/negative pairs.
    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut twice = 0u64;
        let mut pairs = 0u64;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1;
                    twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap().auc,
            1.0
        );
        assert_eq!(roc_auc(&[0.3; 5], &[1, 0, 1, 0, 0]).unwrap().auc, 0.5);
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [0, 0, 1, 1];
        assert_eq!(pairwise(&s, &y), 0.75);
        assert_eq!(roc_auc(&s, &y).unwrap().auc, 0.75);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn curve_shape_and_trapezoid() {
        let s = [0.2, 0.2, 0.5, 0.9, 0.1, 0.5, 0.7];
        let y = [0, 1, 1, 1, 0, 0, 1];
        let r = roc_auc(&s, &y).unwrap();
        assert_eq!(r.curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.curve.last(), Some(&(1.0, 1.0)));
        assert!(r
            .curve
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        let trap: f64 = r
            .curve
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        assert!((trap - r.auc).abs() < 1e-12);
        assert!((r.auc - pairwise(&s, &y)).abs() < 1e-12);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 2f64.sqrt());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn category_accuracy_hand_case() {
        let acc = category_accuracy(&["A", "B", "B"], &["A", "A", "B"]).unwrap();
        assert_eq!(acc.get("A"), Some(0.5));
        assert_eq!(acc.get("B"), Some(1.0));
        assert!((acc.overall - 2.0 / 3.0).abs() < 1e-15);
        let wrong = category_accuracy(&[1, 0], &[0, 1]).unwrap();
        assert!(wrong.per_category.iter().all(|c| c.accuracy == 0.0));
        assert!(category_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let data: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let mean =
            |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let p = BootstrapParams {
            n_resamples: 500,
            ..Default::default()
        };
        let a = bootstrap_ci(data.len(), mean, &p).unwrap();
        assert_eq!(a, bootstrap_ci(data.len(), mean, &p).unwrap());
        assert!(a.lower < a.upper);
        let other = bootstrap_ci(data.len(), mean, &BootstrapParams { seed: 9, ..p }).unwrap();
        assert_ne!(a, other);
    }

    fn planted(n: usize) -> Dataset<f64> {
        synthesize(
            &SynthSpec {
                n_rows: n,
                n_features: 4,
                ..Default::default()
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn constant_predictor_report() {
        let d = planted(120);
        let plan = stratified_kfold(&d, 10, 1).unwrap();
        let r = cross_validate(
            &d,
            &ConstantPipeline,
            &plan,
            &BootstrapParams {
                n_resamples: 200,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let auc = r.metric("auc").unwrap();
        assert_eq!(auc.pooled, Some(0.5));
        assert!(auc.per_fold.iter().all(|v| *v == Some(0.5)));
        let ci = auc.ci.as_ref().unwrap();
        assert!(ci.lower <= 0.5 && ci.upper >= 0.5);
        assert_eq!(r.folds.len(), 10);
        assert_eq!(r.out_of_fold.len(), d.n_rows());
        assert!(r.table().contains("95% CI"));
    }

    #[test]
    fn leave_one_out_covers_every_row() {
        let d = planted(6);
        let labels = d.labels().unwrap().to_vec();
        assert!(labels.contains(&0) && labels.contains(&1));
        let plan = FoldPlan {
            k: 6,
            assignments: (0..6).collect(),
            seed: 0,
        };
        let r = cross_validate(
            &d,
            &ConstantPipeline,
            &plan,
            &BootstrapParams {
                n_resamples: 50,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(r.folds.len(), 6);
        let mut folds: Vec<usize> = r.out_of_fold.iter().map(|o| o.fold).collect();
        folds.sort_unstable();
        assert_eq!(folds, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn lmsir_report_has_median_and_iqr() {
        let spec = SynthSpec {
            n_rows: 300,
            n_features: 3,
            feature_range: (0.5, 5.0),
            target: SynthTarget::Linear {
                coefficients: vec![(0, 3.0)],
                intercept: 0.0,
                noise_sd: 0.1,
            },
        };
        let d: Dataset<f64> = synthesize(&spec, 2).unwrap();
        let plan = stratified_kfold(&d, 5, 0).unwrap();
        let p = LmsirPipeline(BoostParams {
            n_stages: 100,
            max_depth: 3,
            ..Default::default()
        });
        let r = cross_validate(
            &d,
            &p,
            &plan,
            &BootstrapParams {
                n_resamples: 100,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let m = r.metric("rmse").unwrap();
        let (q1, q3) = m.iqr.unwrap();
        assert!(q1 <= m.median.unwrap() && m.median.unwrap() <= q3);
        assert!(r.table().contains("IQR: ["));
    }
}
