use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use harvest_core::cascade::{cascade_fit, categories, lmsir_fit};
use harvest_core::dataset::{
    load_csv, load_features, stratified_kfold, synthesize, Dataset, FeatureTable, PlantedRule,
    SynthTarget,
};
use harvest_core::ensemble::SplitTest;
use harvest_core::eval::{
    category_accuracy, cross_validate, rmse, CascadePipeline, ConstantPipeline, HarvestPipeline,
    LmsirPipeline, Pipeline, Task,
};
use harvest_core::interpret::{emit_graph, explanation_text, render_rule, GraphFormat};
use harvest_core::nodeharvest::{fit_harvest, HarvestModel};
use harvest_core::persist::{AnyModel, SavedModel};
use harvest_core::{Error, Result, Scalar};
use serde_json::Value;

use crate::settings::{default_target, Precision, Settings};

/// Writes through a temporary file in the destination directory, so a
/// failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| Error::io(path.display().to_string(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Scalar type recorded in a model file.
pub fn model_precision(text: &str) -> Result<Precision> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::UnsupportedModel(format!("not a model file: {e}")))?;
    match v.get("scalar").and_then(Value::as_str) {
        Some("f32") => Ok(Precision::F32),
        Some("f64") => Ok(Precision::F64),
        other => Err(Error::UnsupportedModel(format!(
            "unknown scalar type {other:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    /// Planted-rule binary label.
    Binary,
    /// Four-level signal-intensity category.
    Birads,
    /// Positive ratio with a linear trend.
    Lmsir,
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub groups_out: Option<PathBuf>,
    pub rows: Option<usize>,
    pub features: Option<usize>,
    pub kind: Option<SynthKind>,
}

pub fn synth(s: &Settings, a: &SynthArgs) -> Result<()> {
    let mut spec = s.synth.clone();
    if let Some(n) = a.rows {
        spec.n_rows = n;
    }
    if let Some(n) = a.features {
        spec.n_features = n;
    }
    match a.kind {
        Some(SynthKind::Binary) => {
            spec.target = SynthTarget::Binary {
                planted_rules: vec![PlantedRule {
                    conditions: vec![SplitTest::gt(0, 0.5), SplitTest::gt(1, 0.5)],
                    probability: 0.95,
                }],
                base_rate: 0.05,
                noise_rate: 0.0,
            }
        }
        Some(SynthKind::Birads) => {
            spec.target = SynthTarget::Birads {
                stage_features: [0, 1, 2],
                noise_rate: 0.02,
            }
        }
        Some(SynthKind::Lmsir) => {
            spec.target = SynthTarget::Linear {
                coefficients: vec![(0, 3.0), (1, 1.5)],
                intercept: 1.0,
                noise_sd: 0.1,
            }
        }
        None => {}
    }
    let d: Dataset<f64> = synthesize(&spec, s.seed)?;
    let mut csv = Vec::new();
    d.write_csv(&mut csv)?;
    let mut groups = Vec::new();
    if a.groups_out.is_some() {
        d.write_groups(&mut groups)?;
    }
    write_atomic(&a.out, &csv)?;
    if let Some(g) = &a.groups_out {
        write_atomic(g, &groups)?;
    }
    println!(
        "wrote {} rows x {} features, target `{}`, to {}",
        d.n_rows(),
        d.n_features(),
        d.target_name(),
        a.out.display()
    );
    Ok(())
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub task: Task,
    pub out: PathBuf,
    pub top: usize,
}

pub fn train<T: Scalar>(s: &Settings, a: &TrainArgs) -> Result<()> {
    let d: Dataset<T> = load_csv(&a.data, &s.data.schema(a.task))?;
    let mut summary = String::new();
    let (model, params) = match a.task {
        Task::Harvest => {
            let m = fit_harvest(&d, &s.harvest, s.seed)?;
            harvest_summary(&m, a.top, &mut summary)?;
            (AnyModel::Harvest(m), serde_json::to_value(&s.harvest)?)
        }
        Task::Cascade => {
            let m = cascade_fit(&d, &s.cascade, s.seed)?;
            let actual = categories(&d)?;
            let predicted: Vec<_> = d.rows().map(|x| m.predict(x).0).collect();
            let acc = category_accuracy(&predicted, &actual)?;
            let _ = writeln!(
                summary,
                "cascade model: stage rows {:?}, stage sizes {:?}",
                m.stage_rows,
                m.stages().map(|e| e.stages.len())
            );
            for c in &acc.per_category {
                let _ = writeln!(
                    summary,
                    "  {:<22} training accuracy {:.3} ({}/{})",
                    c.category, c.accuracy, c.correct, c.total
                );
            }
            let _ = writeln!(summary, "  overall training accuracy {:.3}", acc.overall);
            (AnyModel::Cascade(m), serde_json::to_value(&s.cascade)?)
        }
        Task::Lmsir => {
            let m = lmsir_fit(&d, &s.lmsir, s.seed)?;
            let y = d.real_target().expect("checked by lmsir_fit");
            let fitted: Vec<T> = d.rows().map(|x| m.predict(x)).collect();
            let _ = writeln!(
                summary,
                "lmsir model: {} stages, training RMSE {:.4}, output range [{}, {}]",
                m.regressor.stages.len(),
                rmse(&fitted, y)?,
                m.range.0,
                m.range.1
            );
            (AnyModel::Lmsir(m), serde_json::to_value(&s.lmsir)?)
        }
        Task::Constant => {
            return Err(Error::InvalidParam(
                "the constant task has no model to train; use it with `eval`".into(),
            ))
        }
    };
    let saved = SavedModel {
        seed: s.seed,
        params,
        features: d.feature_names(),
        model,
    };
    write_atomic(&a.out, saved.to_json()?.as_bytes())?;
    print!("{summary}");
    println!("model written to {}", a.out.display());
    Ok(())
}

fn harvest_summary<T: Scalar>(m: &HarvestModel<T>, top: usize, out: &mut String) -> Result<()> {
    let t = &m.training;
    let _ = writeln!(
        out,
        "harvest model: {} rules from {} candidates, objective {:.6} (root only {:.6}), {} iterations",
        m.rules.len(),
        t.n_candidates,
        t.objective,
        t.root_objective,
        t.iterations
    );
    let mut order: Vec<usize> = (0..m.rules.len()).collect();
    order.sort_by(|&a, &b| {
        m.rules[b]
            .weight
            .partial_cmp(&m.rules[a].weight)
            .unwrap()
            .then(m.rules[a].node_uid.cmp(&m.rules[b].node_uid))
    });
    for &i in order.iter().take(top) {
        let r = render_rule(&m.rules[i], &m.features, &m.quantiles)?;
        let _ = writeln!(
            out,
            "  w = {:.4}  mu = {:.4}  n = {:<5} {}",
            r.weight.as_f64(),
            r.mu.as_f64(),
            r.sample_count,
            r.condition_text()
        );
    }
    Ok(())
}

fn load_model<T: Scalar>(path: &Path) -> Result<SavedModel<T>> {
    SavedModel::from_json(&read_text(path)?)
}

fn model_task<T: Scalar>(m: &AnyModel<T>) -> Task {
    match m {
        AnyModel::Harvest(_) => Task::Harvest,
        AnyModel::Cascade(_) => Task::Cascade,
        AnyModel::Lmsir(_) => Task::Lmsir,
    }
}

fn load_rows<T: Scalar>(
    s: &Settings,
    saved: &SavedModel<T>,
    data: &Path,
) -> Result<FeatureTable<T>> {
    let target = s.data.target_for(model_task(&saved.model));
    load_features(
        data,
        &saved.features,
        s.data.id_column.as_deref(),
        &[target.as_str()],
    )
}

pub struct PredictArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn predict<T: Scalar>(s: &Settings, a: &PredictArgs) -> Result<()> {
    let saved = load_model::<T>(&a.model)?;
    let rows = load_rows(s, &saved, &a.data)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    match &saved.model {
        AnyModel::Harvest(m) => {
            w.write_record(["row_id", "probability", "decision"])?;
            for (id, x) in rows.row_ids.iter().zip(&rows.rows) {
                let p = m.predict(x);
                w.write_record([id.clone(), format!("{p:?}"), m.classify(p).to_string()])?;
            }
        }
        AnyModel::Cascade(m) => {
            w.write_record(["row_id", "category", "stage1", "stage2", "stage3"])?;
            for (id, x) in rows.row_ids.iter().zip(&rows.rows) {
                let (c, p) = m.predict(x);
                w.write_record([
                    id.clone(),
                    c.to_string(),
                    format!("{:?}", p[0]),
                    format!("{:?}", p[1]),
                    format!("{:?}", p[2]),
                ])?;
            }
        }
        AnyModel::Lmsir(m) => {
            w.write_record(["row_id", default_target(Task::Lmsir)])?;
            for (id, x) in rows.row_ids.iter().zip(&rows.rows) {
                w.write_record([id.clone(), format!("{:?}", m.predict(x))])?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<csv writer>", e.into_error()))?;
    emit(a.out.as_deref(), &bytes)
}

fn harvest_only<T: Scalar>(saved: SavedModel<T>, what: &str) -> Result<HarvestModel<T>> {
    match saved.model {
        AnyModel::Harvest(m) => Ok(m),
        other => Err(Error::InvalidParam(format!(
            "{what} needs a harvest model, this file holds a {} model",
            other.kind()
        ))),
    }
}

fn graph_format(out: &Path, format: Option<&str>) -> Result<GraphFormat> {
    match format {
        Some(f) => f.parse(),
        None => out
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("svg")
            .parse(),
    }
}

pub struct ExplainArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub row: String,
    pub plot: Option<PathBuf>,
    pub format: Option<String>,
}

pub fn explain<T: Scalar>(s: &Settings, a: &ExplainArgs) -> Result<()> {
    let saved = load_model::<T>(&a.model)?;
    let rows = load_rows(s, &saved, &a.data)?;
    let m = harvest_only(saved, "explain")?;
    let i = rows.row_position(&a.row).ok_or_else(|| {
        Error::InvalidData(format!("row `{}` not found in {}", a.row, a.data.display()))
    })?;
    let e = m.explain(&rows.rows[i], Some(a.row.clone()));
    let text = explanation_text(&m, &e)?;
    if let Some(out) = &a.plot {
        let bytes = emit_graph(&m, Some(&e), graph_format(out, a.format.as_deref())?)?;
        write_atomic(out, &bytes)?;
    }
    print!("{text}");
    if let Some(out) = &a.plot {
        println!("graph written to {}", out.display());
    }
    Ok(())
}

pub struct PlotArgs {
    pub model: PathBuf,
    pub out: PathBuf,
    pub format: Option<String>,
    pub data: Option<PathBuf>,
    pub row: Option<String>,
}

pub fn plot<T: Scalar>(s: &Settings, a: &PlotArgs) -> Result<()> {
    let saved = load_model::<T>(&a.model)?;
    let case = match (&a.data, &a.row) {
        (Some(data), Some(row)) => {
            let rows = load_rows(s, &saved, data)?;
            let i = rows.row_position(row).ok_or_else(|| {
                Error::InvalidData(format!("row `{row}` not found in {}", data.display()))
            })?;
            Some((rows.rows[i].clone(), row.clone()))
        }
        (None, None) => None,
        _ => return Err(Error::InvalidParam("--data and --row go together".into())),
    };
    let m = harvest_only(saved, "plot")?;
    let e = case.map(|(x, id)| m.explain(&x, Some(id)));
    let bytes = emit_graph(&m, e.as_ref(), graph_format(&a.out, a.format.as_deref())?)?;
    write_atomic(&a.out, &bytes)?;
    println!("graph written to {}", a.out.display());
    Ok(())
}

pub struct EvalArgs {
    pub data: PathBuf,
    pub task: Task,
    pub out: Option<PathBuf>,
    pub table_out: Option<PathBuf>,
}

pub fn eval<T: Scalar>(s: &Settings, a: &EvalArgs) -> Result<()> {
    let d: Dataset<T> = load_csv(&a.data, &s.data.schema(a.task))?;
    let pipeline: Box<dyn Pipeline<T>> = match a.task {
        Task::Harvest => Box::new(HarvestPipeline(s.harvest.clone())),
        Task::Cascade => Box::new(CascadePipeline(s.cascade.clone())),
        Task::Lmsir => Box::new(LmsirPipeline(s.lmsir.clone())),
        Task::Constant => Box::new(ConstantPipeline),
    };
    let plan = stratified_kfold(&d, s.eval.folds, s.seed)?;
    let mut bootstrap = s.eval.bootstrap.clone();
    bootstrap.seed = s.seed;
    let report = cross_validate(&d, pipeline.as_ref(), &plan, &bootstrap, s.seed)?;
    let table = report.table();
    let json = report.to_json()?;
    if let Some(p) = &a.out {
        write_atomic(p, json.as_bytes())?;
    }
    if let Some(p) = &a.table_out {
        write_atomic(p, table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}
