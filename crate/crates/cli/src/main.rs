//! `harvest`: synthesize data, train, predict, explain, plot and evaluate.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use harvest_core::eval::Task;
use harvest_core::{Error, ErrorKind, Result};

use commands::{EvalArgs, ExplainArgs, PlotArgs, PredictArgs, SynthArgs, SynthKind, TrainArgs};
use settings::{Precision, Settings};

#[derive(Parser)]
#[command(
    name = "harvest",
    version,
    about = "Interpretable rule models for tabular data"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command. Precedence: flags, then `--set`, then
/// the config file, then built-in defaults.
#[derive(Args)]
struct Common {
    /// TOML file with run settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting by dotted key, e.g. `harvest.forest.n_trees=300`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Random seed (default 42; the effective seed is always printed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Scalar type for training and evaluation.
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,
    /// Target column (default: label, birads or lmsir by task).
    #[arg(long, global = true)]
    target: Option<String>,
    /// `feature,group` CSV assigning feature groups.
    #[arg(long, global = true, value_name = "FILE")]
    groups: Option<PathBuf>,
    /// Case id column (default: `row_id` when present, else the 0-based row number).
    #[arg(long, global = true, value_name = "COLUMN")]
    id_column: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Synth {
        /// Output CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the feature-group table here.
        #[arg(long, value_name = "FILE")]
        groups_out: Option<PathBuf>,
        /// Number of rows.
        #[arg(long)]
        rows: Option<usize>,
        /// Number of features.
        #[arg(long)]
        features: Option<usize>,
        /// Target preset; otherwise `synth.target` from the settings.
        #[arg(long, value_enum)]
        kind: Option<SynthKind>,
    },
    /// Fit a model and write it as versioned JSON.
    Train {
        /// Training CSV.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// harvest, cascade or lmsir.
        #[arg(long, default_value = "harvest")]
        task: Task,
        /// Model file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Number of top-weighted rules shown in the summary.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Score every row of a CSV with a saved model.
    Predict {
        /// Model file.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// CSV with the model's feature columns.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Explain the prediction for one row of a CSV.
    Explain {
        /// Harvest model file.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// CSV holding the case.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Case id (value of the id column, or the 0-based row number).
        #[arg(long)]
        row: String,
        /// Also write the rule graph of this case.
        #[arg(long, value_name = "FILE")]
        plot: Option<PathBuf>,
        /// Graph format: svg, dot or json (default from the file extension).
        #[arg(long)]
        format: Option<String>,
    },
    /// Cross-validate a task and report metrics with bootstrap intervals.
    Eval {
        /// Dataset CSV.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// harvest, cascade, lmsir or constant.
        #[arg(long, default_value = "harvest")]
        task: Task,
        /// Number of folds (default 10).
        #[arg(long)]
        folds: Option<usize>,
        /// Bootstrap resamples for the confidence interval (default 2000).
        #[arg(long)]
        resamples: Option<usize>,
        /// JSON report file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Text table file; the table is always printed.
        #[arg(long, value_name = "FILE")]
        table_out: Option<PathBuf>,
    },
    /// Draw the rule graph of a harvest model.
    Plot {
        /// Harvest model file.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Graph file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// svg, dot or json (default from the file extension).
        #[arg(long)]
        format: Option<String>,
        /// CSV holding a case to highlight.
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        /// Case id to highlight.
        #[arg(long)]
        row: Option<String>,
    },
}

fn settings(c: &Common) -> Result<Settings> {
    let mut s = Settings::layered(c.config.as_deref(), &c.set)?;
    if let Some(v) = c.seed {
        s.seed = v;
    }
    if let Some(v) = c.threads {
        s.threads = v;
    }
    if let Some(v) = c.precision {
        s.precision = v;
    }
    if let Some(v) = &c.target {
        s.data.target = Some(v.clone());
    }
    if let Some(v) = &c.groups {
        s.data.groups = Some(v.clone());
    }
    if let Some(v) = &c.id_column {
        s.data.id_column = Some(v.clone());
    }
    Ok(s)
}

macro_rules! dispatch {
    ($precision:expr, $f:ident, $s:expr, $a:expr) => {
        match $precision {
            Precision::F32 => commands::$f::<f32>($s, $a),
            Precision::F64 => commands::$f::<f64>($s, $a),
        }
    };
}

fn model_precision(path: &std::path::Path) -> Result<Precision> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    commands::model_precision(&text)
}

fn run(cli: Cli) -> Result<()> {
    let mut s = settings(&cli.common)?;
    eprintln!("seed {}", s.seed);
    rayon::ThreadPoolBuilder::new()
        .num_threads(s.threads)
        .build_global()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Synth {
            out,
            groups_out,
            rows,
            features,
            kind,
        } => commands::synth(
            &s,
            &SynthArgs {
                out,
                groups_out,
                rows,
                features,
                kind,
            },
        ),
        Command::Train {
            data,
            task,
            out,
            top,
        } => dispatch!(
            s.precision,
            train,
            &s,
            &TrainArgs {
                data,
                task,
                out,
                top
            }
        ),
        Command::Predict { model, data, out } => {
            let p = model_precision(&model)?;
            dispatch!(p, predict, &s, &PredictArgs { model, data, out })
        }
        Command::Explain {
            model,
            data,
            row,
            plot,
            format,
        } => {
            let p = model_precision(&model)?;
            let a = ExplainArgs {
                model,
                data,
                row,
                plot,
                format,
            };
            dispatch!(p, explain, &s, &a)
        }
        Command::Eval {
            data,
            task,
            folds,
            resamples,
            out,
            table_out,
        } => {
            if let Some(k) = folds {
                s.eval.folds = k;
            }
            if let Some(n) = resamples {
                s.eval.bootstrap.n_resamples = n;
            }
            let a = EvalArgs {
                data,
                task,
                out,
                table_out,
            };
            dispatch!(s.precision, eval, &s, &a)
        }
        Command::Plot {
            model,
            out,
            format,
            data,
            row,
        } => {
            let p = model_precision(&model)?;
            let a = PlotArgs {
                model,
                out,
                format,
                data,
                row,
            };
            dispatch!(p, plot, &s, &a)
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Io => 3,
        ErrorKind::Schema => 4,
        ErrorKind::Fit => 5,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
