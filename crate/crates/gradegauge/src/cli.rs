//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 when the command fails on its input, 2 on usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use gradegauge_core::codegen::{self, EmitDialect, EmitOptions};
use gradegauge_core::evaluation::EvaluationReport;
use gradegauge_core::{Algorithm, Dataset};

use crate::config::{AppConfig, ConfigError};
use crate::csv_io::{self, CsvOptions, StudentLayout};
use crate::pipeline::{self, PipelineError, Score, StudentInput};
use crate::service;
use crate::store::Store;

#[derive(Parser, Debug)]
#[command(name = "gradegauge", version, about = "Decision-tree prediction of first-semester pass/fail outcomes")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Model store file; overrides `store_path`.
    #[arg(long, global = true, value_name = "PATH")]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgoArg {
    Id3,
    C45,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Id3 => Algorithm::Id3,
            AlgoArg::C45 => Algorithm::C45,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DialectArg {
    Pseudo,
    C,
    Python,
}

impl From<DialectArg> for EmitDialect {
    fn from(d: DialectArg) -> Self {
        match d {
            DialectArg::Pseudo => EmitDialect::PseudoCode,
            DialectArg::C => EmitDialect::CStyle,
            DialectArg::Python => EmitDialect::PythonStyle,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discretize a raw student CSV into the processed layout.
    Preprocess {
        #[arg(long = "in", value_name = "RAW.csv")]
        input: PathBuf,
        #[arg(long = "out", value_name = "PROC.csv")]
        output: PathBuf,
    },
    /// Train a tree on a raw or processed student CSV and store it.
    Train {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long = "in", value_name = "PROC.csv")]
        input: PathBuf,
        /// Id to store the model under; a fresh id is generated otherwise.
        #[arg(long = "model-out", value_name = "ID")]
        model_out: Option<String>,
        #[arg(long)]
        min_leaf_size: Option<usize>,
        #[arg(long)]
        prune: Option<bool>,
        #[arg(long)]
        confidence_factor: Option<f64>,
    },
    /// Predict one student. Scores may be raw numbers or discretized labels.
    Predict {
        #[arg(long, value_name = "ID")]
        model: String,
        #[arg(long)]
        merit: String,
        #[arg(long)]
        gender: String,
        #[arg(long)]
        percent: String,
        #[arg(long = "type")]
        admission_type: String,
    },
    /// Predict every row of a student CSV.
    Evaluate {
        #[arg(long, value_name = "ID")]
        model: String,
        #[arg(long = "in", value_name = "TEST.csv")]
        input: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long = "out", value_name = "PRED.csv")]
        output: Option<PathBuf>,
    },
    /// Compare predictions against the class column of a labeled CSV.
    Verify {
        #[arg(long, value_name = "ID")]
        model: String,
        #[arg(long = "in", value_name = "LABELED.csv")]
        input: PathBuf,
    },
    /// Emit a stored tree as nested conditionals.
    Codegen {
        #[arg(long, value_name = "ID")]
        model: String,
        #[arg(long, value_enum, default_value = "pseudo")]
        dialect: DialectArg,
        #[arg(long, default_value = "dtalgo")]
        name: String,
        /// Keep features the tree never tests in the signature.
        #[arg(long)]
        keep_unused_features: bool,
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(std::io::Error),
}

impl CliError {
    fn name(&self) -> String {
        match self {
            CliError::Pipeline(e) => e.name(),
            CliError::Config(e) => e.name().to_string(),
            CliError::Io { .. } | CliError::Output(_) => "Io".to_string(),
        }
    }
}

impl<E: Into<PipelineError>> From<E> for Wrap {
    fn from(e: E) -> Self {
        Wrap(CliError::Pipeline(e.into()))
    }
}

/// Lets `?` lift any pipeline-convertible error into a [`CliError`].
struct Wrap(CliError);

type CliResult<T> = Result<T, Wrap>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| {
        Wrap(CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| {
        Wrap(CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn out_err(e: std::io::Error) -> Wrap {
    Wrap(CliError::Output(e))
}

/// Parses `args` (including the program name) and runs the command with the
/// process environment and standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(args, std::env::vars(), &mut out, &mut err)
}

/// Like [`run`] with explicit environment and output streams.
pub fn run_with<I, T, E>(args: I, env: E, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    let result = AppConfig::load_with_env(cli.config.as_deref(), env)
        .map_err(|e| Wrap(e.into()))
        .and_then(|mut config| {
            if let Some(store) = &cli.store {
                config.store_path = store.clone();
            }
            execute(cli.command, &config, out, err)
        });
    match result {
        Ok(()) => 0,
        Err(Wrap(e)) => {
            let _ = writeln!(err, "error: {}: {e}", e.name());
            1
        }
    }
}

fn open_store(config: &AppConfig) -> CliResult<Store> {
    Ok(Store::open(&config.store_path)?)
}

fn execute(command: Command, config: &AppConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let t = &config.thresholds;
    match command {
        Command::Preprocess { input, output } => {
            let (layout, raw) = pipeline::read_students(&read(&input)?)?;
            if layout != StudentLayout::Raw {
                return Err(PipelineError::InvalidInput(format!(
                    "{} already uses the processed layout",
                    input.display()
                ))
                .into());
            }
            let p = gradegauge_core::preprocess::preprocess_unlabeled(&raw, t)?;
            for row in &p.dropped {
                writeln!(err, "warning: dropped data row {}: missing value", row + 1).map_err(out_err)?;
            }
            let text = csv_io::to_csv_string(&p.dataset, &CsvOptions::default())?;
            write_file(&output, text.as_bytes())?;
            writeln!(out, "rows: {}", p.dataset.len()).map_err(out_err)?;
            writeln!(out, "dropped: {}", p.dropped.len()).map_err(out_err)?;
        }
        Command::Train {
            algo,
            input,
            model_out,
            min_leaf_size,
            prune,
            confidence_factor,
        } => {
            let algorithm = Algorithm::from(algo);
            let mut tc = config.train_config(algorithm);
            tc.min_leaf_size = min_leaf_size.unwrap_or(tc.min_leaf_size);
            tc.prune = prune.unwrap_or(tc.prune);
            tc.confidence_factor = confidence_factor.unwrap_or(tc.confidence_factor);
            let (layout, d) = pipeline::read_students(&read(&input)?)?;
            let (processed, dropped) = pipeline::to_processed(layout, &d, t)?;
            let model = pipeline::train(algorithm, &processed, tc)?;
            let store = open_store(config)?;
            let info = match model_out {
                Some(id) => store.save_model_as(&id, &model)?,
                None => store.save_model(&model)?,
            };
            writeln!(
                out,
                "model: {}\nalgorithm: {}\ntraining_rows: {}\ndropped_rows: {}\nnodes: {}\nleaves: {}",
                info.model_id,
                algorithm,
                model.stats.training_rows,
                dropped.len(),
                model.stats.node_count,
                model.stats.leaf_count
            )
            .map_err(out_err)?;
        }
        Command::Predict {
            model,
            merit,
            gender,
            percent,
            admission_type,
        } => {
            let model = open_store(config)?.load_model(&model)?;
            let input = StudentInput {
                merit: Score::from_text(&merit),
                gender,
                percent: Score::from_text(&percent),
                admission_type,
            };
            let p = pipeline::predict(&model, &input, t)?;
            writeln!(out, "{}", p.predicted).map_err(out_err)?;
        }
        Command::Evaluate { model, input, output } => {
            let model = open_store(config)?.load_model(&model)?;
            let (d, bulk) = pipeline::evaluate_csv(&model, &read(&input)?, t, pipeline::monotonic_ms())?;
            for s in &bulk.skipped {
                writeln!(err, "warning: skipped data row {}: {}", s.row + 1, s.reason).map_err(out_err)?;
            }
            let text = predictions_csv(&d, &bulk.predictions)?;
            match output {
                Some(path) => {
                    write_file(&path, text.as_bytes())?;
                    writeln!(
                        out,
                        "rows: {}\nskipped: {}\nwall_ms: {:.3}",
                        bulk.predictions.len(),
                        bulk.skipped.len(),
                        bulk.wall_time_ms
                    )
                    .map_err(out_err)?;
                }
                None => out.write_all(text.as_bytes()).map_err(out_err)?,
            }
        }
        Command::Verify { model, input } => {
            let model = open_store(config)?.load_model(&model)?;
            let (d, report) = pipeline::verify_csv(&model, &read(&input)?, t, pipeline::monotonic_ms())?;
            out.write_all(render_verify(&d, &report).as_bytes()).map_err(out_err)?;
        }
        Command::Codegen {
            model,
            dialect,
            name,
            keep_unused_features,
            output,
        } => {
            let model = open_store(config)?.load_model(&model)?;
            let options = EmitOptions { keep_unused_features };
            let code = codegen::emit_with(&model, dialect.into(), &name, &options)?;
            match output {
                Some(path) => write_file(&path, code.as_bytes())?,
                None => out.write_all(code.as_bytes()).map_err(out_err)?,
            }
        }
        Command::Serve => {
            init_tracing(&config.log_level);
            let runtime = tokio::runtime::Runtime::new().map_err(out_err)?;
            runtime.block_on(service::serve(config.clone())).map_err(out_err)?;
        }
    }
    Ok(())
}

fn init_tracing(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).try_init();
}

/// Input columns followed by a `predicted` column, one line per evaluated
/// row.
fn predictions_csv(d: &Dataset, predictions: &[gradegauge_core::evaluation::Prediction]) -> CliResult<String> {
    let mut header: Vec<&str> = d.schema().attributes().iter().map(|a| a.name.as_str()).collect();
    header.push("predicted");
    let rows = predictions.iter().map(|p| {
        let row = &d.rows()[p.row.expect("bulk predictions carry a row")];
        let mut values = csv_io::row_map(d.schema(), row);
        let mut cells: Vec<String> = d
            .schema()
            .attributes()
            .iter()
            .map(|a| values.remove(&a.name).unwrap_or_default())
            .collect();
        cells.push(p.predicted.clone());
        cells
    });
    let mut buf = Vec::new();
    csv_io::write_table(&mut buf, &header, rows, &CsvOptions::default())?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Summary lines, then the mismatched rows with every input column, the
/// actual class and the prediction in upper case.
pub fn render_verify(d: &Dataset, report: &EvaluationReport) -> String {
    let mut s = format!(
        "total: {}\ncorrect: {}\naccuracy: {:.3}\nwall_ms: {:.3}\nmismatches: {}\n",
        report.total,
        report.correct,
        report.accuracy_percent,
        report.wall_time_ms,
        report.mismatches.len()
    );
    if report.mismatches.is_empty() {
        return s;
    }
    let mut header: Vec<String> = vec!["row".into()];
    header.extend(d.schema().attributes().iter().map(|a| a.name.clone()));
    header.push("Predicted".into());
    let mut table = vec![header];
    for m in &report.mismatches {
        let mut line = vec![m.row.map_or_else(String::new, |r| (r + 1).to_string())];
        let values = m.record.as_ref().map(|r| csv_io::row_map(d.schema(), r));
        for a in d.schema().attributes() {
            line.push(values.as_ref().and_then(|v| v.get(&a.name).cloned()).unwrap_or_default());
        }
        line.push(m.predicted.to_uppercase());
        table.push(line);
    }
    s.push('\n');
    s.push_str(&align(&table));
    s
}

fn align(table: &[Vec<String>]) -> String {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| table.iter().filter_map(|r| r.get(c)).map(|v| v.chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for row in table {
        let mut line = String::new();
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(v);
            line.push_str(&" ".repeat(widths[c] - v.chars().count()));
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}
