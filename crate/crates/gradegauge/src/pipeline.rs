//! Student-table workflows shared by the CLI and the HTTP service, so that
//! both apply identical discretization, training and evaluation rules.

use std::collections::BTreeMap;
use std::time::Instant;

use gradegauge_core::codegen::CodegenError;
use gradegauge_core::evaluation::{self, BulkEvaluation, EvaluationError, EvaluationReport, Prediction};
use gradegauge_core::induction::{train_c45, train_id3};
use gradegauge_core::preprocess::{
    self, discretize_merit, discretize_percent, normalize_admission_type, student_features, Gender,
    Merit, PercentClass, PreprocessError, Thresholds,
};
use gradegauge_core::{Algorithm, CellValue, Dataset, DatasetError, InductionError, TrainConfig, TrainedModel};

use crate::csv_io::{self, CsvError, CsvOptions, StudentLayout};
use crate::model_doc::DocumentError;
use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The leading identifier of a `Debug` rendering, which for enums is the
/// variant name.
fn variant_name<T: std::fmt::Debug>(e: &T) -> String {
    format!("{e:?}")
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect()
}

impl PipelineError {
    /// Error name reported to users, e.g. `DomainViolation`.
    pub fn name(&self) -> String {
        match self {
            PipelineError::Csv(e) => e.name().to_string(),
            PipelineError::Preprocess(PreprocessError::Row { source, .. }) => variant_name(source.as_ref()),
            PipelineError::Preprocess(e) => variant_name(e),
            PipelineError::Induction(e) => variant_name(e),
            PipelineError::Evaluation(EvaluationError::Classification(e)) => variant_name(e),
            PipelineError::Evaluation(EvaluationError::Preprocess(e)) => variant_name(e),
            PipelineError::Evaluation(e) => variant_name(e),
            PipelineError::Dataset(e) => variant_name(e),
            PipelineError::Codegen(e) => variant_name(e),
            PipelineError::Store(e) => e.name().to_string(),
            PipelineError::Document(e) => variant_name(e),
            PipelineError::InvalidInput(_) => "InvalidInput".to_string(),
        }
    }
}

/// Milliseconds elapsed since the first call, from a monotonic clock.
pub fn monotonic_ms() -> impl FnMut() -> f64 {
    let start = Instant::now();
    move || start.elapsed().as_secs_f64() * 1000.0
}

/// Reads a student CSV in either layout.
pub fn read_students(bytes: &[u8]) -> Result<(StudentLayout, Dataset), PipelineError> {
    Ok(csv_io::parse_student_csv(bytes, &CsvOptions::default())?)
}

/// Raw tables become processed ones; processed tables pass through.
/// Incomplete rows are dropped and their input indices returned.
pub fn to_processed(
    layout: StudentLayout,
    d: &Dataset,
    t: &Thresholds,
) -> Result<(Dataset, Vec<usize>), PipelineError> {
    match layout {
        StudentLayout::Raw => {
            let p = preprocess::preprocess_report(d, t)?;
            Ok((p.dataset, p.dropped))
        }
        StudentLayout::Processed => Ok(preprocess::clean(d)),
    }
}

/// Trains on the processed student features.
pub fn train(algorithm: Algorithm, processed: &Dataset, config: TrainConfig) -> Result<TrainedModel, PipelineError> {
    let features = student_features();
    Ok(match algorithm {
        Algorithm::Id3 => train_id3(processed, &features, config)?,
        Algorithm::C45 => train_c45(processed, &features, config)?,
    })
}

/// A score given either raw (`157`) or already discretized (`good`).
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    Raw(f64),
    Label(String),
}

impl Score {
    /// Numbers are raw scores; anything else is a label.
    pub fn from_text(s: &str) -> Score {
        match s.trim().parse::<f64>() {
            Ok(x) => Score::Raw(x),
            Err(_) => Score::Label(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentInput {
    pub merit: Score,
    pub gender: String,
    pub percent: Score,
    pub admission_type: String,
}

fn label_or<T: Copy>(
    field: &str,
    text: &str,
    parse: impl Fn(&str) -> Option<T>,
    all: &[T],
    show: impl Fn(T) -> &'static str,
) -> Result<T, PipelineError> {
    parse(text.trim())
        .or_else(|| all.iter().copied().find(|v| show(*v).eq_ignore_ascii_case(text.trim())))
        .ok_or_else(|| {
            let allowed: Vec<&str> = all.iter().map(|v| show(*v)).collect();
            PipelineError::InvalidInput(format!(
                "`{text}` is not a valid {field} (expected a number or one of {})",
                allowed.join(", ")
            ))
        })
}

/// Discretizes one student's inputs into a processed record.
pub fn student_record(input: &StudentInput, t: &Thresholds) -> Result<BTreeMap<String, CellValue>, PipelineError> {
    t.validate()?;
    let merit = match &input.merit {
        Score::Raw(x) => discretize_merit(*x, t)?,
        Score::Label(s) => label_or("merit", s, Merit::parse, Merit::ALL, Merit::as_str)?,
    };
    let percent = match &input.percent {
        Score::Raw(x) => discretize_percent(*x, t)?,
        Score::Label(s) => label_or("percent", s, PercentClass::parse, PercentClass::ALL, PercentClass::as_str)?,
    };
    let gender = Gender::ALL
        .iter()
        .copied()
        .find(|g| g.as_str().eq_ignore_ascii_case(input.gender.trim()))
        .ok_or_else(|| PipelineError::Preprocess(PreprocessError::InvalidGender(input.gender.clone())))?;
    let kind = normalize_admission_type(&input.admission_type)?;
    Ok([
        (preprocess::MERIT, merit.as_str()),
        (preprocess::GENDER, gender.as_str()),
        (preprocess::PERCENT, percent.as_str()),
        (preprocess::TYPE, kind.as_str()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), CellValue::text(v)))
    .collect())
}

pub fn predict(model: &TrainedModel, input: &StudentInput, t: &Thresholds) -> Result<Prediction, PipelineError> {
    let record = student_record(input, t)?;
    Ok(evaluation::predict_single(model, &record)?)
}

/// Classifies every row of a student CSV.
pub fn evaluate_csv(
    model: &TrainedModel,
    bytes: &[u8],
    t: &Thresholds,
    now_ms: impl FnMut() -> f64,
) -> Result<(Dataset, BulkEvaluation), PipelineError> {
    let (_, d) = read_students(bytes)?;
    let bulk = evaluation::evaluate_bulk(model, &d, t, now_ms)?;
    Ok((d, bulk))
}

/// Verifies a labeled student CSV. Rows without a label or with missing
/// features are left out of the comparison. Mismatch rows index `bytes`'
/// data rows.
pub fn verify_csv(
    model: &TrainedModel,
    bytes: &[u8],
    t: &Thresholds,
    now_ms: impl FnMut() -> f64,
) -> Result<(Dataset, EvaluationReport), PipelineError> {
    let (_, d) = read_students(bytes)?;
    let class = d.schema().class_index();
    let labeled: Vec<usize> = (0..d.len()).filter(|&i| !d.cell(i, class).is_missing()).collect();
    if labeled.is_empty() {
        return Err(PipelineError::InvalidInput("the dataset has no class labels to verify against".into()));
    }
    let mut report = evaluation::verify(model, &d.select(&labeled), t, now_ms)?;
    for m in &mut report.mismatches {
        m.row = m.row.map(|r| labeled[r]);
    }
    Ok((d, report))
}

/// True when every row carries a class label.
pub fn is_labeled(d: &Dataset) -> bool {
    let class = d.schema().class_index();
    !d.is_empty() && (0..d.len()).all(|i| !d.cell(i, class).is_missing())
}
