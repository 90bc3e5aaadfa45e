//! Singular prediction, bulk evaluation, verification against known outcomes
//! and accuracy arithmetic.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::{CellValue, Dataset, FeatureSource, Row};
use crate::induction::{Algorithm, InductionError, PathStep, TrainedModel};
use crate::preprocess::{self, PreprocessError, Thresholds, RAW_APP_ID, RAW_MERIT_MARKS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Classification(#[from] InductionError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("dataset does not match the model: {0}")]
    SchemaMismatch(String),
    #[error("{predictions} predictions but {actuals} actual labels")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("rows without a class label: {0:?}")]
    UnlabeledRows(Vec<usize>),
    #[error("no reports to combine")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordRef {
    AppId(String),
    Row(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Input row index for bulk evaluation; `None` for singular predictions.
    pub row: Option<usize>,
    pub app_id: Option<String>,
    pub predicted: String,
    pub path: Vec<PathStep>,
    pub model_ref: Option<String>,
    pub algorithm: Algorithm,
}

impl Prediction {
    pub fn record_ref(&self) -> Option<RecordRef> {
        match (&self.app_id, self.row) {
            (Some(id), _) => Some(RecordRef::AppId(id.clone())),
            (None, Some(r)) => Some(RecordRef::Row(r)),
            (None, None) => None,
        }
    }

    pub fn with_model_ref<S: Into<String>>(mut self, model_ref: S) -> Self {
        self.model_ref = Some(model_ref.into());
        self
    }
}

/// One wrongly predicted record.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// Position in the prediction list.
    pub index: usize,
    pub row: Option<usize>,
    pub app_id: Option<String>,
    /// The input row as it was evaluated, when known.
    pub record: Option<Row>,
    pub actual: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub total: usize,
    pub correct: usize,
    /// `100 · correct / total`, half-up to three decimals; 0 when `total` is 0.
    pub accuracy_percent: f64,
    pub wall_time_ms: f64,
    pub mismatches: Vec<Mismatch>,
}

impl EvaluationReport {
    /// Unrounded fraction of correct predictions.
    pub fn accuracy_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// `100 · correct / total` rounded half-up to three decimals, computed in
/// integers so that exact halves round the same way on every platform.
pub fn percent_3dp(correct: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (c, t) = (correct as u128, total as u128);
    let thousandths = (200_000 * c + t) / (2 * t);
    thousandths as f64 / 1000.0
}

pub fn predict_single<S: FeatureSource + ?Sized>(
    model: &TrainedModel,
    record: &S,
) -> Result<Prediction, EvaluationError> {
    let c = model.classify(record)?;
    Ok(Prediction {
        row: None,
        app_id: None,
        predicted: c.label,
        path: c.path,
        model_ref: None,
        algorithm: model.algorithm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkEvaluation {
    /// One per evaluable row, in input order.
    pub predictions: Vec<Prediction>,
    /// Rows that could not be evaluated, with the reason.
    pub skipped: Vec<SkippedRow>,
    pub wall_time_ms: f64,
}

/// How a dataset's rows reach the model's features.
enum Layout {
    Direct,
    RawStudent,
}

fn layout(model: &TrainedModel, d: &Dataset) -> Result<Layout, EvaluationError> {
    let schema = d.schema();
    if model.features.iter().all(|f| schema.index_of(f).is_some())
        && model.features.iter().all(|f| {
            let (mine, theirs) = (schema.attribute(f), model.schema.attribute(f));
            matches!((mine, theirs), (Some(a), Some(b)) if a.kind.is_continuous() == b.kind.is_continuous())
        })
    {
        return Ok(Layout::Direct);
    }
    let processed = preprocess::processed_student_schema();
    if schema.index_of(RAW_MERIT_MARKS).is_some()
        && model.features.iter().all(|f| processed.index_of(f).is_some())
    {
        return Ok(Layout::RawStudent);
    }
    let missing: Vec<&str> = model
        .features
        .iter()
        .filter(|f| schema.index_of(f).is_none())
        .map(String::as_str)
        .collect();
    Err(EvaluationError::SchemaMismatch(format!(
        "missing model features {missing:?}"
    )))
}

/// Classifies every row of `d`. Raw student tables are preprocessed first;
/// rows that cannot be evaluated are reported in `skipped`. `now_ms` is a
/// monotonic millisecond clock read around the classification loop only.
pub fn evaluate_bulk<F: FnMut() -> f64>(
    model: &TrainedModel,
    d: &Dataset,
    thresholds: &Thresholds,
    mut now_ms: F,
) -> Result<BulkEvaluation, EvaluationError> {
    let layout = layout(model, d)?;
    let app_id_col = d.schema().index_of(RAW_APP_ID);
    let mut skipped = Vec::new();

    // (input row, evaluable row)
    let mut ready: Vec<(usize, Row)> = Vec::with_capacity(d.len());
    match layout {
        Layout::Direct => {
            let cols: Vec<(usize, &str)> = model
                .features
                .iter()
                .filter_map(|f| d.schema().index_of(f).map(|i| (i, f.as_str())))
                .collect();
            for (i, row) in d.rows().iter().enumerate() {
                match cols.iter().find(|(c, _)| row.cells()[*c].is_missing()) {
                    Some((_, name)) => skipped.push(SkippedRow {
                        row: i,
                        reason: format!("missing value for `{name}`"),
                    }),
                    None => ready.push((i, row.clone())),
                }
            }
        }
        Layout::RawStudent => {
            for (i, row) in d.rows().iter().enumerate() {
                match preprocess::preprocess_row(d.schema(), row, thresholds) {
                    Ok(p) => ready.push((i, p)),
                    Err(e @ (PreprocessError::InvalidThresholds(_) | PreprocessError::NotRawSchema(_))) => {
                        return Err(e.into())
                    }
                    Err(e) => skipped.push(SkippedRow {
                        row: i,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    let eval_schema = match layout {
        Layout::Direct => d.schema().clone(),
        Layout::RawStudent => preprocess::processed_student_schema(),
    };

    let start = now_ms();
    let mut predictions = Vec::with_capacity(ready.len());
    for (i, row) in &ready {
        let view = crate::dataset::RecordView {
            schema: &eval_schema,
            row,
        };
        match model.classify(&view) {
            Ok(c) => predictions.push(Prediction {
                row: Some(*i),
                app_id: app_id_col.and_then(|c| d.cell(*i, c).as_text().map(str::to_string)),
                predicted: c.label,
                path: c.path,
                model_ref: None,
                algorithm: model.algorithm,
            }),
            Err(e) => skipped.push(SkippedRow {
                row: *i,
                reason: e.to_string(),
            }),
        }
    }
    let wall_time_ms = (now_ms() - start).max(0.0);
    skipped.sort_by_key(|s| s.row);
    Ok(BulkEvaluation {
        predictions,
        skipped,
        wall_time_ms,
    })
}

/// Compares predictions with actual labels, ignoring ASCII case.
pub fn accuracy<S: AsRef<str>>(
    predictions: &[Prediction],
    actuals: &[S],
) -> Result<EvaluationReport, EvaluationError> {
    if predictions.len() != actuals.len() {
        return Err(EvaluationError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    let mut mismatches = Vec::new();
    for (index, (p, actual)) in predictions.iter().zip(actuals).enumerate() {
        let actual = actual.as_ref().trim();
        if !p.predicted.trim().eq_ignore_ascii_case(actual) {
            mismatches.push(Mismatch {
                index,
                row: p.row,
                app_id: p.app_id.clone(),
                record: None,
                actual: actual.to_string(),
                predicted: p.predicted.clone(),
            });
        }
    }
    let total = predictions.len();
    let correct = total - mismatches.len();
    Ok(EvaluationReport {
        total,
        correct,
        accuracy_percent: percent_3dp(correct, total),
        wall_time_ms: 0.0,
        mismatches,
    })
}

/// Bulk evaluation of a labeled dataset followed by [`accuracy`]. Each
/// mismatch carries its full input row.
pub fn verify<F: FnMut() -> f64>(
    model: &TrainedModel,
    labeled: &Dataset,
    thresholds: &Thresholds,
    now_ms: F,
) -> Result<EvaluationReport, EvaluationError> {
    let bulk = evaluate_bulk(model, labeled, thresholds, now_ms)?;
    let class = labeled.schema().class_index();
    let mut actuals = Vec::with_capacity(bulk.predictions.len());
    let mut unlabeled = Vec::new();
    for p in &bulk.predictions {
        let row = p.row.expect("bulk predictions carry a row");
        match &labeled.rows()[row].cells()[class] {
            CellValue::Text(label) => actuals.push(label.as_str()),
            _ => unlabeled.push(row),
        }
    }
    if !unlabeled.is_empty() {
        return Err(EvaluationError::UnlabeledRows(unlabeled));
    }
    let mut report = accuracy(&bulk.predictions, &actuals)?;
    for m in &mut report.mismatches {
        m.record = m.row.map(|r| labeled.rows()[r].clone());
    }
    report.wall_time_ms = bulk.wall_time_ms;
    Ok(report)
}

/// Pooled accuracy `100 · Σcorrect / Σtotal`, three decimals.
pub fn combined_accuracy(reports: &[EvaluationReport]) -> Result<f64, EvaluationError> {
    if reports.is_empty() {
        return Err(EvaluationError::EmptyInput);
    }
    let correct = reports.iter().map(|r| r.correct).sum();
    let total = reports.iter().map(|r| r.total).sum();
    Ok(percent_3dp(correct, total))
}
