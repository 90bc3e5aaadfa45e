//! Raw admission records to the four discretized student features.
//!
//! Merit marks (out of 200) become `good`/`bad`, the PCM percentage becomes
//! `distinction`/`first_class`/`second_class`, the admission code becomes
//! `AI`/`OTHER`, and class labels are lowercased. Rows with a missing feature
//! or class are dropped, never imputed.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{
    AttributeSchema, CellValue, Dataset, FeatureSource, FeatureValue, Role, Row, Schema,
};

pub const MERIT: &str = "merit";
pub const GENDER: &str = "gender";
pub const PERCENT: &str = "percent";
pub const TYPE: &str = "type";
pub const CLASS: &str = "class";

pub const RAW_MERIT_MARKS: &str = "merit_marks";
pub const RAW_APP_ID: &str = "app_id";
pub const RAW_NAME: &str = "name";

/// Column order of the processed student table.
pub const PROCESSED_COLUMNS: [&str; 5] = [MERIT, GENDER, PERCENT, TYPE, CLASS];
/// Column order of the raw admission table.
pub const RAW_COLUMNS: [&str; 11] = [
    "sr_no",
    "merit_no",
    RAW_MERIT_MARKS,
    RAW_APP_ID,
    RAW_NAME,
    GENDER,
    "cast",
    "location",
    PERCENT,
    TYPE,
    CLASS,
];

pub const MERIT_MAX: f64 = 200.0;
pub const PERCENT_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error("{field} value {value} is outside [0, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        max: f64,
    },
    #[error("admission type code is empty")]
    EmptyCode,
    #[error("`{0}` is not a pass/fail class label")]
    InvalidClassLabel(String),
    #[error("`{0}` is not a gender (Male/Female)")]
    InvalidGender(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(&'static str),
    #[error("missing value for `{0}`")]
    MissingValue(String),
    #[error("dataset does not use the raw student schema: {0}")]
    NotRawSchema(String),
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: alloc::boxed::Box<PreprocessError>,
    },
}

impl PreprocessError {
    fn at(self, row: usize) -> Self {
        PreprocessError::Row {
            row,
            source: alloc::boxed::Box::new(self),
        }
    }
}

/// Discretization cut-offs. Every comparison is closed below (`>=`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    pub merit_cutoff: f64,
    pub distinction_cutoff: f64,
    pub first_class_cutoff: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            merit_cutoff: 120.0,
            distinction_cutoff: 70.0,
            first_class_cutoff: 60.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(0.0..=MERIT_MAX).contains(&self.merit_cutoff) {
            return Err(PreprocessError::InvalidThresholds("merit cutoff must lie in [0, 200]"));
        }
        if !(0.0..=PERCENT_MAX).contains(&self.distinction_cutoff)
            || !(0.0..=PERCENT_MAX).contains(&self.first_class_cutoff)
        {
            return Err(PreprocessError::InvalidThresholds("percent cutoffs must lie in [0, 100]"));
        }
        if self.distinction_cutoff <= self.first_class_cutoff {
            return Err(PreprocessError::InvalidThresholds(
                "distinction cutoff must exceed first class cutoff",
            ));
        }
        Ok(())
    }
}

macro_rules! closed_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn parse(s: &str) -> Option<$name> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

closed_enum!(
    /// Ordered `Bad < Good`.
    Merit { Bad => "bad", Good => "good" }
);
closed_enum!(Gender { Male => "Male", Female => "Female" });
closed_enum!(
    /// Ordered `SecondClass < FirstClass < Distinction`.
    PercentClass { SecondClass => "second_class", FirstClass => "first_class", Distinction => "distinction" }
);
closed_enum!(AdmissionType { Ai => "AI", Other => "OTHER" });
closed_enum!(Outcome { Pass => "pass", Fail => "fail" });

impl Outcome {
    /// Case-insensitive, surrounding whitespace ignored.
    pub fn parse_loose(s: &str) -> Option<Outcome> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("pass") {
            Some(Outcome::Pass)
        } else if s.eq_ignore_ascii_case("fail") {
            Some(Outcome::Fail)
        } else {
            None
        }
    }
}

pub fn discretize_merit(marks: f64, t: &Thresholds) -> Result<Merit, PreprocessError> {
    if !(0.0..=MERIT_MAX).contains(&marks) {
        return Err(PreprocessError::OutOfRange {
            field: RAW_MERIT_MARKS,
            value: marks,
            max: MERIT_MAX,
        });
    }
    Ok(if marks >= t.merit_cutoff {
        Merit::Good
    } else {
        Merit::Bad
    })
}

pub fn discretize_percent(pcm: f64, t: &Thresholds) -> Result<PercentClass, PreprocessError> {
    if !(0.0..=PERCENT_MAX).contains(&pcm) {
        return Err(PreprocessError::OutOfRange {
            field: PERCENT,
            value: pcm,
            max: PERCENT_MAX,
        });
    }
    Ok(if pcm >= t.distinction_cutoff {
        PercentClass::Distinction
    } else if pcm >= t.first_class_cutoff {
        PercentClass::FirstClass
    } else {
        PercentClass::SecondClass
    })
}

/// `AI` (any case) is All-India; every other non-empty code is `OTHER`.
pub fn normalize_admission_type(code: &str) -> Result<AdmissionType, PreprocessError> {
    let code = code.trim();
    if code.is_empty() {
        Err(PreprocessError::EmptyCode)
    } else if code.eq_ignore_ascii_case("AI") {
        Ok(AdmissionType::Ai)
    } else {
        Ok(AdmissionType::Other)
    }
}

pub fn raw_student_schema() -> Schema {
    Schema::new(vec![
        AttributeSchema::text("sr_no", Role::Identifier),
        AttributeSchema::text("merit_no", Role::Identifier),
        AttributeSchema::continuous(RAW_MERIT_MARKS, "marks/200", Role::Feature),
        AttributeSchema::text(RAW_APP_ID, Role::Identifier),
        AttributeSchema::text(RAW_NAME, Role::Identifier),
        AttributeSchema::categorical(GENDER, &["Male", "Female"], Role::Feature),
        AttributeSchema::text("cast", Role::Ignored),
        AttributeSchema::text("location", Role::Ignored),
        AttributeSchema::continuous(PERCENT, "percent", Role::Feature),
        AttributeSchema::text(TYPE, Role::Feature),
        AttributeSchema::text(CLASS, Role::ClassLabel),
    ])
    .expect("raw student schema is valid")
}

pub fn processed_student_schema() -> Schema {
    Schema::new(vec![
        AttributeSchema::categorical(MERIT, &["good", "bad"], Role::Feature),
        AttributeSchema::categorical(GENDER, &["Male", "Female"], Role::Feature),
        AttributeSchema::categorical(
            PERCENT,
            &["distinction", "first_class", "second_class"],
            Role::Feature,
        ),
        AttributeSchema::categorical(TYPE, &["AI", "OTHER"], Role::Feature),
        AttributeSchema::categorical(CLASS, &["pass", "fail"], Role::ClassLabel),
    ])
    .expect("processed student schema is valid")
}

/// The processed features in training order.
pub fn student_features() -> Vec<String> {
    [MERIT, GENDER, PERCENT, TYPE].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawStudentRecord {
    pub merit_marks: f64,
    pub app_id: String,
    pub name: String,
    pub gender: Gender,
    pub caste: String,
    pub location: String,
    pub percent: f64,
    pub admission_type_code: String,
    pub class: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessedStudentRecord {
    pub merit: Merit,
    pub gender: Gender,
    pub percent: PercentClass,
    pub admission_type: AdmissionType,
    pub class: Option<Outcome>,
}

impl ProcessedStudentRecord {
    pub fn from_raw(raw: &RawStudentRecord, t: &Thresholds) -> Result<Self, PreprocessError> {
        Ok(ProcessedStudentRecord {
            merit: discretize_merit(raw.merit_marks, t)?,
            gender: raw.gender,
            percent: discretize_percent(raw.percent, t)?,
            admission_type: normalize_admission_type(&raw.admission_type_code)?,
            class: raw.class,
        })
    }

    /// Cells in processed-schema column order.
    pub fn to_row(&self) -> Row {
        Row::new(vec![
            CellValue::text(self.merit.as_str()),
            CellValue::text(self.gender.as_str()),
            CellValue::text(self.percent.as_str()),
            CellValue::text(self.admission_type.as_str()),
            self.class
                .map_or(CellValue::Missing, |c| CellValue::text(c.as_str())),
        ])
    }
}

impl FeatureSource for ProcessedStudentRecord {
    fn feature(&self, attribute: &str) -> Option<FeatureValue<'_>> {
        let text = match attribute {
            MERIT => self.merit.as_str(),
            GENDER => self.gender.as_str(),
            PERCENT => self.percent.as_str(),
            TYPE => self.admission_type.as_str(),
            _ => return None,
        };
        Some(FeatureValue::Text(text))
    }
}

/// Drops every row with a missing feature or class cell. Returns the kept
/// rows and the 0-based indices of the dropped ones.
pub fn clean(d: &Dataset) -> (Dataset, Vec<usize>) {
    drop_incomplete(d, true)
}

fn drop_incomplete(d: &Dataset, require_class: bool) -> (Dataset, Vec<usize>) {
    let checked: Vec<usize> = d
        .schema()
        .attributes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.role == Role::Feature || (require_class && a.role == Role::ClassLabel))
        .map(|(i, _)| i)
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, row) in d.rows().iter().enumerate() {
        if checked.iter().any(|&c| row.cells()[c].is_missing()) {
            dropped.push(i);
        } else {
            kept.push(i);
        }
    }
    (d.select(&kept), dropped)
}

/// Output of preprocessing when every surviving row must be traceable to
/// its input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub dataset: Dataset,
    /// For each output row, the index of its input row.
    pub source_rows: Vec<usize>,
    /// Input rows removed for missing values.
    pub dropped: Vec<usize>,
}

/// Training-time preprocessing: rows must carry a class.
pub fn preprocess(raw: &Dataset, t: &Thresholds) -> Result<Dataset, PreprocessError> {
    preprocess_rows(raw, t, true).map(|p| p.dataset)
}

/// Like [`preprocess`] but keeps the drop report and the row mapping.
pub fn preprocess_report(raw: &Dataset, t: &Thresholds) -> Result<Preprocessed, PreprocessError> {
    preprocess_rows(raw, t, true)
}

/// Prediction-time preprocessing: the class may be absent, and is carried
/// through (lowercased) when present.
pub fn preprocess_unlabeled(raw: &Dataset, t: &Thresholds) -> Result<Preprocessed, PreprocessError> {
    preprocess_rows(raw, t, false)
}

/// Raw column positions of a dataset that follows the raw student layout.
struct RawColumns {
    merit_marks: usize,
    gender: usize,
    percent: usize,
    kind: usize,
    class: usize,
}

fn raw_columns(schema: &Schema) -> Result<RawColumns, PreprocessError> {
    let find = |name: &str| {
        schema
            .index_of(name)
            .ok_or_else(|| PreprocessError::NotRawSchema(alloc::format!("no `{name}` column")))
    };
    let cols = RawColumns {
        merit_marks: find(RAW_MERIT_MARKS)?,
        gender: find(GENDER)?,
        percent: find(PERCENT)?,
        kind: find(TYPE)?,
        class: find(CLASS)?,
    };
    if schema.class_index() != cols.class {
        return Err(PreprocessError::NotRawSchema("`class` is not the class label".into()));
    }
    if !schema.attributes()[cols.merit_marks].kind.is_continuous()
        || !schema.attributes()[cols.percent].kind.is_continuous()
    {
        return Err(PreprocessError::NotRawSchema(
            "`merit_marks` and `percent` must be numeric".into(),
        ));
    }
    Ok(cols)
}

fn preprocess_rows(
    raw: &Dataset,
    t: &Thresholds,
    require_class: bool,
) -> Result<Preprocessed, PreprocessError> {
    t.validate()?;
    let cols = raw_columns(raw.schema())?;
    let (_, dropped) = drop_incomplete(raw, require_class);
    let mut rows = Vec::new();
    let mut source_rows = Vec::new();
    let mut next_dropped = dropped.iter().peekable();
    for (i, row) in raw.rows().iter().enumerate() {
        if next_dropped.peek() == Some(&&i) {
            next_dropped.next();
            continue;
        }
        let processed = process_row(row, &cols, t).map_err(|e| e.at(i))?;
        rows.push(processed);
        source_rows.push(i);
    }
    Ok(Preprocessed {
        dataset: Dataset::from_parts_unchecked(processed_student_schema(), rows),
        source_rows,
        dropped,
    })
}

/// Processes a single raw row (class optional). `schema` must follow the raw
/// student layout.
pub fn preprocess_row(schema: &Schema, row: &Row, t: &Thresholds) -> Result<Row, PreprocessError> {
    t.validate()?;
    let cols = raw_columns(schema)?;
    for (attr, cell) in schema.attributes().iter().zip(row.cells()) {
        if attr.role == Role::Feature && cell.is_missing() {
            return Err(PreprocessError::MissingValue(attr.name.clone()));
        }
    }
    process_row(row, &cols, t)
}

fn process_row(row: &Row, cols: &RawColumns, t: &Thresholds) -> Result<Row, PreprocessError> {
    let cells = row.cells();
    let number = |i: usize| cells[i].as_number().unwrap_or(f64::NAN);
    let merit = discretize_merit(number(cols.merit_marks), t)?;
    let percent = discretize_percent(number(cols.percent), t)?;
    let gender_text = cells[cols.gender].as_text().unwrap_or_default();
    let gender = Gender::parse(gender_text)
        .ok_or_else(|| PreprocessError::InvalidGender(gender_text.to_string()))?;
    let kind = normalize_admission_type(cells[cols.kind].as_text().unwrap_or_default())?;
    let class = match &cells[cols.class] {
        CellValue::Text(label) => CellValue::text(
            Outcome::parse_loose(label)
                .ok_or_else(|| PreprocessError::InvalidClassLabel(label.clone()))?
                .as_str(),
        ),
        _ => CellValue::Missing,
    };
    Ok(Row::new(vec![
        CellValue::text(merit.as_str()),
        CellValue::text(gender.as_str()),
        CellValue::text(percent.as_str()),
        CellValue::text(kind.as_str()),
        class,
    ]))
}
