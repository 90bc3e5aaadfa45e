//! CSV ingestion into validated datasets and canonical CSV output.

use std::collections::BTreeMap;
use std::io::Write;

use gradegauge_core::preprocess::{processed_student_schema, raw_student_schema};
use gradegauge_core::{AttributeKind, CellValue, Dataset, DatasetError, Role, Row, Schema};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("column `{0}` is not part of the schema")]
    UnknownColumn(String),
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once in the header")]
    DuplicateColumn(String),
    #[error("line {line}: `{value}` is not an allowed value of `{column}`")]
    DomainViolation {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: `{value}` in `{column}` is not a number")]
    NumericParse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("header matches both the raw and the processed student layout: {0}")]
    AmbiguousHeader(String),
    #[error("header matches neither the raw nor the processed student layout: {0}")]
    UnrecognizedHeader(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CsvError {
    pub fn name(&self) -> &'static str {
        match self {
            CsvError::MalformedCsv { .. } => "MalformedCsv",
            CsvError::UnknownColumn(_) => "UnknownColumn",
            CsvError::MissingColumn(_) => "MissingColumn",
            CsvError::DuplicateColumn(_) => "DuplicateColumn",
            CsvError::DomainViolation { .. } => "DomainViolation",
            CsvError::NumericParse { .. } => "NumericParse",
            CsvError::AmbiguousHeader(_) => "AmbiguousHeader",
            CsvError::UnrecognizedHeader(_) => "UnrecognizedHeader",
            CsvError::Dataset(_) => "DatasetError",
            CsvError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// Cells equal to this (after trimming) are read as missing. Empty cells
    /// are always missing.
    pub missing_sentinel: String,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            missing_sentinel: String::new(),
            delimiter: b',',
        }
    }
}

/// Which student table a header describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudentLayout {
    Raw,
    Processed,
}

impl StudentLayout {
    pub fn as_str(self) -> &'static str {
        match self {
            StudentLayout::Raw => "raw",
            StudentLayout::Processed => "processed",
        }
    }

    pub fn schema(self) -> Schema {
        match self {
            StudentLayout::Raw => raw_student_schema(),
            StudentLayout::Processed => processed_student_schema(),
        }
    }
}

/// Reads `bytes` against `schema`. Header names are matched to attribute
/// names exactly (after trimming) and in any order. Feature columns must be
/// present; absent class, identifier and ignored columns read as missing.
pub fn parse_csv(bytes: &[u8], schema: &Schema, options: &CsvOptions) -> Result<Dataset, CsvError> {
    parse_with(bytes, schema, options, |h| h.trim().to_string())
}

/// Reads a student table, picking the raw or processed schema from the
/// header. Header names are matched case-insensitively and `caste` is read
/// as `cast`.
pub fn parse_student_csv(
    bytes: &[u8],
    options: &CsvOptions,
) -> Result<(StudentLayout, Dataset), CsvError> {
    let header = read_header(bytes, options)?;
    let names: Vec<String> = header.iter().map(|h| student_column(h)).collect();
    let layout = detect_layout(&names)?;
    let d = parse_with(bytes, &layout.schema(), options, student_column)?;
    Ok((layout, d))
}

fn student_column(h: &str) -> String {
    let h = h.trim().to_ascii_lowercase();
    if h == "caste" {
        "cast".into()
    } else {
        h
    }
}

/// Decides the student layout from normalized header names. A header that
/// mixes columns exclusive to each layout is rejected rather than guessed.
pub fn detect_layout(names: &[String]) -> Result<StudentLayout, CsvError> {
    let raw = raw_student_schema();
    let processed = processed_student_schema();
    let only_in = |a: &Schema, b: &Schema| -> Vec<String> {
        names
            .iter()
            .filter(|n| a.index_of(n).is_some() && b.index_of(n).is_none())
            .cloned()
            .collect()
    };
    let raw_only = only_in(&raw, &processed);
    let processed_only = only_in(&processed, &raw);
    let joined = names.join(",");
    match (raw_only.is_empty(), processed_only.is_empty()) {
        (false, false) => Err(CsvError::AmbiguousHeader(joined)),
        (true, true) => Err(CsvError::UnrecognizedHeader(joined)),
        (false, true) => Ok(StudentLayout::Raw),
        (true, false) => Ok(StudentLayout::Processed),
    }
}

fn reader<'a>(bytes: &'a [u8], options: &CsvOptions) -> csv::Reader<&'a [u8]> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes)
}

fn malformed(e: csv::Error) -> CsvError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".into(),
        _ => e.to_string(),
    };
    CsvError::MalformedCsv { line, message }
}

fn read_header(bytes: &[u8], options: &CsvOptions) -> Result<Vec<String>, CsvError> {
    check_quotes(bytes)?;
    let mut r = reader(bytes, options);
    let header = r.headers().map_err(malformed)?;
    Ok(header.iter().map(str::to_string).collect())
}

/// The csv reader accepts an unterminated quoted field by running it to the
/// end of input; reject that up front.
fn check_quotes(bytes: &[u8]) -> Result<(), CsvError> {
    let mut open = false;
    let mut line = 1;
    let mut opened_at = 0;
    for &b in bytes {
        match b {
            b'"' => {
                open = !open;
                if open {
                    opened_at = line;
                }
            }
            b'\n' => line += 1,
            _ => {}
        }
    }
    if open {
        return Err(CsvError::MalformedCsv {
            line: opened_at,
            message: "unbalanced double quote".into(),
        });
    }
    Ok(())
}

fn parse_with(
    bytes: &[u8],
    schema: &Schema,
    options: &CsvOptions,
    column_name: impl Fn(&str) -> String,
) -> Result<Dataset, CsvError> {
    check_quotes(bytes)?;
    let mut r = reader(bytes, options);
    let header = r.headers().map_err(malformed)?.clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(CsvError::MalformedCsv {
            line: 1,
            message: "missing header row".into(),
        });
    }

    // source column for each schema attribute
    let mut source: Vec<Option<usize>> = vec![None; schema.len()];
    for (col, raw_name) in header.iter().enumerate() {
        let name = column_name(raw_name);
        let attr = schema
            .index_of(&name)
            .ok_or_else(|| CsvError::UnknownColumn(raw_name.trim().to_string()))?;
        if source[attr].replace(col).is_some() {
            return Err(CsvError::DuplicateColumn(name));
        }
    }
    for (attr, src) in schema.attributes().iter().zip(&source) {
        if src.is_none() && attr.role == Role::Feature {
            return Err(CsvError::MissingColumn(attr.name.clone()));
        }
    }

    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(malformed)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut cells = Vec::with_capacity(schema.len());
        for (attr, src) in schema.attributes().iter().zip(&source) {
            let text = src.and_then(|c| record.get(c)).unwrap_or("").trim();
            if text.is_empty() || text == options.missing_sentinel {
                cells.push(CellValue::Missing);
                continue;
            }
            let cell = match &attr.kind {
                AttributeKind::Categorical { domain } => {
                    if !domain.iter().any(|v| v == text) {
                        return Err(CsvError::DomainViolation {
                            line,
                            column: attr.name.clone(),
                            value: text.to_string(),
                        });
                    }
                    CellValue::text(text)
                }
                AttributeKind::Continuous { .. } => match text.parse::<f64>() {
                    Ok(x) if x.is_finite() => CellValue::Number(x),
                    _ => {
                        return Err(CsvError::NumericParse {
                            line,
                            column: attr.name.clone(),
                            value: text.to_string(),
                        })
                    }
                },
                AttributeKind::Text => CellValue::text(text),
            };
            cells.push(cell);
        }
        rows.push(Row::new(cells));
    }
    Ok(Dataset::new(schema.clone(), rows)?)
}

fn cell_text(cell: &CellValue, options: &CsvOptions) -> String {
    match cell {
        CellValue::Text(s) => s.clone(),
        CellValue::Number(x) => format_number(*x),
        CellValue::Missing => options.missing_sentinel.clone(),
    }
}

/// Shortest decimal text that parses back to the same number.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

/// Writes the dataset with a header of schema names, LF line endings and
/// quoting only where needed.
pub fn write_csv<W: Write>(d: &Dataset, out: W, options: &CsvOptions) -> Result<(), CsvError> {
    let header: Vec<&str> = d.schema().attributes().iter().map(|a| a.name.as_str()).collect();
    let rows = d
        .rows()
        .iter()
        .map(|r| r.cells().iter().map(|c| cell_text(c, options)).collect());
    write_table(out, &header, rows, options)
}

/// Writes an arbitrary table of already-formatted cells.
pub fn write_table<W: Write, I>(
    out: W,
    header: &[&str],
    rows: I,
    options: &CsvOptions,
) -> Result<(), CsvError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .delimiter(options.delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header).map_err(malformed)?;
    for row in rows {
        w.write_record(&row).map_err(malformed)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(d: &Dataset, options: &CsvOptions) -> Result<String, CsvError> {
    let mut buf = Vec::new();
    write_csv(d, &mut buf, options)?;
    Ok(String::from_utf8(buf).expect("CSV output is built from UTF-8 strings"))
}

/// Column name to formatted value for one row, as shown in result tables.
pub fn row_map(schema: &Schema, row: &Row) -> BTreeMap<String, String> {
    let options = CsvOptions::default();
    schema
        .attributes()
        .iter()
        .zip(row.cells())
        .map(|(a, c)| (a.name.clone(), cell_text(c, &options)))
        .collect()
}
