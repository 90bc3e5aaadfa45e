//! Tabular data model: schemas, attribute kinds, rows and validated datasets.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::distribution::ClassDistribution;

/// Value space of a single attribute.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum AttributeKind {
    /// Closed, ordered set of admissible string values.
    Categorical { domain: Vec<String> },
    /// Finite real numbers; `unit` is a free-text label such as "marks/200".
    Continuous { unit: String },
    /// Unconstrained text (names, identifiers, raw codes).
    Text,
}

impl AttributeKind {
    pub fn domain(&self) -> Option<&[String]> {
        match self {
            AttributeKind::Categorical { domain } => Some(domain),
            _ => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, AttributeKind::Categorical { .. })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, AttributeKind::Continuous { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Role {
    Feature,
    ClassLabel,
    Identifier,
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    pub role: Role,
}

impl AttributeSchema {
    pub fn categorical<S: Into<String>>(name: S, domain: &[&str], role: Role) -> Self {
        AttributeSchema {
            name: name.into(),
            kind: AttributeKind::Categorical {
                domain: domain.iter().map(|v| v.to_string()).collect(),
            },
            role,
        }
    }

    pub fn continuous<S: Into<String>, U: Into<String>>(name: S, unit: U, role: Role) -> Self {
        AttributeSchema {
            name: name.into(),
            kind: AttributeKind::Continuous { unit: unit.into() },
            role,
        }
    }

    pub fn text<S: Into<String>>(name: S, role: Role) -> Self {
        AttributeSchema {
            name: name.into(),
            kind: AttributeKind::Text,
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("schema must have exactly one class label attribute, found {0}")]
    ClassLabelCount(usize),
    #[error("schema has no feature attributes")]
    NoFeatures,
    #[error("attribute `{0}` has an empty categorical domain")]
    EmptyDomain(String),
    #[error("attribute `{attribute}` lists `{value}` more than once in its domain")]
    DuplicateDomainValue { attribute: String, value: String },
    #[error("class label attribute `{0}` cannot be continuous")]
    ContinuousClassLabel(String),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: value `{value}` is outside the domain of `{attribute}`")]
    DomainViolation {
        row: usize,
        attribute: String,
        value: String,
    },
    #[error("row {row}: attribute `{attribute}` expects a {expected} value")]
    TypeViolation {
        row: usize,
        attribute: String,
        expected: &'static str,
    },
    #[error("row {row}: attribute `{attribute}` holds a non-finite number")]
    NonFinite { row: usize, attribute: String },
    #[error("no attribute named `{0}`")]
    NoSuchAttribute(String),
    #[error("attribute `{0}` is not categorical")]
    NotCategorical(String),
}

/// Ordered list of attributes with exactly one class label and at least one
/// feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "SchemaRepr")
)]
pub struct Schema {
    attributes: Vec<AttributeSchema>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct SchemaRepr {
    attributes: Vec<AttributeSchema>,
}

#[cfg(feature = "serde")]
impl TryFrom<SchemaRepr> for Schema {
    type Error = DatasetError;

    fn try_from(repr: SchemaRepr) -> Result<Self, Self::Error> {
        Schema::new(repr.attributes)
    }
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSchema>) -> Result<Self, DatasetError> {
        let mut class_count = 0;
        let mut feature_count = 0;
        for (i, attr) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|a| a.name == attr.name) {
                return Err(DatasetError::DuplicateAttribute(attr.name.clone()));
            }
            if let AttributeKind::Categorical { domain } = &attr.kind {
                if domain.is_empty() {
                    return Err(DatasetError::EmptyDomain(attr.name.clone()));
                }
                for (j, value) in domain.iter().enumerate() {
                    if domain[..j].contains(value) {
                        return Err(DatasetError::DuplicateDomainValue {
                            attribute: attr.name.clone(),
                            value: value.clone(),
                        });
                    }
                }
            }
            match attr.role {
                Role::ClassLabel => {
                    if attr.kind.is_continuous() {
                        return Err(DatasetError::ContinuousClassLabel(attr.name.clone()));
                    }
                    class_count += 1;
                }
                Role::Feature => feature_count += 1,
                Role::Identifier | Role::Ignored => {}
            }
        }
        if class_count != 1 {
            return Err(DatasetError::ClassLabelCount(class_count));
        }
        if feature_count == 0 {
            return Err(DatasetError::NoFeatures);
        }
        Ok(Schema { attributes })
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSchema> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn class_index(&self) -> usize {
        self.attributes
            .iter()
            .position(|a| a.role == Role::ClassLabel)
            .expect("schema invariant: one class label")
    }

    pub fn class_attribute(&self) -> &AttributeSchema {
        &self.attributes[self.class_index()]
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.attributes
            .iter()
            .filter(|a| a.role == Role::Feature)
            .map(|a| a.name.clone())
            .collect()
    }
}

/// A single cell. Numbers are always finite.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum CellValue {
    Text(String),
    Number(f64),
    Missing,
}

impl CellValue {
    pub fn text<S: Into<String>>(s: S) -> Self {
        CellValue::Text(s.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(x) => Some(*x),
            _ => None,
        }
    }
}

/// Cells positionally aligned with a schema's attributes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Row {
    cells: Vec<CellValue>,
}

impl Row {
    pub fn new(cells: Vec<CellValue>) -> Self {
        Row { cells }
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.cells
    }

    pub fn get(&self, index: usize) -> Option<&CellValue> {
        self.cells.get(index)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// A schema plus rows satisfying it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Row>,
}

impl Dataset {
    /// Validates every row against the schema: arity, categorical domains,
    /// numeric continuous cells and textual text cells.
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self, DatasetError> {
        for (i, row) in rows.iter().enumerate() {
            validate_row(&schema, i, row)?;
        }
        Ok(Dataset { schema, rows })
    }

    pub fn empty(schema: Schema) -> Self {
        Dataset {
            schema,
            rows: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(schema: Schema, rows: Vec<Row>) -> Self {
        Dataset { schema, rows }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_parts(self) -> (Schema, Vec<Row>) {
        (self.schema, self.rows)
    }

    pub fn cell(&self, row: usize, attribute: usize) -> &CellValue {
        &self.rows[row].cells[attribute]
    }

    /// Class label of `row`, or `None` when the class cell is missing.
    pub fn class_label(&self, row: usize) -> Option<&str> {
        self.rows[row].cells[self.schema.class_index()].as_text()
    }

    /// New dataset holding copies of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn record(&self, row: usize) -> RecordView<'_> {
        RecordView {
            schema: &self.schema,
            row: &self.rows[row],
        }
    }
}

fn validate_row(schema: &Schema, index: usize, row: &Row) -> Result<(), DatasetError> {
    if row.len() != schema.len() {
        return Err(DatasetError::RowArity {
            row: index,
            expected: schema.len(),
            found: row.len(),
        });
    }
    for (attr, cell) in schema.attributes().iter().zip(row.cells()) {
        match (&attr.kind, cell) {
            (_, CellValue::Missing) => {}
            (AttributeKind::Categorical { domain }, CellValue::Text(v)) => {
                if !domain.iter().any(|d| d == v) {
                    return Err(DatasetError::DomainViolation {
                        row: index,
                        attribute: attr.name.clone(),
                        value: v.clone(),
                    });
                }
            }
            (AttributeKind::Continuous { .. }, CellValue::Number(x)) => {
                if !x.is_finite() {
                    return Err(DatasetError::NonFinite {
                        row: index,
                        attribute: attr.name.clone(),
                    });
                }
            }
            (AttributeKind::Text, CellValue::Text(_)) => {}
            (AttributeKind::Continuous { .. }, _) => {
                return Err(DatasetError::TypeViolation {
                    row: index,
                    attribute: attr.name.clone(),
                    expected: "numeric",
                })
            }
            (_, CellValue::Number(_)) => {
                return Err(DatasetError::TypeViolation {
                    row: index,
                    attribute: attr.name.clone(),
                    expected: "text",
                })
            }
        }
    }
    Ok(())
}

/// Splits `d` by the value of a categorical attribute. Rows missing that
/// attribute belong to no part.
pub fn partition(d: &Dataset, attribute: &str) -> Result<BTreeMap<String, Dataset>, DatasetError> {
    let index = d
        .schema
        .index_of(attribute)
        .ok_or_else(|| DatasetError::NoSuchAttribute(attribute.to_string()))?;
    if !d.schema.attributes[index].kind.is_categorical() {
        return Err(DatasetError::NotCategorical(attribute.to_string()));
    }
    let mut parts: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for row in &d.rows {
        if let CellValue::Text(v) = &row.cells[index] {
            parts.entry(v.clone()).or_default().push(row.clone());
        }
    }
    Ok(parts
        .into_iter()
        .map(|(k, rows)| (k, Dataset::from_parts_unchecked(d.schema.clone(), rows)))
        .collect())
}

/// Per-label counts over rows with a known class. Labels of a categorical
/// class domain are always present, possibly with a zero count.
pub fn class_counts(d: &Dataset) -> ClassDistribution {
    let mut dist = ClassDistribution::new();
    if let Some(domain) = d.schema.class_attribute().kind.domain() {
        for label in domain {
            dist.add(label, 0.0);
        }
    }
    let class = d.schema.class_index();
    for row in &d.rows {
        if let CellValue::Text(label) = &row.cells[class] {
            dist.add(label, 1.0);
        }
    }
    dist
}

/// A feature value as seen by tree traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue<'a> {
    Text(&'a str),
    Number(f64),
    Missing,
}

/// Anything a tree can be evaluated against. `None` means the record has no
/// such attribute at all, which is different from a present-but-missing value.
pub trait FeatureSource {
    fn feature(&self, attribute: &str) -> Option<FeatureValue<'_>>;
}

/// Borrowed view of one dataset row addressed by attribute name.
#[derive(Debug, Clone, Copy)]
pub struct RecordView<'a> {
    pub schema: &'a Schema,
    pub row: &'a Row,
}

impl FeatureSource for RecordView<'_> {
    fn feature(&self, attribute: &str) -> Option<FeatureValue<'_>> {
        let index = self.schema.index_of(attribute)?;
        Some(match self.row.get(index)? {
            CellValue::Text(s) => FeatureValue::Text(s),
            CellValue::Number(x) => FeatureValue::Number(*x),
            CellValue::Missing => FeatureValue::Missing,
        })
    }
}

impl FeatureSource for BTreeMap<String, CellValue> {
    fn feature(&self, attribute: &str) -> Option<FeatureValue<'_>> {
        Some(match self.get(attribute)? {
            CellValue::Text(s) => FeatureValue::Text(s),
            CellValue::Number(x) => FeatureValue::Number(*x),
            CellValue::Missing => FeatureValue::Missing,
        })
    }
}

impl FeatureSource for BTreeMap<&str, &str> {
    fn feature(&self, attribute: &str) -> Option<FeatureValue<'_>> {
        self.get(attribute).map(|v| FeatureValue::Text(v))
    }
}
