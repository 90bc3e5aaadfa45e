//! Versioned, checksummed model documents in canonical JSON.
//!
//! Canonical means: object keys sorted bytewise, no insignificant
//! whitespace, numbers in shortest round-trip form. The checksum is the
//! SHA-256 of the canonical text of the document without its `checksum`
//! field.

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use gradegauge_core::{
    Algorithm, Schema, TrainConfig, TrainedModel, TreeNode, TreeStats,
};

pub const DOCUMENT_VERSION: u64 = 1;
const CHECKSUM_PREFIX: &str = "sha256:";

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("corrupt model document: {0}")]
    CorruptDocument(String),
    #[error("unsupported model document version {0}")]
    UnsupportedVersion(u64),
}

fn corrupt(msg: impl Into<String>) -> DocumentError {
    DocumentError::CorruptDocument(msg.into())
}

/// Writes `v` canonically.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn checksum(text: &str) -> String {
    format!("{CHECKSUM_PREFIX}{}", hex::encode(Sha256::digest(text.as_bytes())))
}

fn body(model: &TrainedModel) -> Map<String, Value> {
    let to = |v: Result<Value, serde_json::Error>| v.expect("model parts serialize to JSON");
    let mut m = Map::new();
    m.insert("version".into(), Value::from(DOCUMENT_VERSION));
    m.insert("algorithm".into(), to(serde_json::to_value(model.algorithm)));
    m.insert("schema".into(), to(serde_json::to_value(&model.schema)));
    m.insert("features".into(), to(serde_json::to_value(&model.features)));
    m.insert("tree".into(), to(serde_json::to_value(&model.root)));
    m.insert("config".into(), to(serde_json::to_value(model.config)));
    m.insert("stats".into(), to(serde_json::to_value(model.stats)));
    m
}

/// Canonical document text for `model`.
pub fn to_document(model: &TrainedModel) -> String {
    let mut m = body(model);
    let sum = checksum(&canonical_json(&Value::Object(m.clone())));
    m.insert("checksum".into(), Value::String(sum));
    canonical_json(&Value::Object(m))
}

fn field<T: serde::de::DeserializeOwned>(
    m: &mut Map<String, Value>,
    name: &str,
) -> Result<T, DocumentError> {
    let v = m
        .remove(name)
        .ok_or_else(|| corrupt(format!("missing `{name}`")))?;
    serde_json::from_value(v).map_err(|e| corrupt(format!("`{name}`: {e}")))
}

/// Parses and checks a document: version, checksum, and every structural
/// invariant of the model.
pub fn from_document(text: &str) -> Result<TrainedModel, DocumentError> {
    let value: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let Value::Object(mut m) = value else {
        return Err(corrupt("document is not an object"));
    };
    let version = m
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing `version`"))?;
    if version != DOCUMENT_VERSION {
        return Err(DocumentError::UnsupportedVersion(version));
    }
    let stated = match m.remove("checksum") {
        Some(Value::String(s)) => s,
        _ => return Err(corrupt("missing `checksum`")),
    };
    if checksum(&canonical_json(&Value::Object(m.clone()))) != stated {
        return Err(corrupt("checksum mismatch"));
    }
    m.remove("version");
    let algorithm: Algorithm = field(&mut m, "algorithm")?;
    let schema: Schema = field(&mut m, "schema")?;
    let features: Vec<String> = field(&mut m, "features")?;
    let root: TreeNode = field(&mut m, "tree")?;
    let config: TrainConfig = field(&mut m, "config")?;
    let stats: TreeStats = field(&mut m, "stats")?;
    if let Some(extra) = m.keys().next() {
        return Err(corrupt(format!("unexpected field `{extra}`")));
    }
    let model = TrainedModel {
        algorithm,
        root,
        schema,
        features,
        config,
        stats,
    };
    model.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradegauge_core::induction::train_c45;
    use gradegauge_core::preprocess::{processed_student_schema, student_features};
    use gradegauge_core::{CellValue, Dataset, Row};

    fn model() -> TrainedModel {
        let rows = [
            ["good", "Male", "distinction", "AI", "pass"],
            ["bad", "Female", "second_class", "OTHER", "fail"],
            ["good", "Male", "first_class", "AI", "pass"],
            ["bad", "Male", "second_class", "AI", "fail"],
        ]
        .iter()
        .map(|r| Row::new(r.iter().map(|s| CellValue::text(*s)).collect()))
        .collect();
        let d = Dataset::new(processed_student_schema(), rows).unwrap();
        train_c45(&d, &student_features(), TrainConfig::c45()).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let m = model();
        let doc = to_document(&m);
        let back = from_document(&doc).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_document(&back), doc);
    }

    #[test]
    fn keys_are_sorted_and_versioned() {
        let doc = to_document(&model());
        assert!(doc.starts_with("{\"algorithm\":\"C45\",\"checksum\":\"sha256:"));
        assert!(doc.ends_with(",\"version\":1}"));
    }

    #[test]
    fn tampering_is_detected() {
        let doc = to_document(&model());
        let tampered = doc.replacen("\"fail\"", "\"pass\"", 1);
        assert!(matches!(from_document(&tampered), Err(DocumentError::CorruptDocument(_))));
        let truncated = &doc[..doc.len() / 2];
        assert!(matches!(from_document(truncated), Err(DocumentError::CorruptDocument(_))));
        let future = doc.replace("\"version\":1", "\"version\":2");
        assert!(matches!(from_document(&future), Err(DocumentError::UnsupportedVersion(2))));
    }

    #[test]
    fn checksum_does_not_mask_invalid_models() {
        let mut m = model();
        m.stats.leaf_count += 1;
        let doc = to_document(&m);
        assert!(matches!(from_document(&doc), Err(DocumentError::CorruptDocument(_))));
    }
}
