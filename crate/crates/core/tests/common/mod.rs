#![allow(dead_code)]

use std::collections::BTreeMap;

use gradegauge_core::induction::{BRANCH_GT, BRANCH_LE};
use gradegauge_core::preprocess::{processed_student_schema, student_features};
use gradegauge_core::{
    Algorithm, AttributeSchema, CellValue, ClassDistribution, Dataset, Role, Row, Schema,
    SplitTest, TrainConfig, TrainedModel, TreeNode,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The published decision ladder over processed features.
pub fn ladder(percent: &str, merit: &str, ad_type: &str) -> &'static str {
    if percent == "distinction" {
        "pass"
    } else if percent == "first_class" {
        if merit == "bad" {
            if ad_type == "AI" {
                "pass"
            } else {
                "fail"
            }
        } else {
            "pass"
        }
    } else {
        "fail"
    }
}

/// All 24 (merit, gender, percent, type) combinations.
pub fn feature_space() -> Vec<[&'static str; 4]> {
    let mut out = Vec::new();
    for merit in ["good", "bad"] {
        for gender in ["Male", "Female"] {
            for percent in ["distinction", "first_class", "second_class"] {
                for ty in ["AI", "OTHER"] {
                    out.push([merit, gender, percent, ty]);
                }
            }
        }
    }
    out
}

pub fn record(c: &[&'static str; 4]) -> BTreeMap<&'static str, &'static str> {
    ["merit", "gender", "percent", "type"]
        .into_iter()
        .zip(c.iter().copied())
        .collect()
}

pub fn text_map(c: &[&str; 4]) -> BTreeMap<String, CellValue> {
    ["merit", "gender", "percent", "type"]
        .into_iter()
        .zip(c.iter())
        .map(|(k, v)| (k.to_string(), CellValue::text(*v)))
        .collect()
}

/// `n` noise-free rows drawn uniformly from the feature space and labeled by
/// the ladder.
pub fn ladder_dataset(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let space = feature_space();
    let rows = (0..n)
        .map(|_| {
            let c = space.choose(&mut r).unwrap();
            let label = ladder(c[2], c[0], c[3]);
            Row::new(
                c.iter()
                    .chain(std::iter::once(&label))
                    .map(|s| CellValue::text(*s))
                    .collect(),
            )
        })
        .collect();
    Dataset::new(processed_student_schema(), rows).unwrap()
}

pub fn ladder_model() -> TrainedModel {
    gradegauge_core::induction::train_c45(
        &ladder_dataset(200, 7),
        &student_features(),
        TrainConfig::c45(),
    )
    .unwrap()
}

pub fn binary_schema(features: usize) -> Schema {
    let mut attrs: Vec<AttributeSchema> = (0..features)
        .map(|i| AttributeSchema::categorical(format!("f{i}"), &["a", "b"], Role::Feature))
        .collect();
    attrs.push(AttributeSchema::categorical("class", &["yes", "no"], Role::ClassLabel));
    Schema::new(attrs).unwrap()
}

/// Random binary-feature dataset with 1..=max_features features and
/// 1..=max_rows rows. Labels are drawn independently, so duplicates with
/// different classes can occur.
pub fn random_binary(r: &mut ChaCha8Rng, max_features: usize, max_rows: usize) -> Dataset {
    let features = r.gen_range(1..=max_features);
    let n = r.gen_range(1..=max_rows);
    let rows = (0..n)
        .map(|_| {
            let mut cells: Vec<CellValue> = (0..features)
                .map(|_| CellValue::text(if r.gen() { "a" } else { "b" }))
                .collect();
            cells.push(CellValue::text(if r.gen_bool(0.6) { "yes" } else { "no" }));
            Row::new(cells)
        })
        .collect();
    Dataset::new(binary_schema(features), rows).unwrap()
}

/// Random categorical dataset (2..=5 features, domains of 2..=4 values,
/// up to `max_rows` rows) whose labels are a deterministic function of the
/// features, so no two rows contradict each other.
pub fn random_consistent(r: &mut ChaCha8Rng, max_rows: usize) -> Dataset {
    let features = r.gen_range(2..=5);
    let domains: Vec<Vec<String>> = (0..features)
        .map(|_| (0..r.gen_range(2..=4)).map(|v| format!("v{v}")).collect())
        .collect();
    let mut attrs: Vec<AttributeSchema> = domains
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let d: Vec<&str> = d.iter().map(String::as_str).collect();
            AttributeSchema::categorical(format!("x{i}"), &d, Role::Feature)
        })
        .collect();
    attrs.push(AttributeSchema::categorical("class", &["pass", "fail"], Role::ClassLabel));
    let schema = Schema::new(attrs).unwrap();
    let mut labels: BTreeMap<Vec<usize>, &str> = BTreeMap::new();
    let n = r.gen_range(1..=max_rows);
    let rows = (0..n)
        .map(|_| {
            let key: Vec<usize> = domains.iter().map(|d| r.gen_range(0..d.len())).collect();
            let label = *labels
                .entry(key.clone())
                .or_insert_with(|| if r.gen_bool(0.55) { "pass" } else { "fail" });
            let mut cells: Vec<CellValue> = key
                .iter()
                .zip(&domains)
                .map(|(&k, d)| CellValue::text(d[k].as_str()))
                .collect();
            cells.push(CellValue::text(label));
            Row::new(cells)
        })
        .collect();
    Dataset::new(schema, rows).unwrap()
}

pub fn features_of(d: &Dataset) -> Vec<String> {
    d.schema().feature_names()
}

/// Mixed schema: `c0..c2` categorical with domains of size 2..=4 and
/// `n0..n1` continuous.
pub fn mixed_schema() -> Schema {
    Schema::new(vec![
        AttributeSchema::categorical("c0", &["red", "green"], Role::Feature),
        AttributeSchema::categorical("c1", &["lo", "mid", "hi"], Role::Feature),
        AttributeSchema::categorical("c2 kind", &["w", "x", "y", "z"], Role::Feature),
        AttributeSchema::continuous("n0", "marks", Role::Feature),
        AttributeSchema::continuous("n1", "percent", Role::Feature),
        AttributeSchema::categorical("class", &["pass", "fail", "withdrawn"], Role::ClassLabel),
    ])
    .unwrap()
}

const LABELS: [&str; 3] = ["pass", "fail", "withdrawn"];

fn random_node(r: &mut ChaCha8Rng, schema: &Schema, depth: usize) -> TreeNode {
    if depth == 0 || r.gen_bool(0.25) {
        let mut dist = ClassDistribution::new();
        for l in LABELS {
            dist.add(l, r.gen_range(0..6) as f64);
        }
        let label = LABELS[r.gen_range(0..LABELS.len())];
        return TreeNode::leaf(label, dist);
    }
    let attrs: Vec<&AttributeSchema> = schema
        .attributes()
        .iter()
        .filter(|a| a.role == Role::Feature)
        .collect();
    let a = attrs[r.gen_range(0..attrs.len())];
    let (test, keys): (SplitTest, Vec<String>) = match a.kind.domain() {
        Some(domain) => {
            let mut keys = domain.to_vec();
            if keys.len() > 2 && r.gen_bool(0.3) {
                keys.remove(r.gen_range(0..keys.len()));
            }
            (SplitTest::categorical(a.name.as_str()), keys)
        }
        None => {
            let t = (r.gen_range(0..20000) as f64) / 100.0;
            (
                SplitTest::continuous(a.name.as_str(), t),
                vec![BRANCH_LE.to_string(), BRANCH_GT.to_string()],
            )
        }
    };
    let branches: BTreeMap<String, TreeNode> = keys
        .into_iter()
        .map(|k| (k, random_node(r, schema, depth - 1)))
        .collect();
    let mut distribution = ClassDistribution::new();
    for l in LABELS {
        distribution.add(l, 0.0);
    }
    for c in branches.values() {
        distribution.merge(c.distribution());
    }
    let fallback_label = distribution.majority().unwrap().to_string();
    TreeNode::Internal {
        test,
        branches,
        fallback_label,
        distribution,
    }
}

pub fn random_mixed_model(r: &mut ChaCha8Rng) -> TrainedModel {
    let schema = mixed_schema();
    let root = random_node(r, &schema, 5);
    let features = schema.feature_names();
    TrainedModel::new(Algorithm::C45, root, schema, features, TrainConfig::c45(), 0)
}

/// A record over the mixed schema; continuous values sometimes land exactly
/// on a two-decimal grid point so thresholds are hit.
pub fn random_mixed_record(r: &mut ChaCha8Rng, schema: &Schema) -> BTreeMap<String, CellValue> {
    let mut rec = BTreeMap::new();
    for a in schema.attributes().iter().filter(|a| a.role == Role::Feature) {
        let v = match a.kind.domain() {
            Some(d) => CellValue::text(d[r.gen_range(0..d.len())].as_str()),
            None => CellValue::Number((r.gen_range(0..20001) as f64) / 100.0),
        };
        rec.insert(a.name.clone(), v);
    }
    rec
}
