use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::measures::{Column, Encoded, TIE_EPS};
use super::{prune, Algorithm, InductionError, SplitTest, TrainConfig, TrainedModel, TreeNode};
use super::{BRANCH_GT, BRANCH_LE};
use crate::dataset::{CellValue, Dataset};

/// Grows an ID3 tree over categorical features by maximum information gain.
///
/// Stops at pure nodes, when the features are exhausted, or below
/// `min_leaf_size` rows. Every domain value gets a branch; values with no
/// rows at a node become leaves labeled with that node's majority.
pub fn train_id3(
    d: &Dataset,
    features: &[String],
    config: TrainConfig,
) -> Result<TrainedModel, InductionError> {
    config.validate()?;
    if d.is_empty() {
        return Err(InductionError::EmptyDataset);
    }
    let enc = Encoded::new(d, features)?;
    for (i, column) in enc.columns.iter().enumerate() {
        if let Column::Continuous { .. } = column {
            return Err(InductionError::NotCategorical(enc.names[i].clone()));
        }
    }
    check_complete(d, features)?;
    let rows: Vec<usize> = (0..d.len()).collect();
    let grower = Grower {
        enc: &enc,
        algorithm: Algorithm::Id3,
        config,
    };
    let available: Vec<usize> = (0..features.len()).collect();
    let mut root = grower.grow(&rows, &available);
    if config.prune {
        root = prune(&root, &config);
    }
    Ok(TrainedModel::new(
        Algorithm::Id3,
        root,
        d.schema().clone(),
        features.to_vec(),
        config,
        rows.len(),
    ))
}

/// Grows a C4.5 tree by maximum gain ratio.
///
/// Continuous features split at the best midpoint threshold and stay
/// available below the split. Rows missing the tested value are left out of
/// that test's score, the score is scaled by the known fraction, and those
/// rows do not descend into children. A node without any positive-scoring
/// test becomes a leaf. Rows with an unknown class are ignored.
pub fn train_c45(
    d: &Dataset,
    features: &[String],
    config: TrainConfig,
) -> Result<TrainedModel, InductionError> {
    config.validate()?;
    let enc = Encoded::new(d, features)?;
    let rows = enc.labeled_rows();
    if rows.is_empty() {
        return Err(InductionError::EmptyDataset);
    }
    let grower = Grower {
        enc: &enc,
        algorithm: Algorithm::C45,
        config,
    };
    let available: Vec<usize> = (0..features.len()).collect();
    let mut root = grower.grow(&rows, &available);
    if config.prune {
        root = prune(&root, &config);
    }
    Ok(TrainedModel::new(
        Algorithm::C45,
        root,
        d.schema().clone(),
        features.to_vec(),
        config,
        rows.len(),
    ))
}

fn check_complete(d: &Dataset, features: &[String]) -> Result<(), InductionError> {
    let schema = d.schema();
    let mut columns: Vec<usize> = features
        .iter()
        .filter_map(|f| schema.index_of(f))
        .collect();
    columns.push(schema.class_index());
    for (r, row) in d.rows().iter().enumerate() {
        for &c in &columns {
            if let CellValue::Missing = row.cells()[c] {
                return Err(InductionError::MissingValuesPresent {
                    row: r,
                    attribute: schema.attributes()[c].name.clone(),
                });
            }
        }
    }
    Ok(())
}

struct Grower<'a> {
    enc: &'a Encoded,
    algorithm: Algorithm,
    config: TrainConfig,
}

struct Choice {
    feature: usize,
    threshold: Option<f64>,
}

impl Grower<'_> {
    fn grow(&self, rows: &[usize], available: &[usize]) -> TreeNode {
        let counts = self.enc.counts(rows);
        let distribution = self.enc.distribution(&counts);
        let label = distribution.majority().unwrap_or_default().to_string();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || available.is_empty() || rows.len() < self.config.min_leaf_size {
            return TreeNode::Leaf {
                label,
                distribution,
            };
        }
        let choice = match self.algorithm {
            Algorithm::Id3 => self.choose_id3(rows, available),
            Algorithm::C45 => self.choose_c45(rows, available),
        };
        let Some(choice) = choice else {
            return TreeNode::Leaf {
                label,
                distribution,
            };
        };
        let name = self.enc.names[choice.feature].clone();
        let mut branches = BTreeMap::new();
        match (&self.enc.columns[choice.feature], choice.threshold) {
            (Column::Categorical { domain, codes }, _) => {
                let rest: Vec<usize> = available
                    .iter()
                    .copied()
                    .filter(|&f| f != choice.feature)
                    .collect();
                for (v, value) in domain.iter().enumerate() {
                    let sub: Vec<usize> = rows.iter().copied().filter(|&r| codes[r] == Some(v)).collect();
                    let child = if sub.is_empty() {
                        TreeNode::Leaf {
                            label: label.clone(),
                            distribution: self.enc.distribution(&self.enc.counts(&[])),
                        }
                    } else {
                        self.grow(&sub, &rest)
                    };
                    branches.insert(value.clone(), child);
                }
                TreeNode::Internal {
                    test: SplitTest::Categorical { attribute: name },
                    branches,
                    fallback_label: label,
                    distribution,
                }
            }
            (Column::Continuous { values }, Some(threshold)) => {
                let (mut le, mut gt) = (Vec::new(), Vec::new());
                for &r in rows {
                    match values[r] {
                        Some(x) if x <= threshold => le.push(r),
                        Some(_) => gt.push(r),
                        None => {}
                    }
                }
                branches.insert(BRANCH_LE.to_string(), self.grow(&le, available));
                branches.insert(BRANCH_GT.to_string(), self.grow(&gt, available));
                TreeNode::Internal {
                    test: SplitTest::Continuous {
                        attribute: name,
                        threshold,
                    },
                    branches,
                    fallback_label: label,
                    distribution,
                }
            }
            (Column::Continuous { .. }, None) => unreachable!("continuous choice carries a threshold"),
        }
    }

    /// Highest information gain; ties keep the earliest feature. Zero-gain
    /// splits are still taken.
    fn choose_id3(&self, rows: &[usize], available: &[usize]) -> Option<Choice> {
        let mut best: Option<(usize, f64)> = None;
        for &f in available {
            let gain = self.enc.score_categorical(f, rows).gain;
            if best.map_or(true, |(_, g)| gain > g + TIE_EPS) {
                best = Some((f, gain));
            }
        }
        best.map(|(feature, _)| Choice {
            feature,
            threshold: None,
        })
    }

    fn choose_c45(&self, rows: &[usize], available: &[usize]) -> Option<Choice> {
        let n = rows.len() as f64;
        let mut best: Option<(Choice, f64)> = None;
        for &f in available {
            let score = match &self.enc.columns[f] {
                Column::Categorical { .. } => self.enc.score_categorical(f, rows),
                Column::Continuous { .. } => match self.enc.score_best_threshold(f, rows) {
                    Some(s) => s,
                    None => continue,
                },
            };
            let value = score.gain_ratio() * (score.known as f64 / n);
            if best.as_ref().map_or(true, |(_, v)| value > v + TIE_EPS) {
                best = Some((
                    Choice {
                        feature: f,
                        threshold: score.threshold,
                    },
                    value,
                ));
            }
        }
        match best {
            Some((choice, value)) if value > TIE_EPS => Some(choice),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSchema, Role, Row, Schema};
    use crate::distribution::ClassDistribution;
    use alloc::vec;
    use alloc::vec::Vec;

    fn schema() -> Schema {
        Schema::new(vec![
            AttributeSchema::categorical("merit", &["good", "bad"], Role::Feature),
            AttributeSchema::categorical("gender", &["Male", "Female"], Role::Feature),
            AttributeSchema::continuous("marks", "", Role::Feature),
            AttributeSchema::categorical("class", &["pass", "fail"], Role::ClassLabel),
        ])
        .unwrap()
    }

    fn row(merit: &str, gender: &str, marks: f64, class: &str) -> Row {
        let cell = |s: &str| {
            if s.is_empty() {
                CellValue::Missing
            } else {
                CellValue::text(s)
            }
        };
        Row::new(vec![cell(merit), cell(gender), CellValue::Number(marks), cell(class)])
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pure_dataset_gives_single_leaf() {
        let d = Dataset::new(schema(), vec![row("good", "Male", 1.0, "pass"); 4]).unwrap();
        let id3 = train_id3(&d, &names(&["merit", "gender"]), TrainConfig::id3()).unwrap();
        let c45 = train_c45(&d, &names(&["merit", "gender"]), TrainConfig::c45()).unwrap();
        assert_eq!(id3.root, TreeNode::leaf("pass", ClassDistribution::from_counts([("pass", 4.0), ("fail", 0.0)])));
        assert_eq!(id3.root, c45.root);
        assert_eq!(id3.stats.leaf_count, 1);
    }

    #[test]
    fn two_row_merit_split() {
        let d = Dataset::new(
            schema(),
            vec![row("good", "Male", 1.0, "pass"), row("bad", "Male", 1.0, "fail")],
        )
        .unwrap();
        let m = train_id3(&d, &names(&["merit"]), TrainConfig::id3()).unwrap();
        let TreeNode::Internal { test, branches, .. } = &m.root else {
            panic!("expected a split")
        };
        assert_eq!(test, &SplitTest::categorical("merit"));
        assert_eq!(branches["good"].label(), "pass");
        assert_eq!(branches["bad"].label(), "fail");
        assert!(branches.values().all(TreeNode::is_leaf));
    }

    #[test]
    fn id3_attaches_majority_leaf_for_unseen_values() {
        let d = Dataset::new(
            schema(),
            vec![
                row("good", "Male", 1.0, "pass"),
                row("good", "Male", 1.0, "pass"),
                row("bad", "Male", 1.0, "fail"),
            ],
        )
        .unwrap();
        let m = train_id3(&d, &names(&["gender", "merit"]), TrainConfig::id3()).unwrap();
        // gender has zero gain, merit is perfect.
        let TreeNode::Internal { test, .. } = &m.root else { panic!() };
        assert_eq!(test.attribute(), "merit");
        let m = train_id3(&d, &names(&["gender"]), TrainConfig::id3()).unwrap();
        let TreeNode::Internal { branches, .. } = &m.root else { panic!() };
        assert_eq!(branches["Female"].label(), "pass");
        assert_eq!(branches["Female"].distribution().total(), 0.0);
    }

    #[test]
    fn id3_rejects_missing_and_continuous() {
        let d = Dataset::new(schema(), vec![row("", "Male", 1.0, "pass")]).unwrap();
        assert_eq!(
            train_id3(&d, &names(&["merit"]), TrainConfig::id3()).unwrap_err(),
            InductionError::MissingValuesPresent {
                row: 0,
                attribute: "merit".into()
            }
        );
        assert_eq!(
            train_id3(&d, &names(&["marks"]), TrainConfig::id3()).unwrap_err(),
            InductionError::NotCategorical("marks".into())
        );
        assert_eq!(
            train_id3(&Dataset::empty(schema()), &names(&["merit"]), TrainConfig::id3()).unwrap_err(),
            InductionError::EmptyDataset
        );
        assert_eq!(
            train_id3(&d, &names(&["class"]), TrainConfig::id3()).unwrap_err(),
            InductionError::ClassAttributeAsFeature("class".into())
        );
    }

    #[test]
    fn c45_reuses_continuous_features() {
        // fail below 10, pass in [10, 20), fail from 20: needs two cuts on marks.
        let mut rows = vec![];
        for x in 0..30 {
            let class = if (10..20).contains(&x) { "pass" } else { "fail" };
            rows.push(row("good", "Male", x as f64, class));
        }
        let d = Dataset::new(schema(), rows).unwrap();
        let mut config = TrainConfig::c45();
        config.prune = false;
        let m = train_c45(&d, &names(&["marks"]), config).unwrap();
        assert_eq!(m.root.depth(), 2);
        for x in 0..30 {
            let r = row("good", "Male", x as f64, "");
            let view = crate::dataset::RecordView {
                schema: d.schema(),
                row: &r,
            };
            let expected = if (10..20).contains(&x) { "pass" } else { "fail" };
            assert_eq!(m.classify(&view).unwrap().label, expected);
        }
    }

    #[test]
    fn c45_tolerates_missing_values() {
        let d = Dataset::new(
            schema(),
            vec![
                row("good", "Male", 1.0, "pass"),
                row("good", "", 1.0, "pass"),
                row("bad", "Male", 1.0, "fail"),
                row("bad", "Female", 1.0, "fail"),
                row("", "Female", 1.0, "fail"),
                row("good", "Female", 1.0, ""),
            ],
        )
        .unwrap();
        let m = train_c45(&d, &names(&["gender", "merit"]), TrainConfig::c45()).unwrap();
        assert_eq!(m.stats.training_rows, 5);
        let TreeNode::Internal { test, .. } = &m.root else { panic!() };
        assert_eq!(test.attribute(), "merit");
    }

    #[test]
    fn c45_stops_without_positive_gain() {
        // XOR of two binary features: no single split has positive gain.
        let d = Dataset::new(
            schema(),
            vec![
                row("good", "Male", 1.0, "pass"),
                row("bad", "Female", 1.0, "pass"),
                row("good", "Female", 1.0, "fail"),
                row("bad", "Male", 1.0, "fail"),
            ],
        )
        .unwrap();
        let c45 = train_c45(&d, &names(&["merit", "gender"]), TrainConfig::c45()).unwrap();
        assert!(c45.root.is_leaf());
        let id3 = train_id3(&d, &names(&["merit", "gender"]), TrainConfig::id3()).unwrap();
        assert_eq!(id3.stats.leaf_count, 4);
    }

    #[test]
    fn min_leaf_size_stops_growth() {
        let d = Dataset::new(
            schema(),
            vec![row("good", "Male", 1.0, "pass"), row("bad", "Male", 1.0, "fail")],
        )
        .unwrap();
        let mut config = TrainConfig::id3();
        config.min_leaf_size = 3;
        let m = train_id3(&d, &names(&["merit"]), config).unwrap();
        assert!(m.root.is_leaf());
        assert_eq!(m.root.label(), "fail");
    }
}
