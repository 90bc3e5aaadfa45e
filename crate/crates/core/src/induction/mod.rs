//! Decision-tree induction: split measures, ID3 and C4.5 growth, pessimistic
//! pruning and classification.

mod grow;
mod measures;
mod prune;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::{AttributeKind, FeatureSource, FeatureValue, Schema};
use crate::distribution::ClassDistribution;

pub use grow::{train_c45, train_id3};
pub use measures::{
    best_continuous_split, entropy, gain_ratio, information_gain, split_info, ContinuousSplit,
};
pub use prune::{pessimistic_errors, prune};

/// Branch key for `value <= threshold`.
pub const BRANCH_LE: &str = "<=";
/// Branch key for `value > threshold`.
pub const BRANCH_GT: &str = ">";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InductionError {
    #[error("class distribution is empty")]
    EmptyDistribution,
    #[error("no attribute named `{0}`")]
    NoSuchAttribute(String),
    #[error("attribute `{0}` is not categorical")]
    NotCategorical(String),
    #[error("attribute `{0}` is not continuous")]
    NotContinuous(String),
    #[error("attribute `{0}` has fewer than two distinct known values")]
    TooFewDistinctValues(String),
    #[error("training dataset has no labeled rows")]
    EmptyDataset,
    #[error("row {row}: missing value for `{attribute}`")]
    MissingValuesPresent { row: usize, attribute: String },
    #[error("attribute `{0}` is the class label and cannot be a feature")]
    ClassAttributeAsFeature(String),
    #[error("record has no attribute `{0}`")]
    MissingFeature(String),
    #[error("attribute `{attribute}` has a value of the wrong type for its test")]
    FeatureType { attribute: String },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Algorithm {
    #[cfg_attr(feature = "serde", serde(rename = "ID3"))]
    Id3,
    #[cfg_attr(feature = "serde", serde(rename = "C45"))]
    C45,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Id3 => "ID3",
            Algorithm::C45 => "C45",
        }
    }

    /// Accepts `ID3`, `C45` and `C4.5` in any case.
    pub fn parse(s: &str) -> Option<Algorithm> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("id3") {
            Some(Algorithm::Id3)
        } else if s.eq_ignore_ascii_case("c45") || s.eq_ignore_ascii_case("c4.5") {
            Some(Algorithm::C45)
        } else {
            None
        }
    }
}

impl core::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs for tree growth. Entropies are always in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub min_leaf_size: usize,
    pub prune: bool,
    pub confidence_factor: f64,
}

impl TrainConfig {
    pub fn id3() -> Self {
        TrainConfig {
            min_leaf_size: 1,
            prune: false,
            confidence_factor: 0.25,
        }
    }

    pub fn c45() -> Self {
        TrainConfig {
            min_leaf_size: 2,
            prune: true,
            confidence_factor: 0.25,
        }
    }

    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Id3 => Self::id3(),
            Algorithm::C45 => Self::c45(),
        }
    }

    pub fn validate(&self) -> Result<(), InductionError> {
        if self.min_leaf_size < 1 {
            return Err(InductionError::InvalidConfig("min_leaf_size must be at least 1"));
        }
        if !(self.confidence_factor > 0.0 && self.confidence_factor < 1.0) {
            return Err(InductionError::InvalidConfig(
                "confidence_factor must lie strictly between 0 and 1",
            ));
        }
        Ok(())
    }
}

/// Test applied at an internal node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum SplitTest {
    Categorical { attribute: String },
    Continuous { attribute: String, threshold: f64 },
}

impl SplitTest {
    pub fn categorical<S: Into<String>>(attribute: S) -> Self {
        SplitTest::Categorical {
            attribute: attribute.into(),
        }
    }

    pub fn continuous<S: Into<String>>(attribute: S, threshold: f64) -> Self {
        SplitTest::Continuous {
            attribute: attribute.into(),
            threshold,
        }
    }

    pub fn attribute(&self) -> &str {
        match self {
            SplitTest::Categorical { attribute } | SplitTest::Continuous { attribute, .. } => {
                attribute
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum TreeNode {
    Leaf {
        label: String,
        distribution: ClassDistribution,
    },
    Internal {
        test: SplitTest,
        branches: BTreeMap<String, TreeNode>,
        fallback_label: String,
        /// Training rows that reached this node, by class.
        distribution: ClassDistribution,
    },
}

impl TreeNode {
    pub fn leaf<S: Into<String>>(label: S, distribution: ClassDistribution) -> Self {
        TreeNode::Leaf {
            label: label.into(),
            distribution,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn distribution(&self) -> &ClassDistribution {
        match self {
            TreeNode::Leaf { distribution, .. } | TreeNode::Internal { distribution, .. } => {
                distribution
            }
        }
    }

    /// Label predicted at this node when traversal stops here.
    pub fn label(&self) -> &str {
        match self {
            TreeNode::Leaf { label, .. } => label,
            TreeNode::Internal { fallback_label, .. } => fallback_label,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { branches, .. } => branches.values().map(TreeNode::leaf_count).sum(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { branches, .. } => {
                1 + branches.values().map(TreeNode::node_count).sum::<usize>()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { branches, .. } => {
                1 + branches.values().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeStats {
    pub training_rows: usize,
    pub node_count: usize,
    pub leaf_count: usize,
}

/// A trained tree together with everything needed to apply and persist it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainedModel {
    pub algorithm: Algorithm,
    pub root: TreeNode,
    pub schema: Schema,
    /// Candidate features in the order they were offered to training.
    pub features: Vec<String>,
    pub config: TrainConfig,
    pub stats: TreeStats,
}

impl TrainedModel {
    pub fn new(
        algorithm: Algorithm,
        root: TreeNode,
        schema: Schema,
        features: Vec<String>,
        config: TrainConfig,
        training_rows: usize,
    ) -> Self {
        let stats = TreeStats {
            training_rows,
            node_count: root.node_count(),
            leaf_count: root.leaf_count(),
        };
        TrainedModel {
            algorithm,
            root,
            schema,
            features,
            config,
            stats,
        }
    }

    pub fn classify<S: FeatureSource + ?Sized>(
        &self,
        record: &S,
    ) -> Result<Classification, InductionError> {
        classify(&self.root, record)
    }

    /// Checks the structural invariants a deserialized model must satisfy.
    pub fn validate(&self) -> Result<(), InductionError> {
        self.config.validate()?;
        if self.stats.node_count != self.root.node_count()
            || self.stats.leaf_count != self.root.leaf_count()
        {
            return Err(InductionError::InvalidModel(
                "stats disagree with the tree".to_string(),
            ));
        }
        for f in &self.features {
            if self.schema.index_of(f).is_none() {
                return Err(InductionError::NoSuchAttribute(f.clone()));
            }
        }
        validate_node(&self.root, &self.schema)
    }
}

fn validate_node(node: &TreeNode, schema: &Schema) -> Result<(), InductionError> {
    let TreeNode::Internal {
        test,
        branches,
        fallback_label,
        distribution,
    } = node
    else {
        return Ok(());
    };
    let attr = schema
        .attribute(test.attribute())
        .ok_or_else(|| InductionError::NoSuchAttribute(test.attribute().to_string()))?;
    match test {
        SplitTest::Categorical { attribute } => {
            let AttributeKind::Categorical { domain } = &attr.kind else {
                return Err(InductionError::NotCategorical(attribute.clone()));
            };
            if branches.is_empty() {
                return Err(InductionError::InvalidModel(format!(
                    "categorical node on `{attribute}` has no branches"
                )));
            }
            if let Some(key) = branches.keys().find(|k| !domain.contains(k)) {
                return Err(InductionError::InvalidModel(format!(
                    "branch `{key}` is outside the domain of `{attribute}`"
                )));
            }
        }
        SplitTest::Continuous {
            attribute,
            threshold,
        } => {
            if !attr.kind.is_continuous() {
                return Err(InductionError::NotContinuous(attribute.clone()));
            }
            if !threshold.is_finite() {
                return Err(InductionError::InvalidModel(format!(
                    "non-finite threshold on `{attribute}`"
                )));
            }
            if branches.len() != 2
                || !branches.contains_key(BRANCH_LE)
                || !branches.contains_key(BRANCH_GT)
            {
                return Err(InductionError::InvalidModel(format!(
                    "continuous node on `{attribute}` must have exactly `<=` and `>` branches"
                )));
            }
        }
    }
    if distribution.total() > 0.0 && distribution.majority() != Some(fallback_label.as_str()) {
        return Err(InductionError::InvalidModel(format!(
            "fallback `{fallback_label}` is not the node majority"
        )));
    }
    branches
        .values()
        .try_for_each(|child| validate_node(child, schema))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum StepOutcome {
    /// Followed the branch with this key.
    Branch(String),
    /// No branch matched (unseen or missing value); the node's fallback was used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathStep {
    pub test: SplitTest,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    pub path: Vec<PathStep>,
}

/// Walks the tree from `root`. A categorical value without a branch, or a
/// present-but-missing value, ends the walk at that node's fallback label.
pub fn classify<S: FeatureSource + ?Sized>(
    root: &TreeNode,
    record: &S,
) -> Result<Classification, InductionError> {
    let mut node = root;
    let mut path = Vec::new();
    loop {
        let (test, branches, fallback_label) = match node {
            TreeNode::Leaf { label, .. } => {
                return Ok(Classification {
                    label: label.clone(),
                    path,
                })
            }
            TreeNode::Internal {
                test,
                branches,
                fallback_label,
                ..
            } => (test, branches, fallback_label),
        };
        let value = record
            .feature(test.attribute())
            .ok_or_else(|| InductionError::MissingFeature(test.attribute().to_string()))?;
        let key: Option<&str> = match (test, value) {
            (_, FeatureValue::Missing) => None,
            (SplitTest::Categorical { .. }, FeatureValue::Text(v)) => {
                branches.get_key_value(v).map(|(k, _)| k.as_str())
            }
            (SplitTest::Continuous { threshold, .. }, FeatureValue::Number(x)) => {
                Some(continuous_branch(x, *threshold))
            }
            (SplitTest::Continuous { threshold, attribute }, FeatureValue::Text(s)) => {
                let x: f64 = s.trim().parse().map_err(|_| InductionError::FeatureType {
                    attribute: attribute.clone(),
                })?;
                Some(continuous_branch(x, *threshold))
            }
            (SplitTest::Categorical { attribute }, FeatureValue::Number(_)) => {
                return Err(InductionError::FeatureType {
                    attribute: attribute.clone(),
                })
            }
        };
        match key.and_then(|k| branches.get(k).map(|child| (k, child))) {
            Some((k, child)) => {
                path.push(PathStep {
                    test: test.clone(),
                    outcome: StepOutcome::Branch(k.to_string()),
                });
                node = child;
            }
            None => {
                path.push(PathStep {
                    test: test.clone(),
                    outcome: StepOutcome::Fallback,
                });
                return Ok(Classification {
                    label: fallback_label.clone(),
                    path,
                });
            }
        }
    }
}

fn continuous_branch(x: f64, threshold: f64) -> &'static str {
    if x <= threshold {
        BRANCH_LE
    } else {
        BRANCH_GT
    }
}
