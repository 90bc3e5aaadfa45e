//! Decision-tree learning for student outcome prediction.
//!
//! The crate is `no_std` (with `alloc`) and carries everything that is pure
//! computation: the tabular data model, preprocessing of admission records
//! into discretized features, ID3 and C4.5 induction with pessimistic
//! pruning, evaluation arithmetic, and emission of trees as nested
//! conditionals. File formats, storage and networking live in the
//! `gradegauge` crate.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod codegen;
pub mod dataset;
pub mod distribution;
pub mod evaluation;
pub mod induction;
pub mod preprocess;

pub use dataset::{
    AttributeKind, AttributeSchema, CellValue, Dataset, DatasetError, Role, Row, Schema,
};
pub use distribution::ClassDistribution;
pub use induction::{
    Algorithm, InductionError, SplitTest, TrainConfig, TrainedModel, TreeNode, TreeStats,
};
