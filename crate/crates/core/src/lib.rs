//! Estimation and inference for the Wilcoxon-Mann-Whitney relative effect on
//! clustered two-group data, valid when cluster size is informative.

pub mod dataset;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod seed;
pub mod simulation;

pub use dataset::{Cluster, ClusterKind, ClusteredDataset, Group, Observation};
pub use error::{Error, Result};
