use thiserror::Error;

use crate::dataset::Group;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no observations supplied")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite value {value} in cluster `{cluster}`")]
    NonFinite { cluster: String, value: f64 },

    #[error("group token `{0}` is not one of 1, 2")]
    BadGroup(String),

    #[error("group {0} has no observations; no between-group comparison is possible")]
    MissingGroup(Group),

    #[error("cluster `{cluster}` has no members in group {group}")]
    EmptyGroupInCluster { cluster: String, group: Group },

    #[error("no cross-cluster comparisons possible (E[m1* m2*] = 0)")]
    NoComparisons,

    #[error("degenerate resample: only one group drawn")]
    DegenerateResample,

    #[error("degenerate variance estimate ({0}); test statistic undefined")]
    DegenerateVariance(f64),

    #[error("negative {method} variance estimate {value}; the resampling variance exceeded the averaged two-sample variance, test unavailable")]
    NegativeVariance { method: &'static str, value: f64 },

    #[error("only {usable} usable resamples, at least {required} required")]
    InsufficientDraws { usable: usize, required: usize },

    #[error("resample enumeration needs {tuples} tuples, cap is {cap}")]
    EnumerationCap { tuples: u128, cap: u128 },

    #[error("covariance matrix for (m1 = {m1}, m2 = {m2}) is not positive definite")]
    NotPositiveDefinite { m1: usize, m2: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}
