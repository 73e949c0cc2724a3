//! Tie-aware comparison kernel and normalized empirical distribution functions.
//!
//! Every function here uses the normalized (mid-point) ECDF, i.e. the average
//! of the left- and right-continuous versions, so an observation equal to the
//! evaluation point counts one half. Ties are exact floating-point equality.

use serde::{Deserialize, Serialize};

use crate::dataset::{Cluster, ClusteredDataset, Group};
use crate::error::{Error, Result};

/// `½[I(x < y) + I(x ≤ y)]`: 1 if `x < y`, ½ on a tie, 0 otherwise.
#[inline]
pub fn kernel_h(x: f64, y: f64) -> f64 {
    if x < y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

/// Normalized ECDF of an arbitrary sample evaluated at `x`.
pub fn normalized_ecdf(sample: &[f64], x: f64) -> f64 {
    debug_assert!(!sample.is_empty());
    sample.iter().map(|&v| kernel_h(v, x)).sum::<f64>() / sample.len() as f64
}

/// ECDF of the group-`group` members of cluster `c`.
pub fn within_cluster_ecdf(c: &Cluster, group: Group, x: f64) -> Result<f64> {
    let values = c.values(group);
    if values.is_empty() {
        return Err(Error::EmptyGroupInCluster {
            cluster: c.id().to_string(),
            group,
        });
    }
    Ok(normalized_ecdf(values, x))
}

/// ECDF over all `m` members of a cluster, regardless of group.
pub fn whole_cluster_ecdf(c: &Cluster, x: f64) -> f64 {
    c.members()
        .iter()
        .map(|&(v, _)| kernel_h(v, x))
        .sum::<f64>()
        / c.m() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every cluster contributes equally.
    Unweighted,
    /// Every observation contributes equally.
    Weighted,
}

/// Group-level ECDF `G_group` under the chosen weighting.
pub fn group_ecdf(
    ds: &ClusteredDataset,
    group: Group,
    weighting: Weighting,
    x: f64,
) -> Result<f64> {
    if ds.total(group) == 0 {
        return Err(Error::MissingGroup(group));
    }
    let members = ds.clusters_with(group);
    Ok(match weighting {
        Weighting::Unweighted => {
            members
                .iter()
                .map(|&i| normalized_ecdf(ds.cluster(i).values(group), x))
                .sum::<f64>()
                / members.len() as f64
        }
        Weighting::Weighted => {
            members
                .iter()
                .flat_map(|&i| ds.cluster(i).values(group))
                .map(|&v| kernel_h(v, x))
                .sum::<f64>()
                / ds.total(group) as f64
        }
    })
}

/// `∫ F_a dF_b` for two samples: the average of `kernel_h(a, b)` over all cross pairs.
pub fn cross_integral(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in a {
        for &y in b {
            s += kernel_h(x, y);
        }
    }
    s / (a.len() * b.len()) as f64
}
