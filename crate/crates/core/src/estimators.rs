//! Point estimators of the WMW effect `p = P(X1 < X2) + ½ P(X1 = X2)` for
//! clustered data.
//!
//! The within-cluster resampling (WCR) estimator picks one observation per
//! cluster, computes the two-sample Mann-Whitney effect on that resample, and
//! averages over the resampling distribution. [`p_tilde`] is the closed form
//! obtained by averaging `U*` and `m1* m2*` separately; [`p_hat_mc`] is the
//! Monte Carlo average of `p̂*` itself.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClusteredDataset, Group};
use crate::empirical::{cross_integral, group_ecdf, kernel_h, normalized_ecdf, Weighting};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub const DEFAULT_MC_RESAMPLES: usize = 10_000;
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    PTilde,
    PHatMc,
    PHatStar,
    IgnorableUnweighted,
    IgnorableWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub value: f64,
    pub method: EstimatorKind,
    pub resamples_used: usize,
    pub resamples_discarded: usize,
    pub seed: Option<u64>,
    /// Monte Carlo standard error, for resampling estimators.
    pub mc_std_error: Option<f64>,
}

impl EffectEstimate {
    fn exact(value: f64, method: EstimatorKind) -> Self {
        EffectEstimate {
            value,
            method,
            resamples_used: 0,
            resamples_discarded: 0,
            seed: None,
            mc_std_error: None,
        }
    }
}

/// One observation selected from every cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleDraw {
    picks: Vec<(f64, Group)>,
    m2_star: usize,
}

impl ResampleDraw {
    pub fn from_picks(picks: Vec<(f64, Group)>) -> Self {
        let m2_star = picks.iter().filter(|(_, g)| *g == Group::Two).count();
        ResampleDraw { picks, m2_star }
    }

    pub fn picks(&self) -> &[(f64, Group)] {
        &self.picks
    }

    pub fn m1_star(&self) -> usize {
        self.picks.len() - self.m2_star
    }

    pub fn m2_star(&self) -> usize {
        self.m2_star
    }

    pub fn is_degenerate(&self) -> bool {
        self.m1_star() == 0 || self.m2_star == 0
    }

    pub fn values(&self, group: Group) -> Vec<f64> {
        self.picks
            .iter()
            .filter(|(_, g)| *g == group)
            .map(|(v, _)| *v)
            .collect()
    }
}

/// Selects one member uniformly from each cluster, independently across clusters.
pub fn draw_resample<R: Rng + ?Sized>(ds: &ClusteredDataset, rng: &mut R) -> ResampleDraw {
    let picks = ds
        .clusters()
        .iter()
        .map(|c| c.members()[rng.random_range(0..c.m())])
        .collect();
    ResampleDraw::from_picks(picks)
}

/// Midranks (average ranks for ties), 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Mann-Whitney `U* = Σ g_i R_i − m2*(m2*+1)/2` of a resample.
pub fn u_star(draw: &ResampleDraw) -> f64 {
    let values: Vec<f64> = draw.picks.iter().map(|(v, _)| *v).collect();
    let ranks = midranks(&values);
    let m2 = draw.m2_star as f64;
    let rank_sum: f64 = draw
        .picks
        .iter()
        .zip(&ranks)
        .filter(|((_, g), _)| *g == Group::Two)
        .map(|(_, r)| r)
        .sum();
    rank_sum - m2 * (m2 + 1.0) / 2.0
}

/// Two-sample effect `U* / (m1* m2*)` of a single resample.
pub fn p_hat_star(draw: &ResampleDraw) -> Result<EffectEstimate> {
    if draw.is_degenerate() {
        return Err(Error::DegenerateResample);
    }
    let value = u_star(draw) / (draw.m1_star() * draw.m2_star()) as f64;
    Ok(EffectEstimate::exact(value, EstimatorKind::PHatStar))
}

/// `Σ_i α_i Σ_{j≠i} (1/m_j) Σ_k F̂_{2i}(X_jk)`, the data-dependent part of `E(U*)`.
fn weighted_placement_sum(ds: &ClusteredDataset) -> f64 {
    let clusters = ds.clusters();
    let mut total = 0.0;
    for &i in ds.clusters_with(Group::Two) {
        let ci = &clusters[i];
        let g2 = ci.values(Group::Two);
        let mut inner = 0.0;
        for (j, cj) in clusters.iter().enumerate() {
            if j == i {
                continue;
            }
            let s: f64 = cj
                .members()
                .iter()
                .map(|&(x, _)| normalized_ecdf(g2, x))
                .sum();
            inner += s / cj.m() as f64;
        }
        total += ci.alpha() * inner;
    }
    total
}

/// Exact `E(U* | X, g)` over the resampling distribution.
pub fn e_u_star(ds: &ClusteredDataset) -> f64 {
    let n = ds.n() as f64;
    let alphas = ds.alphas();
    let sum_a: f64 = alphas.iter().sum();
    let sum_a1a: f64 = alphas.iter().map(|a| a * (1.0 - a)).sum();
    n * sum_a - weighted_placement_sum(ds) - 0.5 * (sum_a1a + sum_a * sum_a + sum_a)
}

/// Exact `E(m1* m2* | X, g) = Σ_i Σ_{j≠i} α_i (1 − α_j)`.
pub fn e_m1m2(ds: &ClusteredDataset) -> f64 {
    let alphas = ds.alphas();
    let sum_a: f64 = alphas.iter().sum();
    let sum_b: f64 = alphas.iter().map(|a| 1.0 - a).sum();
    let diag: f64 = alphas.iter().map(|a| a * (1.0 - a)).sum();
    // Clamp away the rounding residue when the true value is zero.
    (sum_a * sum_b - diag).max(0.0)
}

fn comparisons(ds: &ClusteredDataset) -> Result<f64> {
    let d = e_m1m2(ds);
    if d <= 0.0 {
        Err(Error::NoComparisons)
    } else {
        Ok(d)
    }
}

/// Closed-form WCR estimator `E(U*) / E(m1* m2*)`.
pub fn p_tilde(ds: &ClusteredDataset) -> Result<EffectEstimate> {
    let d = comparisons(ds)?;
    let n = ds.n() as f64;
    let sum_a: f64 = ds.alphas().iter().sum();
    let value = 0.5 + ((n - 1.0) / 2.0 * sum_a - weighted_placement_sum(ds)) / d;
    Ok(EffectEstimate::exact(
        value.clamp(0.0, 1.0),
        EstimatorKind::PTilde,
    ))
}

/// Pairwise form of `p̃`: a weighted average of `∫ F̂_{1i} dF̂_{2j}` over
/// cross-cluster pairs `(i, j)`, weights `(1 − α_i) α_j`.
pub fn p_tilde_altform(ds: &ClusteredDataset) -> Result<f64> {
    let d = comparisons(ds)?;
    let clusters = ds.clusters();
    let mut total = 0.0;
    for &i in ds.clusters_with(Group::One) {
        let ci = &clusters[i];
        for &j in ds.clusters_with(Group::Two) {
            if i == j {
                continue;
            }
            let cj = &clusters[j];
            total += (1.0 - ci.alpha())
                * cj.alpha()
                * cross_integral(ci.values(Group::One), cj.values(Group::Two));
        }
    }
    Ok(total / d)
}

/// Monte Carlo average of `p̂*` over `q` resamples. Degenerate resamples
/// (one group only) are skipped and counted in `resamples_discarded`.
pub fn p_hat_mc(ds: &ClusteredDataset, q: usize, seed: u64) -> Result<EffectEstimate> {
    if q == 0 {
        return Err(Error::InvalidArgument("resample count must be ≥ 1".into()));
    }
    if e_m1m2(ds) <= 0.0 {
        return Err(Error::NoComparisons);
    }
    let mut rng = rng_from_seed(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut used = 0usize;
    for _ in 0..q {
        let draw = draw_resample(ds, &mut rng);
        if let Ok(est) = p_hat_star(&draw) {
            sum += est.value;
            sum_sq += est.value * est.value;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InsufficientDraws {
            usable: 0,
            required: 1,
        });
    }
    let mean = sum / used as f64;
    let mc_std_error = (used > 1).then(|| {
        let var = ((sum_sq - used as f64 * mean * mean) / (used - 1) as f64).max(0.0);
        (var / used as f64).sqrt()
    });
    Ok(EffectEstimate {
        value: mean,
        method: EstimatorKind::PHatMc,
        resamples_used: used,
        resamples_discarded: q - used,
        seed: Some(seed),
        mc_std_error,
    })
}

/// Exact moments of the resampling distribution, by full enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleExpectations {
    pub e_u_star: f64,
    pub e_m1m2: f64,
    /// `E[p̂* | non-degenerate]`; `None` if every tuple is degenerate.
    pub e_p_hat_star: Option<f64>,
    /// Probability of drawing a non-degenerate resample.
    pub nondegenerate_mass: f64,
    pub tuples: u128,
}

/// Iterates every one-per-cluster tuple (each with probability `1 / Π m_i`).
/// Test oracle: refuses when `Π m_i` exceeds `cap`.
pub fn enumerate_resample_expectations(
    ds: &ClusteredDataset,
    cap: u128,
) -> Result<ResampleExpectations> {
    let sizes: Vec<usize> = ds.clusters().iter().map(|c| c.m()).collect();
    let tuples = sizes
        .iter()
        .try_fold(1u128, |acc, &m| acc.checked_mul(m as u128))
        .unwrap_or(u128::MAX);
    if tuples > cap {
        return Err(Error::EnumerationCap { tuples, cap });
    }
    let mut index = vec![0usize; sizes.len()];
    let (mut sum_u, mut sum_m, mut sum_p) = (0.0, 0.0, 0.0);
    let mut nondegenerate = 0u128;
    loop {
        let picks: Vec<(f64, Group)> = index
            .iter()
            .zip(ds.clusters())
            .map(|(&k, c)| c.members()[k])
            .collect();
        // Direct double sum over (group-1, group-2) pairs.
        let mut u = 0.0;
        let (mut m1, mut m2) = (0usize, 0usize);
        for &(x, gx) in &picks {
            match gx {
                Group::One => {
                    m1 += 1;
                    for &(y, gy) in &picks {
                        if gy == Group::Two {
                            u += kernel_h(x, y);
                        }
                    }
                }
                Group::Two => m2 += 1,
            }
        }
        sum_u += u;
        sum_m += (m1 * m2) as f64;
        if m1 * m2 > 0 {
            sum_p += u / (m1 * m2) as f64;
            nondegenerate += 1;
        }

        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == index.len() {
                let total = tuples as f64;
                return Ok(ResampleExpectations {
                    e_u_star: sum_u / total,
                    e_m1m2: sum_m / total,
                    e_p_hat_star: (nondegenerate > 0).then(|| sum_p / nondegenerate as f64),
                    nondegenerate_mass: nondegenerate as f64 / total,
                    tuples,
                });
            }
            index[pos] += 1;
            if index[pos] < sizes[pos] {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Baseline estimator `∫ G1 dG2` that ignores cluster-size informativeness.
pub fn p_ignorable(ds: &ClusteredDataset, weighting: Weighting) -> Result<EffectEstimate> {
    let g1 = |x: f64| group_ecdf(ds, Group::One, weighting, x);
    let value = match weighting {
        Weighting::Unweighted => {
            let r2 = ds.clusters_with(Group::Two);
            let mut total = 0.0;
            for &j in r2 {
                let values = ds.cluster(j).values(Group::Two);
                let mut s = 0.0;
                for &x in values {
                    s += g1(x)?;
                }
                total += s / values.len() as f64;
            }
            total / r2.len() as f64
        }
        Weighting::Weighted => {
            let mut total = 0.0;
            for &j in ds.clusters_with(Group::Two) {
                for &x in ds.cluster(j).values(Group::Two) {
                    total += g1(x)?;
                }
            }
            total / ds.total(Group::Two) as f64
        }
    };
    let kind = match weighting {
        Weighting::Unweighted => EstimatorKind::IgnorableUnweighted,
        Weighting::Weighted => EstimatorKind::IgnorableWeighted,
    };
    Ok(EffectEstimate::exact(value, kind))
}
