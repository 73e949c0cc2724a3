//! Variance estimation, test statistics and confidence intervals for the WMW
//! effect under within-cluster resampling.
//!
//! * [`var_tilde`]: analytic ratio-consistent variance of `p̃`, built from the
//!   per-cluster projection estimates `Ŵ_l − Ê(W_l)`.
//! * [`df_hat`]: Satterthwaite-type degrees of freedom for the t approximation.
//! * [`hoffman_variance`]: Monte Carlo variance of `p̃` via the law of total
//!   variance over resamples.
//! * [`z_star_test`], [`z_hat_test`]: tests based on a single resample and on
//!   the Monte Carlo WCR average, respectively.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::dataset::{ClusterKind, ClusteredDataset, Group};
use crate::empirical::{group_ecdf, whole_cluster_ecdf, Weighting};
use crate::error::{Error, Result};
use crate::estimators::{
    draw_resample, e_m1m2, midranks, p_hat_star, p_tilde, u_star, EffectEstimate, EstimatorKind,
    ResampleDraw,
};
use crate::seed::rng_from_seed;

pub const DEFAULT_HOFFMAN_RESAMPLES: usize = 1_000;
pub const DEFAULT_STAR_RETRIES: usize = 100;
const ROUNDING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Analytic,
    Hoffman,
    McPHat,
    BmSingleDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub method: VarianceMethod,
    pub resamples_used: usize,
    pub resamples_discarded: usize,
    /// `(piece1, piece2)` of the Monte Carlo variants; value is their scaled difference.
    pub components: Option<(f64, f64)>,
    /// Per-cluster `V̂_l = (Ŵ_l − Ê(W_l))²`, analytic method only.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_cluster: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    StandardNormal,
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub estimate: EffectEstimate,
    pub variance: VarianceEstimate,
    pub statistic: f64,
    pub reference: Reference,
    /// Present iff `reference` is Student t.
    pub df: Option<f64>,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha: f64,
    /// Two-sided critical value `q_{1−α/2}` of the reference distribution.
    pub critical: f64,
}

impl InferenceResult {
    /// Normal-reference test of `p = ½` and the matching `1 − α` interval.
    pub fn normal(
        estimate: EffectEstimate,
        variance: VarianceEstimate,
        alpha: f64,
    ) -> Result<Self> {
        let reference = Normal::standard();
        Self::assemble(
            estimate,
            variance,
            alpha,
            Reference::StandardNormal,
            None,
            |q| reference.inverse_cdf(q),
            |z| 2.0 * reference.sf(z),
        )
    }

    /// Student-t reference with `df` degrees of freedom.
    pub fn student_t(
        estimate: EffectEstimate,
        variance: VarianceEstimate,
        df: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(df > 0.0) || !df.is_finite() {
            return Err(Error::InvalidArgument(format!("degrees of freedom {df}")));
        }
        let reference =
            StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::assemble(
            estimate,
            variance,
            alpha,
            Reference::StudentT,
            Some(df),
            |q| reference.inverse_cdf(q),
            |t| 2.0 * reference.sf(t),
        )
    }

    fn assemble(
        estimate: EffectEstimate,
        variance: VarianceEstimate,
        alpha: f64,
        reference: Reference,
        df: Option<f64>,
        quantile: impl Fn(f64) -> f64,
        two_sided_p: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(variance.value > 0.0) || !variance.value.is_finite() {
            return Err(Error::DegenerateVariance(variance.value));
        }
        let se = variance.value.sqrt();
        let critical = quantile(1.0 - alpha / 2.0);
        let statistic = (estimate.value - 0.5) / se;
        let p_value = two_sided_p(statistic.abs()).clamp(0.0, 1.0);
        Ok(InferenceResult {
            ci_lower: estimate.value - critical * se,
            ci_upper: estimate.value + critical * se,
            estimate,
            variance,
            statistic,
            reference,
            df,
            p_value,
            alpha,
            critical,
        })
    }

    /// Rejects `p = ½` at level `alpha`, i.e. ½ lies outside the open interval.
    pub fn rejects(&self) -> bool {
        !(self.ci_lower < 0.5 && 0.5 < self.ci_upper)
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci_lower < target && target < self.ci_upper
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_upper - self.ci_lower) / 2.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )))
    }
}

/// `Ŵ_l`: plug-in projection term of cluster `l`. `G2` is the unweighted
/// group-2 ECDF and `F̂_j` the whole-cluster ECDF of cluster `j`.
pub fn w_hat(ds: &ClusteredDataset, l: usize) -> f64 {
    let n = ds.n() as f64;
    let cl = ds.cluster(l);
    let other_alpha: f64 = ds
        .clusters_with(Group::Two)
        .iter()
        .filter(|&&i| i != l)
        .map(|&i| ds.cluster(i).alpha())
        .sum();
    let g2_sum: f64 = cl
        .members()
        .iter()
        .map(|&(x, _)| {
            group_ecdf(ds, Group::Two, Weighting::Unweighted, x)
                .expect("validated dataset has group-2 data")
        })
        .sum();
    let mut second = 0.0;
    if cl.contains(Group::Two) {
        for &x in cl.values(Group::Two) {
            for (j, cj) in ds.clusters().iter().enumerate() {
                if j != l {
                    second += whole_cluster_ecdf(cj, x);
                }
            }
        }
    }
    (other_alpha * g2_sum - second) / (cl.m() as f64 * (n + 1.0))
}

/// `Ê(W_l)` given the point estimate `p̃`.
pub fn e_w_hat(ds: &ClusteredDataset, l: usize, ptilde: f64) -> f64 {
    let n = ds.n() as f64;
    let alpha_l = ds.cluster(l).alpha();
    let other_alpha: f64 = ds
        .clusters_with(Group::Two)
        .iter()
        .filter(|&&i| i != l)
        .map(|&i| ds.cluster(i).alpha())
        .sum();
    let first = ((1.0 - alpha_l) * (1.0 - ptilde) + alpha_l / 2.0) * other_alpha;
    let second = if ds.cluster(l).contains(Group::Two) {
        let s: f64 = ds
            .clusters()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != l)
            .map(|(_, cj)| (1.0 - cj.alpha()) * ptilde + cj.alpha() / 2.0)
            .sum();
        alpha_l * s
    } else {
        0.0
    };
    (first - second) / (n + 1.0)
}

/// Ratio-consistent analytic variance of `p̃`.
pub fn var_tilde(ds: &ClusteredDataset) -> Result<VarianceEstimate> {
    let ptilde = p_tilde(ds)?.value;
    var_tilde_at(ds, ptilde)
}

fn var_tilde_at(ds: &ClusteredDataset, ptilde: f64) -> Result<VarianceEstimate> {
    let d = e_m1m2(ds);
    if d <= 0.0 {
        return Err(Error::NoComparisons);
    }
    let n = ds.n() as f64;
    let per_cluster: Vec<f64> = (0..ds.n())
        .map(|l| {
            let (w, e) = (w_hat(ds, l), e_w_hat(ds, l, ptilde));
            // Differences at rounding level are exact zeros, not tiny variances.
            let scale = w.abs().max(e.abs()).max(1.0 / (n + 1.0));
            let d = w - e;
            if d.abs() <= ROUNDING_TOLERANCE * scale {
                0.0
            } else {
                d * d
            }
        })
        .collect();
    let scale = (ds.n() as f64 + 1.0) / d;
    let value = scale * scale * per_cluster.iter().sum::<f64>();
    Ok(VarianceEstimate {
        value,
        method: VarianceMethod::Analytic,
        resamples_used: 0,
        resamples_discarded: 0,
        components: None,
        per_cluster,
    })
}

/// Satterthwaite-type degrees of freedom from per-cluster `V̂` values, pooled
/// by cluster type. Cells with fewer than two clusters use denominator 1.
pub fn df_hat(vhat: &[f64], kinds: &[ClusterKind]) -> Result<f64> {
    if vhat.len() != kinds.len() {
        return Err(Error::InvalidArgument(
            "V̂ vector and cluster kinds differ in length".into(),
        ));
    }
    let cells = [
        ClusterKind::IncompleteOne,
        ClusterKind::IncompleteTwo,
        ClusterKind::Complete,
    ];
    let total: f64 = vhat.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateVariance(total));
    }
    let mut denom = 0.0;
    for cell in cells {
        let (sum, count) = vhat
            .iter()
            .zip(kinds)
            .filter(|(_, k)| **k == cell)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        let dof = if count >= 2 { (count - 1) as f64 } else { 1.0 };
        denom += sum * sum / dof;
    }
    Ok(total * total / denom)
}

/// `Z̃ = (p̃ − ½) / √Var̂(p̃)` with a normal reference.
pub fn z_tilde_test(ds: &ClusteredDataset, alpha: f64) -> Result<InferenceResult> {
    let estimate = p_tilde(ds)?;
    let variance = var_tilde_at(ds, estimate.value)?;
    InferenceResult::normal(estimate, variance, alpha)
}

/// `T̃`: the `Z̃` statistic referred to Student t with `ν̂` degrees of freedom.
pub fn t_tilde_test(ds: &ClusteredDataset, alpha: f64) -> Result<InferenceResult> {
    let estimate = p_tilde(ds)?;
    let variance = var_tilde_at(ds, estimate.value)?;
    let df = df_hat(&variance.per_cluster, &ds.kinds())?;
    InferenceResult::student_t(estimate, variance, df, alpha)
}

/// Both analytic tests from one variance computation.
pub fn tilde_tests(
    ds: &ClusteredDataset,
    alpha: f64,
) -> Result<(InferenceResult, InferenceResult)> {
    let estimate = p_tilde(ds)?;
    let variance = var_tilde_at(ds, estimate.value)?;
    let df = df_hat(&variance.per_cluster, &ds.kinds())?;
    let z = InferenceResult::normal(estimate.clone(), variance.clone(), alpha)?;
    let t = InferenceResult::student_t(estimate, variance, df, alpha)?;
    Ok((z, t))
}

/// Normalized placements of each group's picks within the other group:
/// `F̂₂*(X_k)` for group-1 picks and `F̂₁*(X_h)` for group-2 picks.
pub fn placements(draw: &ResampleDraw) -> (Vec<f64>, Vec<f64>) {
    let g1 = draw.values(Group::One);
    let g2 = draw.values(Group::Two);
    let pooled: Vec<f64> = g1.iter().chain(&g2).copied().collect();
    let pooled_ranks = midranks(&pooled);
    let r1 = midranks(&g1);
    let r2 = midranks(&g2);
    let (m1, m2) = (g1.len() as f64, g2.len() as f64);
    let p1 = (0..g1.len())
        .map(|k| (pooled_ranks[k] - r1[k]) / m2)
        .collect();
    let p2 = (0..g2.len())
        .map(|h| (pooled_ranks[g1.len() + h] - r2[h]) / m1)
        .collect();
    (p1, p2)
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Two-independent-sample variance of `p̂*` from one resample:
/// `S₁²/m₁* + S₂²/m₂*`, `S_g²` the sample variance of group `g`'s placements.
pub fn bm_variance_single_draw(draw: &ResampleDraw) -> Result<VarianceEstimate> {
    let (m1, m2) = (draw.m1_star(), draw.m2_star());
    if m1 < 2 || m2 < 2 {
        return Err(Error::DegenerateResample);
    }
    let (p1, p2) = placements(draw);
    let value = sample_variance(&p1) / m1 as f64 + sample_variance(&p2) / m2 as f64;
    Ok(VarianceEstimate {
        value,
        method: VarianceMethod::BmSingleDraw,
        resamples_used: 1,
        resamples_discarded: 0,
        components: None,
        per_cluster: Vec::new(),
    })
}

/// `Ẑ* = (p̂* − ½)/σ̂*` from a single resample drawn with `seed`. Resamples with
/// fewer than two picks in a group are redrawn up to `DEFAULT_STAR_RETRIES` times.
pub fn z_star_test(ds: &ClusteredDataset, alpha: f64, seed: u64) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    if e_m1m2(ds) <= 0.0 {
        return Err(Error::NoComparisons);
    }
    let mut rng = rng_from_seed(seed);
    for attempt in 1..=DEFAULT_STAR_RETRIES {
        let draw = draw_resample(ds, &mut rng);
        let Ok(mut variance) = bm_variance_single_draw(&draw) else {
            continue;
        };
        let mut estimate = p_hat_star(&draw)?;
        estimate.seed = Some(seed);
        estimate.resamples_used = 1;
        estimate.resamples_discarded = attempt - 1;
        variance.resamples_discarded = attempt - 1;
        return InferenceResult::normal(estimate, variance, alpha);
    }
    Err(Error::InsufficientDraws {
        usable: 0,
        required: 1,
    })
}

/// Per-resample quantities shared by the Hoffman and `Ẑ` variance estimators.
struct ResampleMoments {
    /// Mean of `p̂*` over all non-degenerate draws.
    p_hat: f64,
    p_hat_draws: usize,
    /// Draws with at least two picks per group.
    usable: Vec<UsableDraw>,
    q: usize,
}

struct UsableDraw {
    u: f64,
    m1m2: f64,
    p_star: f64,
    sigma2: f64,
}

fn resample_moments(ds: &ClusteredDataset, q: usize, seed: u64) -> Result<ResampleMoments> {
    if q < 2 {
        return Err(Error::InvalidArgument(
            "at least 2 resamples required".into(),
        ));
    }
    if e_m1m2(ds) <= 0.0 {
        return Err(Error::NoComparisons);
    }
    let mut rng = rng_from_seed(seed);
    let mut p_sum = 0.0;
    let mut p_hat_draws = 0;
    let mut usable = Vec::with_capacity(q);
    for _ in 0..q {
        let draw = draw_resample(ds, &mut rng);
        if draw.is_degenerate() {
            continue;
        }
        let m1m2 = (draw.m1_star() * draw.m2_star()) as f64;
        let u = u_star(&draw);
        p_sum += u / m1m2;
        p_hat_draws += 1;
        if let Ok(v) = bm_variance_single_draw(&draw) {
            usable.push(UsableDraw {
                u,
                m1m2,
                p_star: u / m1m2,
                sigma2: v.value,
            });
        }
    }
    let required = 2.max(q / 2);
    if usable.len() < required {
        return Err(Error::InsufficientDraws {
            usable: usable.len(),
            required,
        });
    }
    Ok(ResampleMoments {
        p_hat: p_sum / p_hat_draws as f64,
        p_hat_draws,
        usable,
        q,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn hoffman_from(ds: &ClusteredDataset, moments: &ResampleMoments) -> Result<VarianceEstimate> {
    let d = e_m1m2(ds);
    if d <= 0.0 {
        return Err(Error::NoComparisons);
    }
    // Averaged per-resample two-sample variance of U*.
    let piece1 = mean(moments.usable.iter().map(|r| r.m1m2 * r.m1m2 * r.sigma2));
    // Resampling variance of U* around its mean.
    let us: Vec<f64> = moments.usable.iter().map(|r| r.u).collect();
    let piece2 = sample_variance(&us);
    let value = (piece1 - piece2) / (d * d);
    if !(value > 0.0) {
        return Err(Error::NegativeVariance {
            method: "Hoffman-type",
            value,
        });
    }
    Ok(VarianceEstimate {
        value,
        method: VarianceMethod::Hoffman,
        resamples_used: moments.usable.len(),
        resamples_discarded: moments.q - moments.usable.len(),
        components: Some((piece1, piece2)),
        per_cluster: Vec::new(),
    })
}

/// Hoffman-type Monte Carlo variance of `p̃` from `q` resamples. A
/// non-positive estimate is an error, never a usable value.
pub fn hoffman_variance(ds: &ClusteredDataset, q: usize, seed: u64) -> Result<VarianceEstimate> {
    let moments = resample_moments(ds, q, seed)?;
    hoffman_from(ds, &moments)
}

/// `Z̃_H`: `p̃` standardized by the Hoffman-type variance.
pub fn z_h_test(ds: &ClusteredDataset, alpha: f64, q: usize, seed: u64) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let estimate = p_tilde(ds)?;
    let variance = hoffman_variance(ds, q, seed)?;
    InferenceResult::normal(estimate, variance, alpha)
}

/// Monte Carlo variance of `p̂`: mean single-draw variance minus the
/// resampling variance of `p̂*`.
fn mc_p_hat_variance(moments: &ResampleMoments) -> Result<VarianceEstimate> {
    let piece1 = mean(moments.usable.iter().map(|r| r.sigma2));
    let ps: Vec<f64> = moments.usable.iter().map(|r| r.p_star).collect();
    let piece2 = sample_variance(&ps);
    let value = piece1 - piece2;
    if !(value > 0.0) {
        return Err(Error::NegativeVariance {
            method: "Monte Carlo p-hat",
            value,
        });
    }
    Ok(VarianceEstimate {
        value,
        method: VarianceMethod::McPHat,
        resamples_used: moments.usable.len(),
        resamples_discarded: moments.q - moments.usable.len(),
        components: Some((piece1, piece2)),
        per_cluster: Vec::new(),
    })
}

/// `Ẑ`: Monte Carlo WCR estimate `p̂` with its Monte Carlo variance, both from
/// the same `q` resamples.
pub fn z_hat_test(
    ds: &ClusteredDataset,
    alpha: f64,
    q: usize,
    seed: u64,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let moments = resample_moments(ds, q, seed)?;
    let variance = mc_p_hat_variance(&moments)?;
    let estimate = EffectEstimate {
        value: moments.p_hat,
        method: EstimatorKind::PHatMc,
        resamples_used: moments.p_hat_draws,
        resamples_discarded: q - moments.p_hat_draws,
        seed: Some(seed),
        mc_std_error: None,
    };
    InferenceResult::normal(estimate, variance, alpha)
}

/// Hoffman and `Ẑ` results from one shared set of resamples.
pub fn resampling_tests(
    ds: &ClusteredDataset,
    alpha: f64,
    q: usize,
    seed: u64,
) -> Result<(Result<InferenceResult>, Result<InferenceResult>)> {
    check_alpha(alpha)?;
    let moments = resample_moments(ds, q, seed)?;
    let z_h = p_tilde(ds).and_then(|est| {
        let var = hoffman_from(ds, &moments)?;
        InferenceResult::normal(est, var, alpha)
    });
    let z_hat = mc_p_hat_variance(&moments).and_then(|var| {
        let est = EffectEstimate {
            value: moments.p_hat,
            method: EstimatorKind::PHatMc,
            resamples_used: moments.p_hat_draws,
            resamples_discarded: q - moments.p_hat_draws,
            seed: Some(seed),
            mc_std_error: None,
        };
        InferenceResult::normal(est, var, alpha)
    });
    Ok((z_h, z_hat))
}
