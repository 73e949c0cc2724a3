//! Monte Carlo experiments: type I error, power and coverage of the tests.
//!
//! Replicate `r` of an experiment with master seed `s` uses the child seed
//! `derive_seed(s, r)`, split further into stream 0 (data generation), 1 (the
//! single-resample test) and 2 (the multi-resample tests). Results are
//! therefore identical for every worker count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::generate::ScenarioSampler;
use super::theory::theoretical_effects;
use crate::dataset::ClusteredDataset;
use crate::empirical::Weighting;
use crate::error::{Error, Result};
use crate::estimators::{p_ignorable, p_tilde};
use crate::inference::{
    resampling_tests, tilde_tests, z_h_test, z_hat_test, z_star_test, InferenceResult,
    DEFAULT_HOFFMAN_RESAMPLES,
};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `Z̃`: `p̃` with the analytic variance, normal reference.
    Tilde,
    /// `T̃`: as `Z̃` with the Student t reference.
    TildeT,
    /// `Ẑ*`: one resample.
    HatStar,
    /// `Ẑ`: Monte Carlo WCR average.
    Hat,
    /// `Z̃_H`: `p̃` with the Hoffman-type variance.
    Hoffman,
    /// Unweighted baseline `∫G1 dG2`, interval from the `Z̃` half-width.
    IgnorableU,
    /// Observation-weighted baseline, interval from the `Z̃` half-width.
    IgnorableW,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Tilde,
        Method::TildeT,
        Method::HatStar,
        Method::Hat,
        Method::Hoffman,
        Method::IgnorableU,
        Method::IgnorableW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tilde => "tilde",
            Method::TildeT => "tilde-t",
            Method::HatStar => "hat-star",
            Method::Hat => "hat",
            Method::Hoffman => "hoffman",
            Method::IgnorableU => "ignorable-u",
            Method::IgnorableW => "ignorable-w",
        }
    }

    pub fn is_ignorable(self) -> bool {
        matches!(self, Method::IgnorableU | Method::IgnorableW)
    }

    /// Parses a comma-separated list, dropping duplicates.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Resamples per replicate for `Ẑ`.
    pub hat_resamples: usize,
    /// Resamples per replicate for `Z̃_H`. When equal to `hat_resamples` both
    /// methods share one set of draws.
    pub hoffman_resamples: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            hat_resamples: DEFAULT_HOFFMAN_RESAMPLES,
            hoffman_resamples: DEFAULT_HOFFMAN_RESAMPLES,
            jobs: None,
        }
    }
}

/// How one method fared on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Test {
        estimate: f64,
        variance: f64,
        df: Option<f64>,
        ci_lower: f64,
        ci_upper: f64,
        discarded: usize,
    },
    NegativeVariance {
        estimate: Option<f64>,
    },
    Degenerate {
        estimate: Option<f64>,
    },
    Failed {
        message: String,
    },
}

impl Outcome {
    pub fn estimate(&self) -> Option<f64> {
        match self {
            Outcome::Test { estimate, .. } => Some(*estimate),
            Outcome::NegativeVariance { estimate } | Outcome::Degenerate { estimate } => *estimate,
            Outcome::Failed { .. } => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            Outcome::Test { variance, .. } => Some(*variance),
            _ => None,
        }
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        match self {
            Outcome::Test {
                ci_lower, ci_upper, ..
            } => Some((*ci_lower, *ci_upper)),
            _ => None,
        }
    }

    fn from_result(result: Result<InferenceResult>, fallback: Option<f64>) -> Self {
        match result {
            Ok(r) => Outcome::Test {
                estimate: r.estimate.value,
                variance: r.variance.value,
                df: r.df,
                ci_lower: r.ci_lower,
                ci_upper: r.ci_upper,
                discarded: r.variance.resamples_discarded,
            },
            Err(e) => Outcome::from_error(e, fallback),
        }
    }

    fn from_error(e: Error, estimate: Option<f64>) -> Self {
        match e {
            Error::NegativeVariance { .. } => Outcome::NegativeVariance { estimate },
            Error::DegenerateVariance(_)
            | Error::DegenerateResample
            | Error::InsufficientDraws { .. }
            | Error::NoComparisons => Outcome::Degenerate { estimate },
            other => Outcome::Failed {
                message: other.to_string(),
            },
        }
    }
}

/// All method outcomes of one replicate, in the order methods were requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub outcomes: Vec<(Method, Outcome)>,
}

impl ReplicateRecord {
    pub fn get(&self, method: Method) -> Option<&Outcome> {
        self.outcomes
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, o)| o)
    }
}

/// The dataset of replicate `index`.
pub fn replicate_dataset(
    sampler: &ScenarioSampler,
    master_seed: u64,
    index: usize,
) -> Result<ClusteredDataset> {
    let seed = derive_seed(derive_seed(master_seed, index as u64), 0);
    sampler.generate(&mut rng_from_seed(seed))
}

/// Runs the requested methods on one dataset. `seed` feeds the resampling
/// methods (stream 1 for `Ẑ*`, stream 2 for the multi-resample tests).
pub fn analyze_replicate(
    ds: &ClusteredDataset,
    methods: &[Method],
    alpha: f64,
    seed: u64,
    opts: &ExperimentOptions,
) -> Vec<(Method, Outcome)> {
    let needs_tilde = methods
        .iter()
        .any(|m| matches!(m, Method::Tilde | Method::TildeT) || m.is_ignorable());
    let tilde = needs_tilde.then(|| tilde_tests(ds, alpha));
    let p_tilde_value = || p_tilde(ds).ok().map(|e| e.value);

    let wants = |m: Method| methods.contains(&m);
    let resample_seed = derive_seed(seed, 2);
    let shared = (wants(Method::Hat)
        && wants(Method::Hoffman)
        && opts.hat_resamples == opts.hoffman_resamples)
        .then(|| resampling_tests(ds, alpha, opts.hat_resamples, resample_seed));

    methods
        .iter()
        .map(|&m| {
            let outcome = match m {
                Method::Tilde | Method::TildeT => match tilde.as_ref().expect("computed above") {
                    Ok((z, t)) => Outcome::from_result(
                        Ok(if m == Method::Tilde { z } else { t }.clone()),
                        None,
                    ),
                    Err(e) => Outcome::from_error(e.clone(), p_tilde_value()),
                },
                Method::HatStar => {
                    Outcome::from_result(z_star_test(ds, alpha, derive_seed(seed, 1)), None)
                }
                Method::Hat | Method::Hoffman => {
                    let result = match &shared {
                        Some(Ok((z_h, z_hat))) => {
                            if m == Method::Hoffman { z_h } else { z_hat }.clone()
                        }
                        Some(Err(e)) => Err(e.clone()),
                        None if m == Method::Hat => {
                            z_hat_test(ds, alpha, opts.hat_resamples, resample_seed)
                        }
                        None => z_h_test(ds, alpha, opts.hoffman_resamples, resample_seed),
                    };
                    let fallback = if m == Method::Hoffman {
                        p_tilde_value()
                    } else {
                        None
                    };
                    Outcome::from_result(result, fallback)
                }
                Method::IgnorableU | Method::IgnorableW => {
                    let weighting = if m == Method::IgnorableU {
                        Weighting::Unweighted
                    } else {
                        Weighting::Weighted
                    };
                    match p_ignorable(ds, weighting) {
                        Err(e) => Outcome::from_error(e, None),
                        Ok(est) => match tilde.as_ref().expect("computed above") {
                            Ok((z, _)) => {
                                let hw = z.half_width();
                                Outcome::Test {
                                    estimate: est.value,
                                    variance: z.variance.value,
                                    df: None,
                                    ci_lower: est.value - hw,
                                    ci_upper: est.value + hw,
                                    discarded: 0,
                                }
                            }
                            Err(e) => Outcome::from_error(e.clone(), Some(est.value)),
                        },
                    }
                }
            };
            (m, outcome)
        })
        .collect()
}

fn check_methods(methods: &[Method], replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(Error::InvalidArgument(
            "at least one replication required".into(),
        ));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    Ok(())
}

/// Generates and analyzes every replicate. Records come back in replicate order.
pub fn run_replicates(
    sampler: &ScenarioSampler,
    methods: &[Method],
    replications: usize,
    master_seed: u64,
    opts: &ExperimentOptions,
) -> Result<Vec<ReplicateRecord>> {
    check_methods(methods, replications)?;
    let alpha = sampler.config().alpha_level;
    let one = |index: usize| -> Result<ReplicateRecord> {
        let ds = replicate_dataset(sampler, master_seed, index)?;
        let seed = derive_seed(master_seed, index as u64);
        Ok(ReplicateRecord {
            index,
            outcomes: analyze_replicate(&ds, methods, alpha, seed, opts),
        })
    };
    map_indices(replications, opts.jobs, one)
}

#[cfg(feature = "parallel")]
fn map_indices<T, F>(count: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let run = || {
        (0..count)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<T>>>()
    };
    match jobs {
        None => run(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T, F>(count: usize, _jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..count).map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replications: usize,
    /// Replicates on which a test statistic was produced.
    pub completed: usize,
    pub rejection_rate: Option<f64>,
    /// Coverage of the cluster-weighted target `p`.
    pub coverage_rate: Option<f64>,
    /// Coverage of the observation-weighted target `p0`.
    pub coverage_rate_p0: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub sd_estimate: Option<f64>,
    pub mean_variance: Option<f64>,
    pub mean_df: Option<f64>,
    pub negative_variance: usize,
    pub degenerate: usize,
    pub failures: usize,
    pub discarded_draws: usize,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// Aggregates one method over the records, judging coverage against
/// `target_p` and `target_p0`.
pub fn summarize(
    method: Method,
    records: &[ReplicateRecord],
    target_p: f64,
    target_p0: f64,
) -> MethodSummary {
    let outcomes: Vec<&Outcome> = records.iter().filter_map(|r| r.get(method)).collect();
    let estimates: Vec<f64> = outcomes.iter().filter_map(|o| o.estimate()).collect();
    let (mut completed, mut rejected, mut covered, mut covered0) = (0, 0, 0, 0);
    let (mut negative_variance, mut degenerate, mut failures, mut discarded_draws) = (0, 0, 0, 0);
    let mut variances = Vec::new();
    let mut dfs = Vec::new();
    for o in &outcomes {
        match o {
            Outcome::Test {
                variance,
                df,
                ci_lower,
                ci_upper,
                discarded,
                ..
            } => {
                completed += 1;
                let inside = |t: f64| *ci_lower < t && t < *ci_upper;
                rejected += usize::from(!inside(0.5));
                covered += usize::from(inside(target_p));
                covered0 += usize::from(inside(target_p0));
                variances.push(*variance);
                dfs.extend(*df);
                discarded_draws += discarded;
            }
            Outcome::NegativeVariance { .. } => negative_variance += 1,
            Outcome::Degenerate { .. } => degenerate += 1,
            Outcome::Failed { .. } => failures += 1,
        }
    }
    let rate = |k: usize| (completed > 0).then(|| k as f64 / completed as f64);
    let (mean_estimate, sd_estimate) = mean_sd(&estimates);
    MethodSummary {
        method,
        replications: outcomes.len(),
        completed,
        rejection_rate: rate(rejected),
        coverage_rate: rate(covered),
        coverage_rate_p0: rate(covered0),
        mean_estimate,
        sd_estimate,
        mean_variance: mean_sd(&variances).0,
        mean_df: mean_sd(&dfs).0,
        negative_variance,
        degenerate,
        failures,
        discarded_draws,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ScenarioConfig,
    pub replications: usize,
    pub master_seed: u64,
    /// Cluster-weighted effect; ½ in ignorable scenarios.
    pub target_p: f64,
    /// Observation-weighted effect; ½ in ignorable scenarios.
    pub target_p0: f64,
    /// `c1 − c2` for informative scenarios.
    pub mu_d: Option<f64>,
    pub hat_resamples: usize,
    pub hoffman_resamples: usize,
    /// Cluster shapes `(m1, m2)` sampled from a clipped covariance matrix.
    pub repaired_shapes: Vec<(usize, usize)>,
    pub methods: Vec<MethodSummary>,
}

/// Targets `(p, p0)` the intervals are judged against.
pub fn scenario_targets(cfg: &ScenarioConfig) -> (f64, f64, Option<f64>) {
    match cfg.ics {
        Some((c1, c2)) => {
            let t = theoretical_effects(c1 as f64, c2 as f64);
            (t.p, t.p0, Some(t.mu_d))
        }
        None => (0.5, 0.5, None),
    }
}

pub fn run_experiment(
    cfg: &ScenarioConfig,
    methods: &[Method],
    replications: usize,
    master_seed: u64,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    check_methods(methods, replications)?;
    let sampler = ScenarioSampler::new(cfg)?;
    let records = run_replicates(&sampler, methods, replications, master_seed, opts)?;
    let (target_p, target_p0, mu_d) = scenario_targets(cfg);
    Ok(ExperimentReport {
        config: cfg.clone(),
        replications,
        master_seed,
        target_p,
        target_p0,
        mu_d,
        hat_resamples: opts.hat_resamples,
        hoffman_resamples: opts.hoffman_resamples,
        repaired_shapes: sampler.repaired_shapes(),
        methods: methods
            .iter()
            .map(|&m| summarize(m, &records, target_p, target_p0))
            .collect(),
    })
}

impl ExperimentReport {
    /// One row per method.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.methods {
            w.serialize(s)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}
