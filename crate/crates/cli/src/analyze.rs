use std::fs::File;

use serde::Serialize;
use wmw_cluster::empirical::Weighting;
use wmw_cluster::estimators::{p_hat_mc, p_ignorable, p_tilde, DEFAULT_MC_RESAMPLES};
use wmw_cluster::inference::{
    t_tilde_test, z_h_test, z_hat_test, z_star_test, z_tilde_test, InferenceResult, Reference,
    DEFAULT_HOFFMAN_RESAMPLES,
};
use wmw_cluster::simulation::Method;
use wmw_cluster::{ClusteredDataset, Error};

use crate::{exit_code, AnalyzeArgs, Failure};

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub resamples_used: usize,
    pub resamples_discarded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl AnalyzeReport {
    fn empty(args: &AnalyzeArgs) -> Self {
        AnalyzeReport {
            method: args.method,
            estimate: None,
            variance: None,
            statistic: None,
            reference: None,
            df: None,
            p_value: None,
            ci_lower: None,
            ci_upper: None,
            alpha: args.alpha,
            seed: args.seed,
            resamples_used: 0,
            resamples_discarded: 0,
            error: None,
            warnings: Vec::new(),
        }
    }

    fn fill(&mut self, r: &InferenceResult) {
        self.estimate = Some(r.estimate.value);
        self.variance = Some(r.variance.value);
        self.statistic = Some(r.statistic);
        self.reference = Some(r.reference);
        self.df = r.df;
        self.p_value = Some(r.p_value);
        self.ci_lower = Some(r.ci_lower);
        self.ci_upper = Some(r.ci_upper);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn resamples(args: &AnalyzeArgs) -> usize {
    let default = match args.method {
        Method::Hoffman => DEFAULT_HOFFMAN_RESAMPLES,
        _ => DEFAULT_MC_RESAMPLES,
    };
    args.resamples.map_or(default, |q| q as usize)
}

pub fn run(args: &AnalyzeArgs) -> Result<String, Failure> {
    let file = File::open(&args.input)
        .map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
    let ds = ClusteredDataset::from_csv(file)?;
    let mut report = AnalyzeReport::empty(args);

    if args.method.is_ignorable() {
        let weighting = match args.method {
            Method::IgnorableU => Weighting::Unweighted,
            _ => Weighting::Weighted,
        };
        report.estimate = Some(p_ignorable(&ds, weighting)?.value);
        report
            .warnings
            .push("point estimate only: assumes cluster size is ignorable".into());
        return Ok(report.to_json());
    }

    let q = resamples(args);
    let result = match args.method {
        Method::Tilde => z_tilde_test(&ds, args.alpha),
        Method::TildeT => t_tilde_test(&ds, args.alpha),
        Method::Hat => z_hat_test(&ds, args.alpha, q, args.seed),
        Method::HatStar => z_star_test(&ds, args.alpha, args.seed),
        Method::Hoffman => z_h_test(&ds, args.alpha, q, args.seed),
        Method::IgnorableU | Method::IgnorableW => unreachable!(),
    };

    match result {
        Ok(r) => {
            report.fill(&r);
            tally(&mut report, args.method, &r, q);
            Ok(report.to_json())
        }
        Err(e) => {
            let code = exit_code(&e);
            if code != 3 {
                return Err(e.into());
            }
            report.estimate = fallback_estimate(&ds, args, q);
            match e {
                Error::NegativeVariance { value, .. } => {
                    report.variance = Some(value);
                    report.warnings.push(format!(
                        "negative variance estimate {value}: test unavailable"
                    ));
                }
                Error::DegenerateVariance(v) if v.is_finite() => report.variance = Some(v),
                _ => {}
            }
            report.error = Some(e.to_string());
            Err(Failure {
                code,
                message: e.to_string(),
                partial: Some(report.to_json()),
            })
        }
    }
}

fn fallback_estimate(ds: &ClusteredDataset, args: &AnalyzeArgs, q: usize) -> Option<f64> {
    match args.method {
        Method::Hat => p_hat_mc(ds, q, args.seed).ok().map(|e| e.value),
        Method::HatStar => None,
        _ => p_tilde(ds).ok().map(|e| e.value),
    }
}

fn tally(report: &mut AnalyzeReport, method: Method, r: &InferenceResult, q: usize) {
    match method {
        Method::Hat => {
            report.resamples_used = r.estimate.resamples_used;
            report.resamples_discarded = r.estimate.resamples_discarded;
            if r.estimate.resamples_discarded > 0 {
                report.warnings.push(format!(
                    "{} of {q} resamples drew only one group and were discarded",
                    r.estimate.resamples_discarded
                ));
            }
            let thin = r.variance.resamples_discarded - r.estimate.resamples_discarded;
            if thin > 0 {
                report.warnings.push(format!(
                    "{thin} of {q} resamples had fewer than two picks in a group and were left out of the variance"
                ));
            }
        }
        Method::Hoffman => {
            report.resamples_used = r.variance.resamples_used;
            report.resamples_discarded = r.variance.resamples_discarded;
            if r.variance.resamples_discarded > 0 {
                report.warnings.push(format!(
                    "{} of {q} resamples had fewer than two picks in a group and were discarded",
                    r.variance.resamples_discarded
                ));
            }
        }
        Method::HatStar => {
            report.resamples_used = 1;
            report.resamples_discarded = r.estimate.resamples_discarded;
            if r.estimate.resamples_discarded > 0 {
                report.warnings.push(format!(
                    "{} resamples redrawn for having fewer than two picks in a group",
                    r.estimate.resamples_discarded
                ));
            }
        }
        _ => {}
    }
}
