use serde::Serialize;
use wmw_cluster::simulation::{mc_effect_oracle, theoretical_effects};

use crate::{Failure, TheoryArgs};

#[derive(Debug, Serialize)]
struct StdErrors {
    p: f64,
    p0: f64,
}

#[derive(Debug, Serialize)]
struct TheoryReport {
    c1: u32,
    c2: u32,
    p: f64,
    p0: f64,
    mu_d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_mc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0_mc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    se: Option<StdErrors>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn run(args: &TheoryArgs) -> Result<String, Failure> {
    let (c1, c2) = (args.c1 as f64, args.c2 as f64);
    let t = theoretical_effects(c1, c2);
    let mut report = TheoryReport {
        c1: args.c1,
        c2: args.c2,
        p: t.p,
        p0: t.p0,
        mu_d: t.mu_d,
        p_mc: None,
        p0_mc: None,
        se: None,
        oracle_draws: None,
        seed: None,
    };
    if let Some(draws) = args.oracle_draws {
        let o = mc_effect_oracle(c1, c2, draws, args.seed)?;
        report.p_mc = Some(o.p_mc);
        report.p0_mc = Some(o.p0_mc);
        report.se = Some(StdErrors {
            p: o.se_p,
            p0: o.se_p0,
        });
        report.oracle_draws = Some(draws);
        report.seed = Some(args.seed);
    }
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    Ok(s)
}
