//! Browser bindings. Every export returns a JSON string for the page to render.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wmw_cluster::empirical::Weighting;
use wmw_cluster::estimators::p_ignorable;
use wmw_cluster::inference::{resampling_tests, t_tilde_test, z_tilde_test, InferenceResult};
use wmw_cluster::seed::rng_from_seed;
use wmw_cluster::simulation::{
    run_experiment, theoretical_effects, CovarianceSpec, ExperimentOptions, Method, ScenarioConfig,
    ScenarioSampler, SigmaPolicy,
};
use wmw_cluster::{Group, Result};

const RESAMPLES: usize = 500;
const MAX_CLUSTERS: usize = 400;
const MAX_REPS: usize = 2000;

#[derive(Serialize)]
struct CurvePoint {
    c2: u32,
    p: f64,
    p0: f64,
}

pub fn effect_curve_json(c1: u32, c2_max: u32) -> std::result::Result<String, String> {
    if c1 == 0 || c2_max == 0 {
        return Err("cluster sizes must be positive".into());
    }
    let points: Vec<CurvePoint> = (1..=c2_max)
        .map(|c2| {
            let t = theoretical_effects(c1 as f64, c2 as f64);
            CurvePoint {
                c2,
                p: t.p,
                p0: t.p0,
            }
        })
        .collect();
    Ok(serde_json::to_string(&points).unwrap())
}

fn ics_config(counts: (usize, usize, usize), c1: u32, c2: u32, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::informative(
        counts,
        (c1, c2),
        CovarianceSpec::new(1.0, 1.0, 0.1, 0.1, 0.9),
        seed,
    );
    cfg.sigma_policy = SigmaPolicy::Clip;
    cfg
}

#[derive(Serialize)]
struct ClusterView {
    g1: Vec<f64>,
    g2: Vec<f64>,
}

#[derive(Serialize, Default)]
struct MethodView {
    method: &'static str,
    estimate: Option<f64>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    p_value: Option<f64>,
    error: Option<String>,
}

impl MethodView {
    fn from_test(method: Method, r: Result<InferenceResult>) -> Self {
        match r {
            Ok(r) => MethodView {
                method: method.name(),
                estimate: Some(r.estimate.value),
                ci_lower: Some(r.ci_lower),
                ci_upper: Some(r.ci_upper),
                p_value: Some(r.p_value),
                error: None,
            },
            Err(e) => MethodView {
                method: method.name(),
                error: Some(e.to_string()),
                ..Default::default()
            },
        }
    }
}

#[derive(Serialize)]
struct AnalysisView {
    p: f64,
    p0: f64,
    clusters: Vec<ClusterView>,
    methods: Vec<MethodView>,
}

pub fn simulate_and_analyze_json(
    c1: u32,
    c2: u32,
    n1: usize,
    n2: usize,
    nc: usize,
    seed: u64,
) -> std::result::Result<String, String> {
    if n1 + n2 + nc > MAX_CLUSTERS {
        return Err(format!("at most {MAX_CLUSTERS} clusters in the demo"));
    }
    let cfg = ics_config((n1, n2, nc), c1, c2, seed);
    let sampler = ScenarioSampler::new(&cfg).map_err(|e| e.to_string())?;
    let ds = sampler
        .generate(&mut rng_from_seed(seed))
        .map_err(|e| e.to_string())?;
    let alpha = cfg.alpha_level;

    let mut methods = vec![
        MethodView::from_test(Method::Tilde, z_tilde_test(&ds, alpha)),
        MethodView::from_test(Method::TildeT, t_tilde_test(&ds, alpha)),
    ];
    match resampling_tests(&ds, alpha, RESAMPLES, seed) {
        Ok((z_h, z_hat)) => {
            methods.push(MethodView::from_test(Method::Hoffman, z_h));
            methods.push(MethodView::from_test(Method::Hat, z_hat));
        }
        Err(e) => {
            methods.push(MethodView::from_test(Method::Hoffman, Err(e.clone())));
            methods.push(MethodView::from_test(Method::Hat, Err(e)));
        }
    }
    for (method, weighting) in [
        (Method::IgnorableU, Weighting::Unweighted),
        (Method::IgnorableW, Weighting::Weighted),
    ] {
        let mut view = MethodView {
            method: method.name(),
            ..Default::default()
        };
        match p_ignorable(&ds, weighting) {
            Ok(e) => view.estimate = Some(e.value),
            Err(e) => view.error = Some(e.to_string()),
        }
        methods.push(view);
    }

    let t = theoretical_effects(c1 as f64, c2 as f64);
    let view = AnalysisView {
        p: t.p,
        p0: t.p0,
        clusters: ds
            .clusters()
            .iter()
            .map(|c| ClusterView {
                g1: c.values(Group::One).to_vec(),
                g2: c.values(Group::Two).to_vec(),
            })
            .collect(),
        methods,
    };
    Ok(serde_json::to_string(&view).unwrap())
}

pub fn coverage_experiment_json(
    c1: u32,
    c2: u32,
    reps: usize,
    seed: u64,
) -> std::result::Result<String, String> {
    if reps == 0 || reps > MAX_REPS {
        return Err(format!("replications must be between 1 and {MAX_REPS}"));
    }
    let cfg = ics_config((20, 10, 10), c1, c2, seed);
    let opts = ExperimentOptions {
        hat_resamples: 200,
        hoffman_resamples: 200,
        jobs: None,
    };
    let methods = [
        Method::Tilde,
        Method::TildeT,
        Method::Hoffman,
        Method::IgnorableW,
    ];
    run_experiment(&cfg, &methods, reps, seed, &opts)
        .map(|r| r.to_json())
        .map_err(|e| e.to_string())
}

/// `p` and `p0` for `c2 = 1..=c2_max` at fixed `c1`.
#[wasm_bindgen]
pub fn effect_curve(c1: u32, c2_max: u32) -> std::result::Result<String, JsError> {
    effect_curve_json(c1, c2_max).map_err(|e| JsError::new(&e))
}

/// Draws one informative-size dataset and runs every estimator on it.
#[wasm_bindgen]
pub fn simulate_and_analyze(
    c1: u32,
    c2: u32,
    n1: u32,
    n2: u32,
    nc: u32,
    seed: u32,
) -> std::result::Result<String, JsError> {
    simulate_and_analyze_json(c1, c2, n1 as usize, n2 as usize, nc as usize, seed as u64)
        .map_err(|e| JsError::new(&e))
}

/// Small coverage study; the page shows rejection and coverage per method.
#[wasm_bindgen]
pub fn coverage_experiment(
    c1: u32,
    c2: u32,
    reps: u32,
    seed: u32,
) -> std::result::Result<String, JsError> {
    coverage_experiment_json(c1, c2, reps as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curve_passes_through_half_on_diagonal() {
        let v: Value = serde_json::from_str(&effect_curve_json(3, 6).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 6);
        assert!((pts[2]["p"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!((pts[2]["p0"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!(effect_curve_json(0, 4).is_err());
    }

    #[test]
    fn analysis_lists_every_estimator() {
        let v: Value =
            serde_json::from_str(&simulate_and_analyze_json(2, 5, 20, 10, 10, 1).unwrap()).unwrap();
        assert_eq!(v["clusters"].as_array().unwrap().len(), 40);
        let names: Vec<&str> = v["methods"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["method"].as_str().unwrap())
            .collect();
        assert_eq!(
            names,
            [
                "tilde",
                "tilde-t",
                "hoffman",
                "hat",
                "ignorable-u",
                "ignorable-w"
            ]
        );
        for m in v["methods"].as_array().unwrap() {
            let e = m["estimate"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
        assert!(simulate_and_analyze_json(2, 5, 300, 100, 10, 1).is_err());
    }

    #[test]
    fn analysis_is_reproducible() {
        assert_eq!(
            simulate_and_analyze_json(2, 3, 8, 6, 6, 9),
            simulate_and_analyze_json(2, 3, 8, 6, 6, 9)
        );
    }

    #[test]
    fn experiment_reports_each_method() {
        let v: Value =
            serde_json::from_str(&coverage_experiment_json(2, 3, 20, 5).unwrap()).unwrap();
        assert_eq!(v["methods"].as_array().unwrap().len(), 4);
        assert_eq!(v["replications"], 20);
        assert!(coverage_experiment_json(2, 3, 0, 5).is_err());
    }
}
