#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;
use wmw_cluster::empirical::Weighting;
use wmw_cluster::estimators::{
    draw_resample, e_m1m2, p_hat_mc, p_hat_star, p_ignorable, p_tilde, p_tilde_altform,
};
use wmw_cluster::inference::{
    df_hat, tilde_tests, var_tilde, z_h_test, z_hat_test, z_star_test, InferenceResult,
};
use wmw_cluster::seed::rng_from_seed;
use wmw_cluster::simulation::{
    run_experiment, CovarianceSpec, ExperimentOptions, IcgLaw, Method, ScenarioConfig,
};
use wmw_cluster::{Cluster, ClusterKind, ClusteredDataset, Error};

/// Random dataset with values on a coarse grid so ties are common.
pub fn random_small(rng: &mut impl Rng, max_clusters: usize, max_size: usize) -> ClusteredDataset {
    loop {
        let n = rng.random_range(2..=max_clusters);
        let clusters: Vec<Cluster> = (0..n)
            .map(|i| {
                let m = rng.random_range(1..=max_size);
                let (mut g1, mut g2) = (Vec::new(), Vec::new());
                for _ in 0..m {
                    let v = rng.random_range(0..5) as f64 * 0.5;
                    if rng.random_bool(0.5) {
                        g1.push(v)
                    } else {
                        g2.push(v)
                    }
                }
                Cluster::new(format!("c{i}"), g1, g2).unwrap()
            })
            .collect();
        if let Ok(ds) = ClusteredDataset::from_clusters(clusters) {
            if e_m1m2(&ds) > 0.0 {
                return ds;
            }
        }
    }
}

fn arb_value() -> impl Strategy<Value = f64> {
    prop_oneof![(0..6i32).prop_map(|k| f64::from(k) * 0.5), -10.0..10.0f64]
}

fn arb_cluster(i: usize) -> impl Strategy<Value = Cluster> {
    prop::collection::vec((arb_value(), any::<bool>()), 1..=4).prop_map(move |members| {
        let (g1, g2): (Vec<_>, Vec<_>) = members.into_iter().partition(|(_, second)| !second);
        Cluster::new(
            format!("c{i:02}"),
            g1.into_iter().map(|(v, _)| v).collect(),
            g2.into_iter().map(|(v, _)| v).collect(),
        )
        .unwrap()
    })
}

/// Datasets with 2 to 10 clusters of 1 to 4 members, both groups present
/// and at least one between-cluster comparison.
pub fn arb_dataset() -> impl Strategy<Value = ClusteredDataset> {
    (2usize..=10)
        .prop_flat_map(|n| (0..n).map(arb_cluster).collect::<Vec<_>>())
        .prop_filter_map("needs both groups in different clusters", |clusters| {
            ClusteredDataset::from_clusters(clusters)
                .ok()
                .filter(|ds| e_m1m2(ds) > 0.0)
        })
}

pub fn run_property<S, F>(name: &str, cases: u32, strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($msg)+)));
        }
    };
}

fn same_outcome(
    a: &wmw_cluster::Result<InferenceResult>,
    b: &wmw_cluster::Result<InferenceResult>,
) -> bool {
    matches!((a, b), (Ok(_), Ok(_)) | (Err(_), Err(_)))
}

const RESAMPLES: usize = 40;

pub fn check_group_swap(ds: ClusteredDataset) -> Result<(), TestCaseError> {
    let sw = ds.swap_groups();
    let pt = p_tilde(&ds).unwrap().value;
    ensure!(
        close(p_tilde(&sw).unwrap().value, 1.0 - pt, 1e-12),
        "p_tilde not mirrored"
    );
    ensure!(
        close(
            p_tilde_altform(&sw).unwrap(),
            1.0 - p_tilde_altform(&ds).unwrap(),
            1e-12
        ),
        "altform not mirrored"
    );
    for w in [Weighting::Unweighted, Weighting::Weighted] {
        let a = p_ignorable(&ds, w).unwrap().value;
        let b = p_ignorable(&sw, w).unwrap().value;
        ensure!(close(a + b, 1.0, 1e-12), "ignorable {w:?} not mirrored");
    }
    let (da, db) = (
        draw_resample(&ds, &mut rng_from_seed(3)),
        draw_resample(&sw, &mut rng_from_seed(3)),
    );
    match (p_hat_star(&da), p_hat_star(&db)) {
        (Ok(a), Ok(b)) => ensure!(
            close(a.value + b.value, 1.0, 1e-12),
            "p_hat_star not mirrored"
        ),
        (Err(_), Err(_)) => {}
        _ => return Err(TestCaseError::fail("p_hat_star degeneracy differs")),
    }
    match (p_hat_mc(&ds, RESAMPLES, 5), p_hat_mc(&sw, RESAMPLES, 5)) {
        (Ok(a), Ok(b)) => ensure!(
            close(a.value + b.value, 1.0, 1e-12),
            "p_hat_mc not mirrored"
        ),
        (Err(_), Err(_)) => {}
        _ => return Err(TestCaseError::fail("p_hat_mc availability differs")),
    }

    for (a, b) in [
        (z_star_test(&ds, 0.05, 9), z_star_test(&sw, 0.05, 9)),
        (
            z_hat_test(&ds, 0.05, RESAMPLES, 9),
            z_hat_test(&sw, 0.05, RESAMPLES, 9),
        ),
    ] {
        ensure!(same_outcome(&a, &b), "resampling test availability differs");
        if let (Ok(a), Ok(b)) = (a, b) {
            ensure!(
                close(a.statistic.abs(), b.statistic.abs(), 1e-9),
                "|statistic| differs"
            );
        }
    }
    Ok(())
}

/// `|Z̃|`, `|T̃|`, `ν̂` and `|Z̃_H|` under relabeling. The projection-based
/// variance is written in terms of group-2 placements, so this only holds
/// approximately for the analytic variance; see [`swap_counterexample`].
pub fn check_statistic_swap(ds: ClusteredDataset) -> Result<(), TestCaseError> {
    let sw = ds.swap_groups();
    match (tilde_tests(&ds, 0.05), tilde_tests(&sw, 0.05)) {
        (Ok((za, ta)), Ok((zb, tb))) => {
            ensure!(close(ta.df.unwrap(), tb.df.unwrap(), 1e-9), "df differs");
            for (a, b) in [(za, zb), (ta, tb)] {
                ensure!(
                    close(a.statistic, -b.statistic, 1e-9),
                    "statistic not negated"
                );
                ensure!(close(a.p_value, b.p_value, 1e-12), "p-value differs");
                ensure!(
                    close(a.ci_lower, 1.0 - b.ci_upper, 1e-12),
                    "CI not mirrored"
                );
            }
        }
        (Err(_), Err(_)) => {}
        _ => return Err(TestCaseError::fail("tilde availability differs")),
    }
    let (a, b) = (
        z_h_test(&ds, 0.05, RESAMPLES, 9),
        z_h_test(&sw, 0.05, RESAMPLES, 9),
    );
    if let (Ok(a), Ok(b)) = (a, b) {
        ensure!(
            close(a.statistic.abs(), b.statistic.abs(), 1e-9),
            "|Z_H| differs"
        );
    }
    Ok(())
}

/// Two clusters, `{g1: 0}` and `{g2: 0, g1: 0.5}`: the analytic variance is 0,
/// but 0.3125 after relabeling.
pub fn swap_counterexample() -> ClusteredDataset {
    ClusteredDataset::from_clusters(vec![
        Cluster::new("a", vec![0.0], vec![]).unwrap(),
        Cluster::new("b", vec![0.5], vec![0.0]).unwrap(),
    ])
    .unwrap()
}

fn bits(r: &wmw_cluster::Result<InferenceResult>) -> Option<(u64, u64, u64)> {
    r.as_ref().ok().map(|r| {
        (
            r.statistic.to_bits(),
            r.ci_lower.to_bits(),
            r.ci_upper.to_bits(),
        )
    })
}

/// Every estimator and statistic depends on the data only through
/// comparisons, so a strictly increasing map changes nothing at all.
pub fn check_monotone_invariance(ds: ClusteredDataset) -> Result<(), TestCaseError> {
    let mapped = ds.map_values(|x| x * x * x + 2.0 * x - 7.0).unwrap();
    ensure!(
        p_tilde(&ds).unwrap().value == p_tilde(&mapped).unwrap().value,
        "p_tilde changed"
    );
    for w in [Weighting::Unweighted, Weighting::Weighted] {
        ensure!(
            p_ignorable(&ds, w).unwrap().value == p_ignorable(&mapped, w).unwrap().value,
            "ignorable changed"
        );
    }
    ensure!(
        p_hat_mc(&ds, RESAMPLES, 1).ok().map(|e| e.value)
            == p_hat_mc(&mapped, RESAMPLES, 1).ok().map(|e| e.value),
        "p_hat_mc changed"
    );
    let (a, b) = (tilde_tests(&ds, 0.05), tilde_tests(&mapped, 0.05));
    ensure!(
        bits(&a.clone().map(|t| t.1)) == bits(&b.clone().map(|t| t.1)),
        "T-tilde changed"
    );
    ensure!(
        bits(&z_star_test(&ds, 0.05, 2)) == bits(&z_star_test(&mapped, 0.05, 2)),
        "Z-star changed"
    );
    ensure!(
        bits(&z_hat_test(&ds, 0.05, RESAMPLES, 2))
            == bits(&z_hat_test(&mapped, 0.05, RESAMPLES, 2)),
        "Z-hat changed"
    );
    Ok(())
}

/// `x ↦ −x` maps every effect `e` to `1 − e` and leaves variances unchanged.
pub fn check_sign_reversal(ds: ClusteredDataset) -> Result<(), TestCaseError> {
    let neg = ds.map_values(|x| -x).unwrap();
    let pt = p_tilde(&ds).unwrap().value;
    ensure!(
        close(p_tilde(&neg).unwrap().value, 1.0 - pt, 1e-12),
        "p_tilde"
    );
    for w in [Weighting::Unweighted, Weighting::Weighted] {
        ensure!(
            close(
                p_ignorable(&neg, w).unwrap().value,
                1.0 - p_ignorable(&ds, w).unwrap().value,
                1e-12
            ),
            "ignorable"
        );
    }
    let (va, vb) = (var_tilde(&ds).unwrap(), var_tilde(&neg).unwrap());
    ensure!(
        close(va.value, vb.value, 1e-12 * va.value.max(1e-300).max(1.0)),
        "variance"
    );
    if let (Ok((_, ta)), Ok((_, tb))) = (tilde_tests(&ds, 0.05), tilde_tests(&neg, 0.05)) {
        ensure!(
            close(ta.statistic, -tb.statistic, 1e-9),
            "statistic {} vs {} var {} {}",
            ta.statistic,
            tb.statistic,
            ta.variance.value,
            tb.variance.value
        );
        ensure!(close(ta.df.unwrap(), tb.df.unwrap(), 1e-9), "df");
    }
    Ok(())
}

pub fn check_ranges(ds: ClusteredDataset) -> Result<(), TestCaseError> {
    let pt = p_tilde(&ds).unwrap().value;
    ensure!((0.0..=1.0).contains(&pt), "p_tilde {pt} outside [0, 1]");
    let v = var_tilde(&ds).unwrap();
    ensure!(v.value >= 0.0, "variance {} negative", v.value);
    ensure!(
        v.per_cluster.iter().all(|&x| x >= 0.0),
        "negative per-cluster term"
    );
    Ok(())
}

/// Rejection of `p = ½` coincides with ½ falling outside the interval.
pub fn check_duality((ds, alpha): (ClusteredDataset, f64)) -> Result<(), TestCaseError> {
    let mut results = Vec::new();
    if let Ok((z, t)) = tilde_tests(&ds, alpha) {
        results.push(z);
        results.push(t);
    }
    results.extend(z_star_test(&ds, alpha, 4));
    results.extend(z_hat_test(&ds, alpha, RESAMPLES, 4));
    for r in results {
        let outside = !(r.ci_lower < 0.5 && 0.5 < r.ci_upper);
        ensure!(
            r.rejects() == outside,
            "rejects() disagrees with the interval"
        );
        let boundary = (r.statistic.abs() - r.critical).abs() < 1e-9;
        if !boundary {
            ensure!(
                outside == (r.p_value < alpha),
                "p-value {} vs interval at α={alpha}",
                r.p_value
            );
            ensure!(
                outside == (r.statistic.abs() > r.critical),
                "statistic vs interval"
            );
        }
    }
    Ok(())
}

pub fn check_df_equal_cells((k, v): (usize, f64)) -> Result<(), TestCaseError> {
    let kinds: Vec<ClusterKind> = [
        ClusterKind::IncompleteOne,
        ClusterKind::IncompleteTwo,
        ClusterKind::Complete,
    ]
    .into_iter()
    .flat_map(|c| std::iter::repeat_n(c, k))
    .collect();
    let df = df_hat(&vec![v; 3 * k], &kinds).unwrap();
    let want = 3.0 * (k as f64 - 1.0);
    ensure!(close(df, want, 1e-9 * want), "df {df} ≠ {want} for k={k}");
    Ok(())
}

pub fn arb_small_scenario() -> impl Strategy<Value = (ScenarioConfig, u64)> {
    (0usize..4, 0usize..4, 1usize..4, any::<u64>(), any::<bool>()).prop_map(
        |(n1, n2, nc, seed, nine)| {
            let law = if nine {
                IcgLaw::Binomial9
            } else {
                IcgLaw::Binomial2
            };
            let cfg = ScenarioConfig::ignorable(
                (n1, n2, nc),
                law,
                CovarianceSpec::new(1.0, 2.0, 0.5, 0.3, 0.1),
                seed,
            );
            (cfg, seed)
        },
    )
}

pub fn check_worker_independence((cfg, seed): (ScenarioConfig, u64)) -> Result<(), TestCaseError> {
    let opts = |jobs| ExperimentOptions {
        hat_resamples: 20,
        hoffman_resamples: 20,
        jobs: Some(jobs),
    };
    let methods = [
        Method::TildeT,
        Method::HatStar,
        Method::Hat,
        Method::Hoffman,
    ];
    let a = run_experiment(&cfg, &methods, 3, seed, &opts(1)).map(|r| r.to_json());
    let b = run_experiment(&cfg, &methods, 3, seed, &opts(4)).map(|r| r.to_json());
    ensure!(a == b, "report differs between 1 and 4 workers");
    Ok(())
}

/// Runs every property with `cases` instances; returns the failures.
pub fn property_suite(cases: u32) -> Vec<String> {
    let mut failures = Vec::new();
    let mut record = |r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(e);
        }
    };
    record(run_property(
        "group swap (estimates, Ẑ*, Ẑ)",
        cases,
        arb_dataset(),
        check_group_swap,
    ));
    record(run_property(
        "group swap (Z̃, T̃, Z̃_H)",
        cases,
        arb_dataset(),
        check_statistic_swap,
    ));
    record(run_property(
        "monotone transform",
        cases,
        arb_dataset(),
        check_monotone_invariance,
    ));
    record(run_property(
        "sign reversal",
        cases,
        arb_dataset(),
        check_sign_reversal,
    ));
    record(run_property("ranges", cases, arb_dataset(), check_ranges));
    record(run_property(
        "test/CI duality",
        cases,
        (arb_dataset(), 0.001..0.5f64),
        check_duality,
    ));
    record(run_property(
        "df under equal cells",
        cases,
        (2usize..60, 1e-6..10.0f64),
        check_df_equal_cells,
    ));
    record(run_property(
        "worker count",
        cases,
        arb_small_scenario(),
        check_worker_independence,
    ));
    if let Err(e) = check_df_equal_cells((11, 1.0)) {
        failures.push(format!("df at k = 11: {e}"));
    }
    failures
}

pub fn is_documented_variance_error(e: &Error) -> bool {
    matches!(e, Error::NegativeVariance { value, .. } if *value <= 0.0)
}
