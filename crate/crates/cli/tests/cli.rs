use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const ALL_METHODS: [&str; 7] = [
    "tilde",
    "tilde-t",
    "hat",
    "hat-star",
    "hoffman",
    "ignorable-u",
    "ignorable-w",
];

const TEST_FIELDS: [&str; 7] = [
    "variance",
    "statistic",
    "reference",
    "df",
    "p_value",
    "ci_lower",
    "ci_upper",
];

fn wmw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wmw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(name);
    let text = std::fs::read_to_string(path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{doc}\n{errors:?}");
}

fn csv_file(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, format!("cluster,group,value\n{body}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const MIXED: &str = "a,1,1\na,2,2.5\nb,1,3\nc,2,4\nc,2,0.3\nd,1,0.1\nd,2,5\ne,1,2.2\nf,2,1.7\ng,1,0.4\ng,1,2.9\nh,2,3.3\n";

#[test]
fn every_method_succeeds_and_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "mixed.csv", MIXED);
    let validator = schema("analyze.schema.json");
    for method in ALL_METHODS {
        let out = wmw(&["analyze", &input, "--method", method]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let doc = json(&out);
        assert_valid(&validator, &doc);
        assert_eq!(doc["method"], method);
        for (key, v) in doc.as_object().unwrap() {
            if let Some(x) = v.as_f64() {
                assert!(x.is_finite(), "{method}: {key}");
            }
        }
        assert_eq!(doc.get("df").is_some(), method == "tilde-t", "{method}");
        if method.starts_with("ignorable") {
            for field in TEST_FIELDS {
                assert!(doc.get(field).is_none(), "{method}: {field}");
            }
        } else {
            assert!(doc["ci_lower"].as_f64() < doc["ci_upper"].as_f64());
        }
    }
}

#[test]
fn default_method_is_small_sample_t() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "mixed.csv", MIXED);
    let doc = json(&wmw(&["analyze", &input]));
    assert_eq!(doc["method"], "tilde-t");
    assert_eq!(doc["reference"], "student_t");
    assert_eq!(doc["seed"], 20240101);
}

#[test]
fn zero_variance_exits_3_with_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "two.csv", "a,1,1\nb,2,2\n");
    let out = wmw(&["analyze", &input, "--method", "tilde"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json(&out);
    assert_valid(&schema("analyze.schema.json"), &doc);
    assert_eq!(doc["estimate"], 1.0);
    assert!(doc.get("statistic").is_none());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate variance"));
}

#[test]
fn one_group_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "one.csv", "a,1,1\nb,1,2\n");
    let out = wmw(&["analyze", &input, "--method", "tilde"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("bad_group.csv", "a,3,1\nb,2,2\n"),
        ("bad_value.csv", "a,1,x\nb,2,2\n"),
    ] {
        let input = csv_file(&dir, name, body);
        assert_eq!(wmw(&["analyze", &input]).status.code(), Some(2), "{name}");
    }
    let missing = dir.path().join("absent.csv");
    assert_eq!(
        wmw(&["analyze", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let input = csv_file(&dir, "ok.csv", MIXED);
    for bad in [
        vec!["--alpha", "0"],
        vec!["--alpha", "1.5"],
        vec!["--method", "median"],
        vec!["--resamples", "0"],
    ] {
        let mut args = vec!["analyze", input.as_str()];
        args.extend(bad.iter().copied());
        assert_eq!(wmw(&args).status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn single_mixed_cluster_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "lone.csv", "a,1,1\na,2,2\na,2,3\n");
    for method in ["tilde", "tilde-t", "hat", "hat-star", "hoffman"] {
        assert_eq!(
            wmw(&["analyze", &input, "--method", method]).status.code(),
            Some(4),
            "{method}"
        );
    }
}

#[test]
fn resampling_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = csv_file(&dir, "mixed.csv", MIXED);
    for method in ["hat", "hat-star", "hoffman"] {
        let a = wmw(&["analyze", &input, "--method", method, "--seed", "99"]);
        let b = wmw(&["analyze", &input, "--method", method, "--seed", "99"]);
        assert_eq!(a.stdout, b.stdout, "{method}");
    }
    let a = wmw(&["analyze", &input, "--method", "hat", "--seed", "1"]);
    let b = wmw(&["analyze", &input, "--method", "hat", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
    let doc = json(&a);
    assert_eq!(doc["seed"], 1);
    assert_eq!(
        doc["resamples_used"].as_u64().unwrap() + doc["resamples_discarded"].as_u64().unwrap(),
        10_000
    );
}

#[test]
fn discarded_draws_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    // Six two-member clusters: 2 of every 64 draws pick one group only.
    let input = csv_file(
        &dir,
        "pairs.csv",
        "a,1,1\na,2,2\nb,1,3\nb,2,0.5\nc,1,4\nc,2,2.5\nd,1,0\nd,2,1.5\ne,1,6\ne,2,3.5\nf,1,2.2\nf,2,0.7\n",
    );
    let doc = json(&wmw(&[
        "analyze",
        &input,
        "--method",
        "hat",
        "--resamples",
        "1000",
    ]));
    let discarded = doc["resamples_discarded"].as_u64().unwrap();
    assert!(discarded > 10, "{doc}");
    let warnings = doc["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains(&discarded.to_string())));
}

fn simulate(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    wmw(&args)
}

#[test]
fn ics_report_has_rejection_rate_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ics");
    let cfg = repo_file("configs/ics_2_3.cfg");
    let methods = "tilde,tilde-t,hoffman,ignorable-w";
    let out = simulate(
        cfg.to_str().unwrap(),
        &prefix,
        &[
            "--reps",
            "500",
            "--methods",
            methods,
            "--hoffman-resamples",
            "200",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 20240101"));

    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "rejection_rate").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let names: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(names, methods.split(',').collect::<Vec<_>>());
    for r in &rows {
        let rate: f64 = r[col].parse().unwrap_or(f64::NAN);
        assert!(
            r[0].starts_with("ignorable") || (0.0..=1.0).contains(&rate),
            "{r:?}"
        );
    }

    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(report["replications"], 500);
    assert!((report["target_p"].as_f64().unwrap() - 0.6307).abs() < 1e-4);
}

#[test]
fn worker_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/null_cauchy.cfg");
    let mut files = Vec::new();
    for jobs in ["1", "8"] {
        let prefix = dir.path().join(format!("jobs{jobs}"));
        let out = simulate(
            cfg.to_str().unwrap(),
            &prefix,
            &[
                "--reps",
                "60",
                "--jobs",
                jobs,
                "--hat-resamples",
                "100",
                "--hoffman-resamples",
                "100",
            ],
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push((
            std::fs::read(prefix.with_extension("csv")).unwrap(),
            std::fs::read(prefix.with_extension("json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn null_rejection_rate_of_t_test() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("null");
    let cfg = repo_file("configs/null_gaussian.cfg");
    let out = simulate(
        cfg.to_str().unwrap(),
        &prefix,
        &["--reps", "2000", "--methods", "tilde-t"],
    );
    assert_eq!(out.status.code(), Some(0));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    let rate = report["methods"][0]["rejection_rate"].as_f64().unwrap();
    assert!((0.035..=0.07).contains(&rate), "{rate}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    let good = std::fs::read_to_string(repo_file("configs/null_gaussian.cfg")).unwrap();
    for (name, text) in [
        ("unknown key", format!("{good}colour = blue\n")),
        ("missing key", good.replace("rho12 = 0.1\n", "")),
        ("bad value", good.replace("n1 = 10", "n1 = ten")),
        ("lone c1", format!("{good}c1 = 2\n")),
    ] {
        std::fs::write(&cfg, text).unwrap();
        let out = simulate(
            cfg.to_str().unwrap(),
            &dir.path().join("x"),
            &["--reps", "2"],
        );
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let out = simulate(
        repo_file("configs/null_gaussian.cfg").to_str().unwrap(),
        &dir.path().join("x"),
        &["--methods", "tilde,bogus"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theory_values() {
    let validator = schema("theory.schema.json");
    for (c1, c2, p, p0) in [
        ("2", "3", 0.6307, 0.5258),
        ("5", "5", 0.5, 0.5),
        ("2", "7", 0.7505, 0.3964),
    ] {
        let out = wmw(&["theory", "--c1", c1, "--c2", c2]);
        assert_eq!(out.status.code(), Some(0));
        let doc = json(&out);
        assert_valid(&validator, &doc);
        assert!((doc["p"].as_f64().unwrap() - p).abs() < 5e-5, "{doc}");
        assert!((doc["p0"].as_f64().unwrap() - p0).abs() < 5e-5, "{doc}");
        assert!(doc.get("p_mc").is_none());
    }
}

#[test]
fn theory_oracle_agrees() {
    let out = wmw(&[
        "theory",
        "--c1",
        "2",
        "--c2",
        "3",
        "--oracle-draws",
        "200000",
    ]);
    let doc = json(&out);
    assert_valid(&schema("theory.schema.json"), &doc);
    for (exact, mc, se) in [("p", "p_mc", "p"), ("p0", "p0_mc", "p0")] {
        let gap = (doc[exact].as_f64().unwrap() - doc[mc].as_f64().unwrap()).abs();
        assert!(gap < 4.0 * doc["se"][se].as_f64().unwrap(), "{doc}");
    }
}

#[test]
fn theory_rejects_nonpositive() {
    for args in [["--c1", "0", "--c2", "3"], ["--c1", "2", "--c2", "-1"]] {
        let mut full = vec!["theory"];
        full.extend(args);
        assert_eq!(wmw(&full).status.code(), Some(2));
    }
    assert_eq!(
        wmw(&["theory", "--c1", "2", "--c2", "3", "--oracle-draws", "10"])
            .status
            .code(),
        Some(2)
    );
}
