use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use wmw_cluster::simulation::{run_experiment, ExperimentOptions, Method, ScenarioConfig};

use crate::{Failure, SimulateArgs};

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn run(args: &SimulateArgs) -> Result<String, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::input(format!("{}: {e}", args.config.display())))?;
    let cfg = ScenarioConfig::parse(&text)?;
    let methods = match &args.methods {
        Some(list) => Method::parse_list(list)?,
        None => Method::ALL.to_vec(),
    };
    let opts = ExperimentOptions {
        hat_resamples: args.hat_resamples as usize,
        hoffman_resamples: args.hoffman_resamples as usize,
        jobs: args.jobs.map(|j| j as usize),
    };
    eprintln!("seed {}", cfg.seed);
    let report = run_experiment(&cfg, &methods, args.reps as usize, cfg.seed, &opts)?;

    let csv_path = with_extension(&args.out, "csv");
    let json_path = with_extension(&args.out, "json");
    let io = |p: &Path, e: std::io::Error| Failure::input(format!("{}: {e}", p.display()));
    let csv_file = File::create(&csv_path).map_err(|e| io(&csv_path, e))?;
    report.write_csv(BufWriter::new(csv_file))?;
    let mut json = report.to_json();
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| io(&json_path, e))?;
    Ok(format!("{}\n{}\n", csv_path.display(), json_path.display()))
}
