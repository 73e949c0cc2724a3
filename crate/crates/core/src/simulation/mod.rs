//! Data-generating designs, theoretical targets and Monte Carlo experiments.

pub mod config;
pub mod covariance;
pub mod experiment;
pub mod generate;
pub mod theory;

pub use config::{Distribution, IcgLaw, ScenarioConfig};
pub use covariance::{build_sigma, factor_sigma, CovarianceSpec, SigmaFactor, SigmaPolicy};
pub use experiment::{run_experiment, ExperimentOptions, ExperimentReport, Method, MethodSummary};
pub use generate::{gen_ics_dataset, gen_ignorable_dataset, sample_cluster, ScenarioSampler};
pub use theory::{mc_effect_oracle, theoretical_effects, theoretical_p, theoretical_p0};
