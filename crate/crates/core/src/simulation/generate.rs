//! Clustered data generators.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution as _, StandardNormal};

use super::config::{Distribution, ScenarioConfig, ICG_SUCCESS_PROBABILITY};
use super::covariance::{factor_sigma, SigmaFactor};
use crate::dataset::{Cluster, ClusteredDataset};
use crate::error::{Error, Result};

/// Draws one cluster with `m1` group-1 and `m2` group-2 members around the
/// given location. Cauchy draws are multivariate t with one degree of freedom:
/// a Gaussian draw divided by the root of an independent χ²₁ variate.
pub fn sample_cluster<R: Rng + ?Sized>(
    id: String,
    factor: &SigmaFactor,
    m1: usize,
    m2: usize,
    (mean_g1, mean_g2): (f64, f64),
    distribution: Distribution,
    rng: &mut R,
) -> Result<Cluster> {
    let m = m1 + m2;
    if factor.lower.nrows() != m {
        return Err(Error::InvalidArgument(format!(
            "factor has dimension {} but cluster has {m} members",
            factor.lower.nrows()
        )));
    }
    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = &factor.lower * z;
    if distribution == Distribution::Cauchy {
        let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
        let w: f64 = chi.sample(rng);
        x /= w.sqrt();
    }
    let g1 = (0..m1).map(|k| mean_g1 + x[k]).collect();
    let g2 = (m1..m).map(|k| mean_g2 + x[k]).collect();
    Cluster::new(id, g1, g2)
}

/// A validated scenario with its covariance factors precomputed for every
/// cluster shape the design can produce.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    cfg: ScenarioConfig,
    factors: BTreeMap<(usize, usize), SigmaFactor>,
}

impl ScenarioSampler {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let sizes: Vec<usize> = match (cfg.ics, cfg.icg_law.binomial_trials()) {
            (Some((c1, c2)), _) => vec![c1 as usize, c2 as usize],
            (None, Some(trials)) => (1..=trials as usize + 1).collect(),
            (None, None) => unreachable!("validated config"),
        };
        let mut shapes = Vec::new();
        for &a in &sizes {
            if cfg.n1 > 0 {
                shapes.push((a, 0));
            }
            if cfg.n2 > 0 {
                shapes.push((0, a));
            }
            if cfg.nc > 0 {
                if cfg.ics.is_some() {
                    shapes.push((a, a));
                } else {
                    shapes.extend(sizes.iter().map(|&b| (a, b)));
                }
            }
        }
        let mut factors = BTreeMap::new();
        for shape in shapes {
            if let std::collections::btree_map::Entry::Vacant(e) = factors.entry(shape) {
                e.insert(factor_sigma(
                    &cfg.covariance,
                    shape.0,
                    shape.1,
                    cfg.sigma_policy,
                )?);
            }
        }
        Ok(ScenarioSampler {
            cfg: cfg.clone(),
            factors,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Cluster shapes `(m1, m2)` whose covariance needed eigenvalue clipping.
    pub fn repaired_shapes(&self) -> Vec<(usize, usize)> {
        self.factors
            .iter()
            .filter(|(_, f)| f.repaired)
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ClusteredDataset> {
        let cfg = &self.cfg;
        let total = cfg.n1 + cfg.n2 + cfg.nc;
        let mut clusters = Vec::with_capacity(total);
        for i in 0..total {
            let id = format!("c{i:05}");
            let (has1, has2) = if i < cfg.n1 {
                (true, false)
            } else if i < cfg.n1 + cfg.n2 {
                (false, true)
            } else {
                (true, true)
            };
            let (m1, m2, means) = match cfg.ics {
                None => {
                    let trials = cfg.icg_law.binomial_trials().expect("validated config");
                    let law = Binomial::new(trials, ICG_SUCCESS_PROBABILITY)
                        .expect("valid binomial parameters");
                    let mut size = |present: bool| {
                        if present {
                            1 + law.sample(rng) as usize
                        } else {
                            0
                        }
                    };
                    let m1 = size(has1);
                    let m2 = size(has2);
                    (m1, m2, (0.0, 0.0))
                }
                Some((c1, c2)) => {
                    // Size label drawn uniformly; location depends on the label.
                    let first = rng.random_bool(0.5);
                    let (c1, c2) = (c1 as f64, c2 as f64);
                    let (s, means) = if first {
                        (c1, (-c2, c2))
                    } else {
                        (c2, (c1, -c1))
                    };
                    let s = s as usize;
                    (if has1 { s } else { 0 }, if has2 { s } else { 0 }, means)
                }
            };
            let factor = &self.factors[&(m1, m2)];
            clusters.push(sample_cluster(
                id,
                factor,
                m1,
                m2,
                means,
                cfg.distribution,
                rng,
            )?);
        }
        ClusteredDataset::from_clusters(clusters)
    }
}

/// Ignorable design: `n1` group-1-only, `n2` group-2-only and `nc` complete
/// clusters, group sizes `1 + Binomial(ν, 0.3)`, both group means 0.
pub fn gen_ignorable_dataset<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ClusteredDataset> {
    if cfg.ics.is_some() {
        return Err(Error::InvalidConfig(
            "ignorable design takes no c1/c2".into(),
        ));
    }
    ScenarioSampler::new(cfg)?.generate(rng)
}

/// Informative design: each cluster gets size label `c1` or `c2` with equal
/// probability; complete clusters have `m1 = m2` equal to the label.
pub fn gen_ics_dataset<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ClusteredDataset> {
    if cfg.ics.is_none() {
        return Err(Error::InvalidConfig(
            "informative design needs c1/c2".into(),
        ));
    }
    ScenarioSampler::new(cfg)?.generate(rng)
}
