use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::covariance::{CovarianceSpec, SigmaPolicy};
use crate::error::{Error, Result};

/// Law of the intra-cluster group sizes `m_i^(g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcgLaw {
    /// `1 + Binomial(2, 0.3)`, sizes 1..=3.
    Binomial2,
    /// `1 + Binomial(9, 0.3)`, sizes 1..=10.
    Binomial9,
    /// Sizes taken from `{c1, c2}` (informative-cluster-size design).
    Fixed,
}

impl IcgLaw {
    pub fn binomial_trials(self) -> Option<u64> {
        match self {
            IcgLaw::Binomial2 => Some(2),
            IcgLaw::Binomial9 => Some(9),
            IcgLaw::Fixed => None,
        }
    }
}

pub const ICG_SUCCESS_PROBABILITY: f64 = 0.3;

impl FromStr for IcgLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binom2" => Ok(IcgLaw::Binomial2),
            "binom9" => Ok(IcgLaw::Binomial9),
            "fixed" => Ok(IcgLaw::Fixed),
            other => Err(Error::InvalidConfig(format!(
                "icg_law `{other}` (expected binom2, binom9 or fixed)"
            ))),
        }
    }
}

impl fmt::Display for IcgLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IcgLaw::Binomial2 => "binom2",
            IcgLaw::Binomial9 => "binom9",
            IcgLaw::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Cauchy,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "cauchy" => Ok(Distribution::Cauchy),
            other => Err(Error::InvalidConfig(format!(
                "distribution `{other}` (expected gaussian or cauchy)"
            ))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Cauchy => "cauchy",
        })
    }
}

/// A complete simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
    pub icg_law: IcgLaw,
    pub distribution: Distribution,
    pub covariance: CovarianceSpec,
    /// `(c1, c2)` of the informative-cluster-size design.
    pub ics: Option<(u32, u32)>,
    pub alpha_level: f64,
    pub seed: u64,
    pub sigma_policy: SigmaPolicy,
}

const KEYS: [&str; 15] = [
    "n1",
    "n2",
    "nc",
    "icg_law",
    "distribution",
    "sigma1_sq",
    "sigma2_sq",
    "rho1",
    "rho2",
    "rho12",
    "c1",
    "c2",
    "alpha_level",
    "seed",
    "sigma_policy",
];

impl ScenarioConfig {
    /// Ignorable-cluster-size design with both group means 0.
    pub fn ignorable(
        (n1, n2, nc): (usize, usize, usize),
        icg_law: IcgLaw,
        covariance: CovarianceSpec,
        seed: u64,
    ) -> Self {
        ScenarioConfig {
            n1,
            n2,
            nc,
            icg_law,
            distribution: Distribution::Gaussian,
            covariance,
            ics: None,
            alpha_level: 0.05,
            seed,
            sigma_policy: SigmaPolicy::Strict,
        }
    }

    /// Informative-cluster-size design with sizes drawn from `{c1, c2}`.
    pub fn informative(
        (n1, n2, nc): (usize, usize, usize),
        (c1, c2): (u32, u32),
        covariance: CovarianceSpec,
        seed: u64,
    ) -> Self {
        ScenarioConfig {
            n1,
            n2,
            nc,
            icg_law: IcgLaw::Fixed,
            distribution: Distribution::Gaussian,
            covariance,
            ics: Some((c1, c2)),
            alpha_level: 0.05,
            seed,
            sigma_policy: SigmaPolicy::Strict,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 + self.n2 + self.nc < 2 {
            return Err(Error::InvalidConfig("need at least two clusters".into()));
        }
        if self.n1 + self.nc == 0 || self.n2 + self.nc == 0 {
            return Err(Error::InvalidConfig(
                "both groups must be represented".into(),
            ));
        }
        match (self.ics, self.icg_law) {
            (Some(_), IcgLaw::Fixed) | (None, IcgLaw::Binomial2 | IcgLaw::Binomial9) => {}
            (Some(_), _) => {
                return Err(Error::InvalidConfig("c1/c2 require icg_law = fixed".into()))
            }
            (None, IcgLaw::Fixed) => {
                return Err(Error::InvalidConfig(
                    "icg_law = fixed requires c1 and c2".into(),
                ))
            }
        }
        if let Some((c1, c2)) = self.ics {
            if c1 == 0 || c2 == 0 {
                return Err(Error::InvalidConfig("c1 and c2 must be positive".into()));
            }
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::InvalidConfig(
                "alpha_level must lie in (0, 1)".into(),
            ));
        }
        self.covariance.validate()
    }

    /// Parses the flat `key = value` format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: [Option<String>; 15] = Default::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: unknown key `{key}`", lineno + 1))
            })?;
            if values[idx].is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
            }
            values[idx] = Some(value.trim().to_string());
        }
        let get = |key: &str| -> Option<&str> {
            let idx = KEYS.iter().position(|k| *k == key).unwrap();
            values[idx].as_deref()
        };
        fn parse_as<T: FromStr>(key: &str, v: Option<&str>) -> Result<T> {
            let v = v.ok_or_else(|| Error::InvalidConfig(format!("missing key `{key}`")))?;
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for `{key}`")))
        }
        let ics = match (get("c1"), get("c2")) {
            (None, None) => None,
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "c1 and c2 must be given together".into(),
                ))
            }
            (a, b) => Some((parse_as("c1", a)?, parse_as("c2", b)?)),
        };
        let sigma_policy = match get("sigma_policy") {
            None | Some("strict") => SigmaPolicy::Strict,
            Some("clip") => SigmaPolicy::Clip,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "sigma_policy `{other}` (expected strict or clip)"
                )))
            }
        };
        let cfg = ScenarioConfig {
            n1: parse_as("n1", get("n1"))?,
            n2: parse_as("n2", get("n2"))?,
            nc: parse_as("nc", get("nc"))?,
            icg_law: get("icg_law")
                .ok_or_else(|| Error::InvalidConfig("missing key `icg_law`".into()))?
                .parse()?,
            distribution: get("distribution")
                .ok_or_else(|| Error::InvalidConfig("missing key `distribution`".into()))?
                .parse()?,
            covariance: CovarianceSpec {
                sigma1_sq: parse_as("sigma1_sq", get("sigma1_sq"))?,
                sigma2_sq: parse_as("sigma2_sq", get("sigma2_sq"))?,
                rho1: parse_as("rho1", get("rho1"))?,
                rho2: parse_as("rho2", get("rho2"))?,
                rho12: parse_as("rho12", get("rho12"))?,
            },
            ics,
            alpha_level: parse_as("alpha_level", get("alpha_level"))?,
            seed: parse_as("seed", get("seed"))?,
            sigma_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n1 = {}", self.n1)?;
        writeln!(f, "n2 = {}", self.n2)?;
        writeln!(f, "nc = {}", self.nc)?;
        writeln!(f, "icg_law = {}", self.icg_law)?;
        writeln!(f, "distribution = {}", self.distribution)?;
        writeln!(f, "sigma1_sq = {:?}", self.covariance.sigma1_sq)?;
        writeln!(f, "sigma2_sq = {:?}", self.covariance.sigma2_sq)?;
        writeln!(f, "rho1 = {:?}", self.covariance.rho1)?;
        writeln!(f, "rho2 = {:?}", self.covariance.rho2)?;
        writeln!(f, "rho12 = {:?}", self.covariance.rho12)?;
        if let Some((c1, c2)) = self.ics {
            writeln!(f, "c1 = {c1}")?;
            writeln!(f, "c2 = {c2}")?;
        }
        writeln!(f, "alpha_level = {:?}", self.alpha_level)?;
        writeln!(f, "seed = {}", self.seed)?;
        if self.sigma_policy == SigmaPolicy::Clip {
            writeln!(f, "sigma_policy = clip")?;
        }
        Ok(())
    }
}
