//! Closed-form effects of the two-size informative-cluster-size model.
//!
//! Cluster size is uniform on `{c1, c2}`. Group-1 observations from
//! size-`c1` clusters are `N(−c2, 1)` and from size-`c2` clusters `N(c1, 1)`;
//! group-2 observations are `N(c2, 1)` and `N(−c1, 1)` respectively. Each
//! marginal is an equal mixture when clusters are weighted equally (`p`) and a
//! size-weighted mixture when observations are (`p0`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::empirical::kernel_h;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub const MIN_ORACLE_DRAWS: usize = 100_000;

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Cluster-weighted effect `p = ∫F1 dF2`.
pub fn theoretical_p(c1: f64, c2: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    0.5 * phi((c2 - c1) / r2) + 0.25 * phi(r2 * c2) + 0.25 * phi(-r2 * c1)
}

/// Observation-weighted effect `p0 = ∫F1⁽⁰⁾ dF2⁽⁰⁾`.
pub fn theoretical_p0(c1: f64, c2: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    let s = c1 + c2;
    2.0 * c1 * c2 / (s * s) * phi((c2 - c1) / r2)
        + (c1 / s).powi(2) * phi(r2 * c2)
        + (c2 / s).powi(2) * phi(-r2 * c1)
}

/// `p0` with the last two arguments scaled by `1/√2` instead of `√2`. Kept for
/// comparison only: it disagrees with direct integration of the mixture.
pub fn theoretical_p0_scaled_down(c1: f64, c2: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    let s = c1 + c2;
    2.0 * c1 * c2 / (s * s) * phi((c2 - c1) / r2)
        + (c1 / s).powi(2) * phi(c2 / r2)
        + (c2 / s).powi(2) * phi(-c1 / r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalEffects {
    pub p: f64,
    pub p0: f64,
    /// `c1 − c2`, reported as a label only; not used in any computation.
    pub mu_d: f64,
}

pub fn theoretical_effects(c1: f64, c2: f64) -> TheoreticalEffects {
    TheoreticalEffects {
        p: theoretical_p(c1, c2),
        p0: theoretical_p0(c1, c2),
        mu_d: c1 - c2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEffects {
    pub p_mc: f64,
    pub p0_mc: f64,
    pub se_p: f64,
    pub se_p0: f64,
    pub draws: usize,
}

/// Draws one observation of group `g` (`own = c_g`, `other = c_g'`): with
/// probability `w_own` from `N(own, 1)`, otherwise from `N(−other, 1)`.
fn mixture_draw<R: Rng>(rng: &mut R, own: f64, other: f64, w_own: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if rng.random::<f64>() < w_own {
        own + z
    } else {
        -other + z
    }
}

/// Brute-force Monte Carlo estimates of `p` and `p0` straight from the mixture
/// definitions, independent of the closed forms.
pub fn mc_effect_oracle(c1: f64, c2: f64, draws: usize, seed: u64) -> Result<OracleEffects> {
    if draws < MIN_ORACLE_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least {MIN_ORACLE_DRAWS} draws"
        )));
    }
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidArgument("c1 and c2 must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let s = c1 + c2;
    let (mut sum_p, mut sum_p0) = (0.0, 0.0);
    for _ in 0..draws {
        let x1 = mixture_draw(&mut rng, c1, c2, 0.5);
        let x2 = mixture_draw(&mut rng, c2, c1, 0.5);
        sum_p += kernel_h(x1, x2);
        // F1⁽⁰⁾ puts weight c2/(c1+c2) on N(c1, 1); F2⁽⁰⁾ puts c1/(c1+c2) on N(c2, 1).
        let y1 = mixture_draw(&mut rng, c1, c2, c2 / s);
        let y2 = mixture_draw(&mut rng, c2, c1, c1 / s);
        sum_p0 += kernel_h(y1, y2);
    }
    let n = draws as f64;
    let (p_mc, p0_mc) = (sum_p / n, sum_p0 / n);
    // Kernel values are 0/1 almost surely, so the Bernoulli form is exact enough.
    Ok(OracleEffects {
        p_mc,
        p0_mc,
        se_p: (p_mc * (1.0 - p_mc) / n).sqrt(),
        se_p0: (p0_mc * (1.0 - p0_mc) / n).sqrt(),
        draws,
    })
}
