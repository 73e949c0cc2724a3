use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the block-exchangeable within-cluster covariance (or, for
/// Cauchy data, scale) matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho12: f64,
}

impl CovarianceSpec {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, rho1: f64, rho2: f64, rho12: f64) -> Self {
        CovarianceSpec {
            sigma1_sq,
            sigma2_sq,
            rho1,
            rho2,
            rho12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sigma1_sq) || !ok(self.sigma2_sq) {
            return Err(Error::InvalidConfig(
                "group variances must be positive".into(),
            ));
        }
        if ![self.rho1, self.rho2, self.rho12]
            .iter()
            .all(|r| r.is_finite())
        {
            return Err(Error::InvalidConfig(
                "correlation parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    /// The `(m1 + m2)`-square matrix with group-1 members first:
    ///
    /// ```text
    /// [ σ1²I + ρ1σ1²J    ρ12σ1σ2J       ]
    /// [ ρ12σ1σ2J         σ2²I + ρ2σ2²J  ]
    /// ```
    ///
    /// No definiteness check; see [`build_sigma`].
    pub fn assemble(&self, m1: usize, m2: usize) -> DMatrix<f64> {
        let m = m1 + m2;
        let (s1, s2) = (self.sigma1_sq.sqrt(), self.sigma2_sq.sqrt());
        DMatrix::from_fn(m, m, |r, c| {
            let (gr, gc) = (r >= m1, c >= m1);
            match (gr, gc) {
                (false, false) => self.sigma1_sq * (self.rho1 + if r == c { 1.0 } else { 0.0 }),
                (true, true) => self.sigma2_sq * (self.rho2 + if r == c { 1.0 } else { 0.0 }),
                _ => self.rho12 * s1 * s2,
            }
        })
    }
}

/// Assembles the covariance matrix and verifies it is positive definite.
pub fn build_sigma(spec: &CovarianceSpec, m1: usize, m2: usize) -> Result<DMatrix<f64>> {
    if m1 + m2 == 0 {
        return Err(Error::InvalidArgument(
            "cluster must have at least one member".into(),
        ));
    }
    let sigma = spec.assemble(m1, m2);
    if Cholesky::new(sigma.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { m1, m2 });
    }
    Ok(sigma)
}

/// What to do when a requested covariance matrix is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPolicy {
    /// Refuse with [`Error::NotPositiveDefinite`].
    #[default]
    Strict,
    /// Factor through the eigendecomposition with negative eigenvalues set
    /// to zero, i.e. sample from the nearest positive semidefinite matrix
    /// sharing the eigenvectors.
    Clip,
}

/// A matrix `L` with `L Lᵀ = Σ` (or its clipped surrogate).
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaFactor {
    pub lower: DMatrix<f64>,
    /// True if eigenvalue clipping was needed.
    pub repaired: bool,
}

pub fn factor_sigma(
    spec: &CovarianceSpec,
    m1: usize,
    m2: usize,
    policy: SigmaPolicy,
) -> Result<SigmaFactor> {
    if m1 + m2 == 0 {
        return Err(Error::InvalidArgument(
            "cluster must have at least one member".into(),
        ));
    }
    let sigma = spec.assemble(m1, m2);
    if let Some(chol) = Cholesky::new(sigma.clone()) {
        return Ok(SigmaFactor {
            lower: chol.l(),
            repaired: false,
        });
    }
    match policy {
        SigmaPolicy::Strict => Err(Error::NotPositiveDefinite { m1, m2 }),
        SigmaPolicy::Clip => {
            let eig = SymmetricEigen::new(sigma);
            let mut lower = eig.eigenvectors.clone();
            for (mut col, &lambda) in lower.column_iter_mut().zip(eig.eigenvalues.iter()) {
                col *= lambda.max(0.0).sqrt();
            }
            Ok(SigmaFactor {
                lower,
                repaired: true,
            })
        }
    }
}
