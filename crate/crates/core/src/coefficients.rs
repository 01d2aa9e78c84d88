//! Catalog of drift/diffusion coefficient pairs `(mu, sigma)`.
//!
//! Diffusions are restricted to diagonal per-mode multipliers, so the
//! operator norm is the largest multiplier and the Hilbert-Schmidt norm is
//! the Euclidean norm of the multiplier vector. Measure dependence enters
//! through moment functionals (the barycenter) only, which covers the
//! linear-in-measure drifts the catalog realizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::State;
use crate::transport::EmpiricalMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `mu_k = kappa (mean_k(nu) - x_k)`, `sigma_k = b_k`.
    MeanFieldOu { kappa: f64, b: Vec<f64> },
    /// `mu_k = a_k x_k + kappa mean_k(nu)`, `sigma_k = b_k`.
    LinearInMeasure { a: Vec<f64>, kappa: f64, b: Vec<f64> },
    /// `mu = 0`, `sigma_k = b_k`: the stochastic Cauchy problem.
    ConstantDiffusion { b: Vec<f64> },
}

impl CoefficientSpec {
    /// Mode count the coefficients are defined for.
    pub fn dim(&self) -> usize {
        match self {
            CoefficientSpec::MeanFieldOu { b, .. } => b.len(),
            CoefficientSpec::LinearInMeasure { b, .. } => b.len(),
            CoefficientSpec::ConstantDiffusion { b } => b.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_levels = |b: &[f64]| -> Result<()> {
            if b.is_empty() {
                return Err(Error::InvalidParameter("noise levels b must be nonempty".into()));
            }
            if b.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::InvalidParameter(
                    "noise levels b must be finite and nonnegative".into(),
                ));
            }
            Ok(())
        };
        match self {
            CoefficientSpec::MeanFieldOu { kappa, b } => {
                check_levels(b)?;
                if !kappa.is_finite() {
                    return Err(Error::InvalidParameter("kappa must be finite".into()));
                }
            }
            CoefficientSpec::LinearInMeasure { a, kappa, b } => {
                check_levels(b)?;
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
                }
                if a.iter().any(|x| !x.is_finite()) || !kappa.is_finite() {
                    return Err(Error::InvalidParameter(
                        "drift parameters must be finite".into(),
                    ));
                }
            }
            CoefficientSpec::ConstantDiffusion { b } => check_levels(b)?,
        }
        Ok(())
    }

    fn check_inputs(&self, x: &State, nu: &EmpiricalMeasure) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        if nu.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: nu.dim() });
        }
        Ok(())
    }

    /// Drift `mu(t, x, nu)`. The catalog is autonomous, so `t` is unused but
    /// kept in the signature of the contract.
    pub fn eval_mu(&self, _t: f64, x: &State, nu: &EmpiricalMeasure) -> Result<State> {
        self.check_inputs(x, nu)?;
        let coords = match self {
            CoefficientSpec::MeanFieldOu { kappa, .. } => {
                let mean = nu.mean();
                x.coords
                    .iter()
                    .zip(&mean.coords)
                    .map(|(&xk, &mk)| kappa * (mk - xk))
                    .collect()
            }
            CoefficientSpec::LinearInMeasure { a, kappa, .. } => {
                let mean = nu.mean();
                a.iter()
                    .zip(&x.coords)
                    .zip(&mean.coords)
                    .map(|((&ak, &xk), &mk)| ak * xk + kappa * mk)
                    .collect()
            }
            CoefficientSpec::ConstantDiffusion { b } => vec![0.0; b.len()],
        };
        Ok(State::new(coords))
    }

    /// Diagonal diffusion multipliers `sigma(t, x, nu)`, one per mode.
    pub fn eval_sigma(&self, _t: f64, x: &State, nu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        self.check_inputs(x, nu)?;
        let b = match self {
            CoefficientSpec::MeanFieldOu { b, .. } => b,
            CoefficientSpec::LinearInMeasure { b, .. } => b,
            CoefficientSpec::ConstantDiffusion { b } => b,
        };
        Ok(b.clone())
    }

    /// Declared linear-growth constant: on all inputs,
    /// `|mu| + |sigma|_op <= C (1 + |x| + |nu|_p)`.
    pub fn declared_growth_constant(&self) -> f64 {
        let max_b = |b: &[f64]| b.iter().cloned().fold(0.0, f64::max);
        match self {
            CoefficientSpec::MeanFieldOu { kappa, b } => 2.0 * kappa.abs() + max_b(b),
            CoefficientSpec::LinearInMeasure { a, kappa, b } => {
                a.iter().map(|x| x.abs()).fold(0.0, f64::max) + kappa.abs() + max_b(b)
            }
            CoefficientSpec::ConstantDiffusion { b } => max_b(b),
        }
    }

    /// Declared Lipschitz constant of `(x, nu) -> (mu, sigma)` with respect
    /// to `|x - y| + w_p(nu, eta)`.
    pub fn declared_lipschitz_constant(&self) -> f64 {
        match self {
            CoefficientSpec::MeanFieldOu { kappa, .. } => kappa.abs(),
            CoefficientSpec::LinearInMeasure { a, kappa, .. } => {
                a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(kappa.abs())
            }
            CoefficientSpec::ConstantDiffusion { .. } => 0.0,
        }
    }
}

/// Operator norm of a diagonal multiplier vector: the largest entry.
pub fn operator_norm(multipliers: &[f64]) -> f64 {
    multipliers.iter().map(|m| m.abs()).fold(0.0, f64::max)
}

/// Hilbert-Schmidt norm of a diagonal multiplier vector: Euclidean norm.
pub fn hilbert_schmidt_norm(multipliers: &[f64]) -> f64 {
    multipliers.iter().map(|m| m * m).sum::<f64>().sqrt()
}
