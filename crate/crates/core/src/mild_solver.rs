//! One-step and full-path integration of the SPDE in mild form against a
//! frozen measure flow.
//!
//! Per step the coefficients are evaluated once at the left grid endpoint and
//! the semigroup convolution against those frozen values is integrated
//! exactly per mode:
//!
//! ```text
//! x'_k = decay_k x_k + drift_weight_k mu_k(t, x, nu) + noise_std_k sigma_k(t, x, nu) xi_k
//! ```
//!
//! with the kernels of [`SpectralModel::convolution_kernels`] and `xi` a
//! standard normal block. Uniform grids of arbitrary step count generalize
//! the dyadic windows of the underlying approximation sequence.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::spectral::{ConvolutionKernels, PathSample, SpectralModel, State};
use crate::transport::{EmpiricalMeasure, MeasureFlow};

/// Uniform time grid `t_m = m T / M`, `m = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverGrid {
    #[serde(rename = "horizon")]
    pub horizon: f64,
    #[serde(rename = "steps")]
    pub steps: usize,
}

impl SolverGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be a positive real, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("step count M must be positive".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }
}

/// One frozen-coefficient mild step of width `dt` starting at `(t, x)` with
/// measure argument `nu` and noise block `xi`.
pub fn step(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    t: f64,
    x: &State,
    nu: &EmpiricalMeasure,
    xi: &[f64],
    dt: f64,
) -> Result<State> {
    let kernels = model.convolution_kernels(dt)?;
    step_with_kernels(model, spec, t, x, nu, xi, &kernels)
}

/// Same as [`step`] but with precomputed kernels; path solvers reuse one
/// kernel set for the whole uniform grid.
pub fn step_with_kernels(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    t: f64,
    x: &State,
    nu: &EmpiricalMeasure,
    xi: &[f64],
    kernels: &ConvolutionKernels,
) -> Result<State> {
    let dim = model.dim();
    if x.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
    }
    if xi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: xi.len() });
    }
    let mu = spec.eval_mu(t, x, nu)?;
    let sigma = spec.eval_sigma(t, x, nu)?;
    let mut coords = Vec::with_capacity(dim);
    for k in 0..dim {
        let next = kernels.decay[k] * x.coords[k]
            + kernels.drift_weight[k] * mu.coords[k]
            + kernels.noise_std[k] * sigma[k] * xi[k];
        if !next.is_finite() {
            return Err(Error::DivergedPath { step: 0, particle: None });
        }
        coords.push(next);
    }
    Ok(State::new(coords))
}

/// Integrates one path over the whole grid against the frozen flow
/// `nu(t_m) = flow.at(m)`. Deterministic given `(x0, stream)`.
pub fn solve_frozen_flow(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    grid: &SolverGrid,
    x0: &State,
    flow: &MeasureFlow,
    stream: &NoiseStream,
) -> Result<PathSample> {
    flow.check_grid(grid.horizon, grid.steps, model.dim())?;
    if !x0.is_finite() {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    if x0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x0.dim() });
    }
    let kernels = model.convolution_kernels(grid.dt())?;
    let mut states = Vec::with_capacity(grid.steps + 1);
    states.push(x0.clone());
    let mut current = x0.clone();
    for m in 0..grid.steps {
        let xi = stream.gaussian_block(m as u64, model.dim());
        current = step_with_kernels(model, spec, grid.time(m), &current, flow.at(m), &xi, &kernels)
            .map_err(|e| match e {
                Error::DivergedPath { particle, .. } => Error::DivergedPath { step: m, particle },
                other => other,
            })?;
        states.push(current.clone());
    }
    PathSample::new(grid.horizon, states)
}
