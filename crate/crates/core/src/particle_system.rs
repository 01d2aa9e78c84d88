//! The weakly interacting N-particle system: every particle is advanced by
//! the frozen-coefficient mild step with the shared empirical measure of the
//! step start, recomputed once per step (synchronous update).
//!
//! Per-particle updates are pure given the measure snapshot, so a step is a
//! plain map over particles; results cannot depend on evaluation order.

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::mild_solver::{step_with_kernels, SolverGrid};
use crate::noise::{NoiseStream, StreamKey, INITIAL_DATA_STEP};
use crate::spectral::{PathSample, SpectralModel, State};
use crate::transport::{EmpiricalMeasure, PathCloud};

/// Advances all particles by one step of width `dt` from time `t`, reading
/// the empirical measure of the input states. `step_index` addresses the
/// noise blocks of the stateless streams.
pub fn step_system(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    t: f64,
    states: &[State],
    streams: &[NoiseStream],
    step_index: u64,
    dt: f64,
) -> Result<Vec<State>> {
    let kernels = model.convolution_kernels(dt)?;
    step_system_with_kernels(model, spec, t, states, streams, step_index, &kernels)
}

fn step_system_with_kernels(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    t: f64,
    states: &[State],
    streams: &[NoiseStream],
    step_index: u64,
    kernels: &crate::spectral::ConvolutionKernels,
) -> Result<Vec<State>> {
    if states.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if states.len() != streams.len() {
        return Err(Error::DimensionMismatch { expected: states.len(), got: streams.len() });
    }
    // the measure is frozen at the step start and shared by every particle
    let nu = EmpiricalMeasure::new(states.to_vec())?;
    states
        .iter()
        .zip(streams)
        .enumerate()
        .map(|(i, (x, stream))| {
            let xi = stream.gaussian_block(step_index, model.dim());
            step_with_kernels(model, spec, t, x, &nu, &xi, kernels).map_err(|e| match e {
                Error::DivergedPath { step, .. } => {
                    Error::DivergedPath { step, particle: Some(i) }
                }
                other => other,
            })
        })
        .collect()
}

/// Simulates the full system over the grid and returns the cloud of
/// particle paths. Deterministic given the stream keys.
pub fn simulate_system(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    grid: &SolverGrid,
    initial: &[State],
    streams: &[NoiseStream],
) -> Result<PathCloud> {
    if initial.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if initial.len() != streams.len() {
        return Err(Error::DimensionMismatch { expected: initial.len(), got: streams.len() });
    }
    for x in initial {
        if x.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: x.dim() });
        }
        if !x.is_finite() {
            return Err(Error::InvalidParameter("initial state is not finite".into()));
        }
    }
    let kernels = model.convolution_kernels(grid.dt())?;
    let n = initial.len();
    let mut trajectories: Vec<Vec<State>> = initial.iter().map(|x| vec![x.clone()]).collect();
    let mut current = initial.to_vec();
    for m in 0..grid.steps {
        current = step_system_with_kernels(
            model,
            spec,
            grid.time(m),
            &current,
            streams,
            m as u64,
            &kernels,
        )
        .map_err(|e| match e {
            Error::DivergedPath { particle, .. } => Error::DivergedPath { step: m, particle },
            other => other,
        })?;
        for (traj, state) in trajectories.iter_mut().zip(&current) {
            traj.push(state.clone());
        }
    }
    let paths = trajectories
        .into_iter()
        .map(|states| PathSample::new(grid.horizon, states))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(paths.len(), n);
    PathCloud::new(paths)
}

/// Draws `n` i.i.d. initial states from the spectral Gaussian law with the
/// given per-mode mean and standard deviation. Particle `i` reads the
/// reserved initial-data block of stream `(experiment, i, 0)`, so initial
/// values and driving noise never overlap.
pub fn sample_gaussian_cloud(
    mean: &State,
    std_dev: &[f64],
    n: usize,
    master_seed: u64,
    experiment: u32,
) -> Result<Vec<State>> {
    if mean.dim() != std_dev.len() {
        return Err(Error::DimensionMismatch { expected: mean.dim(), got: std_dev.len() });
    }
    if std_dev.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidParameter(
            "initial standard deviations must be finite and nonnegative".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    Ok((0..n)
        .map(|i| {
            let stream = NoiseStream::new(master_seed, StreamKey::new(experiment, i as u32, 0));
            let block = stream.gaussian_block(INITIAL_DATA_STEP, mean.dim());
            State::new(
                block
                    .into_iter()
                    .zip(&mean.coords)
                    .zip(std_dev)
                    .map(|((z, m), s)| m + s * z)
                    .collect(),
            )
        })
        .collect())
}

/// Streams for an `n`-particle run of the given experiment.
pub fn particle_streams(n: usize, master_seed: u64, experiment: u32) -> Vec<NoiseStream> {
    (0..n)
        .map(|i| NoiseStream::new(master_seed, StreamKey::new(experiment, i as u32, 0)))
        .collect()
}

/// Reserved picard component of the stream keys that drive stratification
/// shuffles.
const STRATIFY_KEY: u32 = u32::MAX;

/// Stratified (Latin hypercube) representation of the spectral Gaussian law:
/// per mode the atoms take the midpoint quantiles `(i + 1/2) / n`, shuffled
/// mode-wise so distinct modes are paired near-independently. The cloud has
/// exact per-mode quantile structure instead of sampling noise, which suits
/// reference-law solves; interacting systems should keep i.i.d. data.
pub fn stratified_gaussian_cloud(
    mean: &State,
    std_dev: &[f64],
    n: usize,
    master_seed: u64,
    experiment: u32,
) -> Result<Vec<State>> {
    if mean.dim() != std_dev.len() {
        return Err(Error::DimensionMismatch { expected: mean.dim(), got: std_dev.len() });
    }
    if std_dev.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidParameter(
            "initial standard deviations must be finite and nonnegative".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    let dim = mean.dim();
    let mut coords = vec![vec![0.0f64; dim]; n];
    for k in 0..dim {
        let mut order: Vec<usize> = (0..n).collect();
        if k > 0 {
            // Fisher-Yates keyed by (seed, experiment, mode); mode 0 stays
            // sorted, which fixes the atom order deterministically.
            let stream =
                NoiseStream::new(master_seed, StreamKey::new(experiment, k as u32, STRATIFY_KEY));
            for i in (1..n).rev() {
                let j = (stream.uniform(i as u64, 0) * (i + 1) as f64) as usize;
                order.swap(i, j.min(i));
            }
        }
        for (rank, &atom) in order.iter().enumerate() {
            let level = (rank as f64 + 0.5) / n as f64;
            coords[atom][k] = mean.coords[k] + std_dev[k] * inverse_normal_cdf(level);
        }
    }
    Ok(coords.into_iter().map(State::new).collect())
}

/// Inverse standard normal CDF, Acklam's rational approximation
/// (relative error below 1.2e-9 on (0, 1)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
