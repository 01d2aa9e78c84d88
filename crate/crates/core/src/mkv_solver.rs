//! Picard iteration on measure flows: solves the McKean-Vlasov law by
//! iterating the map that sends a frozen flow to the marginal law of the
//! SPDE driven by it.
//!
//! The law flow is represented by the marginal empirical measures of a
//! finite path cloud. With common random numbers the iteration map is a
//! deterministic self-map of clouds, so the sup-over-grid Wasserstein
//! residual between consecutive flows is a meaningful stopping criterion
//! rather than Monte Carlo noise.

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::mild_solver::{solve_frozen_flow, SolverGrid};
use crate::noise::{NoiseStream, StreamKey};
use crate::spectral::{SpectralModel, State};
use crate::transport::{wasserstein_p, EmpiricalMeasure, MeasureFlow, PathCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// Cloud size used to represent the law flow.
    pub samples: usize,
    pub max_iter: usize,
    /// Stopping threshold for the sup-over-grid `w_p` residual.
    pub tol: f64,
    /// Wasserstein order of the residual.
    pub p: f64,
    /// Reuse the same noise streams in every iteration (default on).
    pub common_random_numbers: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { samples: 256, max_iter: 25, tol: 1e-2, p: 2.0, common_random_numbers: true }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidParameter("picard cloud size must be at least 2".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if self.tol <= 0.0 || !self.tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be a positive real, got {}",
                self.tol
            )));
        }
        if self.p.is_nan() || self.p < 1.0 || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must satisfy p >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

/// Result of [`solve_mkv`]. `converged == false` flags that the residual
/// never dropped below the tolerance; it is never silently accepted.
#[derive(Debug, Clone)]
pub struct PicardRun {
    pub cloud: PathCloud,
    /// Number of iteration-map applications performed.
    pub iterations: usize,
    /// Residual `max_m w_p(gamma_j(t_m), gamma_{j+1}(t_m))` after each application.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Wall-clock per iteration; diagnostics only, excluded from deterministic reports.
    pub iteration_millis: Vec<u128>,
}

/// One application of the iteration map: integrates an independent path per
/// sample against the frozen `flow` and returns the resulting cloud, whose
/// marginal flow is the empirical image of the input flow.
pub fn picard_step(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    grid: &SolverGrid,
    initial_cloud: &[State],
    flow: &MeasureFlow,
    streams: &[NoiseStream],
) -> Result<PathCloud> {
    if initial_cloud.len() != streams.len() {
        return Err(Error::DimensionMismatch {
            expected: initial_cloud.len(),
            got: streams.len(),
        });
    }
    let paths = initial_cloud
        .iter()
        .zip(streams)
        .map(|(x0, stream)| solve_frozen_flow(model, spec, grid, x0, flow, stream))
        .collect::<Result<Vec<_>>>()?;
    PathCloud::new(paths)
}

/// Sup-over-grid Wasserstein distance between two flows on the same grid.
pub fn flow_residual(a: &MeasureFlow, b: &MeasureFlow, p: f64) -> Result<f64> {
    a.check_grid(b.horizon(), b.steps(), b.dim())?;
    let mut residual: f64 = 0.0;
    for m in 0..=a.steps() {
        residual = residual.max(wasserstein_p(a.at(m), b.at(m), p)?);
    }
    Ok(residual)
}

/// Iterates the flow map from the time-constant initial law until the
/// residual drops below `cfg.tol` or `cfg.max_iter` applications are spent.
///
/// Noise streams are keyed `(experiment, sample, iteration)`; with common
/// random numbers the iteration component is pinned to zero.
pub fn solve_mkv(
    model: &SpectralModel,
    spec: &CoefficientSpec,
    grid: &SolverGrid,
    initial_cloud: &[State],
    cfg: &PicardConfig,
    master_seed: u64,
    experiment: u32,
) -> Result<PicardRun> {
    cfg.validate()?;
    if initial_cloud.len() != cfg.samples {
        return Err(Error::InvalidParameter(format!(
            "initial cloud has {} atoms but the configured cloud size is {}",
            initial_cloud.len(),
            cfg.samples
        )));
    }

    let initial_law = EmpiricalMeasure::new(initial_cloud.to_vec())?;
    let mut flow = MeasureFlow::constant(initial_law, grid.horizon, grid.steps)?;

    let mut residuals = Vec::new();
    let mut iteration_millis = Vec::new();
    let mut last_cloud: Option<PathCloud> = None;

    for iteration in 1..=cfg.max_iter {
        let started = std::time::Instant::now();
        let picard_component = if cfg.common_random_numbers { 0 } else { iteration as u32 };
        let streams: Vec<NoiseStream> = (0..cfg.samples)
            .map(|i| {
                NoiseStream::new(
                    master_seed,
                    StreamKey::new(experiment, i as u32, picard_component),
                )
            })
            .collect();
        let cloud = picard_step(model, spec, grid, initial_cloud, &flow, &streams)?;
        let next_flow = cloud.marginal_flow();
        let residual = flow_residual(&flow, &next_flow, cfg.p)?;
        residuals.push(residual);
        iteration_millis.push(started.elapsed().as_millis());
        last_cloud = Some(cloud);
        flow = next_flow;
        if residual <= cfg.tol {
            return Ok(PicardRun {
                cloud: last_cloud.expect("a step was just taken"),
                iterations: iteration,
                residuals,
                converged: true,
                iteration_millis,
            });
        }
    }

    Ok(PicardRun {
        cloud: last_cloud.expect("max_iter >= 1"),
        iterations: cfg.max_iter,
        residuals,
        converged: false,
        iteration_millis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_initial(
        dim: usize,
        n: usize,
        mean: f64,
        std_dev: f64,
        seed: u64,
        experiment: u32,
    ) -> Vec<State> {
        use crate::noise::INITIAL_DATA_STEP;
        (0..n)
            .map(|i| {
                let stream =
                    NoiseStream::new(seed, StreamKey::new(experiment, i as u32, 0));
                let block = stream.gaussian_block(INITIAL_DATA_STEP, dim);
                State::new(block.into_iter().map(|z| mean + std_dev * z).collect())
            })
            .collect()
    }

    #[test]
    fn measure_free_spec_converges_in_exactly_two_iterations() {
        let model = SpectralModel::new("m", vec![1.0]).unwrap();
        let spec = CoefficientSpec::ConstantDiffusion { b: vec![0.5] };
        let grid = SolverGrid::new(1.0, 16).unwrap();
        let cfg = PicardConfig { samples: 32, max_iter: 10, tol: 1e-9, ..Default::default() };
        let initial = gaussian_initial(1, 32, 0.0, 1.0, 3, 0);
        let run = solve_mkv(&model, &spec, &grid, &initial, &cfg, 3, 0).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 2);
        assert!(run.residuals[0] > 0.0);
        assert_eq!(run.residuals[1], 0.0);
    }

    #[test]
    fn picard_step_is_deterministic_and_flow_blind_for_constant_diffusion() {
        let model = SpectralModel::new("m", vec![2.0]).unwrap();
        let spec = CoefficientSpec::ConstantDiffusion { b: vec![1.0] };
        let grid = SolverGrid::new(0.5, 8).unwrap();
        let initial = gaussian_initial(1, 8, 0.5, 1.0, 9, 2);
        let streams: Vec<NoiseStream> =
            (0..8).map(|i| NoiseStream::new(9, StreamKey::new(2, i, 0))).collect();

        let flow_a =
            MeasureFlow::constant(EmpiricalMeasure::dirac(State::zeros(1)), 0.5, 8).unwrap();
        let flow_b =
            MeasureFlow::constant(EmpiricalMeasure::dirac(State::new(vec![7.0])), 0.5, 8).unwrap();

        let cloud_a = picard_step(&model, &spec, &grid, &initial, &flow_a, &streams).unwrap();
        let cloud_b = picard_step(&model, &spec, &grid, &initial, &flow_b, &streams).unwrap();
        let cloud_c = picard_step(&model, &spec, &grid, &initial, &flow_a, &streams).unwrap();
        assert_eq!(cloud_a, cloud_b);
        assert_eq!(cloud_a, cloud_c);
    }

    #[test]
    fn non_convergence_is_flagged_not_hidden() {
        let model = SpectralModel::new("m", vec![1.0]).unwrap();
        let spec = CoefficientSpec::MeanFieldOu { kappa: 1.0, b: vec![0.5] };
        let grid = SolverGrid::new(1.0, 8).unwrap();
        let cfg = PicardConfig { samples: 16, max_iter: 1, tol: 1e-16, ..Default::default() };
        let initial = gaussian_initial(1, 16, 1.0, 1.0, 1, 0);
        let run = solve_mkv(&model, &spec, &grid, &initial, &cfg, 1, 0).unwrap();
        assert!(!run.converged);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.residuals.len(), 1);
    }

    #[test]
    fn mean_field_ou_empirical_mean_follows_semigroup_decay() {
        // In expectation the interaction term cancels, and at the fixed point
        // the empirical mean decays exactly by e^{-lambda t}.
        let lambda = 1.0;
        let model = SpectralModel::new("m", vec![lambda]).unwrap();
        let spec = CoefficientSpec::MeanFieldOu { kappa: 1.0, b: vec![0.5] };
        let grid = SolverGrid::new(1.0, 64).unwrap();
        let samples = 512;
        let cfg = PicardConfig { samples, max_iter: 15, tol: 1e-3, ..Default::default() };
        let initial = gaussian_initial(1, samples, 1.0, 0.5, 7, 0);
        let run = solve_mkv(&model, &spec, &grid, &initial, &cfg, 7, 0).unwrap();
        assert!(run.converged, "residuals {:?}", run.residuals);

        let initial_mean = initial.iter().map(|s| s.coords[0]).sum::<f64>() / samples as f64;
        for m in 0..=grid.steps {
            let marginal = run.cloud.marginal(m);
            let mean = marginal.mean().coords[0];
            let expect = initial_mean * (-lambda * grid.time(m)).exp();
            let sd = {
                let mu = mean;
                let var = marginal
                    .atoms()
                    .iter()
                    .map(|a| (a.coords[0] - mu).powi(2))
                    .sum::<f64>()
                    / (samples as f64 - 1.0);
                var.sqrt()
            };
            let tol = 3.0 * sd / (samples as f64).sqrt();
            assert!(
                (mean - expect).abs() <= tol.max(1e-12),
                "t={} mean {mean} vs {expect} (tol {tol})",
                grid.time(m)
            );
        }
    }

    #[test]
    fn residuals_shrink_after_the_first_iteration_for_mean_field_ou() {
        // Observed contraction at the benchmark parameters; a trend check,
        // not a theorem.
        let model = SpectralModel::new("m", vec![1.0]).unwrap();
        let spec = CoefficientSpec::MeanFieldOu { kappa: 1.0, b: vec![0.5] };
        let grid = SolverGrid::new(1.0, 64).unwrap();
        let cfg = PicardConfig { samples: 512, max_iter: 10, tol: 1e-8, ..Default::default() };
        let initial = gaussian_initial(1, 512, 1.0, 1.0, 11, 0);
        let run = solve_mkv(&model, &spec, &grid, &initial, &cfg, 11, 0).unwrap();
        for pair in run.residuals[1..].windows(2) {
            assert!(pair[1] <= pair[0] * 1.0000001, "residuals {:?}", run.residuals);
        }
    }

    #[test]
    fn moment_flow_increments_shrink_under_grid_refinement() {
        // Empirical continuity of t -> |gamma(t)|_{p'}: the largest adjacent
        // increment decreases when the grid is refined.
        let model = SpectralModel::new("m", vec![1.0]).unwrap();
        let spec = CoefficientSpec::MeanFieldOu { kappa: 0.5, b: vec![0.5] };
        let p_prime = 5.0;
        let statistic = |steps: usize| -> f64 {
            let grid = SolverGrid::new(1.0, steps).unwrap();
            let cfg =
                PicardConfig { samples: 256, max_iter: 12, tol: 1e-2, ..Default::default() };
            let initial = gaussian_initial(1, 256, 1.0, 0.5, 13, 0);
            let run = solve_mkv(&model, &spec, &grid, &initial, &cfg, 13, 0).unwrap();
            let flow = run.cloud.marginal_flow();
            let mut largest: f64 = 0.0;
            for m in 0..grid.steps {
                let a = flow.at(m).moment(p_prime).unwrap();
                let b = flow.at(m + 1).moment(p_prime).unwrap();
                largest = largest.max((a - b).abs());
            }
            largest
        };
        let coarse = statistic(16);
        let fine = statistic(256);
        assert!(fine < coarse, "increments: coarse {coarse}, fine {fine}");
    }

    #[test]
    fn config_validation() {
        let bad = PicardConfig { samples: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PicardConfig { tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PicardConfig { p: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PicardConfig { max_iter: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
