//! Experiment orchestration: the chaos convergence ladder, the synchronous
//! coupling experiment, the chaoticity covariance test and the moment
//! diagnostic. Each operation validates its configuration, runs a
//! deterministic schedule of seeded simulations and assembles a report.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::conditions;
use crate::error::{Error, Result};
use crate::mild_solver::{solve_frozen_flow, SolverGrid};
use crate::mkv_solver::{solve_mkv, PicardRun};
use crate::noise::NoiseStream;
use crate::particle_system::{
    particle_streams, sample_gaussian_cloud, simulate_system, stratified_gaussian_cloud,
};
use crate::spectral::{SpectralModel, State};
use crate::transport::{wasserstein_path, PathCloud};

use super::config::{run_experiment_id, ExperimentConfig, EXPERIMENT_REFERENCE};
use super::report::{mean_and_stderr, ReportRow, RunReport};

/// Bounded test functionals for the chaoticity covariance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctional {
    /// `x -> tanh(scale * x_mode)` (1-based display, 0-based `mode` field).
    TanhMode { mode: usize, scale: f64 },
}

impl TestFunctional {
    pub fn eval(&self, state: &State) -> f64 {
        match self {
            TestFunctional::TanhMode { mode, scale } => (scale * state.coords[*mode]).tanh(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunctional::TanhMode { mode, scale } => format!("tanh({scale} x_{})", mode + 1),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunctional::TanhMode { mode, .. } if *mode >= dim => {
                Err(Error::Config(format!("functional mode {} out of range for dim {dim}", mode)))
            }
            _ => Ok(()),
        }
    }

    /// Default catalog pair used when the caller does not supply functionals.
    pub fn default_pair() -> [TestFunctional; 2] {
        [
            TestFunctional::TanhMode { mode: 0, scale: 1.0 },
            TestFunctional::TanhMode { mode: 0, scale: 2.0 },
        ]
    }
}

struct Workbench {
    model: SpectralModel,
    spec: CoefficientSpec,
    grid: SolverGrid,
    mean: State,
    std_dev: Vec<f64>,
}

impl Workbench {
    fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            model: cfg.build_model()?,
            spec: cfg.coefficients.clone(),
            grid: cfg.solver_grid()?,
            mean: cfg.initial_mean(),
            std_dev: cfg.initial.std_dev.clone(),
        })
    }

    fn initial_cloud(&self, n: usize, seed: u64, experiment: u32) -> Result<Vec<State>> {
        sample_gaussian_cloud(&self.mean, &self.std_dev, n, seed, experiment)
    }

    /// Initial cloud for law solves: stratified when configured, i.i.d. otherwise.
    fn law_cloud(
        &self,
        n: usize,
        seed: u64,
        experiment: u32,
        stratified: bool,
    ) -> Result<Vec<State>> {
        if stratified {
            stratified_gaussian_cloud(&self.mean, &self.std_dev, n, seed, experiment)
        } else {
            sample_gaussian_cloud(&self.mean, &self.std_dev, n, seed, experiment)
        }
    }

    fn system_run(
        &self,
        n: usize,
        seed: u64,
        experiment: u32,
    ) -> Result<(PathCloud, Vec<State>, Vec<NoiseStream>)> {
        let initial = self.initial_cloud(n, seed, experiment)?;
        let streams = particle_streams(n, seed, experiment);
        let cloud = simulate_system(&self.model, &self.spec, &self.grid, &initial, &streams)?;
        Ok((cloud, initial, streams))
    }
}

/// Solves the reference law with cloud size `reference_size`; a
/// non-convergent reference aborts the experiment.
pub fn solve_reference(cfg: &ExperimentConfig) -> Result<PicardRun> {
    let bench = Workbench::prepare(cfg)?;
    let picard = cfg.reference_picard_config();
    let initial = bench.law_cloud(
        cfg.reference_size,
        cfg.master_seed,
        EXPERIMENT_REFERENCE,
        cfg.stratified_reference,
    )?;
    let run = solve_mkv(
        &bench.model,
        &bench.spec,
        &bench.grid,
        &initial,
        &picard,
        cfg.master_seed,
        EXPERIMENT_REFERENCE,
    )?;
    if !run.converged {
        return Err(Error::NonConvergence {
            iterations: run.iterations,
            residual: *run.residuals.last().unwrap_or(&f64::NAN),
        });
    }
    Ok(run)
}

fn reference_diagnostics(report: &mut RunReport, reference: &PicardRun) {
    report.diagnostic("reference_iterations", reference.iterations);
    report.diagnostic(
        "reference_residual",
        reference.residuals.last().copied().unwrap_or(f64::NAN),
    );
}

/// Propagation-of-chaos ladder: estimates `E[w_T^{p°}(X^N, X^0)^{p°}]` for
/// every `N` in the ladder against the Picard reference law.
pub fn chaos_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let bench = Workbench::prepare(cfg)?;
    let reference = solve_reference(cfg)?;
    let mut report = RunReport::new("chaos", cfg.master_seed, cfg.config_hash());
    reference_diagnostics(&mut report, &reference);

    for (n_index, &n) in cfg.n_list.iter().enumerate() {
        let started = Instant::now();
        let mut values = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let experiment = run_experiment_id(n_index, rep, cfg.repetitions);
            let (cloud, _, _) = bench.system_run(n, cfg.master_seed, experiment)?;
            let distance = wasserstein_path(&cloud, &reference.cloud, cfg.p_path)?;
            values.push(distance.powf(cfg.p_path));
        }
        let (estimate, stderr) = mean_and_stderr(&values);
        report.rows.push(ReportRow {
            n,
            estimate,
            stderr,
            repetitions: cfg.repetitions,
            runtime_ms: started.elapsed().as_millis(),
        });
    }
    Ok(report)
}

/// Synchronous-coupling experiment: drives the interacting system and `N`
/// frozen-flow proxies with identical noise and initial values, and reports
/// `D_N = (1/N) sum_i sup_t |X^i - Y^i|^p` together with the per-run check
/// that the empirical path distance respects the coupling bound.
pub fn coupled_chaos(cfg: &ExperimentConfig) -> Result<RunReport> {
    let bench = Workbench::prepare(cfg)?;
    let reference = solve_reference(cfg)?;
    let reference_flow = reference.cloud.marginal_flow();
    let mut report = RunReport::new("coupled-chaos", cfg.master_seed, cfg.config_hash());
    reference_diagnostics(&mut report, &reference);

    let mut worst_violation = f64::NEG_INFINITY;
    for (n_index, &n) in cfg.n_list.iter().enumerate() {
        let started = Instant::now();
        let mut values = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let experiment = run_experiment_id(n_index, rep, cfg.repetitions);
            let (system, initial, streams) =
                bench.system_run(n, cfg.master_seed, experiment)?;
            let proxies = initial
                .iter()
                .zip(&streams)
                .map(|(x0, stream)| {
                    solve_frozen_flow(&bench.model, &bench.spec, &bench.grid, x0, &reference_flow, stream)
                })
                .collect::<Result<Vec<_>>>()?;
            let proxy_cloud = PathCloud::new(proxies)?;

            let coupling_sum: f64 = system
                .paths()
                .iter()
                .zip(proxy_cloud.paths())
                .map(|(x, y)| x.uniform_distance(y).expect("shared grid").powf(cfg.p))
                .sum();
            let d_run = coupling_sum / n as f64;
            let w = wasserstein_path(&system, &proxy_cloud, cfg.p)?.powf(cfg.p);
            worst_violation = worst_violation.max(w - d_run);
            values.push(d_run);
        }
        let (estimate, stderr) = mean_and_stderr(&values);
        report.rows.push(ReportRow {
            n,
            estimate,
            stderr,
            repetitions: cfg.repetitions,
            runtime_ms: started.elapsed().as_millis(),
        });
    }
    report.diagnostic("max_coupling_bound_violation", worst_violation);
    Ok(report)
}

/// Chaoticity covariance table: over independent runs, estimates
/// `|E[phi1(X^{N,1}) phi2(X^{N,2})] - E[phi1] E[phi2]|` at the terminal time
/// from disjoint tagged particle pairs.
pub fn chaoticity_test(
    cfg: &ExperimentConfig,
    functionals: &[TestFunctional],
) -> Result<RunReport> {
    let bench = Workbench::prepare(cfg)?;
    if functionals.len() < 2 {
        return Err(Error::Config("chaoticity needs at least two test functionals".into()));
    }
    if cfg.repetitions < 2 {
        return Err(Error::Config("chaoticity needs at least two repetitions".into()));
    }
    if cfg.n_list[0] < 2 {
        return Err(Error::Config("chaoticity needs at least two particles per system".into()));
    }
    for f in functionals {
        f.validate(bench.model.dim())?;
    }
    let phi1 = functionals[0];
    let phi2 = functionals[1];

    let mut report = RunReport::new("chaoticity", cfg.master_seed, cfg.config_hash());
    report.diagnostic("phi1", phi1.name());
    report.diagnostic("phi2", phi2.name());

    for (n_index, &n) in cfg.n_list.iter().enumerate() {
        let started = Instant::now();
        let reps = cfg.repetitions;
        // per-run statistics from disjoint particle pairs (1,2), (3,4), ...
        let mut products = Vec::with_capacity(reps);
        let mut firsts = Vec::with_capacity(reps);
        let mut seconds = Vec::with_capacity(reps);
        for rep in 0..reps {
            let experiment = run_experiment_id(n_index, rep, reps);
            let (cloud, _, _) = bench.system_run(n, cfg.master_seed, experiment)?;
            let pairs = n / 2;
            let mut g = 0.0;
            let mut h = 0.0;
            let mut k = 0.0;
            for pair in 0..pairs {
                let a = phi1.eval(cloud.paths()[2 * pair].terminal());
                let b = phi2.eval(cloud.paths()[2 * pair + 1].terminal());
                g += a * b;
                h += a;
                k += b;
            }
            products.push(g / pairs as f64);
            firsts.push(h / pairs as f64);
            seconds.push(k / pairs as f64);
        }
        let mean_g = products.iter().sum::<f64>() / reps as f64;
        let mean_h = firsts.iter().sum::<f64>() / reps as f64;
        let mean_k = seconds.iter().sum::<f64>() / reps as f64;
        let estimate = mean_g - mean_h * mean_k;
        // influence-function standard error of the covariance statistic
        let influence: Vec<f64> = (0..reps)
            .map(|r| products[r] - mean_k * firsts[r] - mean_h * seconds[r])
            .collect();
        let (_, stderr) = mean_and_stderr(&influence);
        report.rows.push(ReportRow {
            n,
            estimate,
            stderr,
            repetitions: reps,
            runtime_ms: started.elapsed().as_millis(),
        });
    }
    Ok(report)
}

/// Uniform-in-N moment diagnostic: per `N`, the empirical
/// `E[sup_t |X^{N,1}|^{p'}]` with its standard error over repetitions.
pub fn moment_diagnostic(cfg: &ExperimentConfig) -> Result<RunReport> {
    let bench = Workbench::prepare(cfg)?;
    let mut report = RunReport::new("moments", cfg.master_seed, cfg.config_hash());

    let mut estimates = Vec::new();
    for (n_index, &n) in cfg.n_list.iter().enumerate() {
        let started = Instant::now();
        let mut values = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let experiment = run_experiment_id(n_index, rep, cfg.repetitions);
            let (cloud, _, _) = bench.system_run(n, cfg.master_seed, experiment)?;
            let stat = cloud
                .paths()
                .iter()
                .map(|p| p.sup_norm().powf(cfg.p_prime))
                .sum::<f64>()
                / n as f64;
            values.push(stat);
        }
        let (estimate, stderr) = mean_and_stderr(&values);
        estimates.push(estimate);
        report.rows.push(ReportRow {
            n,
            estimate,
            stderr,
            repetitions: cfg.repetitions,
            runtime_ms: started.elapsed().as_millis(),
        });
    }
    let max = estimates.iter().cloned().fold(f64::MIN, f64::max);
    let min = estimates.iter().cloned().fold(f64::MAX, f64::min);
    report.diagnostic("max_over_min", max / min);
    report.diagnostic("growth_flag", (max / min >= 1.5).to_string());
    Ok(report)
}

/// Simulates one system of size `n` (which must be a ladder entry) and
/// returns its path cloud; used by the `simulate` subcommand.
pub fn simulate_run(cfg: &ExperimentConfig, n: usize) -> Result<PathCloud> {
    let bench = Workbench::prepare(cfg)?;
    let n_index = cfg
        .n_list
        .iter()
        .position(|&m| m == n)
        .ok_or_else(|| Error::Config(format!("particle count {n} is not in n_list")))?;
    let experiment = run_experiment_id(n_index, 0, cfg.repetitions);
    let (cloud, _, _) = bench.system_run(n, cfg.master_seed, experiment)?;
    Ok(cloud)
}

/// Solves the McKean-Vlasov law at the configured Picard cloud size; used
/// by the `mkv` subcommand. Non-convergence is reported in the run, not an
/// error.
pub fn solve_law(cfg: &ExperimentConfig) -> Result<PicardRun> {
    let bench = Workbench::prepare(cfg)?;
    let picard = cfg.picard_config();
    let initial = bench.law_cloud(
        picard.samples,
        cfg.master_seed,
        EXPERIMENT_REFERENCE,
        cfg.stratified_reference,
    )?;
    solve_mkv(
        &bench.model,
        &bench.spec,
        &bench.grid,
        &initial,
        &picard,
        cfg.master_seed,
        EXPERIMENT_REFERENCE,
    )
}

/// Assumption checker verdict document for the `check` subcommand.
pub fn check_conditions(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let bench = Workbench::prepare(cfg)?;
    let b = bench.spec.eval_sigma(
        0.0,
        &State::zeros(bench.model.dim()),
        &crate::transport::EmpiricalMeasure::dirac(State::zeros(bench.model.dim())),
    )?;

    let trace = conditions::trace_sum(&bench.model, cfg.check.delta, true)?;
    let factorization = conditions::factorization_integral(
        &bench.model,
        &b,
        cfg.alpha,
        cfg.grid.horizon,
        cfg.check.quad_tol,
    )?;
    let lipschitz = conditions::lipschitz_probe(
        &bench.spec,
        cfg.check.probe_samples,
        cfg.check.probe_region,
        cfg.p,
        cfg.master_seed,
    )?;
    let growth = conditions::growth_probe(
        &bench.spec,
        cfg.check.probe_samples,
        cfg.check.probe_region,
        cfg.p_prime,
        cfg.master_seed,
    )?;

    Ok(serde_json::json!({
        "model": bench.model,
        "trace": trace,
        "factorization": factorization,
        "lipschitz": lipschitz,
        "growth": {
            "constant": growth.constant,
            "samples_used": growth.samples_used,
            "declared_constant": bench.spec.declared_growth_constant(),
        },
        "standing_relations": {
            "alpha": cfg.alpha,
            "p_path": cfg.p_path,
            "p_prime": cfg.p_prime,
            "p_prime_exceeds_inverse_alpha": cfg.p_prime > 1.0 / cfg.alpha,
        },
        "seed": cfg.master_seed,
        "config_hash": cfg.config_hash(),
    }))
}
