//! End-to-end behaviors of the experiment harness: decoupling baselines,
//! coupling degeneration, chaoticity edge cases, determinism of reports and
//! moment sanity under refinement.

use spde_mkv::coefficients::CoefficientSpec;
use spde_mkv::harness::*;
use spde_mkv::mild_solver::{solve_frozen_flow, SolverGrid};
use spde_mkv::mkv_solver::picard_step;
use spde_mkv::noise::{NoiseStream, StreamKey};
use spde_mkv::particle_system::{
    inverse_normal_cdf, particle_streams, sample_gaussian_cloud, simulate_system,
};
use spde_mkv::spectral::{SpectralModel, State};
use spde_mkv::transport::{wasserstein_path, EmpiricalMeasure, MeasureFlow, PathCloud};

fn small_config(kappa: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig::Explicit { label: "ou".into(), eigenvalues: vec![1.0] },
        coefficients: CoefficientSpec::MeanFieldOu { kappa, b: vec![0.5] },
        grid: GridConfig { horizon: 1.0, steps: 32 },
        initial: InitialLaw { mean: vec![1.0], std_dev: vec![1.0] },
        n_list: vec![4, 8, 16],
        reference_size: 16,
        repetitions: 10,
        p: 2.0,
        p_path: 1.0,
        p_prime: 5.0,
        alpha: 0.25,
        master_seed: seed,
        picard: PicardSection { samples: 64, max_iter: 10, tol: 1e-2, common_random_numbers: true },
        stratified_reference: true,
        check: CheckParams::default(),
    }
}

#[test]
fn chaos_distance_vanishes_for_identically_seeded_decoupled_clouds() {
    // kappa = 0 with shared seeds and initial data: the system cloud IS the
    // reference cloud, so the path distance is exactly zero.
    let model = SpectralModel::new("m", vec![1.0]).unwrap();
    let spec = CoefficientSpec::MeanFieldOu { kappa: 0.0, b: vec![0.5] };
    let grid = SolverGrid::new(1.0, 32).unwrap();
    let n = 16;
    let initial =
        sample_gaussian_cloud(&State::new(vec![1.0]), &[1.0], n, 99, 5).unwrap();
    let streams = particle_streams(n, 99, 5);

    let system = simulate_system(&model, &spec, &grid, &initial, &streams).unwrap();
    let flow = MeasureFlow::constant(EmpiricalMeasure::dirac(State::zeros(1)), 1.0, 32).unwrap();
    let reference = picard_step(&model, &spec, &grid, &initial, &flow, &streams).unwrap();
    assert_eq!(wasserstein_path(&system, &reference, 1.0).unwrap(), 0.0);
}

#[test]
fn decoupled_chaos_estimate_matches_two_sample_baseline() {
    // kappa = 0: the chaos estimate is pure sampling error of N-atom clouds
    // against the reference; an independently seeded oracle must agree
    // within the spread of both estimates.
    let cfg = small_config(0.0, 21);
    let report = chaos_experiment(&cfg).unwrap();
    let reference = solve_reference(&cfg).unwrap();

    let model = cfg.build_model().unwrap();
    let grid = cfg.solver_grid().unwrap();
    let flow = reference.cloud.marginal_flow();
    for (row_idx, &n) in cfg.n_list.iter().enumerate() {
        let mut oracle_values = Vec::new();
        for rep in 0..cfg.repetitions as u32 {
            // fresh seeds disjoint from the harness schedule
            let experiment = 10_000 + rep;
            let initial =
                sample_gaussian_cloud(&cfg.initial_mean(), &cfg.initial.std_dev, n, 777, experiment)
                    .unwrap();
            let paths: Vec<_> = initial
                .iter()
                .enumerate()
                .map(|(i, x0)| {
                    let stream =
                        NoiseStream::new(777, StreamKey::new(experiment, i as u32, 0));
                    solve_frozen_flow(&model, &cfg.coefficients, &grid, x0, &flow, &stream)
                        .unwrap()
                })
                .collect();
            let cloud = PathCloud::new(paths).unwrap();
            oracle_values
                .push(wasserstein_path(&cloud, &reference.cloud, cfg.p_path).unwrap());
        }
        let (oracle_mean, oracle_se) = mean_and_stderr(&oracle_values);
        let row = &report.rows[row_idx];
        let spread = 3.0 * (row.stderr + oracle_se);
        assert!(
            (row.estimate - oracle_mean).abs() <= spread,
            "N={n}: harness {} vs oracle {oracle_mean} (spread {spread})",
            row.estimate
        );
    }
}

#[test]
fn coupled_chaos_degenerates_without_interaction() {
    let cfg = small_config(0.0, 13);
    let report = coupled_chaos(&cfg).unwrap();
    for row in &report.rows {
        assert_eq!(row.estimate, 0.0, "N={}", row.n);
        assert_eq!(row.stderr, 0.0);
    }
    let violation: f64 = report.diagnostics["max_coupling_bound_violation"].parse().unwrap();
    assert!(violation <= 0.0);
}

#[test]
fn picard_step_tracks_the_exact_gaussian_flow() {
    // Feed the exact law marginals (encoded as quantile clouds) into one
    // Picard application: per grid time the output empirical mean follows
    // e^{-lambda t} m0 within Monte Carlo tolerance.
    let lambda = 1.0;
    let kappa = 1.0;
    let b = 0.5;
    let m0 = 1.0;
    let v0 = 0.25;
    let model = SpectralModel::new("m", vec![lambda]).unwrap();
    let spec = CoefficientSpec::MeanFieldOu { kappa, b: vec![b] };
    let grid = SolverGrid::new(1.0, 32).unwrap();

    let encode = 256usize;
    let measures: Vec<EmpiricalMeasure> = (0..=grid.steps)
        .map(|m| {
            let t = grid.time(m);
            let mean = m0 * (-lambda * t).exp();
            let rate = 2.0 * (lambda + kappa);
            let var = v0 * (-rate * t).exp() + b * b * (1.0 - (-rate * t).exp()) / rate;
            let sd = var.sqrt();
            EmpiricalMeasure::new(
                (0..encode)
                    .map(|i| {
                        let level = (i as f64 + 0.5) / encode as f64;
                        State::new(vec![mean + sd * inverse_normal_cdf(level)])
                    })
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let flow = MeasureFlow::new(grid.horizon, measures).unwrap();

    let samples = 512usize;
    let initial = sample_gaussian_cloud(&State::new(vec![m0]), &[v0.sqrt()], samples, 3, 7).unwrap();
    let streams = particle_streams(samples, 3, 7);
    let cloud = picard_step(&model, &spec, &grid, &initial, &flow, &streams).unwrap();

    for m in 0..=grid.steps {
        let marginal = cloud.marginal(m);
        let mean = marginal.mean().coords[0];
        let expect = m0 * (-lambda * grid.time(m)).exp();
        let sd = {
            let var = marginal
                .atoms()
                .iter()
                .map(|a| (a.coords[0] - mean).powi(2))
                .sum::<f64>()
                / (samples as f64 - 1.0);
            var.sqrt()
        };
        let tol = 3.0 * sd / (samples as f64).sqrt();
        assert!(
            (mean - expect).abs() <= tol.max(1e-12),
            "t={}: mean {mean} vs {expect}",
            grid.time(m)
        );
    }
}

#[test]
fn chaoticity_vanishing_functionals_give_exactly_zero() {
    let cfg = small_config(1.0, 3);
    let zero = [
        TestFunctional::TanhMode { mode: 0, scale: 0.0 },
        TestFunctional::TanhMode { mode: 0, scale: 0.0 },
    ];
    let report = chaoticity_test(&cfg, &zero).unwrap();
    for row in &report.rows {
        assert_eq!(row.estimate, 0.0);
        assert_eq!(row.stderr, 0.0);
    }
}

#[test]
fn chaoticity_decoupled_covariance_is_noise_level() {
    let cfg = small_config(0.0, 17);
    let report = chaoticity_test(&cfg, &TestFunctional::default_pair()).unwrap();
    for row in &report.rows {
        assert!(
            row.estimate.abs() <= 3.0 * row.stderr,
            "N={}: cov {} stderr {}",
            row.n,
            row.estimate,
            row.stderr
        );
    }
}

#[test]
fn chaoticity_rejects_degenerate_setups() {
    let mut cfg = small_config(1.0, 3);
    cfg.repetitions = 1;
    assert!(chaoticity_test(&cfg, &TestFunctional::default_pair()).is_err());

    let cfg = small_config(1.0, 3);
    let single = [TestFunctional::TanhMode { mode: 0, scale: 1.0 }];
    assert!(chaoticity_test(&cfg, &single).is_err());

    let bad_mode = [
        TestFunctional::TanhMode { mode: 5, scale: 1.0 },
        TestFunctional::TanhMode { mode: 0, scale: 1.0 },
    ];
    assert!(chaoticity_test(&cfg, &bad_mode).is_err());
}

#[test]
fn moment_diagnostic_is_stable_and_grows_with_the_horizon() {
    let mut cfg = small_config(1.0, 42);
    cfg.n_list = vec![4, 8, 16, 32, 64];
    cfg.reference_size = 64;
    let report = moment_diagnostic(&cfg).unwrap();
    let ratio: f64 = report.diagnostics["max_over_min"].parse().unwrap();
    assert!(ratio < 1.5, "max/min {ratio}");
    assert_eq!(report.diagnostics["growth_flag"], "false");

    // doubling the horizon (kappa = 0, constant diffusion, paths from the
    // origin) grows the noise-driven sup statistic but keeps it finite
    let mut short = small_config(0.0, 5);
    short.coefficients = CoefficientSpec::ConstantDiffusion { b: vec![0.5] };
    short.initial = InitialLaw { mean: vec![0.0], std_dev: vec![0.0] };
    let mut long = short.clone();
    long.grid.horizon = 2.0;
    let a = moment_diagnostic(&short).unwrap();
    let b = moment_diagnostic(&long).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert!(ra.estimate.is_finite() && rb.estimate.is_finite());
        assert!(rb.estimate > ra.estimate, "N={}: {} vs {}", ra.n, ra.estimate, rb.estimate);
    }
}

#[test]
fn moment_diagnostic_is_exact_for_deterministic_decay() {
    // mu = 0, sigma = 0: sup_t |X_t| is the initial norm (mode-wise decay),
    // so the statistic equals the initial p'-moment statistic exactly.
    let mut cfg = small_config(0.0, 6);
    cfg.coefficients = CoefficientSpec::ConstantDiffusion { b: vec![0.0] };
    let report = moment_diagnostic(&cfg).unwrap();
    for (n_index, row) in report.rows.iter().enumerate() {
        let mut expect_values = Vec::new();
        for rep in 0..cfg.repetitions {
            let experiment = run_experiment_id(n_index, rep, cfg.repetitions);
            let initial = sample_gaussian_cloud(
                &cfg.initial_mean(),
                &cfg.initial.std_dev,
                row.n,
                cfg.master_seed,
                experiment,
            )
            .unwrap();
            expect_values.push(
                initial.iter().map(|x| x.norm().powf(cfg.p_prime)).sum::<f64>() / row.n as f64,
            );
        }
        let (expect, _) = mean_and_stderr(&expect_values);
        assert_eq!(row.estimate, expect, "N={}", row.n);
    }
}

#[test]
fn sup_moment_is_finite_and_stable_under_grid_refinement() {
    // 10^3 frozen-flow paths: the p'-moment of sup_t |X_t| does not blow up
    // when the grid is refined.
    let model = SpectralModel::new("m", vec![1.0]).unwrap();
    let spec = CoefficientSpec::MeanFieldOu { kappa: 1.0, b: vec![0.5] };
    let statistic = |steps: usize| -> f64 {
        let grid = SolverGrid::new(1.0, steps).unwrap();
        let flow =
            MeasureFlow::constant(EmpiricalMeasure::dirac(State::zeros(1)), 1.0, steps).unwrap();
        let total = 1000usize;
        let mut acc = 0.0;
        for i in 0..total {
            let stream = NoiseStream::new(55, StreamKey::new(900, i as u32, 0));
            let x0 = State::new(vec![1.0]);
            let path = solve_frozen_flow(&model, &spec, &grid, &x0, &flow, &stream).unwrap();
            acc += path.sup_norm().powf(5.0);
        }
        acc / total as f64
    };
    let coarse = statistic(16);
    let fine = statistic(128);
    assert!(coarse.is_finite() && fine.is_finite());
    let ratio = (coarse / fine).max(fine / coarse);
    assert!(ratio < 1.5, "refinement moved the sup-moment too much: {coarse} vs {fine}");
}

#[test]
fn reports_are_deterministic_given_config_and_seed() {
    let cfg = small_config(1.0, 8);
    let a = chaos_experiment(&cfg).unwrap();
    let b = chaos_experiment(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_json(), b.to_json());

    let a = moment_diagnostic(&cfg).unwrap();
    let b = moment_diagnostic(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());

    let a = solve_law(&cfg).unwrap();
    let b = solve_law(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a.cloud).unwrap(),
        serde_json::to_string(&b.cloud).unwrap()
    );
    assert_eq!(a.residuals, b.residuals);
}

#[test]
fn seed_changes_the_results() {
    let a = chaos_experiment(&small_config(1.0, 8)).unwrap();
    let b = chaos_experiment(&small_config(1.0, 9)).unwrap();
    assert_ne!(a.to_csv(), b.to_csv());
}

#[test]
fn non_convergent_reference_aborts_the_experiment() {
    let mut cfg = small_config(1.0, 8);
    cfg.picard = PicardSection { samples: 64, max_iter: 1, tol: 1e-12, common_random_numbers: true };
    match chaos_experiment(&cfg) {
        Err(spde_mkv::error::Error::NonConvergence { .. }) => {}
        other => panic!("expected a non-convergence abort, got {other:?}"),
    }
}

#[test]
fn simulate_run_requires_a_ladder_entry() {
    let cfg = small_config(1.0, 8);
    assert!(simulate_run(&cfg, 5).is_err());
    let cloud = simulate_run(&cfg, 8).unwrap();
    assert_eq!(cloud.len(), 8);
    assert_eq!(cloud.steps(), 32);
}

#[test]
fn means_csv_shape() {
    let cfg = small_config(1.0, 8);
    let cloud = simulate_run(&cfg, 4).unwrap();
    let csv = means_csv(&cloud, cfg.p_prime);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,mean_1,p_moment");
    assert_eq!(csv.lines().count(), cloud.steps() + 2);
}
