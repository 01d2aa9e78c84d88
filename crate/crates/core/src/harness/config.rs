//! Experiment configuration: JSON schema, validation, and construction of
//! the model objects.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::error::{Error, Result};
use crate::mild_solver::SolverGrid;
use crate::mkv_solver::PicardConfig;
use crate::spectral::{SpectralModel, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    /// Dirichlet Laplacian on an interval: `lambda_k = (k pi / length)^2`.
    DirichletHeat { dim: usize, length: f64 },
    /// Explicit eigenvalue table.
    Explicit { label: String, eigenvalues: Vec<f64> },
}

impl ModelConfig {
    pub fn build(&self) -> Result<SpectralModel> {
        match self {
            ModelConfig::DirichletHeat { dim, length } => SpectralModel::dirichlet_heat(*dim, *length),
            ModelConfig::Explicit { label, eigenvalues } => {
                SpectralModel::new(label.clone(), eigenvalues.clone())
            }
        }
    }
}

/// i.i.d. spectral Gaussian initial law: per-mode mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSection {
    pub samples: usize,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default = "default_true")]
    pub common_random_numbers: bool,
}

fn default_true() -> bool {
    true
}

/// Parameters for the `check` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_probe_samples")]
    pub probe_samples: usize,
    #[serde(default = "default_probe_region")]
    pub probe_region: f64,
}

fn default_delta() -> f64 {
    0.4
}
fn default_quad_tol() -> f64 {
    1e-9
}
fn default_probe_samples() -> usize {
    2000
}
fn default_probe_region() -> f64 {
    2.0
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            quad_tol: default_quad_tol(),
            probe_samples: default_probe_samples(),
            probe_region: default_probe_region(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub coefficients: CoefficientSpec,
    pub grid: GridConfig,
    pub initial: InitialLaw,
    /// Particle counts of the convergence ladder, strictly increasing.
    pub n_list: Vec<usize>,
    /// Reference cloud size; every entry of `n_list` must divide it.
    pub reference_size: usize,
    pub repetitions: usize,
    /// Wasserstein order of the Picard residual and the coupling statistic.
    pub p: f64,
    /// Path-space Wasserstein order `p°` used by the chaos distance.
    pub p_path: f64,
    /// Moment order `p'`; the standing relations demand `p° < p'` and `p' > 1/alpha`.
    pub p_prime: f64,
    pub alpha: f64,
    pub master_seed: u64,
    pub picard: PicardSection,
    /// Draw the Picard initial cloud by quantile stratification instead of
    /// i.i.d. sampling (variance-reduced representation of the initial law;
    /// interacting systems always use i.i.d. data).
    #[serde(default = "default_true")]
    pub stratified_reference: bool,
    #[serde(default)]
    pub check: CheckParams,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the standing parameter relations and all cross-field
    /// consistency before any computation runs.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.build().map_err(|e| Error::Config(e.to_string()))?;
        self.coefficients.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.coefficients.dim() != model.dim() {
            return Err(Error::Config(format!(
                "coefficients are defined for {} modes but the model has {}",
                self.coefficients.dim(),
                model.dim()
            )));
        }
        SolverGrid::new(self.grid.horizon, self.grid.steps)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.initial.mean.len() != model.dim() || self.initial.std_dev.len() != model.dim() {
            return Err(Error::Config(format!(
                "initial law dimensions ({} mean, {} std_dev) do not match the model dimension {}",
                self.initial.mean.len(),
                self.initial.std_dev.len(),
                model.dim()
            )));
        }
        if self.initial.std_dev.iter().any(|s| !s.is_finite() || *s < 0.0)
            || self.initial.mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::Config("initial law parameters must be finite".into()));
        }

        if self.p.is_nan() || self.p < 1.0 {
            return Err(Error::Config(format!("p must satisfy p >= 1, got {}", self.p)));
        }
        if self.p_path.is_nan() || self.p_prime.is_nan() || self.p_path < 1.0 || self.p_path >= self.p_prime {
            return Err(Error::Config(format!(
                "path order must satisfy 1 <= p_path < p_prime, got p_path {} and p_prime {}",
                self.p_path, self.p_prime
            )));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.alpha >= 0.5 {
            return Err(Error::Config(format!("alpha must lie in (0, 1/2), got {}", self.alpha)));
        }
        if self.p_prime.is_nan() || self.p_prime <= 1.0 / self.alpha {
            return Err(Error::Config(format!(
                "the standing relation p_prime > 1/alpha fails: p_prime {} with 1/alpha {}",
                self.p_prime,
                1.0 / self.alpha
            )));
        }

        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        if self.n_list[0] == 0 {
            return Err(Error::Config("particle counts must be positive".into()));
        }
        if self.reference_size < 2 {
            return Err(Error::Config("reference cloud size must be at least 2".into()));
        }
        for &n in &self.n_list {
            if !self.reference_size.is_multiple_of(n) {
                return Err(Error::Config(format!(
                    "every N must divide the reference size: {} does not divide {}",
                    n, self.reference_size
                )));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        self.picard_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.check.delta.is_nan() || self.check.delta <= 0.0 || self.check.delta >= 1.0 {
            return Err(Error::Config(format!(
                "check.delta must lie in (0, 1), got {}",
                self.check.delta
            )));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SpectralModel> {
        self.model.build()
    }

    pub fn solver_grid(&self) -> Result<SolverGrid> {
        SolverGrid::new(self.grid.horizon, self.grid.steps)
    }

    pub fn initial_mean(&self) -> State {
        State::new(self.initial.mean.clone())
    }

    /// Picard configuration for the `mkv` subcommand (cloud size from the
    /// picard section).
    pub fn picard_config(&self) -> PicardConfig {
        PicardConfig {
            samples: self.picard.samples,
            max_iter: self.picard.max_iter,
            tol: self.picard.tol,
            p: self.p,
            common_random_numbers: self.picard.common_random_numbers,
        }
    }

    /// Picard configuration for the chaos reference law (cloud size
    /// `reference_size`).
    pub fn reference_picard_config(&self) -> PicardConfig {
        PicardConfig { samples: self.reference_size, ..self.picard_config() }
    }

    /// Stable hash of the canonical JSON serialization, recorded in reports
    /// so a row can be traced back to the exact configuration.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Noise-stream experiment id of the reference Picard solve.
pub const EXPERIMENT_REFERENCE: u32 = 0;

/// Noise-stream experiment id of system run `rep` on ladder rung `n_index`.
/// Ids start at 1 so they never collide with the reference solve.
pub fn run_experiment_id(n_index: usize, rep: usize, repetitions: usize) -> u32 {
    1 + (n_index * repetitions + rep) as u32
}
