//! Truncated spectral representation of the state space, the diagonal
//! generator and its semigroup.
//!
//! The state space is identified with the span of the first `K` eigenvectors
//! of the (negative definite) generator, so a point is just its coefficient
//! vector and all norms are plain Euclidean norms of coefficients. The
//! semigroup acts mode-wise as `exp(-lambda_k t)`, which makes it exact at
//! every time step.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Diagonal generator at truncation level `K`: eigenvalues `0 <= l_1 <= ... <= l_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    label: String,
    eigenvalues: Vec<f64>,
}

impl SpectralModel {
    /// Builds a model from explicit eigenvalues. They must be finite,
    /// nonnegative and ascending, and there must be at least one.
    pub fn new(label: impl Into<String>, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter(
                "truncation level K must be at least 1".into(),
            ));
        }
        for (k, &lambda) in eigenvalues.iter().enumerate() {
            if !lambda.is_finite() || lambda < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalue {k} is not a finite nonnegative real: {lambda}"
                )));
            }
            if k > 0 && lambda < eigenvalues[k - 1] {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalues must be ascending, but lambda_{} < lambda_{}",
                    k + 1,
                    k
                )));
            }
        }
        Ok(Self { label: label.into(), eigenvalues })
    }

    /// Dirichlet Laplacian on an interval of the given length:
    /// `lambda_k = (k pi / length)^2` for `k = 1..=K`.
    pub fn dirichlet_heat(dim: usize, length: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if length <= 0.0 || !length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interval length must be a positive real, got {length}"
            )));
        }
        let eigenvalues = (1..=dim)
            .map(|k| {
                let w = k as f64 * std::f64::consts::PI / length;
                w * w
            })
            .collect();
        Self::new("dirichlet_heat_1d", eigenvalues)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Truncation level `K`.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_dim(&self, x: &State) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    /// Applies `S_t` mode-wise: `y_k = exp(-lambda_k t) x_k`.
    pub fn semigroup_apply(&self, t: f64, x: &State) -> Result<State> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "semigroup time must be nonnegative, got {t}"
            )));
        }
        self.check_dim(x)?;
        let coords = self
            .eigenvalues
            .iter()
            .zip(&x.coords)
            .map(|(&lambda, &xk)| (-lambda * t).exp() * xk)
            .collect();
        Ok(State::new(coords))
    }

    /// Exact per-mode kernels for one step of the frozen-coefficient mild
    /// update over a window of width `dt`:
    ///
    /// * `decay_k      = exp(-lambda_k dt)`
    /// * `drift_weight_k = (1 - exp(-lambda_k dt)) / lambda_k`   (limit `dt` at `lambda_k = 0`)
    /// * `noise_std_k  = sqrt((1 - exp(-2 lambda_k dt)) / (2 lambda_k))`  (limit `sqrt(dt)`)
    ///
    /// `drift_weight` integrates `S_{dt-s}` against a constant drift and
    /// `noise_std` is the standard deviation of `int_0^dt exp(-lambda (dt-s)) dW_s`.
    pub fn convolution_kernels(&self, dt: f64) -> Result<ConvolutionKernels> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step width must be a positive real, got {dt}"
            )));
        }
        let dim = self.dim();
        let mut kernels = ConvolutionKernels {
            decay: Vec::with_capacity(dim),
            drift_weight: Vec::with_capacity(dim),
            noise_std: Vec::with_capacity(dim),
        };
        for &lambda in &self.eigenvalues {
            kernels.decay.push((-lambda * dt).exp());
            if lambda == 0.0 {
                kernels.drift_weight.push(dt);
                kernels.noise_std.push(dt.sqrt());
            } else {
                // exp_m1 keeps full precision as lambda*dt -> 0, so the
                // branch is continuous at lambda = 0.
                kernels.drift_weight.push(-(-lambda * dt).exp_m1() / lambda);
                kernels.noise_std.push((-(-2.0 * lambda * dt).exp_m1() / (2.0 * lambda)).sqrt());
            }
        }
        Ok(kernels)
    }
}

impl Serialize for SpectralModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr { label: self.label.clone(), eigenvalues: self.eigenvalues.clone() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpectralModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ModelRepr::deserialize(deserializer)?;
        SpectralModel::new(repr.label, repr.eigenvalues).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    label: String,
    eigenvalues: Vec<f64>,
}

/// Per-mode kernels of one exact mild step, see [`SpectralModel::convolution_kernels`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionKernels {
    pub decay: Vec<f64>,
    pub drift_weight: Vec<f64>,
    pub noise_std: Vec<f64>,
}

/// A point of the truncated state space: coefficients in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    pub coords: Vec<f64>,
}

impl State {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &State) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

/// A sample path on the uniform grid `t_m = m T / M`, `m = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    horizon: f64,
    states: Vec<State>,
}

impl PathSample {
    /// `states` holds the values at `t_0 = 0, ..., t_M = T`, so it must have
    /// at least two entries and a consistent dimension.
    pub fn new(horizon: f64, states: Vec<State>) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "path horizon must be a positive real, got {horizon}"
            )));
        }
        if states.len() < 2 {
            return Err(Error::InvalidParameter(
                "a path needs at least the initial and one further grid state".into(),
            ));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::GridMismatch("path states differ in dimension".into()));
        }
        Ok(Self { horizon, states })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, m: usize) -> &State {
        &self.states[m]
    }

    pub fn terminal(&self) -> &State {
        self.states.last().expect("paths are never empty")
    }

    /// Supremum metric on the grid: `max_m |w(t_m) - a(t_m)|_E`.
    pub fn uniform_distance(&self, other: &PathSample) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }

    /// `sup_t |w(t)|_E` against the zero path.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(State::norm).fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, other: &PathSample) -> Result<()> {
        if self.horizon != other.horizon
            || self.states.len() != other.states.len()
            || self.dim() != other.dim()
        {
            return Err(Error::GridMismatch(format!(
                "paths live on different grids: (T={}, M={}, dim={}) vs (T={}, M={}, dim={})",
                self.horizon,
                self.steps(),
                self.dim(),
                other.horizon,
                other.steps(),
                other.dim()
            )));
        }
        Ok(())
    }
}

impl Serialize for PathSample {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PathRepr {
            horizon: self.horizon,
            steps: self.steps(),
            dim: self.dim(),
            states: self.states.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PathSample {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PathRepr::deserialize(deserializer)?;
        let path = PathSample::new(repr.horizon, repr.states).map_err(serde::de::Error::custom)?;
        if path.steps() != repr.steps || path.dim() != repr.dim {
            return Err(serde::de::Error::custom(
                "path header (M, dim) disagrees with the state table",
            ));
        }
        Ok(path)
    }
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "M")]
    steps: usize,
    dim: usize,
    states: Vec<State>,
}
