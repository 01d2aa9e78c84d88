//! Simulation of McKean-Vlasov SPDEs and weakly interacting SPDE particle
//! systems on a spectrally truncated Hilbert space.
//!
//! The building blocks:
//!
//! * [`spectral`] — the truncated state space, the diagonal generator and
//!   its semigroup, with exact per-mode convolution kernels;
//! * [`coefficients`] — the catalog of drift/diffusion pairs `(mu, sigma)`
//!   as functions of `(t, x, nu)` with diagonal diffusions;
//! * [`noise`] — counter-based splittable Gaussian streams, reproducible
//!   and replayable across coupled systems;
//! * [`mild_solver`] — frozen-coefficient mild integration of one path
//!   against a fixed measure flow;
//! * [`transport`] — empirical measures and exact discrete Wasserstein
//!   distances on states and paths (optimal assignment, no approximation);
//! * [`mkv_solver`] — Picard iteration on measure flows for the
//!   McKean-Vlasov law;
//! * [`particle_system`] — the interacting N-particle system with its
//!   synchronously updated empirical measure;
//! * [`conditions`] — numerical checkers for trace sums, the factorization
//!   integral, and sampled Lipschitz/growth constants;
//! * [`harness`] — experiment orchestration (chaos ladder, synchronous
//!   coupling, chaoticity, moments) with deterministic reports.

pub mod coefficients;
pub mod conditions;
pub mod error;
pub mod harness;
pub mod mild_solver;
pub mod mkv_solver;
pub mod noise;
pub mod particle_system;
pub mod spectral;
pub mod transport;
