//! Deterministic, splittable Gaussian noise streams.
//!
//! Generation is counter based and stateless: every variate is a pure
//! function of `(master_seed, stream_key, step, slot)`, so any worker can
//! produce any block without coordination, and the synchronous-coupling
//! experiments can replay the exact increments that drove another system.
//!
//! Uniform words come from two rounds of the splitmix64 finalizer applied to
//! the keyed counter. Standard normals use the Box-Muller cosine branch on
//! two such words per variate. Both choices are part of the reproducibility
//! contract of this crate and must not change between versions.

/// Identifies one logical Brownian motion inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub experiment: u32,
    pub particle: u32,
    pub picard: u32,
}

impl StreamKey {
    pub fn new(experiment: u32, particle: u32, picard: u32) -> Self {
        Self { experiment, particle, picard }
    }
}

/// A stateless stream of per-mode Gaussian increments. The step counter is
/// passed by the caller, so re-querying any `(step, dim)` block is idempotent.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    master_seed: u64,
    key: StreamKey,
    base: u64,
}

/// Reserved step index for drawing initial data; the mild integrators only
/// ever use steps `0..M`.
pub const INITIAL_DATA_STEP: u64 = u64::MAX;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseStream {
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        let mut base = mix64(master_seed.wrapping_add(GAMMA));
        base = mix64(base ^ ((key.experiment as u64) << 32 | key.particle as u64));
        base = mix64(base ^ key.picard as u64);
        Self { master_seed, key, base }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    fn word(&self, step: u64, sub: u64) -> u64 {
        let c = step.wrapping_mul(0xa24b_aed4_963e_e407) ^ sub.wrapping_mul(0x9fb2_1c65_1e98_df25);
        mix64(mix64(self.base ^ c).wrapping_add(sub))
    }

    /// Uniform in `(0, 1]` from the top 53 bits; never zero, so it is safe
    /// under a logarithm.
    fn uniform_open(&self, step: u64, sub: u64) -> f64 {
        ((self.word(step, sub) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, 1)`.
    fn uniform_half_open(&self, step: u64, sub: u64) -> f64 {
        (self.word(step, sub) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Raw uniform in `[0, 1)` at sub-word `slot` of the given step. A
    /// Gaussian block of dimension `d` consumes sub-words `0..2d`, so callers
    /// mixing both on one step should start uniform slots at `2d`.
    pub fn uniform(&self, step: u64, slot: u64) -> f64 {
        self.uniform_half_open(step, slot)
    }

    /// One standard normal, Box-Muller cosine branch.
    pub fn standard_normal(&self, step: u64, slot: u64) -> f64 {
        let u1 = self.uniform_open(step, 2 * slot);
        let u2 = self.uniform_half_open(step, 2 * slot + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// `dim` i.i.d. standard normals for the given step, one per mode.
    pub fn gaussian_block(&self, step: u64, dim: usize) -> Vec<f64> {
        (0..dim).map(|slot| self.standard_normal(step, slot as u64)).collect()
    }
}
