//! Time grids, delay-to-lag maps and reproducible Brownian increments.
//!
//! # Substream derivation
//!
//! The increments of path `i` under master seed `s` come from a ChaCha20
//! block cipher used as a counter-based generator:
//!
//! * key: the 32 bytes produced by `SeedableRng::seed_from_u64(s)`
//!   (rand_core's PCG32 expansion of the 64-bit seed),
//! * stream id (nonce): `i` as a little-endian `u64`,
//! * block counter: starts at word position 0.
//!
//! Standard normals are drawn with the ziggurat sampler
//! (`rand_distr::StandardNormal`) and scaled by `sqrt(h)`. A path therefore
//! depends only on `(s, i, L, T)`, never on which thread produced it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: steps={steps}, horizon={horizon}")]
    InvalidGrid { steps: usize, horizon: f64 },
    #[error("delay 1/{n} is not a whole number of steps (L/(nT) = {ratio})")]
    DelayNotAligned { n: usize, ratio: f64 },
    #[error("delay 1/{n} is shorter than one grid step (L/(nT) = {ratio})")]
    DelayTooFine { n: usize, ratio: f64 },
    #[error("delay parameter n must be >= 1")]
    ZeroDelayParameter,
    #[error("refinement factor {factor} does not divide {steps} steps")]
    BadRefinement { steps: usize, factor: usize },
}

/// Minimum number of grid steps per delay window accepted by studies.
pub const MIN_STEPS_PER_DELAY: usize = 8;

/// Uniform grid `t_k = k h`, `k = 0..=L`, `h = T / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    steps: usize,
    horizon: f64,
    step_size: f64,
}

impl SimGrid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self, GridError> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(GridError::InvalidGrid { steps, horizon });
        }
        Ok(Self { steps, horizon, step_size: horizon / steps as f64 })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step_size
        }
    }

    /// Grid with `factor` times as many steps over the same horizon.
    pub fn refine(&self, factor: usize) -> Result<Self, GridError> {
        Self::new(self.steps * factor, self.horizon)
    }
}

pub fn make_grid(steps: usize, horizon: f64) -> Result<SimGrid, GridError> {
    SimGrid::new(steps, horizon)
}

/// A delay `1/n` realised as `m` whole grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagMap {
    lag_steps: usize,
}

impl LagMap {
    pub fn lag_steps(&self) -> usize {
        self.lag_steps
    }

    /// Index of `(t_k - 1/n)^+`.
    pub fn clamped(&self, k: usize) -> usize {
        k.saturating_sub(self.lag_steps)
    }

    /// Index of `t_k - 1/n`, or `None` when that time is negative and the
    /// pre-time history applies.
    pub fn unclamped(&self, k: usize) -> Option<usize> {
        k.checked_sub(self.lag_steps)
    }
}

pub fn lag_map(grid: &SimGrid, n: usize) -> Result<LagMap, GridError> {
    if n == 0 {
        return Err(GridError::ZeroDelayParameter);
    }
    let ratio = grid.steps as f64 / (n as f64 * grid.horizon);
    if ratio < 1.0 {
        return Err(GridError::DelayTooFine { n, ratio });
    }
    let m = ratio.round();
    if (ratio - m).abs() > 1e-9 * ratio {
        return Err(GridError::DelayNotAligned { n, ratio });
    }
    Ok(LagMap { lag_steps: m as usize })
}

/// Whether the grid resolves the delay `1/n` with at least
/// [`MIN_STEPS_PER_DELAY`] steps.
pub fn resolves(grid: &SimGrid, n: usize) -> bool {
    grid.step_size * (MIN_STEPS_PER_DELAY * n) as f64 <= 1.0 + 1e-12
}

/// Identifies one Brownian path in a reproducible family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrownianDriver {
    pub master_seed: u64,
    pub path_index: u64,
}

impl BrownianDriver {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self { master_seed, path_index }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        rng
    }

    /// Raw standard normals of this path (not scaled by `sqrt(h)`).
    pub fn standard_normals(&self, count: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn increments(&self, grid: &SimGrid) -> Vec<f64> {
        let scale = grid.step_size.sqrt();
        let mut out = self.standard_normals(grid.steps);
        out.iter_mut().for_each(|z| *z *= scale);
        out
    }
}

pub fn generate_increments(master_seed: u64, path_index: u64, grid: &SimGrid) -> Vec<f64> {
    BrownianDriver::new(master_seed, path_index).increments(grid)
}

/// Sums consecutive blocks of `factor` fine increments.
pub fn aggregate_increments(fine: &[f64], factor: usize) -> Result<Vec<f64>, GridError> {
    if factor == 0 || !fine.len().is_multiple_of(factor) {
        return Err(GridError::BadRefinement { steps: fine.len(), factor });
    }
    Ok(fine.chunks_exact(factor).map(|c| c.iter().sum()).collect())
}

/// `W_{t_0}, ..., W_{t_L}` with `W_0 = 0`.
pub fn brownian_path(increments: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    w.push(acc);
    for dw in increments {
        acc += dw;
        w.push(acc);
    }
    w
}
