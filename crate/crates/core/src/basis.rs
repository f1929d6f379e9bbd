use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-function chaos basis on a regular grid: horizon `T`, `N` steps of
/// width `h = T / N`, a `d`-dimensional Brownian motion and chaos order `p`.
///
/// The basis has `d * N` slots, one per (component, step) pair. Slot numbering
/// is component-major: component `j` at step `i` (both zero-based) is slot
/// `j * N + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosBasisSpec {
    horizon: f64,
    steps: usize,
    dim: usize,
    order: usize,
}

impl ChaosBasisSpec {
    pub fn new(horizon: f64, steps: usize, dim: usize, order: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon T must be positive, got {horizon}")));
        }
        if steps == 0 || dim == 0 || order == 0 {
            return Err(Error::Config(format!(
                "N, d and p must all be at least 1 (got N={steps}, d={dim}, p={order})"
            )));
        }
        if steps < dim * order {
            return Err(Error::Config(format!(
                "grid too coarse for the chaos order: need N >= d*p, got N={steps}, d={dim}, p={order}"
            )));
        }
        Ok(Self { horizon, steps, dim, order })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Time step `h = T / N`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn slots(&self) -> usize {
        self.dim * self.steps
    }

    #[inline]
    pub fn slot(&self, component: usize, step: usize) -> usize {
        component * self.steps + step
    }

    /// Inverse of [`slot`](Self::slot): `(component, step)`.
    #[inline]
    pub fn slot_position(&self, slot: usize) -> (usize, usize) {
        (slot / self.steps, slot % self.steps)
    }

    /// Grid time `t_r = r h`.
    pub fn grid_time(&self, r: usize) -> f64 {
        r as f64 * self.step_size()
    }

    /// True when both bases define the same chaos space.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.steps == other.steps && self.dim == other.dim && self.horizon == other.horizon
    }
}
