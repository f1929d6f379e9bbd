//! Standardized Brownian increment panels.
//!
//! A panel holds `M` independent samples of the `N x d` matrix
//! `G_i^j = (B^j_{t_i} - B^j_{t_{i-1}}) / sqrt(h)`. Generation is split into
//! fixed blocks of samples, each drawn from its own ChaCha8 stream, so the
//! panel is a pure function of `(M, N, d, T, seed)` whatever the thread count.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::ChaosBasisSpec;
use crate::error::{Error, Result};

/// Samples per RNG stream.
const PANEL_BLOCK: usize = 1024;

pub const DEFAULT_PANEL_BYTES_CAP: usize = 4 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePanel {
    samples: usize,
    steps: usize,
    dim: usize,
    horizon: f64,
    seed: u64,
    /// `g[(m * N + i) * d + j]`
    g: Vec<f64>,
}

impl SamplePanel {
    /// Wraps raw increments. `g` must hold `samples * steps * dim` values laid
    /// out as `g[(m * N + i) * d + j]`.
    pub fn from_raw(
        samples: usize,
        steps: usize,
        dim: usize,
        horizon: f64,
        seed: u64,
        g: Vec<f64>,
    ) -> Result<Self> {
        if g.len() != samples * steps * dim {
            return Err(Error::DimensionMismatch(format!(
                "panel body has {} values, expected {samples} x {steps} x {dim}",
                g.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 || dim == 0 {
            return Err(Error::Config("panel needs T > 0, N >= 1 and d >= 1".into()));
        }
        Ok(Self { samples, steps, dim, horizon, seed, g })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    /// The `N x d` increments of sample `m`, step-major.
    #[inline]
    pub fn sample(&self, m: usize) -> &[f64] {
        let w = self.steps * self.dim;
        &self.g[m * w..(m + 1) * w]
    }

    /// `G_{step+1}^{component}` of sample `m` (zero-based step and component).
    #[inline]
    pub fn increment(&self, m: usize, step: usize, component: usize) -> f64 {
        self.g[(m * self.steps + step) * self.dim + component]
    }

    pub fn matches_basis(&self, basis: &ChaosBasisSpec) -> bool {
        self.steps == basis.steps() && self.dim == basis.dim() && self.horizon == basis.horizon()
    }

    /// Fills `path` with the grid values of sample `m`.
    pub fn path_into(&self, m: usize, path: &mut BrownianPath) {
        let d = self.dim;
        let sqrt_h = self.step_size().sqrt();
        path.steps = self.steps;
        path.dim = d;
        path.values.clear();
        path.values.resize((self.steps + 1) * d, 0.0);
        let row = self.sample(m);
        let mut sums = vec![0.0; d];
        for i in 0..self.steps {
            for j in 0..d {
                sums[j] += row[i * d + j];
                path.values[(i + 1) * d + j] = sqrt_h * sums[j];
            }
        }
    }

    /// Slot-wise empirical mean and variance checks at five standard errors.
    /// Returns one message per slot outside the band; an empty list means the
    /// panel passed.
    pub fn moment_warnings(&self) -> Vec<String> {
        let m = self.samples as f64;
        if self.samples < 2 {
            return Vec::new();
        }
        let w = self.steps * self.dim;
        let mut sum = vec![0.0; w];
        let mut sq = vec![0.0; w];
        for row in self.g.chunks_exact(w) {
            for (k, &x) in row.iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        let mean_band = 5.0 / m.sqrt();
        let var_band = 5.0 * (2.0 / m).sqrt();
        let mut out = Vec::new();
        for k in 0..w {
            let mean = sum[k] / m;
            let var = (sq[k] - m * mean * mean) / (m - 1.0);
            if mean.abs() > mean_band || (var - 1.0).abs() > var_band {
                out.push(format!(
                    "slot (step {}, component {}): mean {mean:.4}, variance {var:.4}",
                    k / self.dim + 1,
                    k % self.dim + 1
                ));
            }
        }
        out
    }

    /// Flat binary dump: `M, N, d` as little-endian u64, `T` as f64, `seed` as
    /// u64, then the increments as row-major little-endian f64.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for v in [self.samples as u64, self.steps as u64, self.dim as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.g.len() * 8);
        for x in &self.g {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let samples = u64::from_le_bytes(next(&mut r)?) as usize;
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let len = samples
            .checked_mul(steps)
            .and_then(|v| v.checked_mul(dim))
            .filter(|&v| v.saturating_mul(8) <= DEFAULT_PANEL_BYTES_CAP)
            .ok_or_else(|| Error::Resource("panel header describes an oversized body".into()))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let g = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_raw(samples, steps, dim, horizon, seed, g)
    }
}

/// Draws `M * N * d` standard normals for `basis`, fully determined by `seed`.
pub fn sample_panel(samples: usize, basis: &ChaosBasisSpec, seed: u64) -> Result<SamplePanel> {
    sample_panel_with_cap(samples, basis, seed, DEFAULT_PANEL_BYTES_CAP)
}

pub fn sample_panel_with_cap(
    samples: usize,
    basis: &ChaosBasisSpec,
    seed: u64,
    bytes_cap: usize,
) -> Result<SamplePanel> {
    if samples == 0 {
        return Err(Error::Config("sample count M must be at least 1".into()));
    }
    let width = basis.steps() * basis.dim();
    let len = samples
        .checked_mul(width)
        .filter(|&v| v.saturating_mul(8) <= bytes_cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "panel of {samples} x {width} doubles exceeds the {bytes_cap}-byte cap"
            ))
        })?;
    let mut g = vec![0.0; len];
    g.par_chunks_mut(PANEL_BLOCK * width)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            for x in chunk.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
        });
    SamplePanel::from_raw(samples, basis.steps(), basis.dim(), basis.horizon(), seed, g)
}

/// Grid values `B_{t_0..t_N}` of one sample, step-major: `values[i * d + j]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BrownianPath {
    steps: usize,
    dim: usize,
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn from_values(steps: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (steps + 1) * dim {
            return Err(Error::DimensionMismatch(format!(
                "path has {} values, expected ({steps} + 1) x {dim}",
                values.len()
            )));
        }
        Ok(Self { steps, dim, values })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, component: usize) -> f64 {
        self.values[i * self.dim + component]
    }

    /// `B^j_{t_0}, ..., B^j_{t_N}`.
    pub fn component(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.dim).copied()
    }

    pub fn terminal(&self, component: usize) -> f64 {
        self.at(self.steps, component)
    }
}

/// Grid path of sample `m`: `B_{t_0} = 0`, `B_{t_i} = sqrt(h) sum_{k<=i} G_k`.
pub fn brownian_path(panel: &SamplePanel, m: usize) -> Result<BrownianPath> {
    if m >= panel.samples() {
        return Err(Error::OutOfRange(format!(
            "sample {m} requested from a panel of {} samples",
            panel.samples()
        )));
    }
    let mut path = BrownianPath::default();
    panel.path_into(m, &mut path);
    Ok(path)
}

/// Equicorrelation `C_ij = rho 1_{i != j} + 1_{i = j}` and its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpec {
    rho: f64,
    dim: usize,
    /// row-major `d x d`
    factor: Vec<f64>,
}

impl CorrelationSpec {
    pub fn new(rho: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("correlation dimension must be at least 1".into()));
        }
        let lower = if dim > 1 { -1.0 / (dim as f64 - 1.0) } else { f64::NEG_INFINITY };
        if !(rho > lower && rho < 1.0) {
            return Err(Error::Config(format!(
                "rho = {rho} does not give a positive definite correlation matrix for d = {dim}"
            )));
        }
        let c = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Config(format!("Cholesky factorization failed for rho = {rho}")))?;
        let l = chol.l();
        let factor = (0..dim * dim).map(|k| l[(k / dim, k % dim)]).collect();
        Ok(Self { rho, dim, factor })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower-triangular `L` with `L L^T = C`, row-major.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    #[inline]
    pub fn factor_at(&self, i: usize, j: usize) -> f64 {
        self.factor[i * self.dim + j]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| if i == j { 1.0 } else { self.rho })
    }

    /// `out = L g`.
    #[inline]
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out[..d].iter_mut().enumerate() {
            let row = &self.factor[i * d..i * d + i + 1];
            *o = row.iter().zip(g).map(|(l, x)| l * x).sum();
        }
    }
}

/// Replaces each per-step vector `g` by `L g`.
pub fn correlate(panel: &SamplePanel, corr: &CorrelationSpec) -> Result<SamplePanel> {
    let d = panel.dim();
    if corr.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "correlation is {}-dimensional, panel is {d}-dimensional",
            corr.dim()
        )));
    }
    let mut g = vec![0.0; panel.values().len()];
    g.par_chunks_mut(d * 4096)
        .zip(panel.values().par_chunks(d * 4096))
        .for_each(|(out, src)| {
            for (o, s) in out.chunks_exact_mut(d).zip(src.chunks_exact(d)) {
                corr.apply(s, o);
            }
        });
    SamplePanel::from_raw(panel.samples(), panel.steps(), d, panel.horizon(), panel.seed(), g)
}
