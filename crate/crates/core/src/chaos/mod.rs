//! Truncated Wiener chaos expansions on the step-function basis.
//!
//! A square-integrable functional `F` of the Brownian increments is
//! approximated by
//!
//! ```text
//! C F = d0 + sum_{1 <= |n| <= p} d_n prod_{j,i} K_{n_i^j}(G_i^j),
//! d0 = E[F],   d_n = n! E[F prod_{j,i} K_{n_i^j}(G_i^j)].
//! ```
//!
//! Conditional expectations and Malliavin derivatives of `C F` have closed
//! forms: conditioning on `F_{t_r}` keeps the indices with no degree after
//! step `r`, and differentiating at `t_r` in direction `l` lowers the degree
//! of slot `(l, r)` by one and multiplies by `h^{-1/2}`.

mod io;
pub(crate) mod kernel;
mod saa;

use std::sync::Arc;

use rayon::prelude::*;

use crate::brownian::SamplePanel;
use crate::error::{Error, Result};
use crate::hermite::fill_values;
use crate::multiindex::IndexUniverse;

pub use crate::basis::ChaosBasisSpec;
pub use io::{read_coefficients, write_coefficient_table, write_coefficients};
pub use saa::estimate_coefficients_saa;

use kernel::{GridScratch, HermiteBlock, BLOCK, CHUNK};

/// `d0` and the coefficients `d_n` in the canonical order of `universe`.
#[derive(Debug, Clone)]
pub struct ChaosCoefficients {
    universe: Arc<IndexUniverse>,
    d0: f64,
    coeffs: Vec<f64>,
}

impl PartialEq for ChaosCoefficients {
    fn eq(&self, other: &Self) -> bool {
        self.universe.basis() == other.universe.basis()
            && self.d0 == other.d0
            && self.coeffs == other.coeffs
    }
}

impl ChaosCoefficients {
    pub fn new(universe: Arc<IndexUniverse>, d0: f64, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != universe.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a universe of {} indices",
                coeffs.len(),
                universe.len()
            )));
        }
        if !d0.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("chaos coefficients must be finite".into()));
        }
        Ok(Self { universe, d0, coeffs })
    }

    /// Only `d0` set; every higher coefficient zero.
    pub fn constant(universe: Arc<IndexUniverse>, d0: f64) -> Result<Self> {
        let n = universe.len();
        Self::new(universe, d0, vec![0.0; n])
    }

    pub fn universe(&self) -> &Arc<IndexUniverse> {
        &self.universe
    }

    pub fn basis(&self) -> &ChaosBasisSpec {
        self.universe.basis()
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn values(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, rank: usize) -> f64 {
        self.coeffs[rank]
    }

    /// `h^{-1/2} d_{e_1^l}`: the time-zero Malliavin derivative in direction `l`.
    pub fn initial_derivative(&self, component: usize) -> f64 {
        let inv_sqrt_h = 1.0 / self.basis().step_size().sqrt();
        self.coeffs[self.universe.unit_rank(component, 0)] * inv_sqrt_h
    }
}

fn check_panel(panel: &SamplePanel, universe: &IndexUniverse) -> Result<()> {
    if !panel.matches_basis(universe.basis()) {
        let b = universe.basis();
        return Err(Error::DimensionMismatch(format!(
            "panel grid (N={}, d={}, T={}) does not match the chaos basis (N={}, d={}, T={})",
            panel.steps(),
            panel.dim(),
            panel.horizon(),
            b.steps(),
            b.dim(),
            b.horizon()
        )));
    }
    Ok(())
}

pub(crate) fn check_samples(f: &[f64], panel: &SamplePanel) -> Result<()> {
    if f.len() != panel.samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} functional samples for a panel of {} samples",
            f.len(),
            panel.samples()
        )));
    }
    if let Some(m) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::Data { sample: m, detail: format!("F = {}", f[m]) });
    }
    Ok(())
}

/// Sums per-chunk partial vectors in chunk order.
pub(crate) fn reduce_in_order(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut total = vec![0.0; len];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Empirical-mean estimator: `d0 = mean(F)`, `d_n = n! mean(F prod K)`.
pub fn estimate_coefficients(
    f: &[f64],
    panel: &SamplePanel,
    universe: &Arc<IndexUniverse>,
) -> Result<ChaosCoefficients> {
    check_panel(panel, universe)?;
    check_samples(f, panel)?;
    let b = universe.basis();
    let width = universe.len() + 1;
    let parts: Vec<Vec<f64>> = (0..panel.samples().div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![0.0; width];
            let mut hb = HermiteBlock::new(b.steps(), b.dim(), b.order());
            let mut prod = vec![0.0; BLOCK];
            let end = ((chunk + 1) * CHUNK).min(panel.samples());
            let mut start = chunk * CHUNK;
            while start < end {
                let len = BLOCK.min(end - start);
                hb.fill(panel, start, len);
                kernel::accumulate_projections(universe, &hb, &f[start..start + len], &mut prod, &mut acc);
                start += len;
            }
            acc
        })
        .collect();
    let total = reduce_in_order(parts, width);
    let m = panel.samples() as f64;
    let coeffs = total[1..]
        .iter()
        .enumerate()
        .map(|(rank, s)| universe.weight(rank) * s / m)
        .collect();
    ChaosCoefficients::new(Arc::clone(universe), total[0] / m, coeffs)
}

/// Grid conditional expectations and derivatives for every sample of `panel`.
///
/// Returns `(cond, deriv)` with `cond[m * (N + 1) + r]` and
/// `deriv[(m * (N + 1) + r) * d + l]`.
pub fn evaluate_grid(coeffs: &ChaosCoefficients, panel: &SamplePanel) -> Result<(Vec<f64>, Vec<f64>)> {
    let universe = coeffs.universe();
    check_panel(panel, universe)?;
    let b = universe.basis();
    let (width, d) = (b.steps() + 1, b.dim());
    let mut cond = vec![0.0; panel.samples() * width];
    let mut deriv = vec![0.0; panel.samples() * width * d];
    cond.par_chunks_mut(BLOCK * width)
        .zip(deriv.par_chunks_mut(BLOCK * width * d))
        .enumerate()
        .for_each_init(
            || (HermiteBlock::new(b.steps(), d, b.order()), GridScratch::new()),
            |(hb, scratch), (block, (c, dv))| {
                let start = block * BLOCK;
                hb.fill(panel, start, c.len() / width);
                kernel::grid_block(universe, coeffs.d0, &coeffs.coeffs, hb, scratch, c, dv);
            },
        );
    Ok((cond, deriv))
}

/// Grid values for one sample: `(cond[0..=N], deriv[(0..=N) * d])`.
fn sample_grid(coeffs: &ChaosCoefficients, panel: &SamplePanel, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let universe = coeffs.universe();
    check_panel(panel, universe)?;
    if m >= panel.samples() {
        return Err(Error::OutOfRange(format!(
            "sample {m} requested from a panel of {} samples",
            panel.samples()
        )));
    }
    let b = universe.basis();
    let mut hb = HermiteBlock::new(b.steps(), b.dim(), b.order());
    hb.fill(panel, m, 1);
    let mut cond = vec![0.0; b.steps() + 1];
    let mut deriv = vec![0.0; (b.steps() + 1) * b.dim()];
    kernel::grid_block(universe, coeffs.d0, &coeffs.coeffs, &hb, &mut GridScratch::new(), &mut cond, &mut deriv);
    Ok((cond, deriv))
}

/// `C F` evaluated on sample `m`.
pub fn evaluate_chaos(coeffs: &ChaosCoefficients, panel: &SamplePanel, m: usize) -> Result<f64> {
    let n = coeffs.basis().steps();
    conditional_expectation_grid(coeffs, panel, m, n)
}

/// `E_{t_r}(C F)` on sample `m`, `r` in `0..=N`.
pub fn conditional_expectation_grid(
    coeffs: &ChaosCoefficients,
    panel: &SamplePanel,
    m: usize,
    r: usize,
) -> Result<f64> {
    let n = coeffs.basis().steps();
    if r > n {
        return Err(Error::OutOfRange(format!("grid index {r} exceeds N = {n}")));
    }
    if r == 0 {
        return Ok(coeffs.d0);
    }
    Ok(sample_grid(coeffs, panel, m)?.0[r])
}

/// `D^l_{t_r} E_{t_r}(C F)` on sample `m`, `r` in `0..=N`, `component` zero-based.
/// At `r = 0` this is `h^{-1/2} d_{e_1^l}`, the limit from the right.
pub fn malliavin_derivative_grid(
    coeffs: &ChaosCoefficients,
    panel: &SamplePanel,
    m: usize,
    r: usize,
    component: usize,
) -> Result<f64> {
    let b = coeffs.basis();
    if r > b.steps() {
        return Err(Error::OutOfRange(format!("grid index {r} exceeds N = {}", b.steps())));
    }
    if component >= b.dim() {
        return Err(Error::OutOfRange(format!("component {component} outside 0..{}", b.dim())));
    }
    if r == 0 {
        return Ok(coeffs.initial_derivative(component));
    }
    Ok(sample_grid(coeffs, panel, m)?.1[r * b.dim() + component])
}

/// Locates `t` in `(t_{r-1}, t_r]`; returns `(r, t - t_{r-1})`.
fn locate(basis: &ChaosBasisSpec, t: f64) -> Result<(usize, f64)> {
    let h = basis.step_size();
    if !(t > 0.0 && t <= basis.horizon() * (1.0 + 1e-14)) {
        return Err(Error::OutOfRange(format!("time {t} outside (0, {}]", basis.horizon())));
    }
    let x = t / h;
    let nearest = x.round();
    let on_grid = nearest >= 1.0 && (x - nearest).abs() <= 1e-12 * nearest;
    let r = if on_grid { nearest as usize } else { x.ceil() as usize }.clamp(1, basis.steps());
    let elapsed = if on_grid { h } else { t - (r - 1) as f64 * h };
    Ok((r, elapsed))
}

/// Shared machinery of the intra-grid formulas. `lowered` selects the
/// derivative direction.
fn intra(
    coeffs: &ChaosCoefficients,
    panel: &SamplePanel,
    m: usize,
    t: f64,
    increment: &[f64],
    lowered: Option<usize>,
) -> Result<f64> {
    let universe = coeffs.universe();
    let b = universe.basis();
    let (d, p) = (b.dim(), b.order());
    if increment.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} increment components for a {d}-dimensional basis",
            increment.len()
        )));
    }
    let (r, elapsed) = locate(b, t)?;
    let (cond, _) = sample_grid(coeffs, panel, m)?;
    let h = b.step_size();
    let ratio = elapsed / h;
    // scaled Hermite values ratio^{k/2} K_k(w / sqrt(elapsed)) per component
    let mut scaled = vec![0.0; d * (p + 1)];
    for j in 0..d {
        let x = increment[j] / elapsed.sqrt();
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite increment {}", increment[j])));
        }
        let row = &mut scaled[j * (p + 1)..(j + 1) * (p + 1)];
        fill_values(x, row);
        for (k, v) in row.iter_mut().enumerate() {
            *v *= ratio.powf(k as f64 / 2.0);
        }
    }
    let row = panel.sample(m);
    let mut hv = vec![0.0; p + 1];
    let mut group = 0.0;
    for &rank in universe.ranks_ending_at(r) {
        let rank = rank as usize;
        let entries = universe.indices()[rank].entries();
        if let Some(l) = lowered {
            if !entries.iter().any(|&(s, _)| s == b.slot(l, r - 1)) {
                continue;
            }
        }
        let mut prod = 1.0;
        for &(s, deg) in entries {
            let (j, step) = b.slot_position(s);
            let mut deg = deg as usize;
            if step + 1 == r {
                if lowered == Some(j) {
                    deg -= 1;
                }
                prod *= scaled[j * (p + 1) + deg];
            } else {
                fill_values(row[step * d + j], &mut hv);
                prod *= hv[deg];
            }
        }
        group += coeffs.coeffs[rank] * prod;
    }
    Ok(match lowered {
        None => cond[r - 1] + group,
        Some(_) => group / h.sqrt(),
    })
}

/// `E_t(C F)` for `t` in `(t_{r-1}, t_r]`, given the grid increments of
/// sample `m` and `increment[j] = B^j_t - B^j_{t_{r-1}}`.
pub fn conditional_expectation_intra(
    coeffs: &ChaosCoefficients,
    panel: &SamplePanel,
    m: usize,
    t: f64,
    increment: &[f64],
) -> Result<f64> {
    intra(coeffs, panel, m, t, increment, None)
}

/// `D^l_t E_t(C F)` for `t` in `(t_{r-1}, t_r]`. As `t` approaches
/// `t_{r-1}` from the right only terms with degree one on slot `(l, r)` survive.
pub fn malliavin_derivative_intra(
    coeffs: &ChaosCoefficients,
    panel: &SamplePanel,
    m: usize,
    t: f64,
    increment: &[f64],
    component: usize,
) -> Result<f64> {
    if component >= coeffs.basis().dim() {
        return Err(Error::OutOfRange(format!(
            "component {component} outside 0..{}",
            coeffs.basis().dim()
        )));
    }
    intra(coeffs, panel, m, t, increment, Some(component))
}

#[cfg(test)]
mod tests;
