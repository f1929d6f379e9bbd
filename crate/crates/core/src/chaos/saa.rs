//! Least-squares (sample average approximation) coefficient fit.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::kernel::{HermiteBlock, BLOCK, CHUNK};
use super::{check_panel, check_samples, ChaosCoefficients};
use crate::brownian::SamplePanel;
use crate::error::{Error, Result};
use crate::multiindex::IndexUniverse;

const MAX_CONDITION: f64 = 1e12;
/// Upper bound on the memory held by per-chunk Gram matrices awaiting reduction.
const WAVE_BYTES: usize = 64 << 20;

/// Minimizes `(1/M) sum_m |F^m - psi(c, G^m)|^2` over `c = (c0, c_n)` through
/// the normal equations on the regressors `[1, prod K_{n}(G^m)]`, with
/// `ridge` added to the diagonal of the scaled Gram matrix.
pub fn estimate_coefficients_saa(
    f: &[f64],
    panel: &SamplePanel,
    universe: &Arc<IndexUniverse>,
    ridge: f64,
) -> Result<ChaosCoefficients> {
    check_panel(panel, universe)?;
    check_samples(f, panel)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be a nonnegative real, got {ridge}")));
    }
    let unknowns = universe.len() + 1;
    if panel.samples() <= unknowns {
        return Err(Error::Underdetermined { samples: panel.samples(), unknowns });
    }

    let (gram, rhs) = normal_equations(f, panel, universe);
    let m = panel.samples() as f64;
    let mut a = gram / m;
    let b = rhs / m;
    for k in 0..unknowns {
        a[(k, k)] += ridge;
    }
    let suggested_ridge = 1e-10 * a.trace() / unknowns as f64;
    let chol = a.cholesky().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        suggested_ridge,
    })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // (max L_ii / min L_ii)^2 bounds the 2-norm condition number from below
    let condition = (hi / lo).powi(2);
    if ridge == 0.0 && condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition, suggested_ridge });
    }
    let c = chol.solve(&b);
    ChaosCoefficients::new(Arc::clone(universe), c[0], c.as_slice()[1..].to_vec())
}

/// `(Phi^T Phi, Phi^T F)` accumulated chunk by chunk in sample order.
fn normal_equations(f: &[f64], panel: &SamplePanel, universe: &IndexUniverse) -> (DMatrix<f64>, DVector<f64>) {
    let b = universe.basis();
    let p = universe.len() + 1;
    let chunks = panel.samples().div_ceil(CHUNK);
    let wave = (WAVE_BYTES / (p * p * 8)).max(1);
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for first in (0..chunks).step_by(wave) {
        let parts: Vec<(DMatrix<f64>, DVector<f64>)> = (first..(first + wave).min(chunks))
            .into_par_iter()
            .map(|chunk| {
                let mut g = DMatrix::<f64>::zeros(p, p);
                let mut r = DVector::<f64>::zeros(p);
                let mut hb = HermiteBlock::new(b.steps(), b.dim(), b.order());
                let end = ((chunk + 1) * CHUNK).min(panel.samples());
                let mut start = chunk * CHUNK;
                while start < end {
                    let len = BLOCK.min(end - start);
                    hb.fill(panel, start, len);
                    let mut phi = DMatrix::<f64>::zeros(len, p);
                    phi.column_mut(0).fill(1.0);
                    for (rank, index) in universe.indices().iter().enumerate() {
                        let mut col = phi.column_mut(rank + 1);
                        hb.product(index.entries(), None, col.as_mut_slice());
                    }
                    let fv = DVector::from_column_slice(&f[start..start + len]);
                    g.gemm_tr(1.0, &phi, &phi, 1.0);
                    r.gemv_tr(1.0, &phi, &fv, 1.0);
                    start += len;
                }
                (g, r)
            })
            .collect();
        for (g, r) in parts {
            gram += g;
            rhs += r;
        }
    }
    (gram, rhs)
}

/// Design matrix rows `[1, prod K]` for every sample; test support.
#[cfg(test)]
pub(crate) fn design_matrix(panel: &SamplePanel, universe: &IndexUniverse) -> DMatrix<f64> {
    let b = universe.basis();
    let p = universe.len() + 1;
    let mut hb = HermiteBlock::new(b.steps(), b.dim(), b.order());
    hb.fill(panel, 0, panel.samples());
    let mut phi = DMatrix::<f64>::zeros(panel.samples(), p);
    phi.column_mut(0).fill(1.0);
    for (rank, index) in universe.indices().iter().enumerate() {
        let mut col = phi.column_mut(rank + 1);
        hb.product(index.entries(), None, col.as_mut_slice());
    }
    phi
}
