//! Normalized Hermite polynomials `K_n = He_n / n!`.
//!
//! `K_n` is defined through the generating function
//! `exp(x t - t^2 / 2) = sum_n K_n(x) t^n`, which gives `K_n' = K_{n-1}` and
//! `E[K_n(G) K_m(G)] = delta_{nm} / n!` for a standard Gaussian `G`.
//! Evaluation uses the normalized three-term recurrence
//! `(k + 1) K_{k+1}(x) = x K_k(x) - K_{k-1}(x)` with `K_{-1} = 0`, `K_0 = 1`.

use crate::error::{Error, Result};

/// `K_0(x), ..., K_{n_max}(x)` for a single abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteValues {
    pub values: Vec<f64>,
}

impl HermiteValues {
    pub fn max_degree(&self) -> usize {
        self.values.len() - 1
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("hermite argument must be finite, got {x}")))
    }
}

/// Writes `K_0(x)..K_{out.len()-1}(x)` into `out`. No validation: hot-path helper.
#[inline]
pub(crate) fn fill_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = x;
    for k in 1..out.len() - 1 {
        out[k + 1] = (x * out[k] - out[k - 1]) / (k + 1) as f64;
    }
}

/// `K_n(x)`.
pub fn hermite_eval(n: usize, x: f64) -> Result<f64> {
    check_finite(x)?;
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        // same operation order as `fill_values`, so both routes agree bitwise
        let next = if k == 0 { x } else { (x * cur - prev) / (k + 1) as f64 };
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `K_0(x)..K_{n_max}(x)` in one pass of the recurrence.
pub fn hermite_eval_all(n_max: usize, x: f64) -> Result<HermiteValues> {
    check_finite(x)?;
    let mut values = vec![0.0; n_max + 1];
    fill_values(x, &mut values);
    Ok(HermiteValues { values })
}
