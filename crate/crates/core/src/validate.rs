//! Built-in comparisons of the solver against the oracles.

use serde::Serialize;

use crate::brownian::BrownianPath;
use crate::error::Result;
use crate::oracle::{barrier_call_mc, basket_put_linear_mc, linear_bsde_closed_form, Z99};
use crate::problems::{BarrierCall, BasketPut, BlackScholesParams, LinearTest, MartingaleTest};
use crate::solver::{solve, solve_with_setup, FnProblem, PicardSetup, SolverConfig, SolverState};

/// Reference delta of the barrier benchmark.
pub const BARRIER_DELTA: f64 = 0.8327;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Smaller panels for a quick smoke run.
    pub fast: bool,
    /// Overrides every solver sample count.
    pub samples: Option<usize>,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { fast: false, samples: None, seed: 2024 }
    }
}

impl ValidationOptions {
    fn samples(&self, full: usize, fast: usize) -> usize {
        self.samples.unwrap_or(if self.fast { fast } else { full })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from(name: &str, outcome: Result<(bool, String)>) -> Self {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        Self { name: name.to_string(), passed, detail }
    }
}

/// 99% half-width of the last `Y_0` estimate, from the spread of `F^q`.
pub fn y0_half_width(state: &SolverState) -> f64 {
    let std = state.trace.last().map_or(0.0, |r| r.target_std);
    Z99 * std / (state.samples() as f64).sqrt()
}

fn config(samples: usize, order: usize, iterations: usize, seed: u64) -> SolverConfig {
    SolverConfig { samples, order, iterations, seed, steps: 20, ..Default::default() }
}

fn zero_problem(opts: &ValidationOptions) -> Result<(bool, String)> {
    let p = FnProblem::new("zero", 1, |_, _, _| 0.0, |_: &BrownianPath, _| 0.0);
    let s = solve(&p, &config(opts.samples(2000, 500), 2, 3, opts.seed))?;
    let nonzero = s.y_values().iter().chain(s.z_values()).filter(|v| **v != 0.0).count();
    Ok((nonzero == 0, format!("{nonzero} nonzero entries")))
}

fn linear(opts: &ValidationOptions) -> Result<(bool, String)> {
    let p = LinearTest { rate: 0.05, terminal_value: 1.0 };
    let s = solve(&p, &config(opts.samples(100_000, 20_000), 1, 8, opts.seed))?;
    let exact = linear_bsde_closed_form(0.05, 1.0, 1.0).value;
    let err = (s.y0() - exact).abs();
    Ok((err <= 0.01, format!("Y0 = {:.6}, exact {exact:.6}, |err| = {err:.2e} (tol 1e-2)", s.y0())))
}

fn martingale(opts: &ValidationOptions) -> Result<(bool, String)> {
    let cfg = config(opts.samples(100_000, 20_000), 1, 2, opts.seed);
    let setup = PicardSetup::new(&MartingaleTest, &cfg)?;
    let s = solve_with_setup(&MartingaleTest, &cfg, &setup)?;
    let (mut ey, mut ez) = (0.0, 0.0);
    let mut path = BrownianPath::default();
    for m in 0..s.samples() {
        setup.panel.path_into(m, &mut path);
        for (j, y) in s.y_path(m).iter().enumerate() {
            ey += (y - path.at(j, 0)).abs();
            ez += (s.z_at(m, j)[0] - 1.0).abs();
        }
    }
    let n = (s.samples() * (s.steps() + 1)) as f64;
    let (ey, ez) = (ey / n, ez / n);
    Ok((ey <= 0.05 && ez <= 0.05, format!("mean|Y - B| = {ey:.2e}, mean|Z - 1| = {ez:.2e} (tol 5e-2)")))
}

fn barrier(opts: &ValidationOptions) -> Result<(bool, String)> {
    let p = BarrierCall::benchmark();
    let s = solve(&p, &config(opts.samples(1_000_000, 100_000), 2, 5, opts.seed))?;
    let pairs = if opts.fast { 200_000 } else { 2_000_000 };
    let reference = barrier_call_mc(&p.params, 1.0, 20, p.strike, p.barrier, pairs, opts.seed)?;
    let err = (s.y0() - reference.value).abs();
    let delta = s.z0()[0] / (p.params.volatility[0] * p.params.spot[0]);
    let rel = (delta / BARRIER_DELTA - 1.0).abs();
    Ok((
        err <= 2e-3 && rel <= 0.02,
        format!(
            "Y0 = {:.6} vs MC {:.6} +/- {:.1e} (tol 2e-3); delta = {delta:.4} vs {BARRIER_DELTA} ({:.2}%, tol 2%)",
            s.y0(),
            reference.value,
            reference.half_width,
            100.0 * rel
        ),
    ))
}

fn basket(opts: &ValidationOptions) -> Result<(bool, String)> {
    let params = BlackScholesParams::uniform(5, 100.0, 0.02, 0.05, 0.2, 0.02);
    let p = BasketPut::new(params.clone(), 95.0, 0.1)?;
    let s = solve(&p, &config(opts.samples(50_000, 10_000), 2, 5, opts.seed))?;
    let pairs = if opts.fast { 200_000 } else { 1_000_000 };
    let reference = basket_put_linear_mc(&params, 1.0, 95.0, 0.1, pairs, opts.seed)?;
    let hw = y0_half_width(&s);
    let combined = hw.hypot(reference.half_width);
    Ok((
        reference.compatible(s.y0(), hw, 3.0),
        format!(
            "Y0 = {:.4} +/- {hw:.1e} vs MC {:.4} +/- {:.1e}; |diff| = {:.2e} (tol {:.2e})",
            s.y0(),
            reference.value,
            reference.half_width,
            (s.y0() - reference.value).abs(),
            3.0 * combined
        ),
    ))
}

/// Runs every check in a fixed order.
pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckResult> {
    vec![
        CheckResult::from("zero_problem", zero_problem(opts)),
        CheckResult::from("linear_bsde", linear(opts)),
        CheckResult::from("martingale", martingale(opts)),
        CheckResult::from("barrier_call", barrier(opts)),
        CheckResult::from("basket_put_linear", basket(opts)),
    ]
}
