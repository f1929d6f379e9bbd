//! Picard iteration for BSDEs on a fixed Monte Carlo panel.
//!
//! Iterate `q` holds `Y^q` and `Z^q` on the grid for every sample. One step
//! forms `F^q = xi + int_0^T f(s, Y^q_s, Z^q_s) ds` pathwise, projects it on
//! the truncated chaos, and reads `Y^{q+1}` and `Z^{q+1}` off the conditional
//! expectation and derivative operators:
//!
//! `Y^{q+1}_{t_j} = E_{t_j}[C F^q] - int_0^{t_j} f(s, Y^q_s, Z^q_s) ds`,
//! `Z^{q+1}_{t_j} = D_{t_j} C F^q`.

use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ChaosBasisSpec;
use crate::brownian::{correlate, sample_panel, BrownianPath, CorrelationSpec, SamplePanel};
use crate::chaos::kernel::{grid_block, GridScratch, HermiteBlock, BLOCK};
use crate::chaos::{estimate_coefficients, estimate_coefficients_saa, ChaosCoefficients};
use crate::error::{Error, Result};
use crate::multiindex::{IndexUniverse, DEFAULT_UNIVERSE_CAP};

/// A BSDE `Y_t = xi + int_t^T f(s, Y_s, Z_s) ds - int_t^T Z_s dW_s` on `[0, T]`.
pub trait BsdeProblem: Send + Sync {
    /// Dimension of the driving Brownian motion.
    fn dim(&self) -> usize;
    fn driver(&self, t: f64, y: f64, z: &[f64]) -> f64;
    /// `xi` on a grid path with step `h`.
    fn terminal(&self, path: &BrownianPath, h: f64) -> f64;
    /// Correlation applied to the panel before `terminal` sees it. The chaos
    /// expansion always uses the independent increments.
    fn correlation(&self) -> Option<&CorrelationSpec> {
        None
    }
    fn name(&self) -> &str;
}

impl<P: BsdeProblem + ?Sized> BsdeProblem for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn driver(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        (**self).driver(t, y, z)
    }
    fn terminal(&self, path: &BrownianPath, h: f64) -> f64 {
        (**self).terminal(path, h)
    }
    fn correlation(&self) -> Option<&CorrelationSpec> {
        (**self).correlation()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// A problem assembled from closures.
pub struct FnProblem<D, X> {
    pub dim: usize,
    pub driver: D,
    pub terminal: X,
    pub name: String,
}

impl<D, X> FnProblem<D, X>
where
    D: Fn(f64, f64, &[f64]) -> f64 + Send + Sync,
    X: Fn(&BrownianPath, f64) -> f64 + Send + Sync,
{
    pub fn new(name: &str, dim: usize, driver: D, terminal: X) -> Self {
        Self { dim, driver, terminal, name: name.to_string() }
    }
}

impl<D, X> BsdeProblem for FnProblem<D, X>
where
    D: Fn(f64, f64, &[f64]) -> f64 + Send + Sync,
    X: Fn(&BrownianPath, f64) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn driver(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        (self.driver)(t, y, z)
    }
    fn terminal(&self, path: &BrownianPath, h: f64) -> f64 {
        (self.terminal)(path, h)
    }
    fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// `d_n = n! mean(F prod K)`.
    EmpiricalMean,
    /// Least squares over the panel with an optional ridge term.
    LeastSquares { ridge: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Coefficients are estimated on the panel they are evaluated on.
    Same,
    /// Two independent panels; each is updated with coefficients estimated
    /// on the other.
    Fresh,
}

/// Rule for the pathwise time integral of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `h sum_{i=1}^j f(t_i)`.
    RightEndpoint,
    /// `h sum_{i=1}^j (f(t_{i-1}) + f(t_i)) / 2`.
    Trapezoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub iterations: usize,
    pub order: usize,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub horizon: f64,
    pub estimator: Estimator,
    pub sample_mode: SampleMode,
    pub quadrature: Quadrature,
    pub universe_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 6,
            order: 2,
            steps: 20,
            samples: 100_000,
            seed: 0,
            horizon: 1.0,
            estimator: Estimator::EmpiricalMean,
            sample_mode: SampleMode::Same,
            quadrature: Quadrature::RightEndpoint,
            universe_cap: DEFAULT_UNIVERSE_CAP,
        }
    }
}

impl SolverConfig {
    pub fn basis(&self, dim: usize) -> Result<ChaosBasisSpec> {
        ChaosBasisSpec::new(self.horizon, self.steps, dim, self.order)
    }

    pub fn validate(&self, dim: usize) -> Result<ChaosBasisSpec> {
        if self.samples == 0 {
            return Err(Error::Config("sample count M must be positive".into()));
        }
        if let Estimator::LeastSquares { ridge } = self.estimator {
            if !(ridge >= 0.0 && ridge.is_finite()) {
                return Err(Error::Config(format!("ridge must be a nonnegative real, got {ridge}")));
            }
        }
        self.basis(dim)
    }
}

/// Seed of the second panel in fresh-sample mode.
pub fn fresh_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based Picard index of the iterate this row describes.
    pub iteration: usize,
    pub y0: f64,
    pub z0: Vec<f64>,
    /// Sample standard deviation of `F^q` over the panel.
    pub target_std: f64,
    pub estimate_seconds: f64,
    pub update_seconds: f64,
}

/// Iterate values on the panel: `y[m * (N + 1) + j]`, `z[(m * (N + 1) + j) * d + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    samples: usize,
    steps: usize,
    dim: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub panel_seconds: f64,
    /// Coefficients of the last projected `F^q`.
    pub coefficients: Option<ChaosCoefficients>,
    /// Iterate on the second panel in fresh-sample mode.
    pub auxiliary: Option<Box<SolverState>>,
}

impl SolverState {
    /// `Y^0 = 0`, `Z^0 = 0`.
    pub fn zero(samples: usize, steps: usize, dim: usize) -> Self {
        let width = steps + 1;
        Self {
            samples,
            steps,
            dim,
            y: vec![0.0; samples * width],
            z: vec![0.0; samples * width * dim],
            trace: Vec::new(),
            panel_seconds: 0.0,
            coefficients: None,
            auxiliary: None,
        }
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

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    /// `Y_{t_0..t_N}` on sample `m`.
    pub fn y_path(&self, m: usize) -> &[f64] {
        let w = self.steps + 1;
        &self.y[m * w..(m + 1) * w]
    }

    /// `Z_{t_j}` on sample `m`.
    pub fn z_at(&self, m: usize, j: usize) -> &[f64] {
        let at = (m * (self.steps + 1) + j) * self.dim;
        &self.z[at..at + self.dim]
    }

    pub fn y0(&self) -> f64 {
        self.y.first().copied().unwrap_or(0.0)
    }

    pub fn z0(&self) -> &[f64] {
        &self.z[..self.dim]
    }
}

/// Panel, chaos universe and terminal values shared by all iterations.
pub struct PicardSetup {
    pub panel: SamplePanel,
    pub universe: Arc<IndexUniverse>,
    pub terminal: Vec<f64>,
    /// Second panel for fresh-sample mode.
    pub auxiliary: Option<Box<PicardSetup>>,
    pub panel_seconds: f64,
}

impl PicardSetup {
    pub fn new(problem: &(impl BsdeProblem + ?Sized), config: &SolverConfig) -> Result<Self> {
        let basis = config.validate(problem.dim())?;
        let universe = Arc::new(IndexUniverse::enumerate_with_cap(basis, config.universe_cap)?);
        let start = Instant::now();
        let panel = sample_panel(config.samples, &basis, config.seed)?;
        let mut setup = Self::assemble(problem, panel, Arc::clone(&universe), start)?;
        if config.sample_mode == SampleMode::Fresh {
            let start = Instant::now();
            let panel = sample_panel(config.samples, &basis, fresh_seed(config.seed))?;
            setup.auxiliary = Some(Box::new(Self::assemble(problem, panel, universe, start)?));
        }
        Ok(setup)
    }

    /// Uses a caller-supplied panel; fresh-sample mode is not available here.
    pub fn with_panel(problem: &(impl BsdeProblem + ?Sized), config: &SolverConfig, panel: SamplePanel) -> Result<Self> {
        let basis = config.validate(problem.dim())?;
        if !panel.matches_basis(&basis) {
            return Err(Error::DimensionMismatch(format!(
                "panel (M={}, N={}, d={}, T={}) does not match the solver grid (N={}, d={}, T={})",
                panel.samples(),
                panel.steps(),
                panel.dim(),
                panel.horizon(),
                basis.steps(),
                basis.dim(),
                basis.horizon()
            )));
        }
        if config.sample_mode == SampleMode::Fresh {
            return Err(Error::Config("fresh-sample mode draws its own panels".into()));
        }
        let universe = Arc::new(IndexUniverse::enumerate_with_cap(basis, config.universe_cap)?);
        Self::assemble(problem, panel, universe, Instant::now())
    }

    fn assemble(
        problem: &(impl BsdeProblem + ?Sized),
        panel: SamplePanel,
        universe: Arc<IndexUniverse>,
        start: Instant,
    ) -> Result<Self> {
        for w in panel.moment_warnings() {
            warn!("panel seed {}: {w}", panel.seed());
        }
        let terminal = match problem.correlation() {
            Some(corr) => terminal_values(problem, &correlate(&panel, corr)?),
            None => terminal_values(problem, &panel),
        };
        if let Some(m) = terminal.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data { sample: m, detail: format!("terminal value {}", terminal[m]) });
        }
        Ok(Self { panel, universe, terminal, auxiliary: None, panel_seconds: start.elapsed().as_secs_f64() })
    }

    fn zero_state(&self) -> SolverState {
        let mut state = SolverState::zero(self.panel.samples(), self.panel.steps(), self.panel.dim());
        state.panel_seconds = self.panel_seconds;
        if let Some(aux) = &self.auxiliary {
            state.auxiliary = Some(Box::new(aux.zero_state()));
            state.panel_seconds += aux.panel_seconds;
        }
        state
    }
}

fn terminal_values(problem: &(impl BsdeProblem + ?Sized), panel: &SamplePanel) -> Vec<f64> {
    let h = panel.step_size();
    let mut out = vec![0.0; panel.samples()];
    out.par_chunks_mut(BLOCK).enumerate().for_each_init(BrownianPath::default, |path, (block, chunk)| {
        for (b, v) in chunk.iter_mut().enumerate() {
            panel.path_into(block * BLOCK + b, path);
            *v = problem.terminal(path, h);
        }
    });
    out
}

/// Driver values `f(t_i, Y_i, Z_i)` along one sample row.
fn driver_row(problem: &(impl BsdeProblem + ?Sized), h: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
    let d = z.len() / y.len();
    for (i, f) in out.iter_mut().enumerate() {
        *f = problem.driver(i as f64 * h, y[i], &z[i * d..(i + 1) * d]);
    }
}

/// Running integrals `I_0..I_N` of a driver row.
fn integrate(f: &[f64], h: f64, quadrature: Quadrature, out: &mut [f64]) {
    let mut acc = 0.0;
    out[0] = 0.0;
    for i in 1..f.len() {
        acc += match quadrature {
            Quadrature::RightEndpoint => f[i],
            Quadrature::Trapezoidal => 0.5 * (f[i - 1] + f[i]),
        };
        out[i] = h * acc;
    }
}

/// `F^q = xi + I_N` per sample.
fn targets(
    problem: &(impl BsdeProblem + ?Sized),
    setup: &PicardSetup,
    state: &SolverState,
    quadrature: Quadrature,
) -> Vec<f64> {
    let (w, d) = (state.steps + 1, state.dim);
    let h = setup.panel.step_size();
    let mut out = vec![0.0; state.samples];
    out.par_chunks_mut(BLOCK).enumerate().for_each_init(
        || (vec![0.0; w], vec![0.0; w]),
        |(f, integral), (block, chunk)| {
            for (b, v) in chunk.iter_mut().enumerate() {
                let m = block * BLOCK + b;
                driver_row(problem, h, &state.y[m * w..(m + 1) * w], &state.z[m * w * d..(m + 1) * w * d], f);
                integrate(f, h, quadrature, integral);
                *v = setup.terminal[m] + integral[w - 1];
            }
        },
    );
    out
}

fn estimate(f: &[f64], setup: &PicardSetup, estimator: Estimator) -> Result<ChaosCoefficients> {
    match estimator {
        Estimator::EmpiricalMean => estimate_coefficients(f, &setup.panel, &setup.universe),
        Estimator::LeastSquares { ridge } => estimate_coefficients_saa(f, &setup.panel, &setup.universe, ridge),
    }
}

/// Overwrites `state` with the next iterate from the coefficients of `F^q`.
fn update(
    problem: &(impl BsdeProblem + ?Sized),
    setup: &PicardSetup,
    coeffs: &ChaosCoefficients,
    state: &mut SolverState,
    quadrature: Quadrature,
) {
    let basis = setup.universe.basis();
    let (w, d) = (state.steps + 1, state.dim);
    let h = basis.step_size();
    let universe = &setup.universe;
    state
        .y
        .par_chunks_mut(BLOCK * w)
        .zip(state.z.par_chunks_mut(BLOCK * w * d))
        .enumerate()
        .for_each_init(
            || {
                let hb = HermiteBlock::new(basis.steps(), d, basis.order());
                (hb, GridScratch::new(), vec![0.0; BLOCK * w], vec![0.0; BLOCK * w * d], vec![0.0; w], vec![0.0; w])
            },
            |(hb, scratch, cond, deriv, f, integral), (block, (y, z))| {
                let len = y.len() / w;
                hb.fill(&setup.panel, block * BLOCK, len);
                grid_block(universe, coeffs.d0(), coeffs.values(), hb, scratch, cond, deriv);
                for b in 0..len {
                    let yr = &mut y[b * w..(b + 1) * w];
                    let zr = &mut z[b * w * d..(b + 1) * w * d];
                    driver_row(problem, h, yr, zr, f);
                    integrate(f, h, quadrature, integral);
                    for j in 0..w {
                        yr[j] = cond[b * w + j] - integral[j];
                    }
                    zr.copy_from_slice(&deriv[b * w * d..(b + 1) * w * d]);
                }
            },
        );
}

/// First non-finite or runaway value of `Y` (or non-finite `Z`) as `(m, j)`.
fn find_blowup(state: &SolverState, bound: f64) -> Option<(usize, usize, String)> {
    let (w, d) = (state.steps + 1, state.dim);
    if let Some(k) = state.y.iter().position(|v| !v.is_finite() || v.abs() > bound) {
        return Some((k / w, k % w, format!("Y = {}", state.y[k])));
    }
    state
        .z
        .iter()
        .position(|v| !v.is_finite())
        .map(|k| (k / (w * d), (k / d) % w, format!("Z = {}", state.z[k])))
}

fn sample_std(f: &[f64]) -> f64 {
    let n = f.len() as f64;
    if f.len() < 2 {
        return 0.0;
    }
    let mean = f.iter().sum::<f64>() / n;
    (f.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn blowup_check(targets: &[f64], iteration: usize, state: &SolverState) -> Result<()> {
    if let Some(m) = targets.iter().position(|v| !v.is_finite()) {
        let w = state.steps + 1;
        let grid = state.y[m * w..(m + 1) * w].iter().position(|v| !v.is_finite()).unwrap_or(state.steps);
        return Err(Error::NumericalBlowup {
            iteration,
            sample: m,
            grid,
            detail: format!("F = {}", targets[m]),
        });
    }
    Ok(())
}

/// Advances `state` by one Picard step.
pub fn picard_step(
    state: &mut SolverState,
    problem: &(impl BsdeProblem + ?Sized),
    setup: &PicardSetup,
    config: &SolverConfig,
) -> Result<()> {
    let iteration = state.trace.len() + 1;
    let clock = Instant::now();
    let f = targets(problem, setup, state, config.quadrature);
    blowup_check(&f, iteration, state)?;
    let own = estimate(&f, setup, config.estimator)?;

    let (coeffs, aux_update) = match (&setup.auxiliary, state.auxiliary.as_deref()) {
        (Some(aux_setup), Some(aux_state)) => {
            let fa = targets(problem, aux_setup, aux_state, config.quadrature);
            blowup_check(&fa, iteration, aux_state)?;
            let other = estimate(&fa, aux_setup, config.estimator)?;
            (other, Some(own))
        }
        (None, None) => (own, None),
        _ => return Err(Error::Config("state and setup disagree on fresh-sample mode".into())),
    };
    let estimate_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    update(problem, setup, &coeffs, state, config.quadrature);
    if let (Some(aux_setup), Some(aux_state), Some(c)) = (&setup.auxiliary, state.auxiliary.as_deref_mut(), &aux_update) {
        update(problem, aux_setup, c, aux_state, config.quadrature);
    }
    let update_seconds = clock.elapsed().as_secs_f64();

    let scale = setup.terminal.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bound = 1e6 * (1.0 + scale);
    if let Some((sample, grid, detail)) = find_blowup(state, bound) {
        return Err(Error::NumericalBlowup { iteration, sample, grid, detail });
    }
    if let Some(aux) = state.auxiliary.as_deref() {
        if let Some((sample, grid, detail)) = find_blowup(aux, bound) {
            return Err(Error::NumericalBlowup { iteration, sample, grid, detail: format!("second panel: {detail}") });
        }
    }

    let row = TraceRow {
        iteration,
        y0: coeffs.d0(),
        z0: (0..state.dim).map(|l| coeffs.initial_derivative(l)).collect(),
        target_std: sample_std(&f),
        estimate_seconds,
        update_seconds,
    };
    info!(
        "{}: iteration {iteration} Y0 = {:.6} Z0 = {:?} ({:.2}s + {:.2}s)",
        problem.name(),
        row.y0,
        row.z0,
        estimate_seconds,
        update_seconds
    );
    state.trace.push(row.clone());
    if let Some(aux) = state.auxiliary.as_deref_mut() {
        aux.trace.push(row);
        aux.coefficients = aux_update;
    }
    state.coefficients = Some(coeffs);
    Ok(())
}

/// Runs `config.iterations` Picard steps from `Y^0 = Z^0 = 0` on a panel
/// drawn from `config.seed`.
pub fn solve(problem: &(impl BsdeProblem + ?Sized), config: &SolverConfig) -> Result<SolverState> {
    let setup = PicardSetup::new(problem, config)?;
    solve_with_setup(problem, config, &setup)
}

pub fn solve_with_setup(
    problem: &(impl BsdeProblem + ?Sized),
    config: &SolverConfig,
    setup: &PicardSetup,
) -> Result<SolverState> {
    let mut state = setup.zero_state();
    for _ in 0..config.iterations {
        picard_step(&mut state, problem, setup, config)?;
    }
    Ok(state)
}

/// Initial state for stepping by hand with [`picard_step`].
pub fn initial_state(setup: &PicardSetup) -> SolverState {
    setup.zero_state()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(iterations: usize, samples: usize) -> SolverConfig {
        SolverConfig { iterations, samples, steps: 4, order: 2, seed: 11, ..Default::default() }
    }

    #[test]
    fn integration_rules() {
        let f = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        integrate(&f, 0.5, Quadrature::RightEndpoint, &mut out);
        assert_eq!(out, [0.0, 1.0, 2.5]);
        integrate(&f, 0.5, Quadrature::Trapezoidal, &mut out);
        assert_eq!(out, [0.0, 0.75, 2.0]);
    }

    #[test]
    fn zero_problem_stays_zero() {
        let p = FnProblem::new("zero", 1, |_, _, _| 0.0, |_, _| 0.0);
        let s = solve(&p, &config(3, 500)).unwrap();
        assert!(s.y_values().iter().all(|&v| v == 0.0));
        assert!(s.z_values().iter().all(|&v| v == 0.0));
        assert_eq!(s.iterations(), 3);
    }

    #[test]
    fn unit_driver_integrates_time() {
        // least squares carries an intercept, so a constant F is fitted exactly
        let p = FnProblem::new("one", 1, |_, _, _| 1.0, |_, _| 0.0);
        let cfg = SolverConfig { estimator: Estimator::LeastSquares { ridge: 0.0 }, ..config(2, 300) };
        let s = solve(&p, &cfg).unwrap();
        let h = 0.25;
        for m in [0, 17, 299] {
            let row = s.y_path(m);
            for (j, v) in row.iter().enumerate() {
                let want = 1.0 - h * j as f64;
                assert!((v - want).abs() < 1e-12, "m={m} j={j}: {v} vs {want}");
            }
        }
        assert!(s.z_values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn row_zero_matches_trace() {
        let p = crate::problems::CosSup::default();
        let s = solve(&p, &config(3, 2000)).unwrap();
        let t = s.trace.last().unwrap();
        assert_eq!(s.y0(), t.y0);
        assert_eq!(s.z0(), t.z0.as_slice());
        for m in 0..s.samples() {
            assert_eq!(s.y_path(m)[0], t.y0);
        }
    }

    #[test]
    fn stepping_composes() {
        let p = crate::problems::CosSup::default();
        let cfg = config(4, 1500);
        let setup = PicardSetup::new(&p, &cfg).unwrap();
        let whole = solve_with_setup(&p, &cfg, &setup).unwrap();
        let mut state = initial_state(&setup);
        for _ in 0..4 {
            picard_step(&mut state, &p, &setup, &cfg).unwrap();
        }
        assert_eq!(whole.y_values(), state.y_values());
        assert_eq!(whole.z_values(), state.z_values());
    }

    #[test]
    fn blowup_is_reported() {
        let p = FnProblem::new("exp", 1, |_, y: f64, _| (50.0 * y).exp(), |path: &BrownianPath, _| path.terminal(0));
        let err = solve(&p, &config(6, 400)).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { .. }), "{err:?}");
    }

    #[test]
    fn fresh_mode_runs_two_panels() {
        let p = crate::problems::CosSup::default();
        let cfg = SolverConfig { sample_mode: SampleMode::Fresh, ..config(3, 2000) };
        let s = solve(&p, &cfg).unwrap();
        let aux = s.auxiliary.as_deref().unwrap();
        assert_eq!(aux.samples(), 2000);
        assert_ne!(s.y_values(), aux.y_values());
        assert_eq!(s.y0(), s.trace.last().unwrap().y0);
    }

    #[test]
    fn config_errors() {
        let p = crate::problems::CosSup::default();
        assert!(matches!(solve(&p, &SolverConfig { samples: 0, ..config(1, 1) }), Err(Error::Config(_))));
        assert!(matches!(solve(&p, &SolverConfig { steps: 1, order: 2, ..config(1, 10) }), Err(Error::Config(_))));
        let saa = SolverConfig { estimator: Estimator::LeastSquares { ridge: 0.0 }, ..config(1, 10) };
        assert!(matches!(solve(&p, &saa), Err(Error::Underdetermined { .. })));
    }
}
