//! Benchmark BSDEs: drivers, terminal functionals and the Black-Scholes map
//! from Brownian grid paths to asset prices.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::brownian::{BrownianPath, CorrelationSpec};
use crate::error::{Error, Result};
use crate::solver::BsdeProblem;

/// `max_i B_{t_i}` over the grid of component 0, `t_0` included.
pub fn terminal_sup_bm(path: &BrownianPath) -> f64 {
    path.component(0).fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{i >= 1} B_{t_i}` over the grid of component 0, `t_0` excluded.
pub fn terminal_sup_bm_after_origin(path: &BrownianPath) -> f64 {
    path.component(0).skip(1).fold(f64::NEG_INFINITY, f64::max)
}

pub fn driver_cos(_t: f64, y: f64, _z: &[f64]) -> f64 {
    y.cos()
}

/// Per-asset Black-Scholes parameters. `borrow_rate` is only used by the
/// basket driver.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackScholesParams {
    pub spot: Vec<f64>,
    pub rate: f64,
    pub drift: Vec<f64>,
    pub volatility: Vec<f64>,
    pub borrow_rate: f64,
}

impl BlackScholesParams {
    /// One asset with drift equal to the bond rate.
    pub fn single(spot: f64, rate: f64, volatility: f64) -> Self {
        Self { spot: vec![spot], rate, drift: vec![rate], volatility: vec![volatility], borrow_rate: rate }
    }

    /// `d` identical assets.
    pub fn uniform(d: usize, spot: f64, rate: f64, drift: f64, volatility: f64, borrow_rate: f64) -> Self {
        Self {
            spot: vec![spot; d],
            rate,
            drift: vec![drift; d],
            volatility: vec![volatility; d],
            borrow_rate,
        }
    }

    pub fn dim(&self) -> usize {
        self.spot.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.drift.len() != d || self.volatility.len() != d {
            return Err(Error::Config("spot, drift and volatility must have the same nonzero length".into()));
        }
        if self.volatility.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("volatilities must be finite and nonnegative".into()));
        }
        if self.spot.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("initial prices must be positive".into()));
        }
        Ok(())
    }
}

/// `S^i_{t_k} = S^i_0 exp((mu^i - (sigma^i)^2 / 2) t_k + sigma^i B^i_{t_k})`
/// on the grid of `path` with step `h`; step-major like the path.
pub fn bs_path(path: &BrownianPath, params: &BlackScholesParams, h: f64) -> Vec<f64> {
    let d = path.dim();
    let mut out = Vec::with_capacity((path.steps() + 1) * d);
    for k in 0..=path.steps() {
        let t = k as f64 * h;
        for i in 0..d {
            let s = params.volatility[i];
            out.push(params.spot[i] * ((params.drift[i] - 0.5 * s * s) * t + s * path.at(k, i)).exp());
        }
    }
    out
}

/// `(S_T - K)^+` unless some grid price (including `t_0`) is below `barrier`.
pub fn terminal_barrier_call(prices: &[f64], strike: f64, barrier: f64) -> f64 {
    if prices.iter().any(|&s| s < barrier) {
        return 0.0;
    }
    prices.last().map_or(0.0, |&s| (s - strike).max(0.0))
}

/// `(K - mean_i S^i_T)^+`.
pub fn terminal_basket_put(terminal_prices: &[f64], strike: f64) -> f64 {
    let mean = terminal_prices.iter().sum::<f64>() / terminal_prices.len() as f64;
    (strike - mean).max(0.0)
}

/// `Sigma_ij = sigma^i L_ij`, its inverse and `theta = Sigma^{-1}(mu - r 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketDriverSpec {
    pub theta: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_inv: DMatrix<f64>,
    /// Row sums of `Sigma^{-1}`, so that `sum_i (Sigma^{-1} z)_i = inv_row_sum . z`.
    inv_column_sums: Vec<f64>,
}

impl BasketDriverSpec {
    pub fn new(params: &BlackScholesParams, corr: &CorrelationSpec) -> Result<Self> {
        params.validate()?;
        let d = params.dim();
        if corr.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d} assets but a {}-dimensional correlation",
                corr.dim()
            )));
        }
        let sigma = DMatrix::from_fn(d, d, |i, j| params.volatility[i] * corr.factor_at(i, j));
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Config("volatility matrix Sigma is singular".into()))?;
        let excess = DVector::from_iterator(d, params.drift.iter().map(|mu| mu - params.rate));
        let theta = (&sigma_inv * excess).iter().copied().collect();
        let inv_column_sums = (0..d).map(|j| sigma_inv.column(j).sum()).collect();
        Ok(Self { theta, sigma, sigma_inv, inv_column_sums })
    }

    /// `sum_i (Sigma^{-1} z)_i`.
    pub fn hedge_sum(&self, z: &[f64]) -> f64 {
        self.inv_column_sums.iter().zip(z).map(|(a, b)| a * b).sum()
    }
}

/// `-r y - theta . z + (R - r) (y - sum_i (Sigma^{-1} z)_i)^-` with `x^- = max(-x, 0)`.
pub fn driver_borrowing(y: f64, z: &[f64], spec: &BasketDriverSpec, rate: f64, borrow_rate: f64) -> f64 {
    let theta_z: f64 = spec.theta.iter().zip(z).map(|(a, b)| a * b).sum();
    let short = (spec.hedge_sum(z) - y).max(0.0);
    -rate * y - theta_z + (borrow_rate - rate) * short
}

/// `f = cos(y)`, `xi = sup_t B_t` on the grid. The published tables take the
/// maximum over `t_1..t_N`; `include_origin` adds `B_{t_0} = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosSup {
    pub include_origin: bool,
}

impl BsdeProblem for CosSup {
    fn dim(&self) -> usize {
        1
    }
    fn driver(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        driver_cos(t, y, z)
    }
    fn terminal(&self, path: &BrownianPath, _h: f64) -> f64 {
        if self.include_origin {
            terminal_sup_bm(path)
        } else {
            terminal_sup_bm_after_origin(path)
        }
    }
    fn name(&self) -> &str {
        "cos_sup"
    }
}

/// Discretely monitored down-and-out call: `f = -r y`.
#[derive(Debug, Clone)]
pub struct BarrierCall {
    pub params: BlackScholesParams,
    pub strike: f64,
    pub barrier: f64,
}

impl BarrierCall {
    /// `r = 0.01, sigma = 0.2, K = 0.9, L = 0.85, S0 = 1`.
    pub fn benchmark() -> Self {
        Self { params: BlackScholesParams::single(1.0, 0.01, 0.2), strike: 0.9, barrier: 0.85 }
    }
}

impl BsdeProblem for BarrierCall {
    fn dim(&self) -> usize {
        1
    }
    fn driver(&self, _t: f64, y: f64, _z: &[f64]) -> f64 {
        -self.params.rate * y
    }
    fn terminal(&self, path: &BrownianPath, h: f64) -> f64 {
        terminal_barrier_call(&bs_path(path, &self.params, h), self.strike, self.barrier)
    }
    fn name(&self) -> &str {
        "barrier_call"
    }
}

/// Basket put with different lending and borrowing rates, driven by a
/// correlated Brownian motion `B = L W`.
#[derive(Debug, Clone)]
pub struct BasketPut {
    pub params: BlackScholesParams,
    pub strike: f64,
    pub correlation: CorrelationSpec,
    pub spec: BasketDriverSpec,
}

impl BasketPut {
    pub fn new(params: BlackScholesParams, strike: f64, rho: f64) -> Result<Self> {
        if params.borrow_rate < params.rate {
            return Err(Error::Config(format!(
                "borrowing rate R = {} must not be below the bond rate r = {}",
                params.borrow_rate, params.rate
            )));
        }
        let correlation = CorrelationSpec::new(rho, params.dim())?;
        let spec = BasketDriverSpec::new(&params, &correlation)?;
        Ok(Self { params, strike, correlation, spec })
    }

    /// Five assets, `r = 0.02, R = 0.1, K = 95, rho = 0.1, S0 = 100, mu = 0.05, sigma = 0.2`.
    pub fn benchmark() -> Self {
        Self::new(BlackScholesParams::uniform(5, 100.0, 0.02, 0.05, 0.2, 0.1), 95.0, 0.1)
            .expect("benchmark parameters are valid")
    }
}

impl BsdeProblem for BasketPut {
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn driver(&self, _t: f64, y: f64, z: &[f64]) -> f64 {
        driver_borrowing(y, z, &self.spec, self.params.rate, self.params.borrow_rate)
    }
    fn terminal(&self, path: &BrownianPath, h: f64) -> f64 {
        let d = self.dim();
        let t = path.steps() as f64 * h;
        let last: Vec<f64> = (0..d)
            .map(|i| {
                let s = self.params.volatility[i];
                self.params.spot[i] * ((self.params.drift[i] - 0.5 * s * s) * t + s * path.terminal(i)).exp()
            })
            .collect();
        terminal_basket_put(&last, self.strike)
    }
    fn correlation(&self) -> Option<&CorrelationSpec> {
        Some(&self.correlation)
    }
    fn name(&self) -> &str {
        "basket_put"
    }
}

/// `f = -r y`, `xi = c`: solution `Y_t = c e^{-r (T - t)}`, `Z = 0`.
#[derive(Debug, Clone, Copy)]
pub struct LinearTest {
    pub rate: f64,
    pub terminal_value: f64,
}

impl BsdeProblem for LinearTest {
    fn dim(&self) -> usize {
        1
    }
    fn driver(&self, _t: f64, y: f64, _z: &[f64]) -> f64 {
        -self.rate * y
    }
    fn terminal(&self, _path: &BrownianPath, _h: f64) -> f64 {
        self.terminal_value
    }
    fn name(&self) -> &str {
        "linear_test"
    }
}

/// `f = 0`, `xi = B_T`: solution `Y_t = B_t`, `Z = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MartingaleTest;

impl BsdeProblem for MartingaleTest {
    fn dim(&self) -> usize {
        1
    }
    fn driver(&self, _t: f64, _y: f64, _z: &[f64]) -> f64 {
        0.0
    }
    fn terminal(&self, path: &BrownianPath, _h: f64) -> f64 {
        path.terminal(0)
    }
    fn name(&self) -> &str {
        "martingale_test"
    }
}

/// Numeric problem parameters from a config section. Every key must be
/// consumed by the builder; leftovers are reported as unknown.
#[derive(Debug, Clone, Default)]
pub struct ProblemParams {
    values: BTreeMap<String, f64>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl ProblemParams {
    pub fn new(values: BTreeMap<String, f64>) -> Self {
        Self { values, used: Default::default() }
    }

    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).copied().unwrap_or(default)
    }

    /// Errors on any key that was never read.
    pub fn finish(&self, problem: &str) -> Result<()> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::Config(format!("unknown parameter `{k}` for problem `{problem}`"))),
            None => Ok(()),
        }
    }
}

type Builder = Box<dyn Fn(&ProblemParams) -> Result<Arc<dyn BsdeProblem>> + Send + Sync>;

/// Name-keyed problem constructors.
pub struct ProblemRegistry {
    builders: BTreeMap<String, Builder>,
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        Self::with_benchmarks()
    }
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        Self { builders: BTreeMap::new() }
    }

    /// `cos_sup`, `barrier_call`, `basket_put`, `linear_test`, `martingale_test`.
    pub fn with_benchmarks() -> Self {
        let mut reg = Self::empty();
        reg.register("cos_sup", |p| {
            let flag = p.get("include_origin", 0.0);
            if flag != 0.0 && flag != 1.0 {
                return Err(Error::Config(format!("include_origin must be 0 or 1, got {flag}")));
            }
            Ok(Arc::new(CosSup { include_origin: flag == 1.0 }))
        });
        reg.register("martingale_test", |_| Ok(Arc::new(MartingaleTest)));
        reg.register("linear_test", |p| {
            Ok(Arc::new(LinearTest { rate: p.get("r", 0.05), terminal_value: p.get("xi", 1.0) }))
        });
        reg.register("barrier_call", |p| {
            let params = BlackScholesParams::single(p.get("S0", 1.0), p.get("r", 0.01), p.get("sigma", 0.2));
            params.validate()?;
            Ok(Arc::new(BarrierCall { params, strike: p.get("K", 0.9), barrier: p.get("L", 0.85) }))
        });
        reg.register("basket_put", |p| {
            let d = p.get("d", 5.0);
            if d < 1.0 || d.fract() != 0.0 {
                return Err(Error::Config(format!("basket dimension d must be a positive integer, got {d}")));
            }
            let params = BlackScholesParams::uniform(
                d as usize,
                p.get("S0", 100.0),
                p.get("r", 0.02),
                p.get("mu", 0.05),
                p.get("sigma", 0.2),
                p.get("R", 0.1),
            );
            Ok(Arc::new(BasketPut::new(params, p.get("K", 95.0), p.get("rho", 0.1))?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&ProblemParams) -> Result<Arc<dyn BsdeProblem>> + Send + Sync + 'static,
    {
        self.builders.insert(name.to_string(), Box::new(builder));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &ProblemParams) -> Result<Arc<dyn BsdeProblem>> {
        let builder = self.builders.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            Error::Config(format!("unknown problem `{name}` (known: {})", known.join(", ")))
        })?;
        let problem = builder(params)?;
        params.finish(name)?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(values: &[f64]) -> BrownianPath {
        BrownianPath::from_values(values.len() - 1, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn sup_includes_origin() {
        assert_eq!(terminal_sup_bm(&path(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(terminal_sup_bm(&path(&[0.0, 0.2, 0.5, 0.9])), 0.9);
        assert_eq!(terminal_sup_bm(&path(&[0.0, 1.0, -1.0])), 1.0);
        assert_eq!(terminal_sup_bm(&path(&[0.0, -1.0, -2.0])), 0.0);
        assert_eq!(terminal_sup_bm_after_origin(&path(&[0.0, -1.0, -2.0])), -1.0);
        assert_eq!(terminal_sup_bm_after_origin(&path(&[0.0, 0.2, 0.5, 0.9])), 0.9);
    }

    #[test]
    fn cos_driver() {
        assert_eq!(driver_cos(0.3, 0.0, &[1.0]), 1.0);
        assert_eq!(driver_cos(0.3, std::f64::consts::PI, &[1.0]), -1.0);
        assert!(driver_cos(0.0, std::f64::consts::FRAC_PI_2, &[0.0]).abs() < 1e-15);
    }

    #[test]
    fn asset_paths() {
        let p = BlackScholesParams::single(1.0, 0.01, 0.2);
        let zero = path(&[0.0; 5]);
        let s = bs_path(&zero, &p, 0.25);
        for (k, v) in s.iter().enumerate() {
            assert!((v - ((0.01 - 0.02) * (k as f64 * 0.25)).exp()).abs() < 1e-15);
        }
        let flat = BlackScholesParams::single(2.0, 0.03, 0.0);
        let b = path(&[0.0, 0.4, -0.1]);
        let s = bs_path(&b, &flat, 0.5);
        assert_eq!(s, vec![2.0, 2.0 * (0.03f64 * 0.5).exp(), 2.0 * 0.03f64.exp()]);
        let s = bs_path(&b, &p, 0.5);
        for (k, v) in s.iter().enumerate() {
            let want = ((0.01 - 0.02) * (k as f64 * 0.5) + 0.2 * b.at(k, 0)).exp();
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn barrier_payoff() {
        assert!((terminal_barrier_call(&[1.0; 21], 0.9, 0.85) - 0.1).abs() < 1e-15);
        let mut dip = vec![1.2; 21];
        dip[7] = 0.84;
        assert_eq!(terminal_barrier_call(&dip, 0.9, 0.85), 0.0);
        let mut otm = vec![1.0; 21];
        otm[20] = 0.8;
        assert_eq!(terminal_barrier_call(&otm, 0.9, 0.75), 0.0);
    }

    #[test]
    fn basket_payoff_and_driver() {
        assert_eq!(terminal_basket_put(&[100.0, 96.0, 95.0], 95.0), 0.0);
        assert!((terminal_basket_put(&[90.0, 92.0], 95.0) - 4.0).abs() < 1e-12);
        let b = BasketPut::benchmark();
        assert_eq!(b.driver(0.0, 0.0, &[0.0; 5]), 0.0);
    }

    #[test]
    fn sigma_inverse_is_exact() {
        let b = BasketPut::benchmark();
        let id = &b.spec.sigma * &b.spec.sigma_inv;
        assert!((id - DMatrix::<f64>::identity(5, 5)).amax() < 1e-10);
        // theta solves Sigma theta = mu - r
        let back = &b.spec.sigma * DVector::from_vec(b.spec.theta.clone());
        assert!(back.iter().all(|x| (x - 0.03).abs() < 1e-12));
    }

    #[test]
    fn borrowing_driver_branches() {
        let b = BasketPut::benchmark();
        let z = [1.0, -0.5, 2.0, 0.3, 0.0];
        let linear = |y: f64| -0.02 * y - b.spec.theta.iter().zip(&z).map(|(t, v)| t * v).sum::<f64>();
        let hedge = b.spec.hedge_sum(&z);
        let y = hedge + 1.0;
        assert!((b.driver(0.0, y, &z) - linear(y)).abs() < 1e-14);
        let y = hedge - 2.0;
        assert!((b.driver(0.0, y, &z) - (linear(y) + 0.08 * 2.0)).abs() < 1e-12);
        // R = r collapses to the linear driver everywhere
        let flat = BasketPut::new(BlackScholesParams::uniform(5, 100.0, 0.02, 0.05, 0.2, 0.02), 95.0, 0.1).unwrap();
        assert!((flat.driver(0.0, y, &z) - linear(y)).abs() < 1e-12);
    }

    #[test]
    fn singular_sigma_rejected() {
        let p = BlackScholesParams::uniform(3, 100.0, 0.02, 0.05, 0.0, 0.1);
        assert!(BasketPut::new(p, 95.0, 0.1).is_err());
        let p = BlackScholesParams::uniform(3, 100.0, 0.1, 0.05, 0.2, 0.02);
        assert!(BasketPut::new(p, 95.0, 0.1).is_err());
    }

    #[test]
    fn registry() {
        let reg = ProblemRegistry::with_benchmarks();
        let names: Vec<&str> = reg.names().collect();
        assert_eq!(names, vec!["barrier_call", "basket_put", "cos_sup", "linear_test", "martingale_test"]);
        let p = reg.build("basket_put", &ProblemParams::default()).unwrap();
        assert_eq!(p.dim(), 5);
        assert!(p.correlation().is_some());
        let bad = ProblemParams::new([("strike".to_string(), 1.0)].into());
        assert!(matches!(reg.build("barrier_call", &bad), Err(Error::Config(_))));
        assert!(reg.build("heston", &ProblemParams::default()).is_err());
    }
}
