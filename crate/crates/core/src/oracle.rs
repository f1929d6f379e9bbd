//! Reference values that do not go through the chaos machinery: closed forms
//! and plain Monte Carlo with antithetic variates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::CorrelationSpec;
use crate::error::{Error, Result};
use crate::problems::{terminal_barrier_call, terminal_basket_put, BlackScholesParams};

/// Mixed into oracle seeds so that an oracle and a solver run with the same
/// user seed never share random numbers.
pub const ORACLE_SEED_TAG: u64 = 0x6f72_6163_6c65_5eed;

/// Antithetic pairs per RNG stream.
const PAIR_BLOCK: usize = 4096;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Minimum number of antithetic pairs for the Monte Carlo oracles.
pub const MIN_REFERENCE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ClosedForm,
    PlainMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    /// 99% confidence half-width, zero for closed forms.
    pub half_width: f64,
    pub method: OracleMethod,
}

impl ReferenceValue {
    /// `|x - value| <= k * sqrt(half_width^2 + other^2)`.
    pub fn compatible(&self, x: f64, other_half_width: f64, k: f64) -> bool {
        (x - self.value).abs() <= k * self.half_width.hypot(other_half_width)
    }
}

/// `Y_0 = c e^{-rT}` for `f = -r y`, `xi = c`.
pub fn linear_bsde_closed_form(rate: f64, horizon: f64, terminal: f64) -> ReferenceValue {
    ReferenceValue { value: terminal * (-rate * horizon).exp(), half_width: 0.0, method: OracleMethod::ClosedForm }
}

/// Running mean and centered sum of squares.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Averages `pair(normals, +1)` and `pair(normals, -1)` over `pairs`
/// antithetic draws of `width` standard normals, discounted by `discount`.
fn antithetic_mc<F>(pairs: usize, width: usize, seed: u64, discount: f64, payoff: F) -> Result<ReferenceValue>
where
    F: Fn(&[f64], f64, &mut Vec<f64>) -> f64 + Sync,
{
    if pairs < MIN_REFERENCE_SAMPLES {
        return Err(Error::Config(format!(
            "reference Monte Carlo needs at least {MIN_REFERENCE_SAMPLES} samples, got {pairs}"
        )));
    }
    let seed = seed ^ ORACLE_SEED_TAG;
    let parts: Vec<Moments> = (0..pairs.div_ceil(PAIR_BLOCK))
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let mut z = vec![0.0; width];
            let mut work = Vec::new();
            let mut acc = Moments::default();
            for _ in block * PAIR_BLOCK..((block + 1) * PAIR_BLOCK).min(pairs) {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let up = payoff(&z, 1.0, &mut work);
                let down = payoff(&z, -1.0, &mut work);
                acc.push(0.5 * discount * (up + down));
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let variance = total.m2 / (total.n - 1.0);
    Ok(ReferenceValue {
        value: total.mean,
        half_width: Z99 * (variance / total.n).sqrt(),
        method: OracleMethod::PlainMc,
    })
}

/// Discretely monitored down-and-out call under the risk-neutral measure,
/// monitored at the `steps + 1` grid dates. `pairs` antithetic pairs.
pub fn barrier_call_mc(
    params: &BlackScholesParams,
    horizon: f64,
    steps: usize,
    strike: f64,
    barrier: f64,
    pairs: usize,
    seed: u64,
) -> Result<ReferenceValue> {
    params.validate()?;
    if params.dim() != 1 {
        return Err(Error::DimensionMismatch(format!("barrier call takes one asset, got {}", params.dim())));
    }
    if steps == 0 || !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::Config("barrier oracle needs N >= 1 and T > 0".into()));
    }
    let (s0, r, sigma) = (params.spot[0], params.rate, params.volatility[0]);
    let h = horizon / steps as f64;
    let drift = (r - 0.5 * sigma * sigma) * h;
    let vol = sigma * h.sqrt();
    antithetic_mc(pairs, steps, seed, (-r * horizon).exp(), |z, sign, prices| {
        prices.clear();
        prices.push(s0);
        let mut log = 0.0;
        for &g in z {
            log += drift + vol * sign * g;
            prices.push(s0 * log.exp());
        }
        terminal_barrier_call(prices, strike, barrier)
    })
}

/// Basket put `e^{-rT} E[(K - mean_i S^i_T)^+]` with every asset drifting at
/// the bond rate and Brownian correlation `rho`. `pairs` antithetic pairs.
pub fn basket_put_linear_mc(
    params: &BlackScholesParams,
    horizon: f64,
    strike: f64,
    rho: f64,
    pairs: usize,
    seed: u64,
) -> Result<ReferenceValue> {
    params.validate()?;
    let d = params.dim();
    let corr = CorrelationSpec::new(rho, d)?;
    let r = params.rate;
    let sqrt_t = horizon.sqrt();
    let drift: Vec<f64> = params.volatility.iter().map(|s| (r - 0.5 * s * s) * horizon).collect();
    antithetic_mc(pairs, d, seed, (-r * horizon).exp(), |z, sign, work| {
        work.resize(2 * d, 0.0);
        let (b, s) = work.split_at_mut(d);
        corr.apply(z, b);
        for i in 0..d {
            s[i] = params.spot[i] * (drift[i] + params.volatility[i] * sign * sqrt_t * b[i]).exp();
        }
        terminal_basket_put(s, strike)
    })
}
