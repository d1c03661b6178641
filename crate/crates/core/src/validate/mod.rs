//! Independent checks on the expansion: Euler Monte Carlo with survival
//! weighting, Black-Scholes inversion and the convergence-order harness.

mod dynamics;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use dynamics::{dynamics_for, BlackScholesDynamics, Dynamics, GeneratorDynamics};

use crate::error::{Error, Result};
use crate::expansion::{CorrectionOperators, Vanilla};
use crate::kernel::{bs_call, bs_vega, BsState};
use crate::model::zoo::Displaced;
use crate::model::{ModelSpec, Payoff};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MCConfig {
    /// Number of paths; antithetic pairs are `ceil(paths / 2)`.
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig { paths: 100_000, steps_per_year: 250, seed: 1, antithetic: true }
    }
}

impl MCConfig {
    fn check(&self) -> Result<()> {
        if self.paths == 0 || self.steps_per_year == 0 {
            return Err(Error::Usage("Monte Carlo needs at least one path and one step per year".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCResult {
    pub price_mean: f64,
    pub std_error: f64,
    /// Black-Scholes implied volatility of `price_mean` for a vanilla payoff.
    pub implied_vol: Option<f64>,
    /// Price standard error mapped through vega.
    pub iv_std_error: Option<f64>,
}

/// Pairwise summation, so the result depends only on the order of `v`.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Survival-weighted payoffs of one path (or antithetic pair), one per payoff.
#[allow(clippy::too_many_arguments)]
fn simulate_sample(
    dynamics: &dyn Dynamics,
    payoffs: &[Payoff],
    t: f64,
    steps: usize,
    dt: f64,
    start: (f64, f64),
    rng: &mut ChaCha8Rng,
    antithetic: bool,
) -> Result<Vec<f64>> {
    let legs: &[f64] = if antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut states: Vec<[f64; 2]> = legs.iter().map(|_| dynamics.start(start.0, start.1)).collect();
    let mut killed: Vec<f64> = states.iter().map(|s| 0.5 * dynamics.killing(t, s) * dt).collect();
    let two = dynamics.two_factor();
    for i in 0..steps {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = if two { StandardNormal.sample(rng) } else { 0.0 };
        let ti = t + i as f64 * dt;
        for ((s, k), sign) in states.iter_mut().zip(killed.iter_mut()).zip(legs) {
            dynamics.step(ti, dt, s, [sign * z0, sign * z1]);
            let w = if i + 1 == steps { 0.5 } else { 1.0 };
            *k += w * dynamics.killing(ti + dt, s) * dt;
        }
    }
    let mut out = vec![0.0; payoffs.len()];
    for (s, k) in states.iter().zip(&killed) {
        let (x, y) = dynamics.observe(s);
        if !x.is_finite() || !k.is_finite() {
            return Err(Error::Numeric(format!("path left the domain: state = {s:?}, accumulated killing = {k}")));
        }
        let surv = (-k).exp();
        for (o, p) in out.iter_mut().zip(payoffs) {
            *o += surv * p.eval_joint(x, y) / legs.len() as f64;
        }
    }
    Ok(out)
}

/// Monte Carlo prices of several payoffs on the same paths.
pub fn mc_price_many(
    dynamics: &dyn Dynamics,
    payoffs: &[Payoff],
    t: f64,
    maturity: f64,
    x: f64,
    y: f64,
    cfg: &MCConfig,
) -> Result<Vec<MCResult>> {
    cfg.check()?;
    let tau = maturity - t;
    if !(tau > 0.0) {
        return Err(Error::Usage(format!("maturity {maturity} must be after valuation time {t}")));
    }
    let steps = ((tau * cfg.steps_per_year as f64).ceil() as usize).max(1);
    let dt = tau / steps as f64;
    let samples = if cfg.antithetic { cfg.paths.div_ceil(2) } else { cfg.paths };
    let rows: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            simulate_sample(dynamics, payoffs, t, steps, dt, (x, y), &mut rng, cfg.antithetic)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(payoffs.len());
    for (j, p) in payoffs.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (mean, se) = mean_and_stderr(&col);
        let (mut iv, mut iv_se) = (None, None);
        if let (Some(v), Some(k)) = (Vanilla::of(p), p.log_strike()) {
            let call = match v {
                Vanilla::Call => mean,
                Vanilla::Put => mean + x.exp() - k.exp(),
            };
            if let Ok(s) = invert_bs(call, x, k, tau) {
                iv = Some(s);
                iv_se = Some(se / bs_vega(&BsState::new(x, k, tau, s)));
            }
        }
        out.push(MCResult { price_mean: mean, std_error: se, implied_vol: iv, iv_std_error: iv_se });
    }
    Ok(out)
}

pub fn mc_price(
    dynamics: &dyn Dynamics,
    payoff: &Payoff,
    t: f64,
    maturity: f64,
    x: f64,
    y: f64,
    cfg: &MCConfig,
) -> Result<MCResult> {
    Ok(mc_price_many(dynamics, std::slice::from_ref(payoff), t, maturity, x, y, cfg)?[0])
}

/// Black-Scholes implied volatility of a call price.
pub fn invert_bs(price: f64, x: f64, k: f64, tau: f64) -> Result<f64> {
    let lower = (x.exp() - k.exp()).max(0.0);
    let upper = x.exp();
    if !(price > lower && price < upper) || !(tau > 0.0) {
        return Err(Error::Domain(format!("call price {price} outside the no-arbitrage interval ({lower}, {upper})")));
    }
    let f = |s: f64| bs_call(&BsState::new(x, k, tau, s)) - price;
    let (mut lo, mut hi) = (1e-6, 5.0);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::Domain(format!("price {price} implies a volatility outside [{lo}, {hi}]")));
    }
    // a few bisections give Newton a safe start
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(s);
        if v == 0.0 {
            return Ok(s);
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = bs_vega(&BsState::new(x, k, tau, s));
        let newton = s - v / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - s).abs() <= 1e-15 * s || hi - lo <= 1e-15 * s {
            s = next;
            break;
        }
        s = next;
    }
    if f(s).abs() > 1e-12 {
        return Err(Error::Numeric(format!("implied volatility did not converge: residual {}", f(s))));
    }
    Ok(s)
}

/// Exact call price in the displaced diffusion: a Black-Scholes price of the
/// shifted asset with variance `int sigma(s)^2 ds`.
pub fn displaced_call_exact(model: &Displaced, t: f64, maturity: f64, x: f64, k: f64) -> f64 {
    let (a, b) = (model.sigma0, model.sigma1);
    let int_sq = |s: f64| a * a * s + a * b * s * s + b * b * s * s * s / 3.0;
    let var = int_sq(maturity) - int_sq(t);
    let tau = maturity - t;
    let d = model.shift;
    bs_call(&BsState::new((x.exp() + d).ln(), (k.exp() + d).ln(), tau, (var / tau).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub order: usize,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    /// Every error was zero to rounding.
    Exact,
    Fitted(f64),
}

impl Slope {
    pub fn at_least(&self, bound: f64) -> bool {
        match self {
            Slope::Exact => true,
            Slope::Fitted(s) => *s >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log tau`, per order.
    pub slopes: Vec<(usize, Slope)>,
}

/// Errors of the partial sums against `oracle(tau)` for maturities `t + tau`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    model: &ModelSpec,
    payoff: &Payoff,
    t: f64,
    x: f64,
    y: f64,
    taus: &[f64],
    orders: &[usize],
    oracle: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<ConvergenceStudy> {
    let n_max = orders.iter().copied().max().unwrap_or(0);
    let ops = CorrectionOperators::build(model, n_max, model.point() == (x, y))?;
    let per_tau: Vec<(f64, Vec<f64>, f64)> = taus
        .par_iter()
        .map(|&tau| {
            let e = ops.price(payoff, t, t + tau, x, y)?;
            let sums = orders.iter().map(|&n| e.partial_sum(n)).collect();
            Ok((tau, sums, oracle(tau)?))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (j, &n) in orders.iter().enumerate() {
        let errs: Vec<(f64, f64, f64)> = per_tau.iter().map(|(tau, s, o)| (*tau, (s[j] - o).abs(), *o)).collect();
        rows.extend(errs.iter().map(|&(tau, e, _)| ConvergenceRow { tau, order: n, abs_error: e }));
        let exact = errs.iter().all(|&(_, e, o)| e <= 8.0 * f64::EPSILON * o.abs().max(1.0));
        let slope = if exact {
            Slope::Exact
        } else {
            let pts: Vec<(f64, f64)> =
                errs.iter().map(|&(tau, e, _)| (tau.ln(), e.max(f64::MIN_POSITIVE).ln())).collect();
            let m = pts.len() as f64;
            let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            Slope::Fitted(sxy / sxx)
        };
        slopes.push((n, slope));
    }
    Ok(ConvergenceStudy { rows, slopes })
}

/// `{:.16e}`: 17 significant digits.
pub fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// One strike of a smile validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileValidationRow {
    pub strike_offset: f64,
    pub mc_iv: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub approx_iv: f64,
}

pub fn write_smile_validation_csv(w: &mut impl Write, order: usize, rows: &[SmileValidationRow]) -> Result<()> {
    writeln!(w, "strike_offset,mc_iv,mc_stderr,approx_iv_order_{order}")?;
    let opt = |v: Option<f64>| v.map(csv_number).unwrap_or_else(|| "nan".into());
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            csv_number(r.strike_offset),
            opt(r.mc_iv),
            opt(r.mc_stderr),
            csv_number(r.approx_iv)
        )?;
    }
    Ok(())
}

/// One maturity of a bond validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondValidationRow {
    pub maturity: f64,
    pub mc_price: f64,
    pub mc_stderr: f64,
    pub approx_price: f64,
}

pub fn write_bond_validation_csv(w: &mut impl Write, order: usize, rows: &[BondValidationRow]) -> Result<()> {
    writeln!(w, "maturity,mc_price,mc_stderr,approx_price_order_{order}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            csv_number(r.maturity),
            csv_number(r.mc_price),
            csv_number(r.mc_stderr),
            csv_number(r.approx_price)
        )?;
    }
    Ok(())
}
