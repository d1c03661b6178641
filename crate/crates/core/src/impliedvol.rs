//! Implied-volatility series `sigma = sigma_0 + sigma_1 + ... + sigma_N`.
//!
//! Matching `u_BS(sigma_0 + delta)` expanded by Faa di Bruno against
//! `u_0 + u_1 + ...` order by order gives
//! `sigma_n = u_n / vega - (1/n!) sum_{h=2}^n (d^h u_BS / vega) B_{n,h}(1! sigma_1, 2! sigma_2, ...)`.
//! Every ratio to vega is a Hermite polynomial, so nothing is divided by a
//! small number unless the strike is far in the wings, where we refuse.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::{CorrectionOperators, PriceExpansion, Vanilla};
use crate::kernel::{self, BsState, LeadingTerm};
use crate::model::{ModelSpec, Payoff};

/// Largest `|z|` in the Hermite variable for which the series is quoted.
pub const MAX_HERMITE_Z: f64 = 6.0;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Partial Bell polynomials `B_{n,h}(x_1, x_2, ...)` for all `n <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellTable {
    n_max: usize,
    values: Vec<f64>,
}

impl BellTable {
    /// `xs[j - 1]` is `x_j`; needs `xs.len() >= n_max`.
    pub fn new(xs: &[f64], n_max: usize) -> Result<Self> {
        if xs.len() < n_max {
            return Err(Error::Usage(format!("need {n_max} arguments, got {}", xs.len())));
        }
        let w = n_max + 1;
        let mut values = vec![0.0; w * w];
        values[0] = 1.0;
        for n in 1..=n_max {
            for h in 1..=n {
                values[n * w + h] =
                    (1..=n - h + 1).map(|j| binomial(n - 1, j - 1) * xs[j - 1] * values[(n - j) * w + h - 1]).sum();
            }
        }
        Ok(BellTable { n_max, values })
    }

    pub fn get(&self, n: usize, h: usize) -> f64 {
        if n > self.n_max || h > n {
            return 0.0;
        }
        self.values[n * (self.n_max + 1) + h]
    }
}

/// `B_{n,h}(xs)`.
pub fn bell_partial(n: usize, h: usize, xs: &[f64]) -> Result<f64> {
    if h == 0 || h > n {
        return Err(Error::Usage(format!("partial Bell polynomial needs 1 <= h <= n, got n={n}, h={h}")));
    }
    if xs.len() < n - h + 1 {
        return Err(Error::Usage(format!("B_{{{n},{h}}} needs {} arguments, got {}", n - h + 1, xs.len())));
    }
    let mut padded = xs.to_vec();
    padded.resize(n, 0.0);
    Ok(BellTable::new(&padded, n)?.get(n, h))
}

fn no_default(model: &ModelSpec) -> Result<()> {
    if model.has_default() {
        return Err(Error::Capability(
            "implied volatility is only defined here for models without default (gamma = 0)".into(),
        ));
    }
    Ok(())
}

/// `sqrt(2 int_t^T a_0 / (T - t))`.
pub fn iv_sigma0(model: &ModelSpec, t: f64, maturity: f64) -> Result<f64> {
    no_default(model)?;
    Ok(LeadingTerm::new(model, t, maturity, model.point().0)?.sigma0())
}

/// `sigma_0, ..., sigma_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IvExpansion {
    pub terms: Vec<f64>,
}

impl IvExpansion {
    pub fn sigma0(&self) -> f64 {
        self.terms[0]
    }

    pub fn partial_sum(&self, n: usize) -> f64 {
        self.terms.iter().take(n + 1).sum()
    }

    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Turns a vanilla price expansion into the implied-volatility series.
pub fn iv_expand(expansion: &PriceExpansion) -> Result<IvExpansion> {
    if expansion.defaultable {
        return Err(Error::Capability(
            "implied volatility is only defined here for models without default (gamma = 0)".into(),
        ));
    }
    let (Some(vanilla), Some(k)) = (expansion.vanilla, expansion.log_strike) else {
        return Err(Error::Usage("implied volatility needs a call or put expansion".into()));
    };
    let (tau, s0) = (expansion.tau, expansion.sigma0);
    let state = BsState::new(expansion.x, k, tau, s0);
    let z = state.hermite_z();
    if !(z.abs() <= MAX_HERMITE_Z) {
        return Err(Error::Numeric(format!(
            "strike too far from the money for the series: z = {z:.3} (k = {k}, x = {}, tau = {tau}, sigma0 = {s0})",
            expansion.x
        )));
    }
    let g = kernel::bs_gamma_term(&state);
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Numeric(format!("vega underflow at k = {k}, tau = {tau}, sigma0 = {s0}")));
    }
    let vega_over_g = tau * s0;
    let vega = vega_over_g * g;
    let n_max = expansion.order();
    let ratios: Vec<f64> = {
        let kmax = expansion.orders.iter().map(|o| o.hermite_coeffs.len()).max().unwrap_or(0);
        (0..kmax).map(|j| kernel::hermite_ratio(j, &state)).collect()
    };
    let delta = {
        let d = kernel::bs_delta(&state);
        match vanilla {
            Vanilla::Call => d,
            Vanilla::Put => d - state.x.exp(),
        }
    };
    let u_over_vega: Vec<f64> = expansion
        .orders
        .iter()
        .map(|o| {
            let main: f64 = o.hermite_coeffs.iter().zip(&ratios).map(|(c, r)| c * r).sum::<f64>() / vega_over_g;
            main + (o.linear_coeff * delta + o.scalar_part()) / vega
        })
        .collect();
    let dsig: Vec<f64> = (0..=n_max).map(|h| kernel::sigma_derivative_over_gamma(h, &state) / vega_over_g).collect();

    let mut terms = vec![s0];
    let mut scaled = Vec::with_capacity(n_max); // j! sigma_j
    for n in 1..=n_max {
        scaled.push(0.0);
        let bell = BellTable::new(&scaled, n)?;
        let corr: f64 = (2..=n).map(|h| dsig[h] * bell.get(n, h)).sum();
        let sigma_n = u_over_vega[n] - corr / factorial(n);
        scaled[n - 1] = factorial(n) * sigma_n;
        terms.push(sigma_n);
    }
    Ok(IvExpansion { terms })
}

/// `u_BS(sum sigma_n) - sum u_n`.
pub fn iv_check_roundtrip(iv: &IvExpansion, expansion: &PriceExpansion) -> Result<f64> {
    let total = iv.total();
    if !(total > 0.0) {
        return Err(Error::Domain(format!("total implied volatility {total} is not positive")));
    }
    let (Some(vanilla), Some(k)) = (expansion.vanilla, expansion.log_strike) else {
        return Err(Error::Usage("round trip needs a call or put expansion".into()));
    };
    let s = BsState::new(expansion.x, k, expansion.tau, total);
    let bs = match vanilla {
        Vanilla::Call => kernel::bs_call(&s),
        Vanilla::Put => kernel::bs_put(&s),
    };
    Ok(bs - expansion.total())
}

/// Implied-volatility series across log-strikes at one valuation point.
pub fn iv_smile(
    ops: &CorrectionOperators,
    t: f64,
    maturity: f64,
    x: f64,
    y: f64,
    log_strikes: &[f64],
) -> Result<Vec<IvExpansion>> {
    no_default(ops.model())?;
    log_strikes.par_iter().map(|&k| iv_expand(&ops.price(&Payoff::call(k), t, maturity, x, y)?)).collect()
}
