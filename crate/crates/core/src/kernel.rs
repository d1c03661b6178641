//! Order-zero building blocks: the Gaussian transition density of the frozen
//! generator, Black-Scholes prices, and the Hermite identities that express
//! every `x`- and `sigma`-derivative of a Black-Scholes price through the
//! single quantity `(dx^2 - dx) u_BS`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::model::{Coefficient, ModelSpec, Payoff};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Physicists' Hermite polynomial `H_n(z)` by `H_{n+1} = 2z H_n - 2n H_{n-1}`.
pub fn hermite(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Gaussian density of `(X_T, Y_T)` under the generator frozen at the expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// `exp(-int_t^T gamma_0)`.
    pub discount: f64,
    /// Only the `x` marginal is meaningful.
    pub one_dimensional: bool,
}

impl GaussianKernel {
    pub fn from_model(model: &ModelSpec, t: f64, maturity: f64, x: f64, y: f64) -> Self {
        let int = |w: Coefficient| model.leading(w).integral(t, maturity);
        let (a, b, c, alpha, gamma) = (
            int(Coefficient::A),
            int(Coefficient::B),
            int(Coefficient::C),
            int(Coefficient::Alpha),
            int(Coefficient::Gamma),
        );
        GaussianKernel {
            mean: [x + gamma - a, y + alpha],
            cov: [[2.0 * a, c], [c, 2.0 * b]],
            discount: (-gamma).exp(),
            one_dimensional: model.is_one_dimensional(),
        }
    }

    fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// Density at `(xi, omega)`, without the discount factor.
    pub fn density(&self, xi: f64, omega: f64) -> Result<f64> {
        if self.one_dimensional {
            return self.density_x(xi);
        }
        let det = self.det();
        if !(det > 0.0) || !(self.cov[0][0] > 0.0) {
            return Err(Error::Numeric(format!("covariance matrix is not positive definite (det = {det})")));
        }
        let (dx, dy) = (xi - self.mean[0], omega - self.mean[1]);
        let q = (self.cov[1][1] * dx * dx - 2.0 * self.cov[0][1] * dx * dy + self.cov[0][0] * dy * dy) / det;
        Ok((-0.5 * q).exp() / (2.0 * PI * det.sqrt()))
    }

    /// Marginal density of `X_T`.
    pub fn density_x(&self, xi: f64) -> Result<f64> {
        let v = self.cov[0][0];
        if !(v > 0.0) {
            return Err(Error::Numeric(format!("variance {v} is not positive")));
        }
        let d = xi - self.mean[0];
        Ok((-0.5 * d * d / v).exp() / (2.0 * PI * v).sqrt())
    }

    /// `E[f(X_T, Y_T)]` by trapezoid quadrature in whitened coordinates over
    /// +-10 standard deviations. Exponentially accurate for smooth `f`.
    pub fn expectation(&self, f: impl Fn(f64, f64) -> f64, nodes: usize) -> Result<f64> {
        let l11 = self.cov[0][0].sqrt();
        if !(l11 > 0.0) {
            return Err(Error::Numeric("variance of x is not positive".into()));
        }
        let span = 10.0;
        let h = 2.0 * span / (nodes - 1) as f64;
        let zs: Vec<(f64, f64)> = (0..nodes)
            .map(|i| {
                let z = -span + i as f64 * h;
                let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                (z, w * h * norm_pdf(z))
            })
            .collect();
        if self.one_dimensional {
            return Ok(zs.iter().map(|&(z, w)| w * f(self.mean[0] + l11 * z, self.mean[1])).sum());
        }
        let l21 = self.cov[0][1] / l11;
        let rest = self.cov[1][1] - l21 * l21;
        if !(rest > 0.0) {
            return Err(Error::Numeric("covariance matrix is not positive definite".into()));
        }
        let l22 = rest.sqrt();
        let mut acc = 0.0;
        for &(z1, w1) in &zs {
            let xi = self.mean[0] + l11 * z1;
            let inner: f64 = zs.iter().map(|&(z2, w2)| w2 * f(xi, self.mean[1] + l21 * z1 + l22 * z2)).sum();
            acc += w1 * inner;
        }
        Ok(acc)
    }
}

/// Black-Scholes inputs in log coordinates with zero rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsState {
    /// Log-spot.
    pub x: f64,
    /// Log-strike.
    pub k: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl BsState {
    pub fn new(x: f64, k: f64, tau: f64, sigma: f64) -> Self {
        BsState { x, k, tau, sigma }
    }

    fn total_vol(&self) -> f64 {
        self.sigma * self.tau.sqrt()
    }

    pub fn d_plus(&self) -> f64 {
        let s = self.total_vol();
        (self.x - self.k) / s + 0.5 * s
    }

    pub fn d_minus(&self) -> f64 {
        let s = self.total_vol();
        (self.x - self.k) / s - 0.5 * s
    }

    /// Hermite variable `z = (x - k - sigma^2 tau / 2) / (sigma sqrt(2 tau))`.
    pub fn hermite_z(&self) -> f64 {
        self.d_minus() / SQRT_2
    }
}

pub fn bs_call(s: &BsState) -> f64 {
    if s.total_vol() == 0.0 {
        return (s.x.exp() - s.k.exp()).max(0.0);
    }
    s.x.exp() * norm_cdf(s.d_plus()) - s.k.exp() * norm_cdf(s.d_minus())
}

pub fn bs_put(s: &BsState) -> f64 {
    if s.total_vol() == 0.0 {
        return (s.k.exp() - s.x.exp()).max(0.0);
    }
    s.k.exp() * norm_cdf(-s.d_minus()) - s.x.exp() * norm_cdf(-s.d_plus())
}

/// `d u_BS / d sigma = sqrt(tau) e^x phi(d+)`.
pub fn bs_vega(s: &BsState) -> f64 {
    s.tau.sqrt() * s.x.exp() * norm_pdf(s.d_plus())
}

/// `d u_BS / dx = e^x N(d+)`.
pub fn bs_delta(s: &BsState) -> f64 {
    s.x.exp() * norm_cdf(s.d_plus())
}

/// `(dx^2 - dx) u_BS = e^k phi(d-) / (sigma sqrt(tau))`.
pub fn bs_gamma_term(s: &BsState) -> f64 {
    s.k.exp() * norm_pdf(s.d_minus()) / s.total_vol()
}

/// `dx^n (dx^2 - dx) u_BS / (dx^2 - dx) u_BS = (-1/(sigma sqrt(2 tau)))^n H_n(z)`.
pub fn hermite_ratio(n: usize, s: &BsState) -> f64 {
    let scale = -1.0 / (s.sigma * (2.0 * s.tau).sqrt());
    scale.powi(n as i32) * hermite(n, s.hermite_z())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `(dx^2 - dx)^h u_BS / (dx^2 - dx) u_BS` for `h >= 1`.
fn gamma_power_ratio(h: usize, s: &BsState) -> f64 {
    (0..h)
        .map(|j| {
            let sign = if (h - 1 - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * binomial(h - 1, j) * hermite_ratio(h - 1 + j, s)
        })
        .sum()
}

/// `B_{n,h}(a, b, 0, 0, ...)`: set partitions into `2h - n` singletons and `n - h` pairs.
fn bell_two(n: usize, h: usize, a: f64, b: f64) -> f64 {
    if 2 * h < n || h > n {
        return 0.0;
    }
    let singles = 2 * h - n;
    let pairs = n - h;
    factorial(n) / (factorial(singles) * factorial(pairs) * 2f64.powi(pairs as i32))
        * a.powi(singles as i32)
        * b.powi(pairs as i32)
}

/// `d^n u_BS / d sigma^n` divided by `(dx^2 - dx) u_BS`.
///
/// The price depends on `sigma` only through `v = sigma^2 tau`, with
/// `d/dv = (dx^2 - dx)/2`; Faa di Bruno on `v(sigma)` does the rest.
pub fn sigma_derivative_over_gamma(n: usize, s: &BsState) -> f64 {
    let (dv, d2v) = (2.0 * s.tau * s.sigma, 2.0 * s.tau);
    (1..=n).map(|h| 0.5f64.powi(h as i32) * gamma_power_ratio(h, s) * bell_two(n, h, dv, d2v)).sum()
}

/// `d^n u_BS / d sigma^n`, exact; `n = 0` is the price.
pub fn bs_sigma_derivative(s: &BsState, n: usize) -> f64 {
    if n == 0 {
        return bs_call(s);
    }
    sigma_derivative_over_gamma(n, s) * bs_gamma_term(s)
}

/// Leading-order quantities for an x-only payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingTerm {
    pub x: f64,
    pub tau: f64,
    /// `2 int a_0`.
    pub total_variance: f64,
    /// `int gamma_0`.
    pub killing: f64,
}

impl LeadingTerm {
    pub fn new(model: &ModelSpec, t: f64, maturity: f64, x: f64) -> Result<Self> {
        let tau = maturity - t;
        if !(tau > 0.0) {
            return Err(Error::Usage(format!("maturity {maturity} must be after valuation time {t}")));
        }
        let total_variance = 2.0 * model.leading(Coefficient::A).integral(t, maturity);
        if !(total_variance > 0.0) {
            return Err(Error::Model("integrated a_00 is not positive".into()));
        }
        let killing = model.leading(Coefficient::Gamma).integral(t, maturity);
        Ok(LeadingTerm { x, tau, total_variance, killing })
    }

    /// `sqrt(2 int a_0 / tau)`.
    pub fn sigma0(&self) -> f64 {
        (self.total_variance / self.tau).sqrt()
    }

    pub fn discount(&self) -> f64 {
        (-self.killing).exp()
    }

    /// Black-Scholes state at the killing-shifted spot `x + int gamma_0`.
    pub fn bs_state(&self, k: f64) -> BsState {
        BsState::new(self.x + self.killing, k, self.tau, self.sigma0())
    }

    /// `dx^m u_0` for `m = 0..=max_m`.
    pub fn derivatives(&self, payoff: &Payoff, max_m: usize) -> Result<Vec<f64>> {
        let disc = self.discount();
        let mut out = vec![0.0; max_m + 1];
        match payoff {
            Payoff::Call { log_strike } | Payoff::Put { log_strike } => {
                let s = self.bs_state(*log_strike);
                let is_put = matches!(payoff, Payoff::Put { .. });
                let g = bs_gamma_term(&s);
                let delta = bs_delta(&s);
                let spot = s.x.exp();
                let mut acc = 0.0;
                for (m, slot) in out.iter_mut().enumerate() {
                    let v = match m {
                        0 => {
                            if is_put {
                                bs_put(&s)
                            } else {
                                bs_call(&s)
                            }
                        }
                        _ => {
                            if m >= 2 {
                                acc += hermite_ratio(m - 2, &s) * g;
                            }
                            let call_m = delta + acc;
                            if is_put {
                                call_m - spot
                            } else {
                                call_m
                            }
                        }
                    };
                    *slot = disc * v;
                }
            }
            Payoff::Forward => out.iter_mut().for_each(|v| *v = self.x.exp()),
            Payoff::Bond => out[0] = disc,
            Payoff::Portfolio(parts) => {
                for (w, p) in parts {
                    for (o, d) in out.iter_mut().zip(self.derivatives(p, max_m)?) {
                        *o += w * d;
                    }
                }
            }
            Payoff::Joint { .. } => {
                return Err(Error::Capability("payoffs depending on y can only be priced at order zero".into()))
            }
        }
        Ok(out)
    }
}

/// Leading-order price `u_0(t, x, y)` of `payoff` at maturity `maturity`.
pub fn u0_price(model: &ModelSpec, payoff: &Payoff, t: f64, maturity: f64, x: f64, y: f64) -> Result<f64> {
    if let Payoff::Joint { h, .. } = payoff {
        if !(maturity > t) {
            return Err(Error::Usage("maturity must be after valuation time".into()));
        }
        let kernel = GaussianKernel::from_model(model, t, maturity, x, y);
        return Ok(kernel.discount * kernel.expectation(|a, b| h(a, b), 2001)?);
    }
    Ok(LeadingTerm::new(model, t, maturity, x)?.derivatives(payoff, 0)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::timealg::UniPoly;

    fn atm() -> BsState {
        BsState::new(0.0, 0.0, 1.0, 0.2)
    }

    #[test]
    fn cdf_tails_and_center() {
        assert_eq!(norm_cdf(0.0), 0.5);
        // N(-10) = 7.61985302416e-24 (erfc(10/sqrt2)/2)
        assert!((norm_cdf(-10.0) / 7.619853024160527e-24 - 1.0).abs() < 1e-13);
        assert!((norm_cdf(1.0) - 0.8413447460685429).abs() < 1e-16);
    }

    #[test]
    fn call_limits_and_value() {
        let deep = BsState::new(5.0, 0.0, 1.0, 0.2);
        assert!((bs_call(&deep) - (5f64.exp() - 1.0)).abs() < 1e-9);
        let flat = BsState::new(0.0, 0.0, 1e-20, 0.2);
        assert!(bs_call(&flat) < 1e-10);
        // 2 N(0.1) - 1
        assert!((bs_call(&atm()) - 0.07965567455405798).abs() < 1e-14);
    }

    #[test]
    fn vega_matches_closed_form_and_fd() {
        let s = atm();
        assert!((bs_vega(&s) - 0.3969525474770118).abs() < 1e-15);
        let h = 1e-6;
        let fd = (bs_call(&BsState { sigma: 0.2 + h, ..s }) - bs_call(&BsState { sigma: 0.2 - h, ..s })) / (2.0 * h);
        assert!((fd - bs_vega(&s)).abs() < 1e-8);
        let via = bs_sigma_derivative(&s, 1);
        assert!((via - s.tau * s.sigma * bs_gamma_term(&s)).abs() < 1e-15);
        assert!((via - bs_vega(&s)).abs() < 1e-12);
    }

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn higher_sigma_derivatives_match_fd() {
        for s in [atm(), BsState::new(0.1, -0.05, 0.5, 0.3), BsState::new(-0.2, 0.1, 2.0, 0.15)] {
            for n in 1..=5 {
                let fd = central(|sig| bs_sigma_derivative(&BsState { sigma: sig, ..s }, n - 1), s.sigma);
                let exact = bs_sigma_derivative(&s, n);
                assert!(close(exact, fd, 1e-6), "n={n} {s:?}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn hermite_explicit_forms() {
        let mut z = -3.0;
        while z < 3.0 {
            assert!((hermite(0, z) - 1.0).abs() < 1e-12);
            assert!((hermite(1, z) - 2.0 * z).abs() < 1e-12);
            assert!((hermite(2, z) - (4.0 * z * z - 2.0)).abs() < 1e-12);
            assert!((hermite(3, z) - (8.0 * z * z * z - 12.0 * z)).abs() < 1e-12);
            z += 0.0613;
        }
    }

    #[test]
    fn hermite_ratio_low_orders() {
        let s = BsState::new(0.05, -0.1, 0.5, 0.25);
        assert_eq!(hermite_ratio(0, &s), 1.0);
        let expect = -1.0 / (s.sigma * (2.0 * s.tau).sqrt()) * 2.0 * s.hermite_z();
        assert!((hermite_ratio(1, &s) - expect).abs() < 1e-15);
        for n in 1..=6 {
            let fd = central(|x| hermite_ratio(n - 1, &BsState { x, ..s }) * bs_gamma_term(&BsState { x, ..s }), s.x);
            let exact = hermite_ratio(n, &s) * bs_gamma_term(&s);
            assert!(close(exact, fd, 1e-6), "n={n}: {exact} vs {fd}");
        }
    }

    #[test]
    fn call_derivatives_match_fd() {
        let lt = LeadingTerm { x: 0.03, tau: 0.5, total_variance: 0.02, killing: 0.01 };
        for p in [Payoff::call(0.05), Payoff::put(-0.1), Payoff::Forward] {
            for m in 1..=6 {
                let d = lt.derivatives(&p, m).unwrap();
                let fd = central(|x| LeadingTerm { x, ..lt }.derivatives(&p, m - 1).unwrap()[m - 1], lt.x);
                assert!(close(d[m], fd, 1e-6), "{p:?} m={m}: {} vs {fd}", d[m]);
            }
        }
    }

    #[test]
    fn put_call_parity() {
        let mut x = -0.5;
        while x <= 0.5 {
            for &(k, tau, sigma) in &[(0.0, 1.0, 0.2), (0.3, 0.1, 0.5), (-0.2, 3.0, 0.1)] {
                let s = BsState::new(x, k, tau, sigma);
                assert!((bs_call(&s) - bs_put(&s) - (x.exp() - k.exp())).abs() < 1e-14);
            }
            x += 0.1;
        }
    }

    #[test]
    fn density_mode_and_normalization() {
        let m = ModelKind::HestonTd(crate::model::zoo::HestonTd {
            kappa: 1.15,
            theta0: 0.06,
            theta1: -0.08,
            delta0: 0.0625,
            delta1: -0.16,
            rho0: -0.125,
            rho1: 0.32,
        })
        .spec(0, (0.0, 0.05f64.ln()))
        .unwrap();
        let k = GaussianKernel::from_model(&m, 0.0, 0.25, 0.0, 0.05f64.ln());
        let mode = k.density(k.mean[0], k.mean[1]).unwrap();
        assert!((mode - 1.0 / (2.0 * PI * k.det().sqrt())).abs() < 1e-12 * mode);
        let total = k.expectation(|_, _| 1.0, 401).unwrap();
        assert!((total - 1.0).abs() < 1e-8);
        // same normalization by direct grid integration of the density
        let (sx, sy) = (k.cov[0][0].sqrt(), k.cov[1][1].sqrt());
        let n = 400;
        let (hx, hy) = (16.0 * sx / n as f64, 16.0 * sy / n as f64);
        let mut acc = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let xi = k.mean[0] - 8.0 * sx + i as f64 * hx;
                let om = k.mean[1] - 8.0 * sy + j as f64 * hy;
                acc += k.density(xi, om).unwrap() * hx * hy;
            }
        }
        assert!((acc - 1.0).abs() < 1e-8);
    }

    #[test]
    fn singular_covariance_is_numeric_error() {
        let k =
            GaussianKernel { mean: [0.0, 0.0], cov: [[1.0, 1.0], [1.0, 1.0]], discount: 1.0, one_dimensional: false };
        assert!(matches!(k.density(0.0, 0.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn chapman_kolmogorov() {
        // constant coefficients so each leg is a fixed-covariance Gaussian shift
        let mut spec = ModelSpec::new(0, (0.0, 0.0));
        spec.set(Coefficient::A, 0, 0, UniPoly::constant(0.02));
        spec.set(Coefficient::B, 0, 0, UniPoly::constant(0.05));
        spec.set(Coefficient::C, 0, 0, UniPoly::constant(-0.02));
        spec.set(Coefficient::Alpha, 0, 0, UniPoly::constant(0.3));
        let (t, s, big_t) = (0.0, 0.4, 1.0);
        let full = GaussianKernel::from_model(&spec, t, big_t, 0.0, 0.0);
        let first = GaussianKernel::from_model(&spec, t, s, 0.0, 0.0);
        for &(xi, om) in &[(0.0, 0.3), (-0.1, 0.5), (0.15, 0.0)] {
            let conv = first
                .expectation(|a, b| GaussianKernel::from_model(&spec, s, big_t, a, b).density(xi, om).unwrap(), 201)
                .unwrap();
            let direct = full.density(xi, om).unwrap();
            assert!((conv - direct).abs() < 1e-6 * direct.max(1.0), "{conv} vs {direct}");
        }
    }

    #[test]
    fn x_marginal_of_two_dimensional_integral() {
        let spec = ModelKind::ThreeHalves(crate::model::zoo::ThreeHalves {
            kappa: 22.84,
            theta: 0.4669 * 0.4669,
            delta: 8.56,
            rho: -0.99,
        })
        .spec(0, (0.0, (0.245f64 * 0.245).ln()))
        .unwrap();
        let (x, y) = (0.0, (0.245f64 * 0.245).ln());
        let k = GaussianKernel::from_model(&spec, 0.0, 0.5, x, y);
        let k1 = GaussianKernel { one_dimensional: true, ..k };
        for f in [|a: f64| a.exp(), |a: f64| a * a, |a: f64| (0.5 * a).cos()] {
            let two = k.expectation(|a, _| f(a), 401).unwrap();
            let one = k1.expectation(|a, _| f(a), 401).unwrap();
            assert!((two - one).abs() < 1e-10, "{two} vs {one}");
        }
        // the kinked call payoff against the closed form
        let call = Payoff::call(0.02);
        let quad = k.expectation(|a, _| call.eval(a), 2001).unwrap();
        let closed = u0_price(&spec, &call, 0.0, 0.5, x, y).unwrap();
        assert!((quad - closed).abs() < 1e-6, "{quad} vs {closed}");
    }

    #[test]
    fn u0_cases() {
        // constant vol
        let bs = ModelKind::BlackScholes { sigma: 0.3 }.spec(0, (0.0, 0.0)).unwrap();
        let p = u0_price(&bs, &Payoff::call(0.1), 0.0, 0.7, 0.0, 0.0).unwrap();
        assert!((p - bs_call(&BsState::new(0.0, 0.1, 0.7, 0.3))).abs() < 1e-15);
        // JDCEV bond
        let m = crate::model::zoo::Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let x = 0.5f64.ln();
        let spec = m.spec(0, (x, 0.0)).unwrap();
        let tau = 2.0;
        let expect = (-(m.b + m.delta * m.delta * m.c * (2.0 * x * m.beta).exp()) * tau).exp();
        assert!((u0_price(&spec, &Payoff::Bond, 0.0, tau, x, 0.0).unwrap() - expect).abs() < 1e-15);
        // Heston: sigma0 = e^(y/2)
        let y = 0.05f64.ln();
        let h = ModelKind::HestonTd(crate::model::zoo::HestonTd {
            kappa: 1.15,
            theta0: 0.06,
            theta1: -0.08,
            delta0: 0.0625,
            delta1: -0.16,
            rho0: -0.125,
            rho1: 0.32,
        })
        .spec(0, (0.0, y))
        .unwrap();
        let p = u0_price(&h, &Payoff::call(0.0), 0.0, 0.25, 0.0, y).unwrap();
        let bs = bs_call(&BsState::new(0.0, 0.0, 0.25, 0.05f64.sqrt()));
        assert!((p - bs).abs() < 1e-15);
    }

    #[test]
    fn joint_payoff_at_order_zero() {
        let mut spec = ModelSpec::new(0, (0.0, 0.0));
        spec.set(Coefficient::A, 0, 0, UniPoly::constant(0.02));
        spec.set(Coefficient::B, 0, 0, UniPoly::constant(0.05));
        spec.set(Coefficient::C, 0, 0, UniPoly::constant(0.01));
        let h = Payoff::Joint { h: std::sync::Arc::new(|x, y| x * y), value_at_default: 0.0 };
        // E[XY] = cov + mean_x mean_y
        let k = GaussianKernel::from_model(&spec, 0.0, 1.0, 0.0, 0.0);
        let expect = k.cov[0][1] + k.mean[0] * k.mean[1];
        assert!((u0_price(&spec, &h, 0.0, 1.0, 0.0, 0.0).unwrap() - expect).abs() < 1e-12);
    }
}
