//! Built-in parametric models with closed-form Taylor tables.

use super::{Coefficient, LsvFunctions, ModelSpec};
use crate::error::{Error, Result};
use crate::timealg::UniPoly;

/// Heston with `theta(t) = theta0 + theta1 t`, `delta(t)^2 = delta0 + delta1 t`
/// and `rho(t) delta(t) = rho0 + rho1 t`, in `(x, y) = (log S, log Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonTd {
    pub kappa: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub rho0: f64,
    pub rho1: f64,
}

/// `dZ = kappa Z (theta - Z) dt + delta Z^(3/2) dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeHalves {
    pub kappa: f64,
    pub theta: f64,
    pub delta: f64,
    pub rho: f64,
}

/// Jump-to-default CEV: `sigma(x) = delta e^(beta x)`, `gamma(x) = b + c sigma(x)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jdcev {
    pub delta: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
}

/// Displaced diffusion `dS = sigma(t) (S + shift) dW` with `sigma(t) = sigma0 + sigma1 t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displaced {
    pub sigma0: f64,
    pub sigma1: f64,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    BlackScholes {
        sigma: f64,
    },
    HestonTd(HestonTd),
    ThreeHalves(ThreeHalves),
    Jdcev(Jdcev),
    Cev {
        delta: f64,
        beta: f64,
    },
    Displaced(Displaced),
    /// Tables given directly; their own order and expansion point apply.
    Raw(Box<ModelSpec>),
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Model(msg.into()))
    }
}

/// Sets `f_{0,j}` (or `f_{j,0}`) for `f = p(t) e^(rate * z)` expanded at `zb`.
fn set_exponential(spec: &mut ModelSpec, which: Coefficient, in_y: bool, p: &UniPoly, rate: f64, zb: f64) {
    let order = spec.order();
    for n in 0..=order {
        let w = (rate * zb).exp() * rate.powi(n as i32) / factorial(n);
        let entry = spec.get(which, if in_y { 0 } else { n }, if in_y { n } else { 0 }).unwrap().add(&p.scale(w));
        if in_y {
            spec.set(which, 0, n, entry);
        } else {
            spec.set(which, n, 0, entry);
        }
    }
}

impl HestonTd {
    pub fn check(&self) -> Result<()> {
        require(self.delta0 > 0.0, "Heston: delta(0)^2 = delta0 must be positive")?;
        require(self.rho0.abs() < self.delta0.sqrt(), "Heston: |rho(0)| = |rho0|/sqrt(delta0) must be below 1")
    }

    pub fn spec(&self, order: usize, point: (f64, f64)) -> Result<ModelSpec> {
        self.check()?;
        let yb = point.1;
        let mut s = ModelSpec::new(order, point);
        set_exponential(&mut s, Coefficient::A, true, &UniPoly::constant(0.5), 1.0, yb);
        let var = UniPoly::affine(self.delta0, self.delta1);
        set_exponential(&mut s, Coefficient::B, true, &var.scale(0.5), -1.0, yb);
        s.set(Coefficient::C, 0, 0, UniPoly::affine(self.rho0, self.rho1));
        let drift = UniPoly::affine(self.kappa * self.theta0, self.kappa * self.theta1).add(&var.scale(-0.5));
        set_exponential(&mut s, Coefficient::Alpha, true, &drift, -1.0, yb);
        let a00 = s.get(Coefficient::Alpha, 0, 0)?.add(&UniPoly::constant(-self.kappa));
        s.set(Coefficient::Alpha, 0, 0, a00);
        Ok(s)
    }

    pub fn delta_sq(&self, t: f64) -> f64 {
        self.delta0 + self.delta1 * t
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.theta0 + self.theta1 * t
    }

    /// `rho(t) = (rho0 + rho1 t) / delta(t)`.
    pub fn rho(&self, t: f64) -> f64 {
        (self.rho0 + self.rho1 * t) / self.delta_sq(t).sqrt()
    }

    pub fn functions(&self) -> LsvFunctions {
        let m = *self;
        LsvFunctions {
            a: Box::new(|_, _, y| 0.5 * y.exp()),
            b: Box::new(move |t, _, y| 0.5 * m.delta_sq(t) * (-y).exp()),
            c: Box::new(move |t, _, _| m.rho0 + m.rho1 * t),
            alpha: Box::new(move |t, _, y| (m.kappa * m.theta(t) - 0.5 * m.delta_sq(t)) * (-y).exp() - m.kappa),
            gamma: Box::new(|_, _, _| 0.0),
        }
    }
}

impl ThreeHalves {
    pub fn check(&self) -> Result<()> {
        require(self.delta > 0.0, "three-halves: delta must be positive")?;
        require(self.rho.abs() < 1.0, "three-halves: |rho| must be below 1")
    }

    pub fn spec(&self, order: usize, point: (f64, f64)) -> Result<ModelSpec> {
        self.check()?;
        let yb = point.1;
        let mut s = ModelSpec::new(order, point);
        set_exponential(&mut s, Coefficient::A, true, &UniPoly::constant(0.5), 1.0, yb);
        let d2 = self.delta * self.delta;
        set_exponential(&mut s, Coefficient::B, true, &UniPoly::constant(0.5 * d2), 1.0, yb);
        set_exponential(&mut s, Coefficient::C, true, &UniPoly::constant(self.rho * self.delta), 1.0, yb);
        set_exponential(&mut s, Coefficient::Alpha, true, &UniPoly::constant(-(self.kappa + 0.5 * d2)), 1.0, yb);
        let a00 = s.get(Coefficient::Alpha, 0, 0)?.add(&UniPoly::constant(self.kappa * self.theta));
        s.set(Coefficient::Alpha, 0, 0, a00);
        Ok(s)
    }

    pub fn functions(&self) -> LsvFunctions {
        let m = *self;
        LsvFunctions {
            a: Box::new(|_, _, y| 0.5 * y.exp()),
            b: Box::new(move |_, _, y| 0.5 * m.delta * m.delta * y.exp()),
            c: Box::new(move |_, _, y| m.rho * m.delta * y.exp()),
            alpha: Box::new(move |_, _, y| m.kappa * (m.theta - y.exp()) - 0.5 * m.delta * m.delta * y.exp()),
            gamma: Box::new(|_, _, _| 0.0),
        }
    }
}

impl Jdcev {
    pub fn check(&self) -> Result<()> {
        require(self.delta > 0.0, "JDCEV: delta must be positive")?;
        require(self.b >= 0.0 && self.c >= 0.0, "JDCEV: b and c must be nonnegative")
    }

    pub fn spec(&self, order: usize, point: (f64, f64)) -> Result<ModelSpec> {
        self.check()?;
        let xb = point.0;
        let d2 = self.delta * self.delta;
        let mut s = ModelSpec::new(order, point);
        let rate = 2.0 * self.beta;
        set_exponential(&mut s, Coefficient::A, false, &UniPoly::constant(0.5 * d2), rate, xb);
        set_exponential(&mut s, Coefficient::Gamma, false, &UniPoly::constant(self.c * d2), rate, xb);
        let g00 = s.get(Coefficient::Gamma, 0, 0)?.add(&UniPoly::constant(self.b));
        s.set(Coefficient::Gamma, 0, 0, g00);
        Ok(s)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        self.delta * (self.beta * x).exp()
    }

    pub fn gamma(&self, x: f64) -> f64 {
        self.b + self.c * self.sigma(x).powi(2)
    }

    pub fn functions(&self) -> LsvFunctions {
        let m = *self;
        LsvFunctions {
            a: Box::new(move |_, x, _| 0.5 * m.sigma(x).powi(2)),
            gamma: Box::new(move |_, x, _| m.gamma(x)),
            ..Default::default()
        }
    }
}

impl Displaced {
    pub fn check(&self) -> Result<()> {
        require(self.sigma0 > 0.0, "displaced diffusion: sigma0 must be positive")?;
        require(self.shift >= 0.0, "displaced diffusion: shift must be nonnegative")
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma0 + self.sigma1 * t
    }

    /// Local volatility of `log S`.
    pub fn local_vol(&self, t: f64, x: f64) -> f64 {
        self.sigma(t) * (1.0 + self.shift * (-x).exp())
    }

    pub fn spec(&self, order: usize, point: (f64, f64)) -> Result<ModelSpec> {
        self.check()?;
        let xb = point.0;
        let half_var =
            UniPoly::affine(self.sigma0, self.sigma1).mul(&UniPoly::affine(self.sigma0, self.sigma1)).scale(0.5);
        let mut s = ModelSpec::new(order, point);
        s.set(Coefficient::A, 0, 0, half_var.clone());
        set_exponential(&mut s, Coefficient::A, false, &half_var.scale(2.0 * self.shift), -1.0, xb);
        set_exponential(&mut s, Coefficient::A, false, &half_var.scale(self.shift * self.shift), -2.0, xb);
        Ok(s)
    }

    pub fn functions(&self) -> LsvFunctions {
        let m = *self;
        LsvFunctions { a: Box::new(move |t, x, _| 0.5 * m.local_vol(t, x).powi(2)), ..Default::default() }
    }
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::BlackScholes { .. } => "black_scholes",
            ModelKind::HestonTd(_) => "heston_td",
            ModelKind::ThreeHalves(_) => "three_halves",
            ModelKind::Jdcev(_) => "jdcev",
            ModelKind::Cev { .. } => "cev",
            ModelKind::Displaced(_) => "displaced",
            ModelKind::Raw(_) => "raw",
        }
    }

    /// Taylor tables of order `order` around `point`.
    pub fn spec(&self, order: usize, point: (f64, f64)) -> Result<ModelSpec> {
        match self {
            ModelKind::BlackScholes { sigma } => {
                require(*sigma > 0.0, "Black-Scholes: sigma must be positive")?;
                let mut s = ModelSpec::new(order, point);
                s.set(Coefficient::A, 0, 0, UniPoly::constant(0.5 * sigma * sigma));
                Ok(s)
            }
            ModelKind::HestonTd(m) => m.spec(order, point),
            ModelKind::ThreeHalves(m) => m.spec(order, point),
            ModelKind::Jdcev(m) => m.spec(order, point),
            ModelKind::Cev { delta, beta } => Jdcev { delta: *delta, beta: *beta, b: 0.0, c: 0.0 }.spec(order, point),
            ModelKind::Displaced(m) => m.spec(order, point),
            ModelKind::Raw(spec) => {
                if order > spec.order() {
                    return Err(Error::Usage(format!(
                        "raw tables have order {}, order {order} requested",
                        spec.order()
                    )));
                }
                Ok(spec.truncated(order))
            }
        }
    }

    /// Coefficient functions, when the model has them.
    pub fn functions(&self) -> Option<LsvFunctions> {
        match self {
            ModelKind::BlackScholes { sigma } => {
                let a = 0.5 * sigma * sigma;
                Some(LsvFunctions { a: Box::new(move |_, _, _| a), ..Default::default() })
            }
            ModelKind::HestonTd(m) => Some(m.functions()),
            ModelKind::ThreeHalves(m) => Some(m.functions()),
            ModelKind::Jdcev(m) => Some(m.functions()),
            ModelKind::Cev { delta, beta } => Some(Jdcev { delta: *delta, beta: *beta, b: 0.0, c: 0.0 }.functions()),
            ModelKind::Displaced(m) => Some(m.functions()),
            ModelKind::Raw(_) => None,
        }
    }

    /// Whether the default expansion point of the model ignores `y`.
    pub fn is_one_dimensional(&self) -> bool {
        matches!(
            self,
            ModelKind::BlackScholes { .. } | ModelKind::Jdcev(_) | ModelKind::Cev { .. } | ModelKind::Displaced(_)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::taylor_table_from_closures;

    pub(crate) fn fig1() -> HestonTd {
        HestonTd { kappa: 1.15, theta0: 0.06, theta1: -0.08, delta0: 0.0625, delta1: -0.16, rho0: -0.125, rho1: 0.32 }
    }

    fn fig2() -> ThreeHalves {
        ThreeHalves { kappa: 22.84, theta: 0.4669 * 0.4669, delta: 8.56, rho: -0.99 }
    }

    fn at(spec: &ModelSpec, w: Coefficient, i: usize, j: usize, t: f64) -> f64 {
        spec.get(w, i, j).unwrap().eval(t)
    }

    #[test]
    fn heston_leading_variance() {
        let yb = 0.05f64.ln();
        let s = fig1().spec(2, (0.0, yb)).unwrap();
        assert!((at(&s, Coefficient::A, 0, 0, 0.0) - 0.025).abs() < 1e-16);
        assert!((at(&s, Coefficient::A, 0, 2, 0.0) - 0.05 / 4.0).abs() < 1e-16);
        assert_eq!(s.get(Coefficient::C, 0, 0).unwrap().coeffs(), &[-0.125, 0.32]);
        assert_eq!(s.table(Coefficient::A).max_time_degree(), 0);
        assert_eq!(s.table(Coefficient::B).max_time_degree(), 1);
        s.validate(0.0, 0.25).unwrap();
    }

    #[test]
    fn heston_without_time_dependence() {
        let m = HestonTd { theta1: 0.0, delta1: 0.0, rho1: 0.0, ..fig1() };
        let s = m.spec(3, (0.0, -3.0)).unwrap();
        for w in Coefficient::ALL {
            assert_eq!(s.table(w).max_time_degree(), 0);
        }
    }

    #[test]
    fn heston_correlation_bound() {
        let m = HestonTd { rho0: 0.3, ..fig1() };
        assert!(matches!(m.spec(1, (0.0, -3.0)), Err(Error::Model(_))));
        // fine at t = 0, but delta(t)^2 turns negative after t = 0.390625
        let s = fig1().spec(1, (0.0, -3.0)).unwrap();
        s.validate(0.0, 0.39).unwrap();
        assert!(matches!(s.validate(0.0, 0.45), Err(Error::Model(_))));
    }

    #[test]
    fn three_halves_alpha_slope() {
        let yb = (0.245f64 * 0.245).ln();
        let m = fig2();
        let s = m.spec(2, (0.0, yb)).unwrap();
        let hand = -(m.kappa + m.delta * m.delta / 2.0) * yb.exp();
        assert!((at(&s, Coefficient::Alpha, 0, 1, 0.0) - hand).abs() < 1e-14);
        // finite-difference cross-check
        let f = m.functions();
        let h = 1e-5;
        let fd = ((f.alpha)(0.0, 0.0, yb + h) - (f.alpha)(0.0, 0.0, yb - h)) / (2.0 * h);
        assert!((fd - hand).abs() < 1e-6 * hand.abs());
        s.validate(0.0, 0.25).unwrap();
    }

    #[test]
    fn jdcev_tables() {
        let m = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 1.5 };
        let xb = 0.5f64.ln();
        let s = m.spec(2, (xb, 0.0)).unwrap();
        let e = (2.0 * m.beta * xb).exp();
        assert!((at(&s, Coefficient::A, 1, 0, 0.0) - m.beta * m.delta * m.delta * e).abs() < 1e-16);
        assert!((at(&s, Coefficient::Gamma, 0, 0, 0.0) - (m.b + m.c * m.delta * m.delta * e)).abs() < 1e-16);
        assert!(s.is_one_dimensional());
        let h = 1e-5;
        let fd = (m.sigma(xb + h).powi(2) - m.sigma(xb - h).powi(2)) / (4.0 * h);
        assert!((fd - at(&s, Coefficient::A, 1, 0, 0.0)).abs() < 1e-9);
    }

    #[test]
    fn cev_has_no_default() {
        let s = ModelKind::Cev { delta: 0.2, beta: -0.5 }.spec(3, (0.0, 0.0)).unwrap();
        assert!(!s.has_default());
        assert!(s.table(Coefficient::Gamma).is_zero());
    }

    #[test]
    fn invalid_domains() {
        assert!(Jdcev { delta: 0.2, beta: -0.4, b: -0.1, c: 1.0 }.spec(1, (0.0, 0.0)).is_err());
        assert!(ThreeHalves { rho: 1.0, ..fig2() }.spec(1, (0.0, 0.0)).is_err());
        assert!(ModelKind::BlackScholes { sigma: 0.0 }.spec(1, (0.0, 0.0)).is_err());
    }

    /// Finite-difference tables against the closed forms, every entry up to order 4.
    #[test]
    fn closures_reproduce_zoo_tables() {
        let cases: Vec<(ModelKind, (f64, f64), usize)> = vec![
            (ModelKind::HestonTd(fig1()), (0.0, 0.05f64.ln()), 1),
            (ModelKind::ThreeHalves(fig2()), (0.0, (0.245f64 * 0.245).ln()), 0),
            (ModelKind::Jdcev(Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 }), (0.5f64.ln(), 0.0), 0),
            (ModelKind::Displaced(Displaced { sigma0: 0.2, sigma1: 0.1, shift: 0.3 }), (0.1, 0.0), 2),
        ];
        for (kind, point, t_degree) in cases {
            let exact = kind.spec(4, point).unwrap();
            let fd = taylor_table_from_closures(&kind.functions().unwrap(), point, 4, t_degree, (0.0, 0.25)).unwrap();
            for w in Coefficient::ALL {
                for (i, j, p) in exact.table(w).iter() {
                    let q = fd.get(w, i, j).unwrap();
                    for t in [0.0, 0.1, 0.25] {
                        let (a, b) = (p.eval(t), q.eval(t));
                        assert!(
                            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                            "{} {}_{{{i},{j}}}({t}): {a} vs {b}",
                            kind.name(),
                            w.name()
                        );
                    }
                }
            }
        }
    }
}
