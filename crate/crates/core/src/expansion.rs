//! Correction operators `L_n` and the price series `u = u_0 + u_1 + ... + u_N`.
//!
//! `L_n` is a sum over compositions `(i_1, ..., i_h)` of `n` of nested time
//! integrals of `G_{i_1}(t, s_1) ... G_{i_h}(t, s_h)`, each `G_i` built from
//! the affine operators `M1`, `M2` and the Taylor pieces `A_{i-j,j}` of the
//! generator. Applied to the Gaussian leading term every `L_n` collapses to a
//! polynomial in `dx`, which is then split in the Hermite basis
//! `dx^k (dx^2 - dx) u_BS`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{order_cap_error, Error, Result, MAX_ORDER};
use crate::kernel::{self, LeadingTerm};
use crate::model::{Coefficient, ModelSpec, Payoff};
use crate::opalg::{DiffOp, OpKey};
use crate::timealg::{TimePoly, TimeSymbol, TimeUniverse, UniPoly};

/// `A_{n-h,h}` with coefficients evaluated at time symbol `at`:
/// `a (dx^2 - dx) + alpha dy + b dy^2 + c dx dy + gamma (dx - 1)`.
pub fn build_anh(model: &ModelSpec, n: usize, h: usize, universe: TimeUniverse, at: TimeSymbol) -> Result<DiffOp> {
    if h > n {
        return Err(Error::Usage(format!("A_{{n-h,h}} needs h <= n, got n={n}, h={h}")));
    }
    let i = n - h;
    let coeff = |w: Coefficient| -> Result<TimePoly> { Ok(model.get(w, i, h)?.embed(universe, at)) };
    let mut op = DiffOp::zero(universe);
    let a = coeff(Coefficient::A)?;
    op.add_term(OpKey::new(0, 0, 2, 0), &a, 1.0);
    op.add_term(OpKey::new(0, 0, 1, 0), &a, -1.0);
    op.add_term(OpKey::new(0, 0, 0, 1), &coeff(Coefficient::Alpha)?, 1.0);
    op.add_term(OpKey::new(0, 0, 0, 2), &coeff(Coefficient::B)?, 1.0);
    op.add_term(OpKey::new(0, 0, 1, 1), &coeff(Coefficient::C)?, 1.0);
    let g = coeff(Coefficient::Gamma)?;
    op.add_term(OpKey::new(0, 0, 1, 0), &g, 1.0);
    op.add_term(OpKey::IDENTITY, &g, -1.0);
    Ok(op)
}

/// `M1(from, to)` (`which = 1`) or `M2(from, to)` (`which = 2`).
pub fn build_m(
    model: &ModelSpec,
    which: usize,
    universe: TimeUniverse,
    from: TimeSymbol,
    to: TimeSymbol,
) -> Result<DiffOp> {
    let int = |w: Coefficient| model.leading(w).integrate_between(universe, from, to);
    let mut op = DiffOp::zero(universe);
    let one = TimePoly::constant(universe, 1.0);
    match which {
        1 => {
            op.add_term(OpKey::new(1, 0, 0, 0), &one, 1.0);
            let drift = model.leading(Coefficient::Gamma).add(&model.leading(Coefficient::A).scale(-1.0));
            op.add_term(OpKey::IDENTITY, &drift.integrate_between(universe, from, to), 1.0);
            op.add_term(OpKey::new(0, 0, 1, 0), &int(Coefficient::A), 2.0);
            op.add_term(OpKey::new(0, 0, 0, 1), &int(Coefficient::C), 1.0);
        }
        2 => {
            op.add_term(OpKey::new(0, 1, 0, 0), &one, 1.0);
            op.add_term(OpKey::IDENTITY, &int(Coefficient::Alpha), 1.0);
            op.add_term(OpKey::new(0, 0, 1, 0), &int(Coefficient::C), 1.0);
            op.add_term(OpKey::new(0, 0, 0, 1), &int(Coefficient::B), 2.0);
        }
        _ => return Err(Error::Usage(format!("M{which} does not exist, use 1 or 2"))),
    }
    Ok(op)
}

/// `G_n(from, to) = sum_h M1^(n-h) M2^h A_{n-h,h}(to)`.
pub fn build_gn(
    model: &ModelSpec,
    n: usize,
    universe: TimeUniverse,
    from: TimeSymbol,
    to: TimeSymbol,
) -> Result<DiffOp> {
    if n == 0 || n > model.order() {
        return Err(Error::Usage(format!("G_n needs 1 <= n <= {} (model order), got {n}", model.order())));
    }
    let m1 = build_m(model, 1, universe, from, to)?;
    let m2 = build_m(model, 2, universe, from, to)?;
    let mut p1 = vec![DiffOp::identity(universe)];
    let mut p2 = vec![DiffOp::identity(universe)];
    for k in 1..=n {
        p1.push(p1[k - 1].compose(&m1)?);
        p2.push(p2[k - 1].compose(&m2)?);
    }
    let mut g = DiffOp::zero(universe);
    for h in 0..=n {
        let a = build_anh(model, n, h, universe, to)?;
        if a.is_zero() {
            continue;
        }
        g.add_assign(&p1[n - h].compose(&p2[h])?.compose(&a)?);
    }
    Ok(g)
}

/// Ordered compositions of `n` into `h` positive parts.
pub fn index_sets(n: usize, h: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for i in 1..=left.saturating_sub(parts - 1) {
            cur.push(i);
            rec(left - i, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if h >= 1 && h <= n {
        rec(n, h, &mut Vec::new(), &mut out);
    }
    out
}

fn check_order(model: &ModelSpec, n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(order_cap_error(n));
    }
    if n > model.order() {
        return Err(Error::Usage(format!(
            "order {n} requested but the model tables only go to order {}",
            model.order()
        )));
    }
    Ok(())
}

struct LnBuilder<'a> {
    model: &'a ModelSpec,
    universe: TimeUniverse,
    prune: bool,
    g_cache: HashMap<(usize, usize), DiffOp>,
}

impl LnBuilder<'_> {
    fn g(&mut self, i: usize, slot: usize) -> Result<DiffOp> {
        if let Some(g) = self.g_cache.get(&(i, slot)) {
            return Ok(g.clone());
        }
        let g = build_gn(self.model, i, self.universe, self.universe.start(), self.universe.inner(slot))?;
        self.g_cache.insert((i, slot), g.clone());
        Ok(g)
    }

    fn keep(&self, k: &OpKey) -> bool {
        !self.prune || (k.x == 0 && k.y == 0)
    }

    /// Depth-first over compositions so common prefixes are composed once.
    fn walk(&mut self, prefix: &DiffOp, depth: usize, left: usize, out: &mut DiffOp) -> Result<()> {
        for i in 1..=left {
            let g = self.g(i, depth + 1)?;
            let prod = if depth == 0 {
                let mut p = g;
                let prune = self.prune;
                p.retain(|k| !prune || (k.x == 0 && k.y == 0));
                p
            } else {
                prefix.compose_filtered(&g, |k| self.keep(k))
            };
            if prod.is_zero() {
                continue;
            }
            if left == i {
                let u = self.universe;
                let mut integrated = prod;
                for j in (1..=depth + 1).rev() {
                    let lower = if j == 1 { u.start() } else { u.inner(j - 1) };
                    integrated = integrated.integrate(u.inner(j), lower, u.end())?;
                }
                out.add_assign(&integrated);
            } else {
                self.walk(&prod, depth + 1, left - i, out)?;
            }
        }
        Ok(())
    }
}

fn build_ln_impl(model: &ModelSpec, n: usize, universe: TimeUniverse, prune: bool) -> Result<DiffOp> {
    check_order(model, n)?;
    if n == 0 {
        return Ok(DiffOp::identity(universe));
    }
    if universe.inner_count() < n {
        return Err(Error::Usage(format!("L_{n} needs at least {n} inner time symbols")));
    }
    let mut b = LnBuilder { model, universe, prune, g_cache: HashMap::new() };
    let mut out = DiffOp::zero(universe);
    b.walk(&DiffOp::identity(universe), 0, n, &mut out)?;
    Ok(out)
}

/// The fully integrated `L_n`; coefficients depend on `t` and `T` only.
pub fn build_ln(model: &ModelSpec, n: usize) -> Result<DiffOp> {
    build_ln_impl(model, n, TimeUniverse::new(n.max(1)), false)
}

/// `L_n` restricted to the terms that survive evaluation at `(x, y) = (xb, yb)`.
pub fn build_ln_at_point(model: &ModelSpec, n: usize) -> Result<DiffOp> {
    build_ln_impl(model, n, TimeUniverse::new(n.max(1)), true)
}

/// Text dump of `L_n` used for golden files.
pub fn dump_ln(model: &ModelSpec, n: usize) -> Result<String> {
    Ok(build_ln(model, n)?.dump())
}

/// `L_0, ..., L_N` for one model, reusable across valuation points.
#[derive(Debug, Clone)]
pub struct CorrectionOperators {
    model: ModelSpec,
    at_point: bool,
    ops: Vec<DiffOp>,
}

impl CorrectionOperators {
    /// Builds every `L_n` up to `order`. With `at_point`, only terms needed at
    /// `(x, y) = (xb, yb)` are kept, which is much cheaper.
    pub fn build(model: &ModelSpec, order: usize, at_point: bool) -> Result<Self> {
        check_order(model, order)?;
        let universe = TimeUniverse::new(order.max(1));
        let ops = (0..=order)
            .into_par_iter()
            .map(|n| build_ln_impl(model, n, universe, at_point))
            .collect::<Result<Vec<_>>>()?;
        Ok(CorrectionOperators { model: model.clone(), at_point, ops })
    }

    pub fn order(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn operator(&self, n: usize) -> Option<&DiffOp> {
        self.ops.get(n)
    }

    /// Price series at `(t, T, x, y)`.
    pub fn price(&self, payoff: &Payoff, t: f64, maturity: f64, x: f64, y: f64) -> Result<PriceExpansion> {
        let (xb, yb) = self.model.point();
        if self.at_point && (x != xb || y != yb) {
            return Err(Error::Usage(format!(
                "operators were reduced for (x, y) = ({xb}, {yb}) but evaluated at ({x}, {y})"
            )));
        }
        if !payoff.is_x_only() {
            if self.order() > 0 {
                return Err(Error::Capability(
                    "corrections of order >= 1 need a payoff depending on x only; y-dependent payoffs \
                     are priced at order 0"
                        .into(),
                ));
            }
            let u0 = kernel::u0_price(&self.model, payoff, t, maturity, x, y)?;
            let lt = LeadingTerm::new(&self.model, t, maturity, x)?;
            return Ok(PriceExpansion {
                t,
                maturity,
                x,
                y,
                sigma0: lt.sigma0(),
                tau: lt.tau,
                killing: lt.killing,
                log_strike: None,
                vanilla: None,
                defaultable: self.model.has_default(),
                orders: vec![OrderTerm::leading(u0)],
            });
        }
        let lt = LeadingTerm::new(&self.model, t, maturity, x)?;
        let max_m = self.ops.iter().map(DiffOp::max_derivative_order).max().unwrap_or(0) as usize;
        let derivs = lt.derivatives(payoff, max_m)?;
        let times = TimeUniverse::new(self.order().max(1)).endpoints(t, maturity);
        let (ex, ey) = (x - xb, y - yb);
        let mut orders = vec![OrderTerm::leading(derivs[0])];
        for op in &self.ops[1..] {
            let d = x_polynomial(op, &times, ex, ey);
            let value = d.iter().zip(&derivs).map(|(c, u)| c * u).sum();
            let (hermite, linear, scalar) = hermite_split(&d);
            orders.push(OrderTerm {
                derivative_coeffs: d,
                hermite_coeffs: hermite,
                linear_coeff: linear,
                scalar_coeff: scalar,
                value,
                u0: derivs[0],
            });
        }
        Ok(PriceExpansion {
            t,
            maturity,
            x,
            y,
            sigma0: lt.sigma0(),
            tau: lt.tau,
            killing: lt.killing,
            log_strike: payoff.log_strike(),
            vanilla: Vanilla::of(payoff),
            defaultable: self.model.has_default(),
            orders,
        })
    }
}

/// Coefficients `d_m` of `sum_m d_m dx^m`: the `dy`-free part of `op` with
/// multiplication factors evaluated at `(x - xb, y - yb) = (ex, ey)`.
fn x_polynomial(op: &DiffOp, times: &[f64], ex: f64, ey: f64) -> Vec<f64> {
    let mut d = vec![0.0; op.max_derivative_order() as usize + 1];
    for (k, c) in op.terms() {
        if k.dy > 0 {
            continue;
        }
        let f = ex.powi(k.x as i32) * ey.powi(k.y as i32);
        if f == 0.0 {
            continue;
        }
        d[k.dx as usize] += f * c.eval(times);
    }
    while d.len() > 1 && d.last() == Some(&0.0) {
        d.pop();
    }
    d
}

/// Splits `P(D) = D (D - 1) Q(D) + r1 D + r0`, returning `(Q, r1, r0)`.
fn hermite_split(d: &[f64]) -> (Vec<f64>, f64, f64) {
    let r0 = d.first().copied().unwrap_or(0.0);
    let p1: f64 = d.iter().sum();
    let r1 = p1 - r0;
    if d.len() < 3 {
        return (Vec::new(), r1, r0);
    }
    // (P - r0 - r1 D) / D, then synthetic division by (D - 1) from the top.
    let mut p: Vec<f64> = d[1..].to_vec();
    p[0] -= r1;
    let deg = p.len() - 1;
    let mut q = vec![0.0; deg];
    q[deg - 1] = p[deg];
    for j in (1..deg).rev() {
        q[j - 1] = p[j] + q[j];
    }
    (q, r1, r0)
}

/// One order of the series.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTerm {
    /// `d_m` in `u_n = sum_m d_m dx^m u_0`.
    pub derivative_coeffs: Vec<f64>,
    /// `c_{n,k}` in `u_n = sum_k c_{n,k} dx^k (dx^2 - dx) u_0 + linear dx u_0 + scalar u_0`.
    pub hermite_coeffs: Vec<f64>,
    pub linear_coeff: f64,
    pub scalar_coeff: f64,
    /// `u_n`.
    pub value: f64,
    u0: f64,
}

impl OrderTerm {
    fn leading(u0: f64) -> Self {
        OrderTerm {
            derivative_coeffs: vec![1.0],
            hermite_coeffs: Vec::new(),
            linear_coeff: 0.0,
            scalar_coeff: 1.0,
            value: u0,
            u0,
        }
    }

    /// Pure-multiplier contribution `scalar_coeff * u_0`.
    pub fn scalar_part(&self) -> f64 {
        self.scalar_coeff * self.u0
    }
}

/// `u_0, ..., u_N` at one valuation point.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceExpansion {
    pub t: f64,
    pub maturity: f64,
    pub x: f64,
    pub y: f64,
    /// `sqrt(2 int a_0 / tau)`.
    pub sigma0: f64,
    pub tau: f64,
    /// `int gamma_0`.
    pub killing: f64,
    pub log_strike: Option<f64>,
    pub vanilla: Option<Vanilla>,
    /// Whether the model has a nonzero killing rate anywhere in its tables.
    pub defaultable: bool,
    pub orders: Vec<OrderTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vanilla {
    Call,
    Put,
}

impl Vanilla {
    pub fn of(payoff: &Payoff) -> Option<Vanilla> {
        match payoff {
            Payoff::Call { .. } => Some(Vanilla::Call),
            Payoff::Put { .. } => Some(Vanilla::Put),
            _ => None,
        }
    }
}

impl PriceExpansion {
    pub fn order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn values(&self) -> Vec<f64> {
        self.orders.iter().map(|o| o.value).collect()
    }

    /// `u_0 + ... + u_n`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        self.orders.iter().take(n + 1).map(|o| o.value).sum()
    }

    pub fn total(&self) -> f64 {
        self.partial_sum(self.order())
    }
}

/// Prices `payoff` to `order` at `(t, T, x, y)`. The expansion point is the
/// model's own `(xb, yb)`; when it coincides with `(x, y)` the cheaper reduced
/// operators are used.
pub fn price_expansion(
    model: &ModelSpec,
    payoff: &Payoff,
    order: usize,
    t: f64,
    maturity: f64,
    x: f64,
    y: f64,
) -> Result<PriceExpansion> {
    check_order(model, order)?;
    if order > 0 && !payoff.is_x_only() {
        return Err(Error::Capability(
            "corrections of order >= 1 need a payoff depending on x only; y-dependent payoffs are priced at order 0"
                .into(),
        ));
    }
    let at_point = model.point() == (x, y);
    CorrectionOperators::build(model, order, at_point)?.price(payoff, t, maturity, x, y)
}

/// `K + sum_n u_n` for an expansion built on `payoff.net_of_default_value()`,
/// where `K` is what the claim pays at default.
pub fn price_with_default_floor(expansion: &PriceExpansion, payoff: &Payoff) -> f64 {
    payoff.value_at_default() + expansion.total()
}

/// Defaultable price of `payoff`: expands `h - K` and adds `K` back.
pub fn price_defaultable(
    model: &ModelSpec,
    payoff: &Payoff,
    order: usize,
    t: f64,
    maturity: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let e = price_expansion(model, &payoff.net_of_default_value(), order, t, maturity, x, y)?;
    Ok(price_with_default_floor(&e, payoff))
}

/// Zero-rate reduction for a deterministic short rate `r(s)`: returns the
/// shifted log-price `x + int r` and the discount `exp(-int r)`.
pub fn shift_for_deterministic_rates(t: f64, maturity: f64, x: f64, r: &UniPoly) -> (f64, f64) {
    let int = r.integral(t, maturity);
    (x + int, (-int).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{bs_call, BsState, GaussianKernel};
    use crate::model::zoo::{HestonTd, Jdcev, ThreeHalves};
    use crate::model::ModelKind;

    fn heston() -> HestonTd {
        HestonTd { kappa: 1.15, theta0: 0.06, theta1: -0.08, delta0: 0.0625, delta1: -0.16, rho0: -0.125, rho1: 0.32 }
    }

    fn three_halves() -> ThreeHalves {
        ThreeHalves { kappa: 22.84, theta: 0.4669 * 0.4669, delta: 8.56, rho: -0.99 }
    }

    #[test]
    fn anh_constant_vol() {
        let m = ModelKind::BlackScholes { sigma: 0.2 }.spec(2, (0.0, 0.0)).unwrap();
        let u = TimeUniverse::new(1);
        let a = build_anh(&m, 0, 0, u, u.inner(1)).unwrap();
        assert_eq!(a.len(), 2);
        let a00 = 0.5 * 0.2 * 0.2;
        assert_eq!(a.coeff(OpKey::new(0, 0, 2, 0)).unwrap().eval(&[0.0, 0.0, 0.0]), a00);
        assert_eq!(a.coeff(OpKey::new(0, 0, 1, 0)).unwrap().eval(&[0.0, 0.0, 0.0]), -a00);
        assert!(build_anh(&m, 1, 0, u, u.inner(1)).unwrap().is_zero());
        assert!(matches!(build_anh(&m, 3, 0, u, u.inner(1)), Err(Error::Usage(_))));
    }

    #[test]
    fn anh_jdcev_and_heston_shapes() {
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let m = j.spec(1, (0.5f64.ln(), 0.0)).unwrap();
        let u = TimeUniverse::new(1);
        let a = build_anh(&m, 1, 0, u, u.inner(1)).unwrap();
        let keys: Vec<OpKey> = a.terms().map(|(k, _)| *k).collect();
        assert_eq!(keys, vec![OpKey::new(0, 0, 0, 0), OpKey::new(0, 0, 1, 0), OpKey::new(0, 0, 2, 0)]);
        let at = [0.0, 0.0, 0.0];
        let a10 = m.get(Coefficient::A, 1, 0).unwrap().eval(0.0);
        let g10 = m.get(Coefficient::Gamma, 1, 0).unwrap().eval(0.0);
        assert!((a.coeff(OpKey::new(0, 0, 1, 0)).unwrap().eval(&at) - (g10 - a10)).abs() < 1e-15);
        assert!((a.coeff(OpKey::IDENTITY).unwrap().eval(&at) + g10).abs() < 1e-15);

        let y = 0.05f64.ln();
        let m = ModelKind::HestonTd(heston()).spec(1, (0.0, y)).unwrap();
        let a = build_anh(&m, 1, 1, u, u.inner(1)).unwrap();
        for k in [OpKey::new(0, 0, 0, 1), OpKey::new(0, 0, 0, 2), OpKey::new(0, 0, 2, 0), OpKey::new(0, 0, 1, 0)] {
            assert!(a.coeff(k).is_some(), "{k:?}");
        }
        // c = rho delta does not depend on y in log-variance coordinates
        assert!(a.coeff(OpKey::new(0, 0, 1, 1)).is_none());
        assert_eq!(a.len(), 4);
        // e^y/2 has y-derivative e^y/2
        let a01 = a.coeff(OpKey::new(0, 0, 2, 0)).unwrap().eval(&at);
        assert!((a01 - 0.025).abs() < 1e-15);
    }

    #[test]
    fn m_operators() {
        let sigma = 0.3;
        let m = ModelKind::BlackScholes { sigma }.spec(1, (0.0, 0.0)).unwrap();
        let u = TimeUniverse::new(1);
        let m1 = build_m(&m, 1, u, u.start(), u.inner(1)).unwrap();
        let times = [0.2, 0.7, 1.0];
        let a0 = 0.5 * sigma * sigma;
        assert_eq!(m1.coeff(OpKey::new(1, 0, 0, 0)).unwrap().eval(&times), 1.0);
        assert!((m1.coeff(OpKey::IDENTITY).unwrap().eval(&times) + a0 * 0.5).abs() < 1e-15);
        assert!((m1.coeff(OpKey::new(0, 0, 1, 0)).unwrap().eval(&times) - 2.0 * a0 * 0.5).abs() < 1e-15);
        let m2 = build_m(&m, 2, u, u.start(), u.inner(1)).unwrap();
        assert_eq!(m2.len(), 1);
        assert!(matches!(build_m(&m, 3, u, u.start(), u.inner(1)), Err(Error::Usage(_))));
    }

    #[test]
    fn heston_m2_dy_coefficient_matches_quadrature() {
        let y = 0.05f64.ln();
        let h = heston();
        let m = ModelKind::HestonTd(h).spec(1, (0.0, y)).unwrap();
        let u = TimeUniverse::new(1);
        let m2 = build_m(&m, 2, u, u.start(), u.inner(1)).unwrap();
        let (t, s) = (0.05, 0.3);
        let got = m2.coeff(OpKey::new(0, 0, 0, 1)).unwrap().eval(&[t, s, 1.0]);
        let n = 200;
        let step = (s - t) / n as f64;
        let quad: f64 = (0..n)
            .map(|i| {
                let q = t + (i as f64 + 0.5) * step;
                (h.delta0 + h.delta1 * q) * (-y).exp() / 2.0 * step
            })
            .sum();
        assert!((got - 2.0 * quad).abs() < 1e-12, "{got} vs {}", 2.0 * quad);
    }

    #[test]
    fn g1_is_sum_of_two_products() {
        let y = 0.05f64.ln();
        let m = ModelKind::HestonTd(heston()).spec(1, (0.0, y)).unwrap();
        let u = TimeUniverse::new(1);
        let (t, s) = (u.start(), u.inner(1));
        let g1 = build_gn(&m, 1, u, t, s).unwrap();
        let m1 = build_m(&m, 1, u, t, s).unwrap();
        let m2 = build_m(&m, 2, u, t, s).unwrap();
        let a10 = build_anh(&m, 1, 0, u, s).unwrap();
        let a01 = build_anh(&m, 1, 1, u, s).unwrap();
        let sum = &m1.compose(&a10).unwrap() + &m2.compose(&a01).unwrap();
        assert_eq!(g1, sum);
        // Heston has no x-dependence, so only M2 A01 contributes: (y-yb) times
        // the 4 terms of A01, plus 9 distinct pure-derivative terms
        assert!(a10.is_zero());
        assert_eq!(g1.len(), 13);
        assert_eq!(g1.terms().filter(|(k, _)| k.y == 1).count(), 4);
    }

    #[test]
    fn index_sets_small() {
        assert_eq!(index_sets(3, 3), vec![vec![1, 1, 1]]);
        assert_eq!(index_sets(3, 2), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(index_sets(3, 1), vec![vec![3]]);
        assert_eq!(index_sets(4, 2).len(), 3);
        assert!(index_sets(2, 3).is_empty());
    }

    #[test]
    fn l1_is_integral_of_g1() {
        let m = ModelKind::ThreeHalves(three_halves()).spec(1, (0.0, (0.245f64 * 0.245).ln())).unwrap();
        let u = TimeUniverse::new(1);
        let g1 = build_gn(&m, 1, u, u.start(), u.inner(1)).unwrap();
        let l1 = build_ln(&m, 1).unwrap();
        assert_eq!(l1, g1.integrate(u.inner(1), u.start(), u.end()).unwrap());
    }

    #[test]
    fn constant_vol_has_no_corrections() {
        let m = ModelKind::BlackScholes { sigma: 0.25 }.spec(4, (0.0, 0.0)).unwrap();
        for n in 1..=4 {
            assert!(build_ln(&m, n).unwrap().is_zero());
        }
        let e = price_expansion(&m, &Payoff::call(0.1), 4, 0.0, 0.5, 0.0, 0.0).unwrap();
        assert!((e.total() - bs_call(&BsState::new(0.0, 0.1, 0.5, 0.25))).abs() < 1e-15);
        assert!(e.orders[1..].iter().all(|o| o.value == 0.0));
    }

    #[test]
    fn order_cap_and_payoff_capability() {
        let m = ModelKind::BlackScholes { sigma: 0.25 }.spec(5, (0.0, 0.0)).unwrap();
        assert!(matches!(build_ln(&m, 5), Err(Error::Capability(_))));
        assert!(matches!(price_expansion(&m, &Payoff::Bond, 5, 0.0, 1.0, 0.0, 0.0), Err(Error::Capability(_))));
        let joint = Payoff::Joint { h: std::sync::Arc::new(|x, _| x), value_at_default: 0.0 };
        assert!(matches!(price_expansion(&m, &joint, 1, 0.0, 1.0, 0.0, 0.0), Err(Error::Capability(_))));
        assert!(price_expansion(&m, &joint, 0, 0.0, 1.0, 0.0, 0.0).is_ok());
        let low = ModelKind::BlackScholes { sigma: 0.25 }.spec(1, (0.0, 0.0)).unwrap();
        assert!(matches!(build_ln(&low, 2), Err(Error::Usage(_))));
    }

    #[test]
    fn hermite_split_reconstructs() {
        let d = [0.3, -1.2, 0.7, 2.5, -0.4, 0.1];
        let (q, r1, r0) = hermite_split(&d);
        for dd in [-1.3f64, 0.0, 0.4, 1.0, 2.2] {
            let p: f64 = d.iter().enumerate().map(|(m, c)| c * dd.powi(m as i32)).sum();
            let qv: f64 = q.iter().enumerate().map(|(m, c)| c * dd.powi(m as i32)).sum();
            assert!((p - (dd * (dd - 1.0) * qv + r1 * dd + r0)).abs() < 1e-12);
        }
    }

    #[test]
    fn order0_reproduces_u0() {
        let y = 0.05f64.ln();
        let m = ModelKind::HestonTd(heston()).spec(2, (0.0, y)).unwrap();
        let e = price_expansion(&m, &Payoff::call(0.05), 2, 0.0, 0.25, 0.0, y).unwrap();
        let u0 = kernel::u0_price(&m, &Payoff::call(0.05), 0.0, 0.25, 0.0, y).unwrap();
        assert!((e.orders[0].value - u0).abs() < 1e-12);
        assert!(e.orders[0].hermite_coeffs.is_empty());
        assert_eq!(e.orders[0].scalar_part(), u0);
        assert!((e.sigma0 - 0.05f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jdcev_bond_first_order() {
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 1.5 };
        let x = 0.5f64.ln();
        let m = j.spec(1, (x, 0.0)).unwrap();
        for tau in [0.5, 1.0, 2.0] {
            let e = price_expansion(&m, &Payoff::Bond, 1, 0.0, tau, x, 0.0).unwrap();
            let (d, b, c, beta) = (j.delta, j.b, j.c, j.beta);
            let ex = (2.0 * x * beta).exp();
            let u0 = (-(b + d * d * c * ex) * tau).exp();
            let factor = -d * d * b * c * ex * tau * tau * beta + 0.5 * d.powi(4) * c * ex * ex * tau * tau * beta
                - d.powi(4) * c * c * ex * ex * tau * tau * beta;
            assert!((e.orders[0].value - u0).abs() < 1e-14);
            assert!((e.orders[1].value - u0 * factor).abs() < 1e-14);
            assert!((e.orders[1].scalar_part() - e.orders[1].value).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_corrections_vanish() {
        let y = 0.05f64.ln();
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let models = [
            ModelKind::HestonTd(heston()).spec(4, (0.0, y)).unwrap(),
            ModelKind::ThreeHalves(three_halves()).spec(3, (0.0, (0.245f64 * 0.245).ln())).unwrap(),
            j.spec(4, (0.0, 0.0)).unwrap(),
        ];
        for m in &models {
            let (x, y) = m.point();
            let e = price_expansion(m, &Payoff::Forward, m.order(), 0.0, 0.5, x, y).unwrap();
            for o in &e.orders[1..] {
                assert!(o.value.abs() < 1e-12, "{}", o.value);
            }
        }
    }

    #[test]
    fn call_put_parity_order_by_order() {
        let y = 0.05f64.ln();
        let m = ModelKind::HestonTd(heston()).spec(3, (0.0, y)).unwrap();
        for k in [-0.1, 0.0, 0.15] {
            let c = price_expansion(&m, &Payoff::call(k), 3, 0.0, 0.25, 0.0, y).unwrap();
            let p = price_expansion(&m, &Payoff::put(k), 3, 0.0, 0.25, 0.0, y).unwrap();
            assert!((c.orders[0].value - p.orders[0].value - (1.0 - k.exp())).abs() < 1e-14);
            for n in 1..=3 {
                assert!((c.orders[n].value - p.orders[n].value).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn time_dependent_black_scholes() {
        let mut m = ModelSpec::new(3, (0.1, 0.0));
        let a = UniPoly::new(vec![0.02, 0.01, -0.004]);
        m.set(Coefficient::A, 0, 0, a.clone());
        for (t, big_t) in [(0.0, 0.5), (0.2, 1.5)] {
            let e = price_expansion(&m, &Payoff::call(0.05), 3, t, big_t, 0.1, 0.0).unwrap();
            let var = 2.0 * a.integral(t, big_t);
            let exact = bs_call(&BsState::new(0.1, 0.05, big_t - t, (var / (big_t - t)).sqrt()));
            assert!((e.total() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn pruned_operators_agree_with_full() {
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let m = j.spec(3, (0.0, 0.0)).unwrap();
        let y = 0.05f64.ln();
        let h = ModelKind::HestonTd(heston()).spec(3, (0.0, y)).unwrap();
        for (m, p) in [(&m, Payoff::Bond), (&h, Payoff::call(0.05))] {
            let (x, y) = m.point();
            let full = CorrectionOperators::build(m, 3, false).unwrap().price(&p, 0.0, 0.4, x, y).unwrap();
            let red = CorrectionOperators::build(m, 3, true).unwrap().price(&p, 0.0, 0.4, x, y).unwrap();
            for n in 0..=3 {
                let (a, b) = (full.orders[n].value, red.orders[n].value);
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-3), "{n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reduced_operators_refuse_other_points() {
        let m = ModelKind::BlackScholes { sigma: 0.2 }.spec(1, (0.0, 0.0)).unwrap();
        let ops = CorrectionOperators::build(&m, 1, true).unwrap();
        assert!(matches!(ops.price(&Payoff::Bond, 0.0, 1.0, 0.1, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn expansion_away_from_point_matches_recentred() {
        // displaced point: expanding around xb != x should still approximate the same price
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let x = 0.0;
        let at = j.spec(2, (x, 0.0)).unwrap();
        let off = j.spec(2, (x + 0.01, 0.0)).unwrap();
        let a = price_expansion(&at, &Payoff::Bond, 2, 0.0, 0.5, x, 0.0).unwrap().total();
        let b = price_expansion(&off, &Payoff::Bond, 2, 0.0, 0.5, x, 0.0).unwrap().total();
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn default_floor_and_rates() {
        let j = Jdcev { delta: 0.2, beta: -0.4, b: 0.04, c: 2.0 };
        let m = j.spec(2, (0.0, 0.0)).unwrap();
        let put = Payoff::put(0.0);
        let v = price_defaultable(&m, &put, 2, 0.0, 1.0, 0.0, 0.0).unwrap();
        let net = price_expansion(&m, &put.net_of_default_value(), 2, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((v - (1.0 + net.total())).abs() < 1e-15);
        let call = price_expansion(&m, &Payoff::call(0.0), 2, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(price_with_default_floor(&call, &Payoff::call(0.0)), call.total());

        assert_eq!(shift_for_deterministic_rates(0.0, 1.0, 0.3, &UniPoly::zero()), (0.3, 1.0));
        let (x, d) = shift_for_deterministic_rates(0.0, 1.0, 0.0, &UniPoly::constant(0.05));
        assert!((x - 0.05).abs() < 1e-15 && (d - (-0.05f64).exp()).abs() < 1e-15);
        let (x, d) = shift_for_deterministic_rates(0.0, 1.0, 0.0, &UniPoly::affine(0.01, 0.02));
        assert!((x - 0.02).abs() < 1e-15 && (d - (-0.02f64).exp()).abs() < 1e-15);
    }

    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        // Newton on P_n from Chebyshev guesses
        (0..n)
            .map(|i| {
                let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                loop {
                    let (mut p0, mut p1) = (1.0, z);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                    let dz = p1 / dp;
                    z -= dz;
                    if dz.abs() < 1e-15 {
                        let w = 2.0 / ((1.0 - z * z) * dp * dp);
                        return (z, w);
                    }
                }
            })
            .collect()
    }

    #[test]
    fn duhamel_first_order_three_halves() {
        let th = three_halves();
        let y = (0.245f64 * 0.245).ln();
        let m = ModelKind::ThreeHalves(th).spec(1, (0.0, y)).unwrap();
        let (t, big_t, k) = (0.0, 0.1, 0.03);
        let call = Payoff::call(k);
        let u1 = price_expansion(&m, &call, 1, t, big_t, 0.0, y).unwrap().orders[1].value;

        // A_1 u0 = (w - yb) a01 (dx^2 - dx) u0(s, .) since u0 depends on x only
        // and the three-halves coefficients do not depend on x.
        let a01 = m.get(Coefficient::A, 0, 1).unwrap().eval(0.0);
        assert_eq!(m.get(Coefficient::A, 1, 0).unwrap().eval(0.0), 0.0);
        let gh: [(f64, f64); 3] = [(-3f64.sqrt(), 1.0 / 6.0), (0.0, 2.0 / 3.0), (3f64.sqrt(), 1.0 / 6.0)];
        let integrand = |s: f64| -> f64 {
            let kern = GaussianKernel::from_model(&m, t, s, 0.0, y);
            let lt = LeadingTerm::new(&m, s, big_t, 0.0).unwrap();
            let (v1, v2, c12) = (kern.cov[0][0], kern.cov[1][1], kern.cov[0][1]);
            let s1 = v1.sqrt();
            let width = (lt.total_variance).sqrt().min(s1);
            let step = width / 16.0;
            let nx = (24.0 * s1 / step).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..=nx {
                let xi = kern.mean[0] - 12.0 * s1 + i as f64 * step;
                let wx = if i == 0 || i == nx { 0.5 } else { 1.0 } * step;
                let dens_x = kern.density_x(xi).unwrap();
                let g = {
                    let l = LeadingTerm { x: xi, ..lt };
                    let d = l.derivatives(&call, 2).unwrap();
                    a01 * (d[2] - d[1])
                };
                // omega | xi is normal; probabilists' Gauss-Hermite, exact for the linear factor
                let cm = kern.mean[1] + c12 / v1 * (xi - kern.mean[0]);
                let cs = (v2 - c12 * c12 / v1).sqrt();
                let inner: f64 = gh.iter().map(|&(z, w)| w * (cm + cs * z - y)).sum();
                acc += wx * dens_x * inner * g;
            }
            acc
        };
        let numeric: f64 = gauss_legendre(40)
            .into_iter()
            .map(|(z, w)| {
                let s = t + 0.5 * (big_t - t) * (z + 1.0);
                0.5 * (big_t - t) * w * integrand(s)
            })
            .sum();
        assert!((u1 - numeric).abs() < 1e-4, "{u1} vs {numeric}");
        assert!((u1 - numeric).abs() < 1e-3 * u1.abs(), "{u1} vs {numeric}");
    }
}
