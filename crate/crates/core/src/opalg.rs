//! Normal-ordered differential operators in `(x - xb)`, `(y - yb)`, `dx`, `dy`
//! with [`TimePoly`] coefficients.
//!
//! A term `(x-xb)^i (y-yb)^j dx^k dy^l` is keyed by [`OpKey`]; products are
//! brought back to normal order with
//! `dx^k (x-xb)^i = sum_m C(k,m) i!/(i-m)! (x-xb)^(i-m) dx^(k-m)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::timealg::{TimePoly, TimeSymbol, TimeUniverse};

/// Exponents of `(x-xb)^x (y-yb)^y dx^dx dy^dy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OpKey {
    pub x: u8,
    pub y: u8,
    pub dx: u8,
    pub dy: u8,
}

impl OpKey {
    pub const IDENTITY: OpKey = OpKey { x: 0, y: 0, dx: 0, dy: 0 };

    pub fn new(x: u8, y: u8, dx: u8, dy: u8) -> Self {
        OpKey { x, y, dx, dy }
    }

    pub fn derivative_order(&self) -> u32 {
        self.dx as u32 + self.dy as u32
    }

    fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.x > 0 {
            parts.push(format!("(x-xb)^{}", self.x));
        }
        if self.y > 0 {
            parts.push(format!("(y-yb)^{}", self.y));
        }
        if self.dx > 0 {
            parts.push(format!("dx^{}", self.dx));
        }
        if self.dy > 0 {
            parts.push(format!("dy^{}", self.dy));
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Falling factorial `i!/(i-m)!`.
fn falling(i: u8, m: u8) -> f64 {
    (0..m).fold(1.0, |acc, r| acc * (i - r) as f64)
}

fn binom(n: u8, k: u8) -> f64 {
    falling(n, k) / falling(k, k)
}

/// A differential operator stored in normal order: multiplications left of derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp {
    universe: TimeUniverse,
    terms: BTreeMap<OpKey, TimePoly>,
}

impl DiffOp {
    pub fn zero(universe: TimeUniverse) -> Self {
        DiffOp { universe, terms: BTreeMap::new() }
    }

    pub fn identity(universe: TimeUniverse) -> Self {
        Self::term(OpKey::IDENTITY, TimePoly::constant(universe, 1.0))
    }

    pub fn term(key: OpKey, coeff: TimePoly) -> Self {
        let mut op = Self::zero(coeff.universe());
        op.add_term(key, &coeff, 1.0);
        op
    }

    /// Single term with a constant coefficient.
    pub fn constant_term(universe: TimeUniverse, key: OpKey, c: f64) -> Self {
        Self::term(key, TimePoly::constant(universe, c))
    }

    pub fn universe(&self) -> TimeUniverse {
        self.universe
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OpKey, &TimePoly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: OpKey) -> Option<&TimePoly> {
        self.terms.get(&key)
    }

    pub fn max_derivative_order(&self) -> u32 {
        self.terms.keys().map(OpKey::derivative_order).max().unwrap_or(0)
    }

    /// `self += factor * coeff * key`.
    pub fn add_term(&mut self, key: OpKey, coeff: &TimePoly, factor: f64) {
        if coeff.is_zero() || factor == 0.0 {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                c.add_scaled(coeff, factor);
                if c.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coeff.scale(factor));
            }
        }
    }

    pub fn add_assign(&mut self, other: &DiffOp) {
        self.add_scaled(other, 1.0);
    }

    pub fn add_scaled(&mut self, other: &DiffOp, factor: f64) {
        assert_eq!(self.universe, other.universe, "mismatched time universes");
        for (k, c) in &other.terms {
            self.add_term(*k, c, factor);
        }
    }

    pub fn mul_poly(&self, p: &TimePoly) -> DiffOp {
        let mut out = DiffOp::zero(self.universe);
        for (k, c) in &self.terms {
            out.add_term(*k, &(c * p), 1.0);
        }
        out
    }

    fn check(&self, other: &DiffOp) -> Result<()> {
        if self.universe != other.universe {
            return Err(Error::Usage("operators over different time symbol sets".into()));
        }
        Ok(())
    }

    /// Normal-ordered product `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check(other)?;
        Ok(self.compose_filtered(other, |_| true))
    }

    /// Composition that only keeps result terms accepted by `keep`.
    pub fn compose_filtered(&self, other: &DiffOp, keep: impl Fn(&OpKey) -> bool) -> DiffOp {
        let mut out = DiffOp::zero(self.universe);
        for (ka, pa) in &self.terms {
            for (kb, pb) in &other.terms {
                let mut prod: Option<TimePoly> = None;
                for m in 0..=ka.dx.min(kb.x) {
                    let fx = binom(ka.dx, m) * falling(kb.x, m);
                    for n in 0..=ka.dy.min(kb.y) {
                        let fy = binom(ka.dy, n) * falling(kb.y, n);
                        let key = OpKey {
                            x: ka.x + kb.x - m,
                            y: ka.y + kb.y - n,
                            dx: ka.dx - m + kb.dx,
                            dy: ka.dy - n + kb.dy,
                        };
                        if !keep(&key) {
                            continue;
                        }
                        let p = prod.get_or_insert_with(|| pa * pb);
                        out.add_term(key, p, fx * fy);
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> DiffOp {
        let mut acc = DiffOp::identity(self.universe);
        for _ in 0..n {
            acc = acc.compose_filtered(self, |_| true);
        }
        acc
    }

    /// Coefficient-wise definite integral in time.
    pub fn integrate(&self, var: TimeSymbol, lower: TimeSymbol, upper: TimeSymbol) -> Result<DiffOp> {
        let mut out = DiffOp::zero(self.universe);
        for (k, c) in &self.terms {
            out.add_term(*k, &c.integrate(var, lower, upper)?, 1.0);
        }
        Ok(out)
    }

    pub fn retain(&mut self, keep: impl Fn(&OpKey) -> bool) {
        self.terms.retain(|k, _| keep(k));
    }

    /// Replaces each coefficient by its value at `times`.
    pub fn at_times(&self, times: &[f64]) -> NumOp {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let v = c.eval(times);
            if v != 0.0 {
                terms.insert(*k, v);
            }
        }
        NumOp { terms }
    }

    /// Exact action on a polynomial in `(x-xb, y-yb)`, coefficients evaluated at `times`.
    pub fn apply_to_poly(&self, times: &[f64], p: &BiPoly) -> BiPoly {
        self.at_times(times).apply(p)
    }

    /// Sorted one-term-per-line text, e.g. `(x-xb)^1 dx^2 : 2.0*s1 - 2.0*t`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (k, c) in &self.terms {
            let _ = writeln!(s, "{} : {}", k.label(), c.display());
        }
        s
    }
}

/// `sum_i coeff_i * op_i`.
pub fn scale_and_add(universe: TimeUniverse, ops: &[(TimePoly, DiffOp)]) -> DiffOp {
    let mut out = DiffOp::zero(universe);
    for (p, op) in ops {
        out.add_assign(&op.mul_poly(p));
    }
    out
}

/// Operator with plain numeric coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NumOp {
    pub terms: BTreeMap<OpKey, f64>,
}

impl NumOp {
    pub fn apply(&self, p: &BiPoly) -> BiPoly {
        let mut out = BiPoly::default();
        for (k, &c) in &self.terms {
            for (&(px, py), &a) in &p.terms {
                if px < k.dx as u32 || py < k.dy as u32 {
                    continue;
                }
                let f = falling_u(px, k.dx as u32) * falling_u(py, k.dy as u32);
                out.add((px - k.dx as u32 + k.x as u32, py - k.dy as u32 + k.y as u32), c * a * f);
            }
        }
        out
    }
}

fn falling_u(i: u32, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, r| acc * (i - r) as f64)
}

/// Polynomial in `X = x - xb` and `Y = y - yb`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiPoly {
    pub terms: BTreeMap<(u32, u32), f64>,
}

impl BiPoly {
    pub fn monomial(px: u32, py: u32, c: f64) -> Self {
        let mut p = BiPoly::default();
        p.add((px, py), c);
        p
    }

    pub fn add(&mut self, key: (u32, u32), c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), &c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    /// Largest coefficient difference, relative to the larger magnitude.
    pub fn max_rel_diff(&self, other: &BiPoly) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let a = self.terms.get(k).copied().unwrap_or(0.0);
                let b = other.terms.get(k).copied().unwrap_or(0.0);
                (a - b).abs() / a.abs().max(b.abs()).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

impl std::ops::Add for &DiffOp {
    type Output = DiffOp;
    fn add(self, rhs: &DiffOp) -> DiffOp {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}
