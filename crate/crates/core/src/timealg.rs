//! Polynomials in an ordered family of time symbols `t < s1 < ... < sN < T`.
//!
//! Every coefficient of a correction operator is a [`TimePoly`]. The model's
//! own time dependence is a [`UniPoly`] in calendar time, which gets embedded
//! at a symbol or integrated between two symbols.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

const BITS: u32 = 8;
const MAX_VARS: usize = 8;
const HIGH_BITS: u64 = 0x8080_8080_8080_8080;

/// One of the symbols `t, s1, ..., sN, T`, identified by its position in the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeSymbol(u8);

impl TimeSymbol {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The symbol family for an expansion of order `N`: `t`, `N` nested integration
/// variables and the maturity `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeUniverse {
    inner: u8,
}

impl TimeUniverse {
    pub fn new(inner: usize) -> Self {
        assert!(inner + 2 <= MAX_VARS, "at most {} inner time symbols", MAX_VARS - 2);
        TimeUniverse { inner: inner as u8 }
    }

    /// Number of symbols, `inner + 2`.
    pub fn len(&self) -> usize {
        self.inner as usize + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn inner_count(&self) -> usize {
        self.inner as usize
    }

    pub fn start(&self) -> TimeSymbol {
        TimeSymbol(0)
    }

    /// The `i`-th integration variable, `1 <= i <= inner`.
    pub fn inner(&self, i: usize) -> TimeSymbol {
        assert!(i >= 1 && i <= self.inner as usize, "no inner symbol s{i}");
        TimeSymbol(i as u8)
    }

    pub fn end(&self) -> TimeSymbol {
        TimeSymbol(self.inner + 1)
    }

    pub fn name(&self, sym: TimeSymbol) -> String {
        if sym.0 == 0 {
            "t".to_string()
        } else if sym.0 == self.inner + 1 {
            "T".to_string()
        } else {
            format!("s{}", sym.0)
        }
    }

    /// A point with `t` and `T` set and every inner symbol at `t`.
    pub fn endpoints(&self, t: f64, maturity: f64) -> Vec<f64> {
        let mut v = vec![t; self.len()];
        v[self.len() - 1] = maturity;
        v
    }
}

fn exponent(key: u64, var: usize) -> u32 {
    ((key >> (BITS * var as u32)) & 0xff) as u32
}

fn unit(var: usize, e: u32) -> u64 {
    (e as u64) << (BITS * var as u32)
}

fn add_keys(a: u64, b: u64) -> u64 {
    let s = a + b;
    assert!(s & HIGH_BITS == 0, "time polynomial degree overflow");
    s
}

/// Sparse polynomial in the symbols of a [`TimeUniverse`] with float coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePoly {
    universe: TimeUniverse,
    terms: BTreeMap<u64, f64>,
}

impl TimePoly {
    pub fn zero(universe: TimeUniverse) -> Self {
        TimePoly { universe, terms: BTreeMap::new() }
    }

    pub fn constant(universe: TimeUniverse, c: f64) -> Self {
        let mut p = Self::zero(universe);
        p.push(0, c);
        p
    }

    pub fn symbol(universe: TimeUniverse, sym: TimeSymbol) -> Self {
        Self::monomial(universe, 1.0, &[(sym, 1)])
    }

    /// `coef * prod sym^e`.
    pub fn monomial(universe: TimeUniverse, coef: f64, powers: &[(TimeSymbol, u32)]) -> Self {
        let mut key = 0u64;
        for &(s, e) in powers {
            assert!(s.index() < universe.len(), "symbol outside universe");
            assert!(e < 128, "time exponent too large");
            key = add_keys(key, unit(s.index(), e));
        }
        let mut p = Self::zero(universe);
        p.push(key, coef);
        p
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

    /// Iterates `(exponents, coefficient)` pairs in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        let n = self.universe.len();
        self.terms.iter().map(move |(&k, &c)| ((0..n).map(|v| exponent(k, v)).collect(), c))
    }

    pub fn degree_in(&self, sym: TimeSymbol) -> u32 {
        self.terms.keys().map(|&k| exponent(k, sym.index())).max().unwrap_or(0)
    }

    fn push(&mut self, key: u64, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&key);
        }
    }

    fn check(&self, other: &TimePoly) -> Result<()> {
        if self.universe != other.universe {
            return Err(Error::Usage(format!(
                "time polynomials over different symbol sets ({} vs {} symbols)",
                self.universe.len(),
                other.universe.len()
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &TimePoly) -> Result<TimePoly> {
        self.check(other)?;
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        Ok(out)
    }

    pub fn try_mul(&self, other: &TimePoly) -> Result<TimePoly> {
        self.check(other)?;
        let mut out = Self::zero(self.universe);
        for (&ka, &ca) in &self.terms {
            for (&kb, &cb) in &other.terms {
                out.push(add_keys(ka, kb), ca * cb);
            }
        }
        Ok(out)
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &TimePoly, factor: f64) {
        assert_eq!(self.universe, other.universe, "mismatched time universes");
        if factor == 0.0 {
            return;
        }
        for (&k, &c) in &other.terms {
            self.push(k, factor * c);
        }
    }

    pub fn scale(&self, factor: f64) -> TimePoly {
        let mut out = Self::zero(self.universe);
        out.add_scaled(self, factor);
        out
    }

    pub fn eval(&self, times: &[f64]) -> f64 {
        assert_eq!(times.len(), self.universe.len(), "wrong number of time values");
        self.terms
            .iter()
            .map(|(&k, &c)| times.iter().enumerate().fold(c, |acc, (v, &tv)| acc * tv.powi(exponent(k, v) as i32)))
            .sum()
    }

    /// Replaces `var` by the symbol `with`.
    fn substitute(&self, var: TimeSymbol, with: TimeSymbol) -> TimePoly {
        let mut out = Self::zero(self.universe);
        for (&k, &c) in &self.terms {
            let e = exponent(k, var.index());
            let base = k - unit(var.index(), e);
            out.push(add_keys(base, unit(with.index(), e)), c);
        }
        out
    }

    /// Definite integral `int_lower^upper p d(var)`. The result no longer
    /// contains `var`.
    pub fn integrate(&self, var: TimeSymbol, lower: TimeSymbol, upper: TimeSymbol) -> Result<TimePoly> {
        let n = self.universe.len();
        if var.index() >= n || lower.index() >= n || upper.index() >= n {
            return Err(Error::Usage("integration symbol outside universe".into()));
        }
        if var == lower || var == upper {
            return Err(Error::Usage(format!(
                "cannot integrate {} between bounds that contain it",
                self.universe.name(var)
            )));
        }
        let mut anti = Self::zero(self.universe);
        for (&k, &c) in &self.terms {
            let e = exponent(k, var.index());
            anti.push(k + unit(var.index(), 1), c / (e + 1) as f64);
        }
        let mut out = anti.substitute(var, upper);
        out.add_scaled(&anti.substitute(var, lower), -1.0);
        Ok(out)
    }

    /// Human-readable form, e.g. `0.5*T^2 - 1*T*t + 0.5*t^2`.
    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        // highest total degree first, then by key
        let mut keys: Vec<_> = self.terms.iter().collect();
        keys.sort_by(|a, b| b.0.cmp(a.0));
        for (i, (&k, &c)) in keys.into_iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if i == 0 {
                if sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            s.push_str(&format!("{mag:?}"));
            for v in (0..self.universe.len()).rev() {
                let e = exponent(k, v);
                if e > 0 {
                    s.push('*');
                    s.push_str(&self.universe.name(TimeSymbol(v as u8)));
                    if e > 1 {
                        s.push_str(&format!("^{e}"));
                    }
                }
            }
        }
        s
    }
}

impl fmt::Display for TimePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

impl Add for &TimePoly {
    type Output = TimePoly;
    fn add(self, rhs: &TimePoly) -> TimePoly {
        self.try_add(rhs).expect("mismatched time universes")
    }
}

impl Sub for &TimePoly {
    type Output = TimePoly;
    fn sub(self, rhs: &TimePoly) -> TimePoly {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul for &TimePoly {
    type Output = TimePoly;
    fn mul(self, rhs: &TimePoly) -> TimePoly {
        self.try_mul(rhs).expect("mismatched time universes")
    }
}

impl Neg for &TimePoly {
    type Output = TimePoly;
    fn neg(self) -> TimePoly {
        self.scale(-1.0)
    }
}

/// Polynomial in calendar time, `c0 + c1 t + c2 t^2 + ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UniPoly(Vec<f64>);

impl UniPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        UniPoly(coeffs)
    }

    pub fn zero() -> Self {
        UniPoly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        Self::new(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn scale(&self, f: f64) -> Self {
        Self::new(self.0.iter().map(|c| c * f).collect())
    }

    pub fn add(&self, other: &UniPoly) -> Self {
        let n = self.0.len().max(other.0.len());
        Self::new((0..n).map(|i| self.0.get(i).unwrap_or(&0.0) + other.0.get(i).unwrap_or(&0.0)).collect())
    }

    pub fn mul(&self, other: &UniPoly) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// `int_a^b p(q) dq` with numeric bounds.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.0.iter().enumerate().map(|(i, c)| c / (i + 1) as f64 * (b.powi(i as i32 + 1) - a.powi(i as i32 + 1))).sum()
    }

    /// The polynomial with calendar time replaced by `sym`.
    pub fn embed(&self, universe: TimeUniverse, sym: TimeSymbol) -> TimePoly {
        let mut out = TimePoly::zero(universe);
        for (i, &c) in self.0.iter().enumerate() {
            out.push(unit(sym.index(), i as u32), c);
        }
        out
    }

    /// `int_lower^upper p(q) dq` with symbolic bounds.
    pub fn integrate_between(&self, universe: TimeUniverse, lower: TimeSymbol, upper: TimeSymbol) -> TimePoly {
        let mut out = TimePoly::zero(universe);
        for (i, &c) in self.0.iter().enumerate() {
            let w = c / (i + 1) as f64;
            out.push(unit(upper.index(), i as u32 + 1), w);
            out.push(unit(lower.index(), i as u32 + 1), -w);
        }
        out
    }
}
