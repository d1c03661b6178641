//! LSV models described by the Taylor coefficients of their generator.
//!
//! The generator is
//! `a (dx^2 - dx) + alpha dy + b dy^2 + c dx dy + gamma (dx - 1)`, and each of
//! the five coefficient functions is stored as a table of time polynomials
//! `f_{i,j}(t) = d_x^i d_y^j f(t, xb, yb) / (i! j!)` for `i + j <= N`.

mod file;
mod payoff;
pub mod zoo;

pub use file::ModelFile;
pub use payoff::Payoff;
pub use zoo::ModelKind;

use crate::error::{Error, Result};
use crate::timealg::UniPoly;

/// Which coefficient function of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    A,
    B,
    C,
    Alpha,
    Gamma,
}

impl Coefficient {
    pub const ALL: [Coefficient; 5] =
        [Coefficient::A, Coefficient::B, Coefficient::C, Coefficient::Alpha, Coefficient::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::A => "a",
            Coefficient::B => "b",
            Coefficient::C => "c",
            Coefficient::Alpha => "alpha",
            Coefficient::Gamma => "gamma",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Triangular table of time polynomials indexed by `(i, j)` with `i + j <= order`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    order: usize,
    entries: Vec<UniPoly>,
}

fn tri_index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

impl CoeffTable {
    pub fn zeros(order: usize) -> Self {
        let len = (order + 1) * (order + 2) / 2;
        CoeffTable { order, entries: vec![UniPoly::zero(); len] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&UniPoly> {
        if i + j > self.order {
            return Err(Error::Usage(format!("Taylor index ({i},{j}) beyond table order {}", self.order)));
        }
        Ok(&self.entries[tri_index(i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, p: UniPoly) {
        assert!(i + j <= self.order, "Taylor index ({i},{j}) beyond table order");
        self.entries[tri_index(i, j)] = p;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(UniPoly::is_zero)
    }

    /// `(i, j, poly)` for every entry, nonzero or not, in order of total degree.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &UniPoly)> {
        (0..=self.order).flat_map(move |n| (0..=n).map(move |j| (n - j, j, &self.entries[tri_index(n - j, j)])))
    }

    pub fn max_time_degree(&self) -> usize {
        self.entries.iter().map(UniPoly::degree).max().unwrap_or(0)
    }
}

/// Taylor tables of an LSV generator around an expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    order: usize,
    point: (f64, f64),
    a: CoeffTable,
    b: CoeffTable,
    c: CoeffTable,
    alpha: CoeffTable,
    gamma: CoeffTable,
}

const PARABOLIC_GRID: usize = 64;

impl ModelSpec {
    /// All-zero tables; fill with [`ModelSpec::set`].
    pub fn new(order: usize, point: (f64, f64)) -> Self {
        ModelSpec {
            order,
            point,
            a: CoeffTable::zeros(order),
            b: CoeffTable::zeros(order),
            c: CoeffTable::zeros(order),
            alpha: CoeffTable::zeros(order),
            gamma: CoeffTable::zeros(order),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Expansion point `(xb, yb)`.
    pub fn point(&self) -> (f64, f64) {
        self.point
    }

    pub fn table(&self, which: Coefficient) -> &CoeffTable {
        match which {
            Coefficient::A => &self.a,
            Coefficient::B => &self.b,
            Coefficient::C => &self.c,
            Coefficient::Alpha => &self.alpha,
            Coefficient::Gamma => &self.gamma,
        }
    }

    fn table_mut(&mut self, which: Coefficient) -> &mut CoeffTable {
        match which {
            Coefficient::A => &mut self.a,
            Coefficient::B => &mut self.b,
            Coefficient::C => &mut self.c,
            Coefficient::Alpha => &mut self.alpha,
            Coefficient::Gamma => &mut self.gamma,
        }
    }

    pub fn set(&mut self, which: Coefficient, i: usize, j: usize, p: UniPoly) {
        self.table_mut(which).set(i, j, p);
    }

    pub fn get(&self, which: Coefficient, i: usize, j: usize) -> Result<&UniPoly> {
        self.table(which).get(i, j)
    }

    /// Leading coefficient `f_{0,0}(t)`.
    pub fn leading(&self, which: Coefficient) -> &UniPoly {
        &self.table(which).entries[0]
    }

    /// No `y` dynamics: every `b`, `c` and `alpha` entry vanishes.
    pub fn is_one_dimensional(&self) -> bool {
        self.b.is_zero() && self.c.is_zero() && self.alpha.is_zero()
    }

    pub fn has_default(&self) -> bool {
        !self.gamma.is_zero()
    }

    /// Same tables truncated to a lower order.
    pub fn truncated(&self, order: usize) -> ModelSpec {
        let order = order.min(self.order);
        let mut out = ModelSpec::new(order, self.point);
        for which in Coefficient::ALL {
            for (i, j, p) in self.table(which).iter() {
                if i + j <= order {
                    out.set(which, i, j, p.clone());
                }
            }
        }
        out
    }

    /// Checks parabolicity and a nonnegative killing rate on a time grid over `[t0, t1]`.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let one_d = self.is_one_dimensional();
        for idx in 0..PARABOLIC_GRID {
            let t = t0 + (t1 - t0) * idx as f64 / (PARABOLIC_GRID - 1) as f64;
            let a = self.a.entries[0].eval(t);
            if !(a > 0.0) {
                return Err(Error::Model(format!("a_00({t}) = {a} is not positive; generator is not parabolic")));
            }
            if !one_d {
                let b = self.b.entries[0].eval(t);
                let c = self.c.entries[0].eval(t);
                if !(b > 0.0) {
                    return Err(Error::Model(format!("b_00({t}) = {b} is not positive; generator is not parabolic")));
                }
                let det = 4.0 * a * b - c * c;
                if !(det > 0.0) {
                    return Err(Error::Model(format!(
                        "4 a_00 b_00 - c_00^2 = {det} at t = {t}; correlation must satisfy |rho| < 1"
                    )));
                }
            }
            let g = self.gamma.entries[0].eval(t);
            if g < 0.0 {
                return Err(Error::Model(format!("killing rate gamma_00({t}) = {g} is negative")));
            }
        }
        Ok(())
    }
}

type Field = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Generator coefficient functions of `(t, x, y)`.
pub struct LsvFunctions {
    pub a: Field,
    pub b: Field,
    pub c: Field,
    pub alpha: Field,
    pub gamma: Field,
}

impl LsvFunctions {
    pub fn field(&self, which: Coefficient) -> &Field {
        match which {
            Coefficient::A => &self.a,
            Coefficient::B => &self.b,
            Coefficient::C => &self.c,
            Coefficient::Alpha => &self.alpha,
            Coefficient::Gamma => &self.gamma,
        }
    }
}

fn zero_field() -> Field {
    Box::new(|_, _, _| 0.0)
}

impl Default for LsvFunctions {
    fn default() -> Self {
        LsvFunctions { a: zero_field(), b: zero_field(), c: zero_field(), alpha: zero_field(), gamma: zero_field() }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Central difference `d_x^i d_y^j f` with steps `(hx, hy)`; `O(h^2)`.
fn central_mixed(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, i: usize, j: usize, hx: f64, hy: f64) -> f64 {
    let mut acc = 0.0;
    for r in 0..=i {
        let dx = (i as f64 / 2.0 - r as f64) * hx;
        let wr = binomial(i, r) * if r % 2 == 0 { 1.0 } else { -1.0 };
        for q in 0..=j {
            let dy = (j as f64 / 2.0 - q as f64) * hy;
            let wq = binomial(j, q) * if q % 2 == 0 { 1.0 } else { -1.0 };
            acc += wr * wq * f(x + dx, y + dy);
        }
    }
    acc / (hx.powi(i as i32) * hy.powi(j as i32))
}

/// Step for derivative order `n`: the fixed `1e-4` for low orders, and the
/// roundoff-balanced `eps^(1/(n+4))` once Richardson refinement is applied.
fn fd_step(n: usize) -> f64 {
    if n <= 2 {
        1e-4
    } else {
        f64::EPSILON.powf(1.0 / (n as f64 + 4.0))
    }
}

fn taylor_derivative(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, i: usize, j: usize) -> f64 {
    let n = i + j;
    if n == 0 {
        return f(x, y);
    }
    let h = fd_step(n);
    let (hx, hy) = (h * x.abs().max(1.0), h * y.abs().max(1.0));
    let coarse = central_mixed(f, x, y, i, j, hx, hy);
    if n < 3 {
        return coarse;
    }
    let fine = central_mixed(f, x, y, i, j, hx / 2.0, hy / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Solves for the monomial coefficients of the degree-`d` polynomial through `(ts, vs)`.
#[allow(clippy::needless_range_loop)]
fn fit_polynomial(ts: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let mut m: Vec<Vec<f64>> = ts
        .iter()
        .zip(vs)
        .map(|(&t, &v)| {
            let mut row: Vec<f64> = (0..n).map(|p| t.powi(p as i32)).collect();
            row.push(v);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..n).map(|r| m[r][n] / m[r][r]).collect()
}

/// Taylor tables from coefficient functions by finite differences in `(x, y)`
/// at `t_degree + 1` time nodes over `horizon`, fitted exactly by a
/// polynomial in `t`.
pub fn taylor_table_from_closures(
    funcs: &LsvFunctions,
    point: (f64, f64),
    order: usize,
    t_degree: usize,
    horizon: (f64, f64),
) -> Result<ModelSpec> {
    let (t0, t1) = horizon;
    let nodes: Vec<f64> = if t_degree == 0 {
        vec![t0]
    } else {
        (0..=t_degree).map(|k| t0 + (t1 - t0) * k as f64 / t_degree as f64).collect()
    };
    let mut spec = ModelSpec::new(order, point);
    for which in Coefficient::ALL {
        let field = funcs.field(which);
        for n in 0..=order {
            for j in 0..=n {
                let i = n - j;
                let vals = nodes
                    .iter()
                    .map(|&t| {
                        let g = |x: f64, y: f64| field(t, x, y);
                        let d = taylor_derivative(&g, point.0, point.1, i, j) / (factorial(i) * factorial(j));
                        if d.is_finite() {
                            Ok(d)
                        } else {
                            Err(Error::Input(format!(
                                "finite difference for {}_{{{i},{j}}} at t = {t} is not finite",
                                which.name()
                            )))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                spec.set(which, i, j, UniPoly::new(fit_polynomial(&nodes, &vals)));
            }
        }
    }
    spec.validate(t0, t1)?;
    Ok(spec)
}
