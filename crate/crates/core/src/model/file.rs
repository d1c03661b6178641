//! Declarative `key = value` model files.
//!
//! ```text
//! kind = heston_td
//! kappa = 1.15
//! theta0 = 0.06
//! ...
//! x = 0.0
//! y = -2.995732273553991
//! order = 2
//! ```
//!
//! `t` (start time) defaults to 0 and `y` to 0. `xbar`/`ybar` override the
//! expansion point, which otherwise is the current state `(x, y)`. Raw tables
//! use `kind = raw` with entries `a.1.0 = c0 c1 ...` (time-polynomial
//! coefficients, lowest degree first). Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::zoo::{Displaced, HestonTd, Jdcev, ThreeHalves};
use super::{Coefficient, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::timealg::UniPoly;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kind: ModelKind,
    /// Current state `(X_t, Y_t)`.
    pub x: f64,
    pub y: f64,
    /// Expansion point override.
    pub point: Option<(f64, f64)>,
    pub order: usize,
    /// Valuation time `t`.
    pub t0: f64,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Parse { line, msg: format!("`{key}` is not a number: `{v}`") }),
        }
    }

    fn required(&mut self, key: &str, kind: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| Error::Parse { line: 0, msg: format!("model kind `{kind}` needs key `{key}`") })
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl ModelFile {
    pub fn new(kind: ModelKind, x: f64, y: f64, order: usize) -> Self {
        ModelFile { kind, x, y, point: None, order, t0: 0.0 }
    }

    pub fn expansion_point(&self) -> (f64, f64) {
        self.point.unwrap_or((self.x, self.y))
    }

    /// Taylor tables at the configured point and order.
    pub fn spec(&self) -> Result<ModelSpec> {
        self.kind.spec(self.order, self.expansion_point())
    }

    /// Same model with the current state moved to `x` (expansion point follows unless overridden).
    pub fn at_state(&self, x: f64, y: f64) -> ModelFile {
        ModelFile { x, y, ..self.clone() }
    }

    pub fn parse(text: &str) -> Result<ModelFile> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if map.insert(k.clone(), (line_no, v)).is_some() {
                return Err(Error::Parse { line: line_no, msg: format!("duplicate key `{k}`") });
            }
        }
        let mut e = Entries { map };
        let (kind_line, kind) =
            e.take_raw("kind").ok_or_else(|| Error::Parse { line: 0, msg: "missing `kind`".into() })?;
        let x = e.float("x")?.ok_or_else(|| Error::Parse { line: 0, msg: "missing `x`".into() })?;
        let y = e.float("y")?.unwrap_or(0.0);
        let t0 = e.float("t")?.unwrap_or(0.0);
        let order = match e.take_raw("order") {
            None => 2,
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| Error::Parse { line, msg: format!("`order` must be a nonnegative integer, got `{v}`") })?,
        };
        let point = match (e.float("xbar")?, e.float("ybar")?) {
            (None, None) => None,
            (Some(a), Some(b)) => Some((a, b)),
            _ => return Err(Error::Parse { line: 0, msg: "`xbar` and `ybar` must be given together".into() }),
        };
        let kind = match kind.as_str() {
            "black_scholes" => ModelKind::BlackScholes { sigma: e.required("sigma", &kind)? },
            "heston_td" => ModelKind::HestonTd(HestonTd {
                kappa: e.required("kappa", &kind)?,
                theta0: e.required("theta0", &kind)?,
                theta1: e.required("theta1", &kind)?,
                delta0: e.required("delta0", &kind)?,
                delta1: e.required("delta1", &kind)?,
                rho0: e.required("rho0", &kind)?,
                rho1: e.required("rho1", &kind)?,
            }),
            "three_halves" => ModelKind::ThreeHalves(ThreeHalves {
                kappa: e.required("kappa", &kind)?,
                theta: e.required("theta", &kind)?,
                delta: e.required("delta", &kind)?,
                rho: e.required("rho", &kind)?,
            }),
            "jdcev" => ModelKind::Jdcev(Jdcev {
                delta: e.required("delta", &kind)?,
                beta: e.required("beta", &kind)?,
                b: e.required("b", &kind)?,
                c: e.required("c", &kind)?,
            }),
            "cev" => ModelKind::Cev { delta: e.required("delta", &kind)?, beta: e.required("beta", &kind)? },
            "displaced" => ModelKind::Displaced(Displaced {
                sigma0: e.required("sigma0", &kind)?,
                sigma1: e.required("sigma1", &kind)?,
                shift: e.required("shift", &kind)?,
            }),
            "raw" => {
                let mut spec = ModelSpec::new(order, point.unwrap_or((x, y)));
                let keys: Vec<String> = e.map.keys().cloned().collect();
                for key in keys {
                    let mut parts = key.split('.');
                    let (Some(name), Some(i), Some(j), None) = (parts.next(), parts.next(), parts.next(), parts.next())
                    else {
                        continue;
                    };
                    let Some(which) = Coefficient::from_name(name) else { continue };
                    let (line, v) = e.take_raw(&key).unwrap();
                    let bad = |msg: String| Error::Parse { line, msg };
                    let i: usize = i.parse().map_err(|_| bad(format!("bad table index in `{key}`")))?;
                    let j: usize = j.parse().map_err(|_| bad(format!("bad table index in `{key}`")))?;
                    if i + j > order {
                        return Err(bad(format!("`{key}` is beyond order {order}")));
                    }
                    let coeffs = v
                        .split_whitespace()
                        .map(|c| c.parse::<f64>().map_err(|_| bad(format!("`{key}`: `{c}` is not a number"))))
                        .collect::<Result<Vec<_>>>()?;
                    spec.set(which, i, j, UniPoly::new(coeffs));
                }
                ModelKind::Raw(Box::new(spec))
            }
            other => {
                return Err(Error::Parse { line: kind_line, msg: format!("unknown model kind `{other}`") });
            }
        };
        if let Some((key, (line, _))) = e.map.into_iter().next() {
            return Err(Error::Parse { line, msg: format!("unknown key `{key}` for kind `{}`", kind.name()) });
        }
        Ok(ModelFile { kind, x, y, point, order, t0 })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        };
        let mut params: Vec<(&str, f64)> = Vec::new();
        match &self.kind {
            ModelKind::BlackScholes { sigma } => params.push(("sigma", *sigma)),
            ModelKind::HestonTd(m) => params.extend([
                ("kappa", m.kappa),
                ("theta0", m.theta0),
                ("theta1", m.theta1),
                ("delta0", m.delta0),
                ("delta1", m.delta1),
                ("rho0", m.rho0),
                ("rho1", m.rho1),
            ]),
            ModelKind::ThreeHalves(m) => {
                params.extend([("kappa", m.kappa), ("theta", m.theta), ("delta", m.delta), ("rho", m.rho)])
            }
            ModelKind::Jdcev(m) => params.extend([("delta", m.delta), ("beta", m.beta), ("b", m.b), ("c", m.c)]),
            ModelKind::Cev { delta, beta } => params.extend([("delta", *delta), ("beta", *beta)]),
            ModelKind::Displaced(m) => params.extend([("sigma0", m.sigma0), ("sigma1", m.sigma1), ("shift", m.shift)]),
            ModelKind::Raw(_) => {}
        }
        let header = format!("kind = {}\n", self.kind.name());
        for (k, v) in params {
            kv(k, v);
        }
        kv("x", self.x);
        kv("y", self.y);
        kv("t", self.t0);
        if let Some((a, b)) = self.point {
            kv("xbar", a);
            kv("ybar", b);
        }
        let _ = writeln!(s, "order = {}", self.order);
        if let ModelKind::Raw(spec) = &self.kind {
            for which in Coefficient::ALL {
                for (i, j, p) in spec.table(which).iter() {
                    if !p.is_zero() {
                        let cs: Vec<String> = p.coeffs().iter().map(|&c| fmt_f64(c)).collect();
                        let _ = writeln!(s, "{}.{i}.{j} = {}", which.name(), cs.join(" "));
                    }
                }
            }
        }
        header + &s
    }
}
