//! Euler schemes for the model zoo and for generic coefficient closures.

use crate::error::{Error, Result};
use crate::model::zoo::{Displaced, HestonTd, Jdcev, ThreeHalves};
use crate::model::{LsvFunctions, ModelKind};

/// One Euler step per call; `state` is in the scheme's own coordinates.
pub trait Dynamics: Sync {
    fn start(&self, x: f64, y: f64) -> [f64; 2];

    /// Advances `state` from `t` to `t + dt` with independent standard normals `z`.
    fn step(&self, t: f64, dt: f64, state: &mut [f64; 2], z: [f64; 2]);

    /// `(x, y)` in log coordinates.
    fn observe(&self, state: &[f64; 2]) -> (f64, f64);

    fn killing(&self, _t: f64, _state: &[f64; 2]) -> f64 {
        0.0
    }

    /// Whether the second normal draw is needed.
    fn two_factor(&self) -> bool {
        true
    }
}

fn correlate(rho: f64, z: [f64; 2]) -> (f64, f64) {
    (z[0], rho * z[0] + (1.0 - rho * rho).max(0.0).sqrt() * z[1])
}

/// `(X, Z)` with `Z = e^Y` the variance, full truncation at zero.
impl Dynamics for HestonTd {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y.exp()]
    }

    fn step(&self, t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        let v = s[1].max(0.0);
        let (w, b) = correlate(self.rho(t), z);
        let sq = (v * dt).sqrt();
        s[0] += -0.5 * v * dt + sq * w;
        s[1] += self.kappa * (self.theta(t) - v) * dt + self.delta_sq(t).sqrt() * sq * b;
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1].max(0.0).ln())
    }
}

/// `(X, Z)` with `dZ = kappa Z (theta - Z) dt + delta Z^(3/2) dB`, full truncation.
impl Dynamics for ThreeHalves {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y.exp()]
    }

    fn step(&self, _t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        let v = s[1].max(0.0);
        let (w, b) = correlate(self.rho, z);
        let sq = (v * dt).sqrt();
        s[0] += -0.5 * v * dt + sq * w;
        s[1] += self.kappa * v * (self.theta - v) * dt + self.delta * v * sq * b;
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1].max(0.0).ln())
    }
}

/// Log coordinates; `dX = (gamma - sigma^2/2) dt + sigma dW`.
impl Dynamics for Jdcev {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y]
    }

    fn step(&self, _t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        let sig = self.sigma(s[0]);
        s[0] += (self.gamma(s[0]) - 0.5 * sig * sig) * dt + sig * dt.sqrt() * z[0];
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1])
    }

    fn killing(&self, _t: f64, s: &[f64; 2]) -> f64 {
        self.gamma(s[0])
    }

    fn two_factor(&self) -> bool {
        false
    }
}

impl Dynamics for Displaced {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y]
    }

    fn step(&self, t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        let v = self.local_vol(t, s[0]);
        s[0] += -0.5 * v * v * dt + v * dt.sqrt() * z[0];
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1])
    }

    fn two_factor(&self) -> bool {
        false
    }
}

/// Constant volatility; the log-Euler step is exact.
#[derive(Debug, Clone, Copy)]
pub struct BlackScholesDynamics {
    pub sigma: f64,
}

impl Dynamics for BlackScholesDynamics {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y]
    }

    fn step(&self, _t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        s[0] += -0.5 * self.sigma * self.sigma * dt + self.sigma * dt.sqrt() * z[0];
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1])
    }

    fn two_factor(&self) -> bool {
        false
    }
}

/// Log-coordinate Euler straight from the generator's coefficients:
/// `dX = (gamma - a) dt + sqrt(2a) dW`, `dY = alpha dt + sqrt(2b) dB`,
/// `d<W,B> = c / (2 sqrt(ab)) dt`.
pub struct GeneratorDynamics {
    pub functions: LsvFunctions,
}

impl Dynamics for GeneratorDynamics {
    fn start(&self, x: f64, y: f64) -> [f64; 2] {
        [x, y]
    }

    fn step(&self, t: f64, dt: f64, s: &mut [f64; 2], z: [f64; 2]) {
        let f = &self.functions;
        let (x, y) = (s[0], s[1]);
        let a = (f.a)(t, x, y).max(0.0);
        let b = (f.b)(t, x, y).max(0.0);
        let c = (f.c)(t, x, y);
        let rho = if a > 0.0 && b > 0.0 { (c / (2.0 * (a * b).sqrt())).clamp(-1.0, 1.0) } else { 0.0 };
        let (w, bz) = correlate(rho, z);
        let sq = dt.sqrt();
        s[0] += ((f.gamma)(t, x, y) - a) * dt + (2.0 * a).sqrt() * sq * w;
        s[1] += (f.alpha)(t, x, y) * dt + (2.0 * b).sqrt() * sq * bz;
    }

    fn observe(&self, s: &[f64; 2]) -> (f64, f64) {
        (s[0], s[1])
    }

    fn killing(&self, t: f64, s: &[f64; 2]) -> f64 {
        (self.functions.gamma)(t, s[0], s[1])
    }
}

/// The scheme used for each model kind.
pub fn dynamics_for(kind: &ModelKind) -> Result<Box<dyn Dynamics>> {
    Ok(match kind {
        ModelKind::BlackScholes { sigma } => Box::new(BlackScholesDynamics { sigma: *sigma }),
        ModelKind::HestonTd(m) => Box::new(*m),
        ModelKind::ThreeHalves(m) => Box::new(*m),
        ModelKind::Jdcev(m) => Box::new(*m),
        ModelKind::Cev { delta, beta } => Box::new(Jdcev { delta: *delta, beta: *beta, b: 0.0, c: 0.0 }),
        ModelKind::Displaced(m) => Box::new(*m),
        ModelKind::Raw(_) => {
            return Err(Error::Input("a raw coefficient table has no underlying dynamics to simulate".into()))
        }
    })
}
