use std::fmt;
use std::sync::Arc;

/// Two-argument payoff `h(xi, omega)` used only for order-zero pricing.
pub type JointPayoff = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// European payoff `H(S_T)` written in log-price `x`.
#[derive(Clone)]
pub enum Payoff {
    /// `(e^x - e^k)^+`.
    Call { log_strike: f64 },
    /// `(e^k - e^x)^+`.
    Put { log_strike: f64 },
    /// Unit paid on survival.
    Bond,
    /// `e^x`.
    Forward,
    /// Weighted sum of x-only payoffs.
    Portfolio(Vec<(f64, Payoff)>),
    /// Payoff that also depends on `y`; only the leading term can be priced.
    Joint { h: JointPayoff, value_at_default: f64 },
}

impl Payoff {
    pub fn call(log_strike: f64) -> Self {
        Payoff::Call { log_strike }
    }

    pub fn put(log_strike: f64) -> Self {
        Payoff::Put { log_strike }
    }

    /// `K = H(0)`, what the claim is worth after default.
    pub fn value_at_default(&self) -> f64 {
        match self {
            Payoff::Call { .. } | Payoff::Bond | Payoff::Forward => 0.0,
            Payoff::Put { log_strike } => log_strike.exp(),
            Payoff::Portfolio(parts) => parts.iter().map(|(w, p)| w * p.value_at_default()).sum(),
            Payoff::Joint { value_at_default, .. } => *value_at_default,
        }
    }

    pub fn is_x_only(&self) -> bool {
        match self {
            Payoff::Joint { .. } => false,
            Payoff::Portfolio(parts) => parts.iter().all(|(_, p)| p.is_x_only()),
            _ => true,
        }
    }

    /// `h - K`: the part of the claim that is lost on default.
    pub fn net_of_default_value(&self) -> Payoff {
        let k0 = self.value_at_default();
        if k0 == 0.0 {
            return self.clone();
        }
        match self {
            Payoff::Joint { h, .. } => {
                let h = h.clone();
                Payoff::Joint { h: Arc::new(move |x, y| h(x, y) - k0), value_at_default: 0.0 }
            }
            _ => Payoff::Portfolio(vec![(1.0, self.clone()), (-k0, Payoff::Bond)]),
        }
    }

    /// Value of the payoff at `x`. Panics on a joint payoff.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { log_strike } => (x.exp() - log_strike.exp()).max(0.0),
            Payoff::Put { log_strike } => (log_strike.exp() - x.exp()).max(0.0),
            Payoff::Bond => 1.0,
            Payoff::Forward => x.exp(),
            Payoff::Portfolio(parts) => parts.iter().map(|(w, p)| w * p.eval(x)).sum(),
            Payoff::Joint { .. } => panic!("joint payoff needs y"),
        }
    }

    pub fn eval_joint(&self, x: f64, y: f64) -> f64 {
        match self {
            Payoff::Joint { h, .. } => h(x, y),
            _ => self.eval(x),
        }
    }

    /// Log-strike of a vanilla option.
    pub fn log_strike(&self) -> Option<f64> {
        match self {
            Payoff::Call { log_strike } | Payoff::Put { log_strike } => Some(*log_strike),
            _ => None,
        }
    }
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Call { log_strike } => write!(f, "Call(k={log_strike})"),
            Payoff::Put { log_strike } => write!(f, "Put(k={log_strike})"),
            Payoff::Bond => f.write_str("Bond"),
            Payoff::Forward => f.write_str("Forward"),
            Payoff::Portfolio(p) => f.debug_list().entries(p).finish(),
            Payoff::Joint { value_at_default, .. } => write!(f, "Joint(K={value_at_default})"),
        }
    }
}
