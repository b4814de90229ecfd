//! A single modal oscillator `u'' + 2 delta u' + lambda^2 u = 0` and its
//! exact propagator under constant damping.

use crate::error::{invalid, Error, Result};

/// Phase-space point `(u, u')` of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeState {
    pub u: f64,
    pub v: f64,
}

impl ModeState {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.u * k, self.v * k)
    }


    /// State with energy `energy` at phase angle `theta` in the `(lambda u, u')` plane.
    pub fn from_energy_angle(lambda: f64, energy: f64, theta: f64) -> Self {
        let r = energy.sqrt();
        Self::new(r * theta.cos() / lambda, r * theta.sin())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteState)
        }
    }
}

impl std::ops::Add for ModeState {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self::new(self.u + other.u, self.v + other.v)
    }
}

/// `E = u'^2 + lambda^2 u^2`.
pub fn energy(state: ModeState, lambda: f64) -> f64 {
    state.v * state.v + lambda * lambda * state.u * state.u
}

/// Linear map `[u; v] -> [[a, b], [c, d]] [u; v]` over some time interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Transfer {
    pub const IDENTITY: Transfer = Transfer { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn apply(&self, s: ModeState) -> ModeState {
        ModeState::new(self.a * s.u + self.b * s.v, self.c * s.u + self.d * s.v)
    }

    /// `later ∘ self`: first `self`, then `later`.
    pub fn then(&self, later: &Transfer) -> Transfer {
        Transfer {
            a: later.a * self.a + later.b * self.c,
            b: later.a * self.b + later.b * self.d,
            c: later.c * self.a + later.d * self.c,
            d: later.c * self.b + later.d * self.d,
        }
    }

    pub fn scale(&self, k: f64) -> Transfer {
        Transfer { a: self.a * k, b: self.b * k, c: self.c * k, d: self.d * k }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Largest possible ratio `E(out) / E(in)` over all nonzero inputs, i.e. the
    /// squared spectral norm of the map written in energy coordinates `(lambda u, v)`.
    pub fn max_energy_gain(&self, lambda: f64) -> f64 {
        // energy coordinates: D T D^-1 with D = diag(lambda, 1)
        let a = self.a;
        let b = self.b * lambda;
        let c = self.c / lambda;
        let d = self.d;
        let fro = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
        0.5 * (fro + disc)
    }
}

/// Half-width of the band `|delta - lambda| < NEAR_CRITICAL * lambda` handled by the series branch.
pub const NEAR_CRITICAL: f64 = 1e-7;

/// Exact propagator of `u'' + 2 delta u' + lambda^2 u = 0` over time `dt`.
///
/// Writing the solution as `u(t) = C(t) u0 + S(t) (v0 + delta u0)` with
/// `C = e^{-delta t} cosh(kappa t)`, `S = e^{-delta t} sinh(kappa t) / kappa` and
/// `kappa^2 = delta^2 - lambda^2` covers all three regimes; the underdamped case
/// is the same formula with `kappa = i omega`.
pub fn constant_transfer(lambda: f64, delta: f64, dt: f64) -> Transfer {
    let lam2 = lambda * lambda;
    let gap = delta - lambda;
    if gap.abs() < NEAR_CRITICAL * lambda {
        return near_critical_transfer(lambda, delta, dt);
    }
    if gap < 0.0 {
        let omega = ((lambda - delta) * (lambda + delta)).sqrt();
        let env = (-delta * dt).exp();
        let (sn, cs) = (omega * dt).sin_cos();
        let c = env * cs;
        let s = env * sn / omega;
        Transfer { a: c + delta * s, b: s, c: -lam2 * s, d: c - delta * s }
    } else {
        // r1 = -delta + kappa (slow), r2 = -delta - kappa (fast)
        let kappa = ((delta - lambda) * (delta + lambda)).sqrt();
        let slow_rate = -lam2 / (delta + kappa);
        let slow = (slow_rate * dt).exp();
        let q = (-2.0 * kappa * dt).exp();
        let s = slow * (-(-2.0 * kappa * dt).exp_m1()) / (2.0 * kappa);
        // uses kappa - delta = slow_rate
        let a = slow * ((kappa + delta) + q * slow_rate) / (2.0 * kappa);
        let d = slow * (slow_rate + q * (kappa + delta)) / (2.0 * kappa);
        Transfer { a, b: s, c: -lam2 * s, d }
    }
}

fn near_critical_transfer(lambda: f64, delta: f64, dt: f64) -> Transfer {
    // cosh(kappa t) and sinh(kappa t)/kappa as power series in x = (delta^2 - lambda^2) t^2
    let x = (delta - lambda) * (delta + lambda) * dt * dt;
    let mut ch = 0.0;
    let mut sh = 0.0;
    let mut term_c = 1.0;
    let mut term_s = 1.0;
    for k in 0..200 {
        ch += term_c;
        sh += term_s;
        let kf = k as f64;
        term_c *= x / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        term_s *= x / ((2.0 * kf + 2.0) * (2.0 * kf + 3.0));
        if term_c.abs() <= f64::EPSILON * ch.abs() && term_s.abs() <= f64::EPSILON * sh.abs() {
            break;
        }
    }
    let env = (-delta * dt).exp();
    let c = env * ch;
    let s = env * sh * dt;
    Transfer { a: c + delta * s, b: s, c: -lambda * lambda * s, d: c - delta * s }
}

pub(crate) fn check_mode_args(lambda: f64, delta: f64, dt: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("damping must be nonnegative and finite, got {delta}")));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time step must be nonnegative and finite, got {dt}")));
    }
    Ok(())
}

/// State at time `dt` under constant damping `delta`.
pub fn propagate_constant(state: ModeState, lambda: f64, delta: f64, dt: f64) -> Result<ModeState> {
    state.check_finite()?;
    check_mode_args(lambda, delta, dt)?;
    let out = constant_transfer(lambda, delta, dt).apply(state);
    out.check_finite()?;
    Ok(out)
}
