use crate::error::{invalid, Error, Result};
use crate::integrate::{integrate_observed, Tolerance};
use crate::mode::{energy, ModeState};
use crate::profile::{DampingProfile, WalkItem};

/// Integration tolerance for the Riccati equation along the construction.
const RICCATI_TOL: Tolerance = Tolerance { rtol: 1e-12, atol: 1e-14, max_step: f64::INFINITY };
/// Tighter tolerance for pointwise evaluation between nodes.
const EVAL_TOL: Tolerance = Tolerance { rtol: 1e-13, atol: 1e-16, max_step: f64::INFINITY };
/// Relative slack on the sandwich `0 <= phi <= lambda - 1/t`.
const SANDWICH_SLACK: f64 = 1e-9;
/// Safety factor on the scale constant, absorbing integration error.
const SCALE_SAFETY: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiNode {
    pub t: f64,
    pub phi: f64,
    /// `integral_{t_start}^t phi`.
    pub int_phi: f64,
}

/// Solution `u = exp(-integral phi)` of the damped equation built from the
/// Riccati substitution, rescaled so that `|u(t)| >= t e^{-lambda t}`.
#[derive(Debug, Clone)]
pub struct SlowSolution {
    pub lambda: f64,
    /// `max(T, 1/lambda)`.
    pub t_start: f64,
    pub t_end: f64,
    /// The returned solution is `u / scale`.
    pub scale: f64,
    profile: DampingProfile,
    nodes: Vec<RiccatiNode>,
}

/// Integrates `(phi, int phi)' = (lambda^2 - 2 delta phi + phi^2, phi)` from `from` to `to`,
/// restarting at every jump of the profile.
fn riccati_segments(
    profile: &DampingProfile,
    lambda: f64,
    from: f64,
    to: f64,
    y0: [f64; 2],
    tol: Tolerance,
    mut observe: impl FnMut(f64, &[f64; 2]),
) -> Result<[f64; 2]> {
    let lam2 = lambda * lambda;
    let mut y = y0;
    for WalkItem { start, segment, .. } in profile.walk(to) {
        let end = start + segment.duration;
        if end <= from {
            continue;
        }
        let a = start.max(from);
        let b = end.min(to);
        if b <= a {
            continue;
        }
        let rhs = |t: f64, y: &[f64; 2]| {
            let d = segment.value_at(t - start);
            [lam2 - 2.0 * d * y[0] + y[0] * y[0], y[0]]
        };
        y = integrate_observed(rhs, a, y, b, tol, &mut observe)?;
    }
    Ok(y)
}

fn check_overdamped(profile: &DampingProfile, lambda: f64, from: f64, to: f64) -> Result<()> {
    for WalkItem { start, segment, .. } in profile.walk(to) {
        let end = start + segment.duration;
        if end <= from {
            continue;
        }
        let piece = if start < from { segment.suffix(from - start) } else { segment };
        let lo = piece.min_value();
        if lo < lambda {
            let t = if piece.start_value() <= piece.end_value() { start.max(from) } else { end };
            return Err(Error::OverdampingViolated { t, value: lo, lambda });
        }
    }
    Ok(())
}

/// Builds the slow solution on `[max(T, 1/lambda), t_end]` for a profile with `delta >= lambda`
/// from time `T` on.
pub fn construct_slow_solution(lambda: f64, profile: &DampingProfile, t_from: f64, t_end: f64) -> Result<SlowSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(t_from >= 0.0 && t_from.is_finite()) {
        return Err(invalid(format!("T must be nonnegative and finite, got {t_from}")));
    }
    let t_start = t_from.max(1.0 / lambda);
    if !(t_end > t_start && t_end.is_finite()) {
        return Err(invalid(format!("t_end must exceed max(T, 1/lambda) = {t_start}, got {t_end}")));
    }
    check_overdamped(profile, lambda, t_from, t_end)?;

    let mut nodes = vec![RiccatiNode { t: t_start, phi: 0.0, int_phi: 0.0 }];
    let tol = RICCATI_TOL.with_max_step(1e-2 / lambda);
    let mut violation = None;
    riccati_segments(profile, lambda, t_start, t_end, [0.0, 0.0], tol, |t, y| {
        let upper = lambda - 1.0 / t;
        let slack = SANDWICH_SLACK * lambda;
        if violation.is_none() && (y[0] < -slack || y[0] > upper + slack) {
            violation = Some(Error::RiccatiBoundViolated {
                t,
                detail: format!("phi = {} outside [0, {}]", y[0], upper),
            });
        }
        nodes.push(RiccatiNode { t, phi: y[0], int_phi: y[1] });
    })?;
    if let Some(err) = violation {
        return Err(err);
    }
    let scale = SCALE_SAFETY * (lambda * t_start).exp() / t_start;
    Ok(SlowSolution { lambda, t_start, t_end, scale, profile: profile.clone(), nodes })
}

impl SlowSolution {
    pub fn nodes(&self) -> &[RiccatiNode] {
        &self.nodes
    }

    fn node_before(&self, t: f64) -> &RiccatiNode {
        let i = self.nodes.partition_point(|n| n.t <= t);
        &self.nodes[i.saturating_sub(1)]
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(t >= self.t_start && t <= self.t_end) {
            return Err(invalid(format!("t = {t} outside [{}, {}]", self.t_start, self.t_end)));
        }
        Ok(())
    }

    fn state_from(&self, node: &RiccatiNode, t: f64) -> Result<ModeState> {
        let y = riccati_segments(&self.profile, self.lambda, node.t, t, [node.phi, node.int_phi], EVAL_TOL, |_, _| {})?;
        let u = (-y[1]).exp() / self.scale;
        Ok(ModeState::new(u, -y[0] * u))
    }

    /// Rescaled `(u, u')` at time `t`.
    pub fn evaluate(&self, t: f64) -> Result<ModeState> {
        self.check_range(t)?;
        self.state_from(self.node_before(t), t)
    }

    pub fn energy(&self, t: f64) -> Result<f64> {
        Ok(energy(self.evaluate(t)?, self.lambda))
    }

    /// `|u'' + 2 delta u' + lambda^2 u|` at `t` with `u''` and `u'` from a five-point
    /// finite-difference stencil of spacing `h`.
    pub fn residual(&self, t: f64, h: f64) -> Result<f64> {
        self.check_range(t - 2.0 * h)?;
        self.check_range(t + 2.0 * h)?;
        let node = *self.node_before(t - 2.0 * h);
        let u: Vec<f64> =
            (-2..=2).map(|k| self.state_from(&node, t + k as f64 * h).map(|s| s.u)).collect::<Result<_>>()?;
        let d1 = (u[0] - 8.0 * u[1] + 8.0 * u[3] - u[4]) / (12.0 * h);
        let d2 = (-u[0] + 16.0 * u[1] - 30.0 * u[2] + 16.0 * u[3] - u[4]) / (12.0 * h * h);
        let delta = self.profile.value_at(t);
        Ok((d2 + 2.0 * delta * d1 + self.lambda * self.lambda * u[2]).abs())
    }
}
