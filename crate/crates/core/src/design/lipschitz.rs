use std::f64::consts::{LN_2, PI, TAU};

use super::ode::check_rate;
use crate::analysis::{DecayBound, DecayCertificate};
use crate::error::{invalid, Error, Result};
use crate::integrate::{integrate_observed, Tolerance};
use crate::mode::{energy, ModeState};
use crate::profile::{propagate_segment, DampingProfile, Segment};

/// Largest tolerated misalignment (sine of the angle) after the rotation phase.
const ALIGNMENT_TOLERANCE: f64 = 1e-8;
const SANDWICH_SLACK: f64 = 1e-9;

/// Decaying solution `v = v(0) exp(-integral_0^t phi)` of the ramp `delta = lambda + epsilon t`
/// on `[-1, t1]`, from the backward Riccati integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialSolution {
    pub t1: f64,
    /// `phi(-1)`, `phi(0)`, `phi(t1)`.
    pub phi_minus1: f64,
    pub phi0: f64,
    pub phi_t1: f64,
    /// `integral_{-1}^0 phi` and `integral_0^{t1} phi`.
    pub int_before: f64,
    pub int_after: f64,
    /// Unit-energy data at 0.
    pub v0: ModeState,
    pub v_minus1: ModeState,
    pub v_t1: ModeState,
}

impl SpecialSolution {
    /// `ln (E_v(t1) / E_v(0))`.
    pub fn ln_energy_ratio(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        -2.0 * self.int_after + (self.phi_t1 * self.phi_t1 + l2).ln() - (self.phi0 * self.phi0 + l2).ln()
    }
}

/// Integrates `phi' = lambda^2 - 2 (lambda + epsilon t) phi + phi^2` backwards from
/// `phi(t1) = lambda + 2 epsilon t1` to `t = -1` and checks the sandwich
/// `lambda + 2 epsilon t <= phi <= 2 (lambda + 2 epsilon t1)` on `[0, t1]`.
pub fn riccati_special_solution(lambda: f64, epsilon: f64, t1: f64) -> Result<SpecialSolution> {
    let lam2 = lambda * lambda;
    let rhs = |t: f64, y: &[f64; 2]| [lam2 - 2.0 * (lambda + epsilon * t) * y[0] + y[0] * y[0], y[0]];
    let tol = Tolerance { rtol: 1e-12, atol: 1e-14, max_step: 1e-2 / lambda };
    let top = 2.0 * (lambda + 2.0 * epsilon * t1);
    let mut violation = None;
    // y[1] = integral_{t1}^t phi
    let at0 = integrate_observed(rhs, t1, [lambda + 2.0 * epsilon * t1, 0.0], 0.0, tol, |t, y| {
        let lower = lambda + 2.0 * epsilon * t;
        let slack = SANDWICH_SLACK * top;
        if violation.is_none() && (y[0] < lower - slack || y[0] > top + slack) {
            violation = Some(Error::RiccatiBoundViolated {
                t,
                detail: format!("phi = {} outside [{lower}, {top}]", y[0]),
            });
        }
    })?;
    if let Some(e) = violation {
        return Err(e);
    }
    let at_m1 = integrate_observed(rhs, 0.0, at0, -1.0, tol, |_, _| {})?;
    let (phi0, phi_minus1) = (at0[0], at_m1[0]);
    let int_after = -at0[1];
    let int_before = at0[1] - at_m1[1];
    let amp = 1.0 / (phi0 * phi0 + lam2).sqrt();
    let v0 = ModeState::new(amp, -phi0 * amp);
    let um1 = amp * int_before.exp();
    let ut1 = amp * (-int_after).exp();
    let phi_t1 = lambda + 2.0 * epsilon * t1;
    Ok(SpecialSolution {
        t1,
        phi_minus1,
        phi0,
        phi_t1,
        int_before,
        int_after,
        v0,
        v_minus1: ModeState::new(um1, -phi_minus1 * um1),
        v_t1: ModeState::new(ut1, -phi_t1 * ut1),
    })
}

#[derive(Debug, Clone)]
pub struct LipschitzDesign {
    pub lambda: f64,
    pub epsilon: f64,
    pub rate: f64,
    pub mass: f64,
    pub t1: f64,
    pub t2: f64,
    pub t0: f64,
    /// Rotation frequency `sqrt(epsilon (2 lambda - epsilon))` on the plateau.
    pub omega: f64,
    pub special: SpecialSolution,
    pub alignment_residual: f64,
    pub profile: DampingProfile,
    pub certificate: DecayCertificate,
}

impl LipschitzDesign {
    /// `16 (pi/eps + 1) R + 2 (pi + 1)/eps + 8/lambda + 2 + 8 ln 2`.
    pub fn period_bound(&self) -> f64 {
        period_bound(self.lambda, self.epsilon, self.rate)
    }
}

fn period_bound(lambda: f64, epsilon: f64, rate: f64) -> f64 {
    16.0 * (PI / epsilon + 1.0) * rate + 2.0 * (PI + 1.0) / epsilon + 8.0 / lambda + 2.0 + 8.0 * LN_2
}

/// Rotating coordinate `omega u + i (u' + d u)`, whose argument decreases at rate `omega`
/// under constant damping `d`.
fn rotation_angle(s: ModeState, d: f64, omega: f64) -> f64 {
    (s.v + d * s.u).atan2(omega * s.u)
}

/// Trapezoidal profile with slopes `±epsilon` and minimum `lambda - epsilon`, decaying at rate `R`.
pub fn design_lipschitz(lambda: f64, rate: f64, epsilon: f64) -> Result<LipschitzDesign> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(epsilon > 0.0 && epsilon < lambda) {
        return Err(Error::EpsilonOutOfRange { epsilon, lambda });
    }
    check_rate(rate)?;
    let mass = 8.0 * (PI + epsilon) * rate + 4.0 * epsilon * LN_2 + 1.0;
    let t1 = mass / (2.0 * epsilon) + 2.0 / lambda;
    let special = riccati_special_solution(lambda, epsilon, t1)?;

    let top = lambda + epsilon * t1;
    let up = Segment::ramp(lambda, epsilon, t1);
    let down = Segment::ramp(top, -epsilon, t1 + 1.0);
    let v0 = special.v0;
    let mut w = ModeState::new(v0.v / lambda, -lambda * v0.u);
    w = propagate_segment(w, lambda, &up)?;
    w = propagate_segment(w, lambda, &down)?;

    let d = lambda - epsilon;
    let omega = (epsilon * (2.0 * lambda - epsilon)).sqrt();
    let target = special.v_minus1;
    let mut t2 = (rotation_angle(w, d, omega) - rotation_angle(target, d, omega)).rem_euclid(TAU) / omega;
    if t2 <= 0.0 {
        t2 = TAU / omega;
    }
    let plateau = Segment::constant(d, t2);
    let aligned = propagate_segment(w, lambda, &plateau)?;
    let (a, b) = ((lambda * aligned.u, aligned.v), (lambda * target.u, target.v));
    let norm = (energy(aligned, lambda) * energy(target, lambda)).sqrt();
    let residual = if norm > 0.0 { (a.0 * b.1 - a.1 * b.0).abs() / norm } else { f64::INFINITY };
    if !(residual <= ALIGNMENT_TOLERANCE) || a.0 * b.0 + a.1 * b.1 <= 0.0 {
        return Err(Error::PhaseMatchingFailed { residual });
    }

    let segments = vec![
        up,
        down,
        plateau,
        Segment::ramp(d, epsilon, t1 + 1.0),
        Segment::ramp(top, -epsilon, t1),
    ];
    let t0 = 4.0 * t1 + t2 + 2.0;
    if LN_2 - mass * t1 > -rate * t0 {
        return Err(invalid(format!("mass {mass} too small for rate {rate} over period {t0}")));
    }
    let bound = period_bound(lambda, epsilon, rate);
    if t0 > bound * (1.0 + 1e-12) {
        return Err(invalid(format!("period {t0} exceeds its a-priori bound {bound}")));
    }
    Ok(LipschitzDesign {
        lambda,
        epsilon,
        rate,
        mass,
        t1,
        t2,
        t0,
        omega,
        special,
        alignment_residual: residual,
        profile: DampingProfile::periodic(segments)?,
        certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::propagate_segment;

    #[test]
    fn out_of_range_epsilon() {
        for eps in [0.0, 1.0, 2.0, -0.1] {
            let err = design_lipschitz(1.0, 0.5, eps).unwrap_err();
            assert!(err.to_string().starts_with("epsilon out of range"), "{err}");
        }
    }

    #[test]
    fn shape_and_bounds() {
        let d = design_lipschitz(1.0, 0.5, 0.25).unwrap();
        assert!((d.profile.min_value() - 0.75).abs() < 1e-12);
        assert!(d.profile.lipschitz_constant() <= 0.25 + 1e-15);
        assert!(d.t2 > 0.0 && d.t2 <= TAU / d.omega);
        assert!(d.t0 <= d.period_bound());
        assert!((d.profile.period() - d.t0).abs() < 1e-9 * d.t0);
        assert!(d.special.ln_energy_ratio(1.0) <= -d.mass * d.t1);
    }

    #[test]
    fn ramp_propagation_matches_riccati_solution() {
        // short ramp
        let (lambda, epsilon, t1) = (1.0, 0.5, 2.0);
        let s = riccati_special_solution(lambda, epsilon, t1).unwrap();
        let end = propagate_segment(s.v0, lambda, &Segment::ramp(lambda, epsilon, t1)).unwrap();
        assert!((end.u - s.v_t1.u).abs() <= 1e-8 * s.v_t1.u.abs());
        assert!((end.v - s.v_t1.v).abs() <= 1e-8 * s.v_t1.v.abs());
    }
}
