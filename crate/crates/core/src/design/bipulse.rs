use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::mode::{constant_transfer, energy, ModeState, Transfer};
use crate::profile::{DampingProfile, Segment};

/// Default upper limit on the pulse refinement `n`.
pub const DEFAULT_CAP: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Largest `n` tried before giving up.
    pub cap: u64,
    /// Both fundamental energies must end below `margin * e^{-M}`; `margin` in `(0, 1]`.
    pub margin: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, margin: 1.0 }
    }
}

impl CalibrationOptions {
    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return Err(invalid(format!("calibration margin must lie in (0, 1], got {}", self.margin)));
        }
        if self.cap == 0 {
            return Err(invalid("calibration cap must be positive"));
        }
        Ok(())
    }
}

/// Two pulses of height `M n` and width `1/n` at both ends of a quarter rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipulseBlock {
    pub lambda: f64,
    pub mass: f64,
    pub n: u64,
    pub pulse_height: f64,
    pub pulse_width: f64,
    pub block_length: f64,
    /// Guaranteed energy factor over one block, `2 margin e^{-M}`.
    pub reduction_target: f64,
}

/// `pi / (2 lambda)`.
pub fn quarter_period(lambda: f64) -> f64 {
    FRAC_PI_2 / lambda
}

/// Smallest `n` for which the two pulses fit disjointly inside the block with room to spare.
pub fn search_floor(lambda: f64) -> u64 {
    (4.0 / quarter_period(lambda)).ceil().max(1.0) as u64
}

fn check_block_args(lambda: f64, mass: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(invalid(format!("pulse mass must be nonnegative and finite, got {mass}")));
    }
    Ok(())
}

impl BipulseBlock {
    pub fn new(lambda: f64, mass: f64, n: u64, margin: f64) -> Result<Self> {
        check_block_args(lambda, mass)?;
        let block_length = quarter_period(lambda);
        let pulse_width = 1.0 / n as f64;
        if n == 0 || 2.0 * pulse_width >= block_length {
            return Err(invalid(format!("n = {n} is too small for disjoint pulses at lambda = {lambda}")));
        }
        Ok(Self {
            lambda,
            mass,
            n,
            pulse_height: mass * n as f64,
            pulse_width,
            block_length,
            reduction_target: 2.0 * margin * (-mass).exp(),
        })
    }

    pub fn segments(&self) -> [Segment; 3] {
        [
            Segment::constant(self.pulse_height, self.pulse_width),
            Segment::constant(0.0, self.block_length - 2.0 * self.pulse_width),
            Segment::constant(self.pulse_height, self.pulse_width),
        ]
    }

    /// The block repeated forever.
    pub fn periodic_profile(&self) -> DampingProfile {
        DampingProfile::periodic(self.segments().to_vec()).expect("valid bipulse segments")
    }

    /// Exact transfer over one block for this block's own frequency.
    pub fn transfer(&self) -> Transfer {
        bipulse_transfer(self.lambda, self.mass, self.n)
    }

    /// Energies at the block end of the solutions starting from `(0, 1)` and `(1/lambda, 0)`.
    pub fn fundamental_energies(&self) -> (f64, f64) {
        fundamental_energies(self.lambda, self.mass, self.n)
    }
}

pub fn bipulse_transfer(lambda: f64, mass: f64, n: u64) -> Transfer {
    let width = 1.0 / n as f64;
    let height = mass * n as f64;
    let pulse = constant_transfer(lambda, height, width);
    let rotation = constant_transfer(lambda, 0.0, quarter_period(lambda) - 2.0 * width);
    pulse.then(&rotation).then(&pulse)
}

pub fn fundamental_energies(lambda: f64, mass: f64, n: u64) -> (f64, f64) {
    let t = bipulse_transfer(lambda, mass, n);
    let v = t.apply(ModeState::new(0.0, 1.0));
    let w = t.apply(ModeState::new(1.0 / lambda, 0.0));
    (energy(v, lambda), energy(w, lambda))
}

fn meets_criterion(lambda: f64, mass: f64, n: u64, threshold: f64) -> bool {
    let (ev, ew) = fundamental_energies(lambda, mass, n);
    ev <= threshold && ew <= threshold
}

/// Smallest `n` (doubling, then bisection from the search floor) for which both
/// fundamental solutions end the block with energy at most `margin * e^{-M}`.
pub fn calibrate_bipulse(lambda: f64, mass: f64, options: CalibrationOptions) -> Result<BipulseBlock> {
    check_block_args(lambda, mass)?;
    options.validate()?;
    let threshold = options.margin * (-mass).exp();
    let floor = search_floor(lambda);
    let fail = || Error::CalibrationFailed { lambda, mass, cap: options.cap };
    if floor > options.cap {
        return Err(fail());
    }
    let passes = |n: u64| meets_criterion(lambda, mass, n, threshold);

    if passes(floor) {
        return BipulseBlock::new(lambda, mass, floor, options.margin);
    }
    let mut lo;
    let mut hi = floor;
    loop {
        if hi >= options.cap {
            return Err(fail());
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(options.cap);
        if passes(hi) {
            break;
        }
    }
    // invariant: lo fails, hi passes
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BipulseBlock::new(lambda, mass, hi, options.margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::propagate_profile;

    #[test]
    fn limit_energies_approach_e_minus_4m() {
        let target = (-4.0f64).exp();
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000] {
            let (ev, ew) = fundamental_energies(1.0, 1.0, n);
            let err = ((ev - target).abs()).max((ew - target).abs()) / target;
            assert!(err < last);
            last = err;
        }
        assert!(last < 0.02);
    }

    #[test]
    fn zero_mass_returns_floor() {
        let b = calibrate_bipulse(1.0, 0.0, CalibrationOptions::default()).unwrap();
        assert_eq!(b.n, search_floor(1.0));
        assert_eq!(b.n, 3);
    }

    #[test]
    fn calibrated_n_is_minimal() {
        for (lambda, mass) in [(2.0, 1.5), (2.0, 4.0), (1.0, 10.0)] {
            let b = calibrate_bipulse(lambda, mass, CalibrationOptions::default()).unwrap();
            let thr = (-mass).exp();
            let (ev, ew) = b.fundamental_energies();
            assert!(ev <= thr && ew <= thr);
            if b.n > search_floor(lambda) {
                let (pv, pw) = fundamental_energies(lambda, mass, b.n - 1);
                assert!(pv > thr || pw > thr);
            }
        }
        assert!(calibrate_bipulse(2.0, 4.0, CalibrationOptions::default()).unwrap().n > search_floor(2.0));
    }

    #[test]
    fn block_reduces_energy_by_target() {
        let b = calibrate_bipulse(1.0, 1.0, CalibrationOptions::default()).unwrap();
        let p = b.periodic_profile();
        for k in 0..16 {
            let th = k as f64 * std::f64::consts::PI / 8.0;
            let s = ModeState::from_energy_angle(1.0, 1.0, th);
            let traj = propagate_profile(s, 1.0, &p, b.block_length).unwrap();
            let e = energy(traj.last().unwrap().state, 1.0);
            assert!(e <= b.reduction_target * (1.0 + 1e-12));
        }
    }

    #[test]
    fn large_mass_hits_cap() {
        let err = calibrate_bipulse(1.0, 60.0, CalibrationOptions::default().with_cap(1 << 20)).unwrap_err();
        assert!(matches!(err, Error::CalibrationFailed { .. }));
        assert!(err.to_string().starts_with("calibration failed"));
    }

    #[test]
    fn pulses_are_disjoint() {
        let b = calibrate_bipulse(3.0, 2.0, CalibrationOptions::default()).unwrap();
        assert!(2.0 * b.pulse_width < b.block_length);
        assert!((b.pulse_height * b.pulse_width - b.mass).abs() < 1e-12);
    }
}
