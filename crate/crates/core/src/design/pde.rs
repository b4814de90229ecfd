use std::f64::consts::{LN_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bipulse::{BipulseBlock, CalibrationOptions};
use super::mollify::{mollify, MollifiedProfile};
use super::ode::{check_rate, smoothing_budget};
use super::system::calibrate_group;
use super::{Design, RateSchedule, RateTarget};
use crate::analysis::{DecayBound, DecayCertificate, DEFAULT_SEED};
use crate::error::{invalid, Error, Result};
use crate::mode::{constant_transfer, energy, ModeState};
use crate::profile::{DampingProfile, Segment};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdeOptions {
    pub calibration: CalibrationOptions,
    pub common_n: bool,
    /// Damping in the second half of the period; `R + lambda_1` when `None`.
    pub level: Option<f64>,
}

/// Low/high split of a spectrum for a target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSplit {
    /// Number of low modes (a prefix of the spectrum).
    pub low_count: usize,
    /// `(pi/2) sum_{low} 1/lambda_k`, half the period.
    pub t_r: f64,
    /// Constant damping applied to the high modes.
    pub level: f64,
    /// Pulse mass of the low-mode blocks.
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct PdeDesign {
    pub design: Design,
    pub split: SpectralSplit,
}

/// Number of modes with `lambda_k^2 <= 2 (R + lambda_1)^2`; errors if no mode is above.
pub fn spectral_split(spectrum: &Spectrum, rate: f64) -> Result<usize> {
    let lam1 = spectrum.first();
    let threshold = SQRT_2 * (rate + lam1);
    let limit = threshold * threshold;
    let low = spectrum.frequencies().partition_point(|&l| l * l <= limit);
    if low == spectrum.len() {
        return Err(Error::TruncationInsufficient { threshold });
    }
    Ok(low)
}

fn pde_mass(rate: f64, lam1: f64, t_r: f64) -> f64 {
    (2.0 * (rate + lam1) * t_r - 2.0 * LN_2).max(LN_2)
}

/// Pulse blocks for the `low_count` lowest modes followed by constant damping
/// `level` for the same length.
pub(crate) fn pde_block(
    spectrum: &Spectrum,
    low_count: usize,
    rate: f64,
    level: f64,
    calibration: CalibrationOptions,
    common_n: bool,
    doubled_margin: bool,
) -> Result<(Vec<BipulseBlock>, Vec<Segment>, SpectralSplit)> {
    let lam = spectrum.frequencies();
    if low_count == 0 || low_count >= lam.len() {
        return Err(Error::TruncationInsufficient { threshold: lam[low_count.min(lam.len() - 1)] });
    }
    if !(level >= 0.0 && level.is_finite()) {
        return Err(invalid(format!("second-half damping must be nonnegative and finite, got {level}")));
    }
    let high = lam[low_count];
    if high * high < 2.0 * level * level * (1.0 - 1e-12) {
        return Err(Error::CoercivityViolated { lambda: high, damping: level });
    }
    let t_r = spectrum.quarter_rotation_time(low_count);
    if (8.0f64).ln() - 2.0 * level * t_r > -2.0 * rate * t_r + 1e-12 {
        return Err(invalid(format!(
            "second-half damping {level} is too weak for rate {rate} over half-period {t_r}"
        )));
    }
    let mass = pde_mass(rate, lam[0], t_r);
    let options = if doubled_margin { calibration.with_margin((-mass).exp()) } else { calibration };
    let blocks = calibrate_group(&lam[..low_count], mass, options, common_n)?;
    let mut segments: Vec<Segment> = blocks.iter().flat_map(|b| b.segments()).collect();
    segments.push(Segment::constant(level, t_r));
    Ok((blocks, segments, SpectralSplit { low_count, t_r, level, mass }))
}

pub fn design_pde_exponential(spectrum: &Spectrum, rate: f64) -> Result<PdeDesign> {
    design_pde_exponential_with(spectrum, rate, &PdeOptions::default())
}

/// Period `2 T_R`: pulses for the low modes, then constant damping for the high
/// ones. Certificate `exp(-R (t - t0)^+)`.
pub fn design_pde_exponential_with(spectrum: &Spectrum, rate: f64, options: &PdeOptions) -> Result<PdeDesign> {
    check_rate(rate)?;
    let low = spectral_split(spectrum, rate)?;
    let level = options.level.unwrap_or(rate + spectrum.first());
    let (blocks, segments, split) =
        pde_block(spectrum, low, rate, level, options.calibration, options.common_n, false)?;
    let t0 = 2.0 * split.t_r;
    Ok(PdeDesign {
        design: Design {
            profile: DampingProfile::periodic(segments)?,
            certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
            t0,
            blocks,
            schedule: Some(RateSchedule {
                target: RateTarget::Exponential(rate),
                block_length: t0,
                block_masses: vec![split.mass],
            }),
        },
        split,
    })
}

/// Smooth variant: second-half damping raised to `lambda_{k*} / sqrt 2` for the first
/// high mode `k*`, pulses calibrated with doubled margin, then mollified.
pub fn design_pde_exponential_smooth(
    spectrum: &Spectrum,
    rate: f64,
    budget: Option<f64>,
) -> Result<(PdeDesign, MollifiedProfile)> {
    check_rate(rate)?;
    let low = spectral_split(spectrum, rate)?;
    let level = spectrum.frequencies()[low] / SQRT_2;
    let (blocks, segments, split) =
        pde_block(spectrum, low, rate, level, CalibrationOptions::default(), false, true)?;
    let t0 = 2.0 * split.t_r;
    let low_factor = blocks.iter().map(|b| b.reduction_target).fold(0.0, f64::max);
    let high_factor = 8.0 * (-2.0 * level * split.t_r).exp();
    let budget = match budget {
        Some(b) => b,
        None => smoothing_budget(low_factor.max(high_factor), (-rate * t0).exp(), t0)?,
    };
    let smooth = mollify(&DampingProfile::periodic(segments)?, budget)?;
    let design = Design {
        profile: smooth.profile.clone(),
        certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
        t0,
        blocks,
        schedule: Some(RateSchedule { target: RateTarget::Exponential(rate), block_length: t0, block_masses: vec![split.mass] }),
    };
    Ok((PdeDesign { design, split }, smooth))
}

/// Outcome of [`verify_coercive_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoerciveCheck {
    /// All three checks passed.
    pub holds: bool,
    /// Largest `E(t) / (E(0) e^{-2Mt})` seen; the claim is that it stays below 8.
    pub measured_factor: f64,
    /// Largest `|E_hat' + 2M E_hat| / E_hat` from finite differences.
    pub identity_residual: f64,
    /// `E/4 <= E_hat <= 2E` held at every sample.
    pub equivalence_holds: bool,
}

/// Check times used by [`verify_coercive_decay`].
pub const COERCIVE_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const COERCIVE_STATES: usize = 64;
const IDENTITY_TOLERANCE: f64 = 1e-6;

fn modified_energy(s: ModeState, lambda: f64, mass: f64) -> f64 {
    energy(s, lambda) + 2.0 * mass * s.u * s.v
}

/// Under constant damping `M` with `lambda^2 >= 2 M^2`, checks `E(t) <= 8 E(0) e^{-2Mt}`,
/// the identity `E_hat' = -2M E_hat` and `E/4 <= E_hat <= 2E` for random states.
pub fn verify_coercive_decay(spectrum_high: &Spectrum, mass: f64) -> Result<CoerciveCheck> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(invalid(format!("damping must be nonnegative and finite, got {mass}")));
    }
    for &l in spectrum_high.frequencies() {
        if l * l < 2.0 * mass * mass * (1.0 - 1e-12) {
            return Err(Error::CoercivityViolated { lambda: l, damping: mass });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut factor: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut equivalence = true;
    for &lambda in spectrum_high.frequencies() {
        let h = 1e-3 / lambda.max(mass).max(1.0);
        for _ in 0..COERCIVE_STATES {
            let s0 = ModeState::from_energy_angle(lambda, 1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let at = |t: f64| constant_transfer(lambda, mass, t).apply(s0);
            for &t in &COERCIVE_TIMES {
                let s = at(t);
                let e = energy(s, lambda);
                let eh = modified_energy(s, lambda, mass);
                factor = factor.max(e / (-2.0 * mass * t).exp());
                if !(e / 4.0 <= eh * (1.0 + 1e-12) && eh <= 2.0 * e * (1.0 + 1e-12)) {
                    equivalence = false;
                }
                let f = |k: f64| modified_energy(at(t + k * h), lambda, mass);
                let deriv = (-f(2.0) + 8.0 * f(1.0) - 8.0 * f(-1.0) + f(-2.0)) / (12.0 * h);
                residual = residual.max((deriv + 2.0 * mass * eh).abs() / eh);
            }
        }
    }
    Ok(CoerciveCheck {
        holds: factor <= 8.0 && residual <= IDENTITY_TOLERANCE && equivalence,
        measured_factor: factor,
        identity_residual: residual,
        equivalence_holds: equivalence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wave(n: usize) -> Spectrum {
        Spectrum::new((1..=n).map(|k| k as f64).collect()).unwrap()
    }

    #[test]
    fn split_for_wave_spectrum() {
        let s = wave(50);
        assert_eq!(spectral_split(&s, 1.0).unwrap(), 2);
        let d = design_pde_exponential(&s, 1.0).unwrap();
        assert!((d.split.t_r - 3.0 * PI / 4.0).abs() < 1e-14);
        assert!((d.design.t0 - 1.5 * PI).abs() < 1e-13);
        assert!((d.design.profile.period() - d.design.t0).abs() < 1e-12);
        assert_eq!(d.split.level, 2.0);
    }

    #[test]
    fn single_low_mode() {
        let s = Spectrum::new(vec![1.0, 5.0, 6.0]).unwrap();
        let low = spectral_split(&s, 0.5).unwrap();
        assert_eq!(low, 1);
        let t_r = s.quarter_rotation_time(low);
        assert!((2.0 * s.first() * t_r - PI).abs() < 1e-15);
    }

    #[test]
    fn all_low_is_rejected() {
        let err = design_pde_exponential(&wave(4), 2.0).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
        assert!(err.to_string().starts_with("spectrum truncation insufficient"));
    }

    #[test]
    fn coercive_examples() {
        let c = verify_coercive_decay(&Spectrum::single(2.0).unwrap(), 1.0).unwrap();
        assert!(c.holds, "{c:?}");
        let edge = verify_coercive_decay(&Spectrum::single(SQRT_2).unwrap(), 1.0).unwrap();
        assert!(edge.holds, "{edge:?}");
        let zero = verify_coercive_decay(&Spectrum::single(3.0).unwrap(), 0.0).unwrap();
        assert!(zero.holds && zero.measured_factor <= 1.0 + 1e-12);
        let err = verify_coercive_decay(&Spectrum::single(1.0).unwrap(), 1.0).unwrap_err();
        assert!(err.to_string().starts_with("coercivity violated"));
    }
}
