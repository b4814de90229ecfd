use std::f64::consts::LN_2;

use super::bipulse::{calibrate_bipulse, quarter_period, BipulseBlock, CalibrationOptions};
use super::envelope::Envelope;
use super::mollify::{mollify, MollifiedProfile};
use super::{Design, RateSchedule, RateTarget};
use crate::analysis::{DecayBound, DecayCertificate};
use crate::error::{invalid, Result};
use crate::profile::DampingProfile;

/// Mass whose block factor `2 e^{-M}` equals `e^{-R t0}`.
pub fn exponential_mass(rate: f64, t0: f64) -> f64 {
    rate * t0 + LN_2
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("rate must be positive and finite, got {rate}")));
    }
    Ok(())
}

/// Smallest masses (never below `ln 2`) for which `blocks` consecutive blocks of
/// length `t0` keep the energy under the envelope.
pub fn envelope_masses(envelope: &Envelope, t0: f64, blocks: usize) -> Result<Vec<f64>> {
    if blocks == 0 {
        return Err(invalid("at least one block is required"));
    }
    Ok((0..blocks)
        .map(|k| {
            let before = if k == 0 { 0.0 } else { envelope.ln_value((k + 1) as f64 * t0) };
            let after = envelope.ln_value((k + 2) as f64 * t0);
            (LN_2 + before - after).max(LN_2)
        })
        .collect())
}

pub fn design_ode_exponential(lambda: f64, rate: f64) -> Result<Design> {
    design_ode_exponential_with(lambda, rate, CalibrationOptions::default())
}

/// Periodic bipulse with energy certificate `exp(-R (t - t0)^+)`.
pub fn design_ode_exponential_with(lambda: f64, rate: f64, options: CalibrationOptions) -> Result<Design> {
    check_rate(rate)?;
    let t0 = quarter_period(lambda);
    let mass = exponential_mass(rate, t0);
    let block = calibrate_bipulse(lambda, mass, options)?;
    Ok(Design {
        profile: block.periodic_profile(),
        certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
        t0,
        blocks: vec![block],
        schedule: Some(RateSchedule { target: RateTarget::Exponential(rate), block_length: t0, block_masses: vec![mass] }),
    })
}

pub fn design_ode_any_rate(lambda: f64, envelope: &Envelope, blocks: usize) -> Result<Design> {
    design_ode_any_rate_with(lambda, envelope, blocks, CalibrationOptions::default())
}

/// Concatenation of `blocks` bipulses keeping `E(t) <= E(0) phi(t)` for `t >= t0`.
pub fn design_ode_any_rate_with(
    lambda: f64,
    envelope: &Envelope,
    blocks: usize,
    options: CalibrationOptions,
) -> Result<Design> {
    let t0 = quarter_period(lambda);
    let masses = envelope_masses(envelope, t0, blocks)?;
    let calibrated: Vec<BipulseBlock> =
        masses.iter().map(|&m| calibrate_bipulse(lambda, m, options)).collect::<Result<_>>()?;
    let segments = calibrated.iter().flat_map(|b| b.segments()).collect();
    Ok(Design {
        profile: DampingProfile::once(segments)?,
        certificate: DecayCertificate::claim(DecayBound::Envelope { envelope: envelope.clone(), valid_from: t0 }),
        t0,
        blocks: calibrated,
        schedule: Some(RateSchedule {
            target: RateTarget::Envelope(envelope.clone()),
            block_length: t0,
            block_masses: masses,
        }),
    })
}

/// Largest `L^2` budget for which a smoothed profile with unsmoothed worst-case
/// factor `factor` over time `t` still reaches `target`.
pub(crate) fn smoothing_budget(factor: f64, target: f64, t: f64) -> Result<f64> {
    let room = target.sqrt() - factor.sqrt();
    if !(room > 0.0) {
        return Err(invalid("no room left for smoothing: the unsmoothed design just meets its target"));
    }
    Ok(room / (std::f64::consts::SQRT_2 * t.exp()))
}

/// Smooth variant of [`design_ode_exponential`]: pulses calibrated with the doubled
/// margin `e^{-M}`, then mollified within an `L^2` budget (automatic when `None`).
pub fn design_ode_exponential_smooth(lambda: f64, rate: f64, budget: Option<f64>) -> Result<(Design, MollifiedProfile)> {
    check_rate(rate)?;
    let t0 = quarter_period(lambda);
    let mass = exponential_mass(rate, t0);
    let block = calibrate_bipulse(lambda, mass, CalibrationOptions::default().with_margin((-mass).exp()))?;
    let budget = match budget {
        Some(b) => b,
        None => smoothing_budget(block.reduction_target, (-rate * t0).exp(), t0)?,
    };
    let smooth = mollify(&block.periodic_profile(), budget)?;
    let design = Design {
        profile: smooth.profile.clone(),
        certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
        t0,
        blocks: vec![block],
        schedule: Some(RateSchedule { target: RateTarget::Exponential(rate), block_length: t0, block_masses: vec![mass] }),
    };
    Ok((design, smooth))
}
