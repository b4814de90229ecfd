use super::bipulse::{calibrate_bipulse, fundamental_energies, BipulseBlock, CalibrationOptions};
use super::envelope::Envelope;
use super::ode::{check_rate, envelope_masses, exponential_mass};
use super::{Design, RateSchedule, RateTarget};
use crate::analysis::{DecayBound, DecayCertificate};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::profile::{DampingProfile, Segment};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemOptions {
    pub calibration: CalibrationOptions,
    /// Use one pulse refinement `n` for every mode.
    pub common_n: bool,
}

/// One block per frequency, all with pulse mass `mass`.
pub(crate) fn calibrate_group(
    lambdas: &[f64],
    mass: f64,
    options: CalibrationOptions,
    common_n: bool,
) -> Result<Vec<BipulseBlock>> {
    let blocks: Vec<BipulseBlock> =
        par::map(Exec::default(), lambdas, |&l| calibrate_bipulse(l, mass, options)).into_iter().collect::<Result<_>>()?;
    if !common_n {
        return Ok(blocks);
    }
    let threshold = options.margin * (-mass).exp();
    let meets = |n: u64| {
        lambdas.iter().all(|&l| {
            let (ev, ew) = fundamental_energies(l, mass, n);
            ev <= threshold && ew <= threshold
        })
    };
    let mut n = blocks.iter().map(|b| b.n).max().expect("nonempty spectrum");
    while !meets(n) {
        if n >= options.cap {
            return Err(Error::CalibrationFailed { lambda: lambdas[0], mass, cap: options.cap });
        }
        n = n.saturating_mul(2).min(options.cap);
    }
    lambdas.iter().map(|&l| BipulseBlock::new(l, mass, n, options.margin)).collect()
}

fn group_segments(blocks: &[BipulseBlock]) -> Vec<Segment> {
    blocks.iter().flat_map(|b| b.segments()).collect()
}

/// Period `(pi/2) sum 1/lambda_k` split into one bipulse block per mode; certificate
/// `exp(-R (t - t0)^+)` for the total energy.
pub fn design_system(spectrum: &Spectrum, rate: f64, options: SystemOptions) -> Result<Design> {
    check_rate(rate)?;
    let t0 = spectrum.quarter_rotation_time(spectrum.len());
    let mass = exponential_mass(rate, t0);
    let blocks = calibrate_group(spectrum.frequencies(), mass, options.calibration, options.common_n)?;
    Ok(Design {
        profile: DampingProfile::periodic(group_segments(&blocks))?,
        certificate: DecayCertificate::claim(DecayBound::exponential(rate, t0)),
        t0,
        blocks,
        schedule: Some(RateSchedule { target: RateTarget::Exponential(rate), block_length: t0, block_masses: vec![mass] }),
    })
}

/// `periods` consecutive system periods with masses chosen from the envelope.
pub fn design_system_any(spectrum: &Spectrum, envelope: &Envelope, periods: usize, options: SystemOptions) -> Result<Design> {
    let t0 = spectrum.quarter_rotation_time(spectrum.len());
    let masses = envelope_masses(envelope, t0, periods)?;
    let mut blocks = Vec::new();
    for &m in &masses {
        blocks.extend(calibrate_group(spectrum.frequencies(), m, options.calibration, options.common_n)?);
    }
    Ok(Design {
        profile: DampingProfile::once(group_segments(&blocks))?,
        certificate: DecayCertificate::claim(DecayBound::Envelope { envelope: envelope.clone(), valid_from: t0 }),
        t0,
        blocks,
        schedule: Some(RateSchedule {
            target: RateTarget::Envelope(envelope.clone()),
            block_length: t0,
            block_masses: masses,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{design_ode_exponential, quarter_period};
    use std::f64::consts::PI;

    fn block_lengths_sum(blocks: &[BipulseBlock]) -> f64 {
        blocks.iter().map(|b| quarter_period(b.lambda)).sum()
    }

    #[test]
    fn two_mode_period() {
        let s = Spectrum::new(vec![1.0, 2.0]).unwrap();
        let d = design_system(&s, 1.0, SystemOptions::default()).unwrap();
        assert!((d.t0 - 3.0 * PI / 4.0).abs() < 1e-14);
        assert!((d.profile.period() - d.t0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_matches_ode_design() {
        let s = Spectrum::single(1.0).unwrap();
        let a = design_system(&s, 1.0, SystemOptions::default()).unwrap();
        let b = design_ode_exponential(1.0, 1.0).unwrap();
        assert_eq!(a.profile, b.profile);
        assert_eq!(a.t0, b.t0);
    }

    #[test]
    fn common_n_is_shared_and_valid() {
        let s = Spectrum::new(vec![1.0, 2f64.sqrt(), 2.0]).unwrap();
        let d = design_system(&s, 0.5, SystemOptions { common_n: true, ..Default::default() }).unwrap();
        let n = d.blocks[0].n;
        assert!(d.blocks.iter().all(|b| b.n == n));
        for b in &d.blocks {
            let (ev, ew) = b.fundamental_energies();
            let thr = (-b.mass).exp();
            assert!(ev <= thr && ew <= thr);
        }
        assert!((block_lengths_sum(&d.blocks) - d.t0).abs() < 1e-12);
    }
}
