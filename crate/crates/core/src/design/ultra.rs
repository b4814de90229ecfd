use super::bipulse::{BipulseBlock, CalibrationOptions};
use super::envelope::Envelope;
use super::pde::pde_block;
use crate::analysis::{DecayBound, DecayCertificate};
use crate::error::{Error, Result};
use crate::profile::{DampingProfile, Segment};
use crate::spectra::{first_high_index, pde_schedule_table, ScheduleTable};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UltraOptions {
    pub calibration: CalibrationOptions,
    pub common_n: bool,
    /// Required number of blocks; `None` builds as many as calibration allows.
    pub max_blocks: Option<usize>,
}

/// Block `n` of the schedule: rate `R_n` on `[S_{n-1}, S_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UltraBlock {
    pub n: usize,
    pub rate: f64,
    pub start: f64,
    pub t_r: f64,
    pub level: f64,
    pub pulses: Vec<BipulseBlock>,
}

#[derive(Debug, Clone)]
pub struct UltraDesign {
    pub profile: DampingProfile,
    pub certificate: DecayCertificate,
    /// Schedule rows `n0 - 1 ..= n_last` for the blocks actually built.
    pub table: ScheduleTable,
    /// `phi = e^{-U_n}` on `[S_n, S_{n+1})`.
    pub envelope: Envelope,
    pub blocks: Vec<UltraBlock>,
}

impl UltraDesign {
    /// End of the last block: the certificate is established up to here.
    pub fn horizon(&self) -> f64 {
        self.table.rows.last().map_or(0.0, |r| r.s)
    }
}

/// Concatenates spectral-split blocks with rates `R_n = lambda_n / sqrt 2 - lambda_1`,
/// giving energy below the step envelope `e^{-U_n}`.
pub fn design_pde_ultra(spectrum: &Spectrum, options: &UltraOptions) -> Result<UltraDesign> {
    let count = spectrum.len();
    let n0 = first_high_index(spectrum)
        .ok_or(Error::TruncationInsufficient { threshold: std::f64::consts::SQRT_2 * spectrum.first() })?;
    if count < n0 + 1 {
        return Err(Error::HorizonUnreachable { max_horizon: 0.0 });
    }
    // block n needs at least one mode above it
    let full = pde_schedule_table(spectrum, count - 1)?;
    let mut blocks = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut last_n = n0 - 1;
    for n in n0..count {
        if options.max_blocks.is_some_and(|b| blocks.len() >= b) {
            break;
        }
        let row = full.row(n).expect("row within table");
        let level = row.lambda / std::f64::consts::SQRT_2;
        let built = pde_block(spectrum, n, row.rate, level, options.calibration, options.common_n, false);
        let (pulses, segs, split) = match built {
            Ok(b) => b,
            Err(Error::CalibrationFailed { .. }) => break,
            Err(e) => return Err(e),
        };
        segments.extend(segs);
        blocks.push(UltraBlock {
            n,
            rate: row.rate,
            start: full.row(n - 1).expect("previous row").s,
            t_r: split.t_r,
            level,
            pulses,
        });
        last_n = n;
    }
    let reached = full.row(last_n).map_or(0.0, |r| r.s);
    if blocks.is_empty() || options.max_blocks.is_some_and(|b| blocks.len() < b) {
        return Err(Error::HorizonUnreachable { max_horizon: reached });
    }
    let table = ScheduleTable { n0, rows: full.rows.iter().filter(|r| r.n <= last_n).copied().collect() };
    let envelope = Envelope::from_ln(&table.rows.iter().map(|r| (r.s, r.ln_phi())).collect::<Vec<_>>())?;
    Ok(UltraDesign {
        profile: DampingProfile::once(segments)?,
        certificate: DecayCertificate::claim(DecayBound::Envelope { envelope: envelope.clone(), valid_from: 0.0 }),
        table,
        envelope,
        blocks,
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
    fn wave_schedule_and_reach() {
        let d = design_pde_ultra(&wave(20), &UltraOptions { max_blocks: Some(3), ..Default::default() }).unwrap();
        assert_eq!(d.table.n0, 2);
        assert_eq!(d.blocks.len(), 3);
        assert!((d.blocks[0].t_r - 0.75 * PI).abs() < 1e-14);
        assert!((d.profile.period() - d.horizon()).abs() < 1e-9 * d.horizon());
        for b in &d.blocks {
            let row = d.table.row(b.n).unwrap();
            assert!((b.start + 2.0 * b.t_r - row.s).abs() < 1e-12 * row.s);
        }
    }

    #[test]
    fn cap_limits_reach() {
        let calibration = CalibrationOptions::default().with_cap(1 << 12);
        let d = design_pde_ultra(&wave(20), &UltraOptions { calibration, ..Default::default() }).unwrap();
        assert!(d.blocks.len() < 18);
        let err = design_pde_ultra(&wave(20), &UltraOptions { calibration, max_blocks: Some(18), ..Default::default() })
            .unwrap_err();
        match err {
            Error::HorizonUnreachable { max_horizon } => assert!((max_horizon - d.horizon()).abs() < 1e-9),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn too_short_spectrum() {
        assert!(matches!(design_pde_ultra(&wave(2), &UltraOptions::default()), Err(Error::HorizonUnreachable { .. })));
    }
}
