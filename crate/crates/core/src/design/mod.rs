//! Damping profiles with guaranteed decay.

mod bipulse;
mod envelope;
mod lipschitz;
mod mollify;
mod ode;
mod pde;
mod system;
mod ultra;

pub use bipulse::{
    bipulse_transfer, calibrate_bipulse, fundamental_energies, quarter_period, search_floor, BipulseBlock,
    CalibrationOptions, DEFAULT_CAP,
};
pub use envelope::Envelope;
pub use lipschitz::{design_lipschitz, riccati_special_solution, LipschitzDesign, SpecialSolution};
pub use mollify::{mollify, transition_constant, MollifiedProfile};
pub use ode::{
    design_ode_any_rate, design_ode_any_rate_with, design_ode_exponential, design_ode_exponential_smooth,
    design_ode_exponential_with, envelope_masses, exponential_mass,
};
pub use pde::{
    design_pde_exponential, design_pde_exponential_smooth, design_pde_exponential_with, spectral_split,
    verify_coercive_decay, CoerciveCheck, PdeDesign, PdeOptions, SpectralSplit,
};
pub use system::{design_system, design_system_any, SystemOptions};
pub use ultra::{design_pde_ultra, UltraBlock, UltraDesign, UltraOptions};

use crate::analysis::DecayCertificate;
use crate::profile::DampingProfile;

/// Decay target of a block schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum RateTarget {
    Exponential(f64),
    Envelope(Envelope),
}

/// Block masses chosen for a target, one per block of length `block_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    pub target: RateTarget,
    pub block_length: f64,
    pub block_masses: Vec<f64>,
}

impl RateSchedule {
    /// Re-checks that every mass meets its defining inequality.
    pub fn is_consistent(&self) -> bool {
        let t0 = self.block_length;
        let slack = 1e-12;
        let ln2 = std::f64::consts::LN_2;
        self.block_masses.iter().enumerate().all(|(k, &m)| {
            if m < ln2 - slack {
                return false;
            }
            match &self.target {
                RateTarget::Exponential(r) => ln2 - m <= -r * t0 + slack,
                RateTarget::Envelope(env) => {
                    let lhs = if k == 0 { 0.0 } else { env.ln_value((k + 1) as f64 * t0) };
                    lhs + ln2 - m <= env.ln_value((k + 2) as f64 * t0) + slack
                }
            }
        })
    }
}

/// A designed profile together with its decay claim.
#[derive(Debug, Clone)]
pub struct Design {
    pub profile: DampingProfile,
    /// Unchecked claim; run [`crate::analysis::certify`] to fill in margins.
    pub certificate: DecayCertificate,
    /// Length of one block (or one period for periodic designs).
    pub t0: f64,
    /// Pulse blocks in profile order.
    pub blocks: Vec<BipulseBlock>,
    pub schedule: Option<RateSchedule>,
}
