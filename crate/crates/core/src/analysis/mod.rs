//! Simulation-side certification, lower bounds and slow solutions.

mod bounds;
mod certify;
mod slow;

pub use bounds::{energy_lower_bound, smoothing_deviation_bound};
pub use certify::{
    certify, random_states, CertifyOptions, DecayBound, DecayCertificate, CERTIFY_TOLERANCE, DEFAULT_SEED,
};
pub use slow::{construct_slow_solution, RiccatiNode, SlowSolution};
