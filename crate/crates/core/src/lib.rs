//! Time-dependent damping design for families of oscillators
//! `u_k'' + 2 delta(t) u_k' + lambda_k^2 u_k = 0`, with simulation-side
//! certification of the resulting energy decay.
//!
//! - [`mode`], [`profile`]: exact and adaptive propagation of one mode.
//! - [`design`]: damping profiles with decay guarantees (pulse blocks, system
//!   and spectral-split designs, Lipschitz ramps, smoothed variants).
//! - [`analysis`]: certification by simulation, lower bounds, slow solutions.
//! - [`spectra`]: model spectra and schedule tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod design;
pub mod error;
pub mod integrate;
pub mod mode;
pub mod par;
pub mod profile;
pub mod spectra;
pub mod spectrum;

pub use error::{Error, Result};
pub use mode::{energy, propagate_constant, ModeState, Transfer};
pub use par::Exec;
pub use profile::{propagate_profile, propagate_segment, DampingProfile, Sample, Segment, SegmentKind, Trajectory};
pub use spectrum::Spectrum;
