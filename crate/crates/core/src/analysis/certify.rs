use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::Envelope;
use crate::error::{invalid, Result};
use crate::mode::{ModeState, Transfer};
use crate::par::{self, Exec};
use crate::profile::{segment_transfer, DampingProfile, ProfileTransfers, WalkItem};
use crate::spectrum::Spectrum;

/// Default seed for the random initial states.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Relative slack allowed when comparing simulated energies with a claimed bound.
pub const CERTIFY_TOLERANCE: f64 = 1e-6;

/// Claimed decay `E(t) <= E(0) * bound(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayBound {
    /// No decay claimed.
    Unit,
    /// `exp(-rate * (t - offset)^+)`.
    Exponential { rate: f64, offset: f64 },
    /// `phi(t)` for `t >= valid_from`, 1 before.
    Envelope { envelope: Envelope, valid_from: f64 },
}

impl DecayBound {
    pub fn exponential(rate: f64, offset: f64) -> Self {
        DecayBound::Exponential { rate, offset }
    }

    pub fn ln_value(&self, t: f64) -> f64 {
        match self {
            DecayBound::Unit => 0.0,
            DecayBound::Exponential { rate, offset } => -rate * (t - offset).max(0.0),
            DecayBound::Envelope { envelope, valid_from } => {
                if t < *valid_from {
                    0.0
                } else {
                    envelope.ln_value(t).min(0.0)
                }
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub bound: DecayBound,
    /// Smallest `bound(t) E(0) / E(t)` over the sampled states and checked times.
    pub measured_margin: f64,
    /// Same ratio minimised over every initial state, from the exact transfer norms.
    pub worst_case_margin: f64,
    /// Time at which `measured_margin` is attained.
    pub critical_time: f64,
    pub checked_times: usize,
    pub horizon: f64,
    pub batch: usize,
    pub seed: u64,
    pub verified: bool,
}

impl DecayCertificate {
    /// An unchecked claim.
    pub fn claim(bound: DecayBound) -> Self {
        Self {
            bound,
            measured_margin: f64::NAN,
            worst_case_margin: f64::NAN,
            critical_time: f64::NAN,
            checked_times: 0,
            horizon: 0.0,
            batch: 0,
            seed: 0,
            verified: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub horizon: f64,
    pub batch: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl CertifyOptions {
    pub fn new(horizon: f64, batch: usize) -> Self {
        Self { horizon, batch, seed: DEFAULT_SEED, exec: Exec::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// Random initial data with unit total energy: every mode gets the same energy
/// share at a uniformly random phase angle.
pub fn random_states(spectrum: &Spectrum, batch: usize, seed: u64) -> Vec<Vec<ModeState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let share = 1.0 / spectrum.len() as f64;
    (0..batch)
        .map(|_| {
            spectrum
                .frequencies()
                .iter()
                .map(|&l| ModeState::from_energy_angle(l, share, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect()
        })
        .collect()
}

/// Per-step transfers of every mode along a walk of the profile.
struct Schedule {
    times: Vec<f64>,
    /// `steps[mode][i]` is the transfer of mode `mode` over step `i`.
    steps: Vec<Vec<Transfer>>,
}

fn build_schedule(profile: &DampingProfile, spectrum: &Spectrum, horizon: f64, exec: Exec) -> Result<Schedule> {
    let items: Vec<WalkItem> = profile.walk(horizon).collect();
    let times = items.iter().map(|w| w.start + w.segment.duration).collect();
    let per_mode = par::map(exec, spectrum.frequencies(), |&lambda| -> Result<Vec<Transfer>> {
        let cache = ProfileTransfers::new(profile, lambda)?;
        items
            .iter()
            .map(|w| match w.index {
                Some(i) => Ok(cache.transfers()[i]),
                None => segment_transfer(lambda, &w.segment),
            })
            .collect()
    });
    Ok(Schedule { times, steps: per_mode.into_iter().collect::<Result<_>>()? })
}

/// Energies below this are renormalised.
const RESCALE_BELOW: f64 = 1e-100;

/// Minimum log-margin along one initial state, with the time where it occurs.
fn state_margin(schedule: &Schedule, bound: &DecayBound, lambdas: &[f64], init: &[ModeState]) -> (f64, f64) {
    let mut states = init.to_vec();
    let e0: f64 = states.iter().zip(lambdas).map(|(s, &l)| crate::mode::energy(*s, l)).sum();
    let mut ln_scale = 0.0;
    let mut worst = (f64::INFINITY, f64::NAN);
    for (i, &t) in schedule.times.iter().enumerate() {
        let mut e = 0.0;
        for (m, s) in states.iter_mut().enumerate() {
            *s = schedule.steps[m][i].apply(*s);
            e += crate::mode::energy(*s, lambdas[m]);
        }
        let ln_e = if e > 0.0 { e.ln() + ln_scale } else { f64::NEG_INFINITY };
        let margin = bound.ln_value(t) + e0.ln() - ln_e;
        if margin < worst.0 || margin.is_nan() {
            worst = (margin, t);
        }
        if e > 0.0 && e < RESCALE_BELOW {
            let k = e.sqrt().recip();
            for s in states.iter_mut() {
                *s = s.scale(k);
            }
            ln_scale += e.ln();
        }
    }
    worst
}

/// Log-margin over all initial states: `ln bound(t) - ln max_k gain_k(t)`.
fn worst_case_ln_margin(schedule: &Schedule, bound: &DecayBound, lambdas: &[f64], exec: Exec) -> f64 {
    let idx: Vec<usize> = (0..lambdas.len()).collect();
    let per_mode = par::map(exec, &idx, |&m| {
        let mut acc = Transfer::IDENTITY;
        let mut ln_scale = 0.0;
        let mut ln_gains = Vec::with_capacity(schedule.times.len());
        for step in &schedule.steps[m] {
            acc = acc.then(step);
            let big = acc.max_abs();
            if big > 0.0 && !(1e-100..=1e100).contains(&big) {
                acc = acc.scale(1.0 / big);
                ln_scale += 2.0 * big.ln();
            }
            ln_gains.push(acc.max_energy_gain(lambdas[m]).ln() + ln_scale);
        }
        ln_gains
    });
    schedule
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let g = per_mode.iter().map(|g| g[i]).fold(f64::NEG_INFINITY, f64::max);
            bound.ln_value(t) - g
        })
        .fold(f64::INFINITY, f64::min)
}

/// Checks `E(t) <= E(0) bound(t)` at every segment boundary in `(0, horizon]` for
/// a batch of random unit-energy initial states spread over all modes.
pub fn certify(
    profile: &DampingProfile,
    spectrum: &Spectrum,
    bound: &DecayBound,
    options: &CertifyOptions,
) -> Result<DecayCertificate> {
    let horizon = options.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    if profile.is_periodic() && horizon < profile.period() * (1.0 - 1e-12) {
        return Err(invalid(format!("horizon {horizon} is shorter than one period ({})", profile.period())));
    }
    if options.batch == 0 {
        return Err(invalid("batch must be at least 1"));
    }
    let schedule = build_schedule(profile, spectrum, horizon, options.exec)?;
    let lambdas = spectrum.frequencies();
    let states = random_states(spectrum, options.batch, options.seed);
    let margins = par::map(options.exec, &states, |init| state_margin(&schedule, bound, lambdas, init));
    let (ln_margin, critical_time) = margins
        .into_iter()
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let ln_worst = worst_case_ln_margin(&schedule, bound, lambdas, options.exec);
    if ln_margin.is_nan() {
        return Err(crate::error::Error::NonFiniteState);
    }
    Ok(DecayCertificate {
        bound: bound.clone(),
        measured_margin: ln_margin.exp(),
        worst_case_margin: ln_worst.exp(),
        critical_time,
        checked_times: schedule.times.len(),
        horizon,
        batch: options.batch,
        seed: options.seed,
        verified: ln_margin >= (1.0 - CERTIFY_TOLERANCE).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Segment;

    #[test]
    fn unit_bound_always_verified() {
        let p = DampingProfile::periodic(vec![Segment::constant(0.3, 0.7), Segment::constant(0.0, 1.1)]).unwrap();
        let s = Spectrum::new(vec![1.0, 2.5]).unwrap();
        let c = certify(&p, &s, &DecayBound::Unit, &CertifyOptions::new(10.0, 16)).unwrap();
        assert!(c.verified);
        assert!(c.measured_margin >= 1.0 - 1e-12);
        assert!(c.worst_case_margin <= c.measured_margin * (1.0 + 1e-9));
    }

    #[test]
    fn too_strong_claim_fails() {
        let p = DampingProfile::constant(0.1).unwrap();
        let s = Spectrum::single(1.0).unwrap();
        let c = certify(&p, &s, &DecayBound::exponential(5.0, 0.0), &CertifyOptions::new(4.0, 8)).unwrap();
        assert!(!c.verified);
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let p = DampingProfile::periodic(vec![Segment::constant(2.0, 0.2), Segment::ramp(0.0, 1.0, 1.0)]).unwrap();
        let s = Spectrum::new(vec![1.0, 1.5, 3.0]).unwrap();
        let b = DecayBound::exponential(0.1, 1.0);
        let a = certify(&p, &s, &b, &CertifyOptions::new(6.0, 32).with_exec(Exec::Sequential)).unwrap();
        let c = certify(&p, &s, &b, &CertifyOptions::new(6.0, 32).with_exec(Exec::Parallel)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn random_states_have_unit_energy() {
        let s = Spectrum::new(vec![1.0, 2.0, 7.0]).unwrap();
        for st in random_states(&s, 10, 1) {
            let e: f64 = st.iter().zip(s.frequencies()).map(|(x, &l)| crate::mode::energy(*x, l)).sum();
            assert!((e - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn envelope_bound_lookup() {
        let env = Envelope::new(&[(0.0, 1.0), (2.0, 0.5)]).unwrap();
        let b = DecayBound::Envelope { envelope: env, valid_from: 1.0 };
        assert_eq!(b.value(0.5), 1.0);
        assert_eq!(b.value(1.5), 1.0);
        assert!((b.value(2.5) - 0.5).abs() < 1e-15);
    }
}
