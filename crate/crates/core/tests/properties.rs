use approx::assert_relative_eq;
use proptest::prelude::*;
use pulsedamp::analysis::{certify, energy_lower_bound, CertifyOptions};
use pulsedamp::design::{
    calibrate_bipulse, design_lipschitz, design_ode_exponential, design_system, envelope_masses, fundamental_energies,
    quarter_period, search_floor, CalibrationOptions, Envelope, RateSchedule, RateTarget, SystemOptions,
};
use pulsedamp::mode::{energy, propagate_constant, ModeState};
use pulsedamp::profile::{propagate_profile, DampingProfile, Segment};
use pulsedamp::spectra::{model_spectrum, pde_schedule_table, Equation, ModelOperator};
use pulsedamp::Spectrum;

/// Classical fixed-step RK4 on `u'' + 2 delta u' + lambda^2 u = 0`.
fn rk4_oracle(s: ModeState, lambda: f64, delta: f64, dt: f64) -> ModeState {
    let f = |y: [f64; 2]| [y[1], -lambda * lambda * y[0] - 2.0 * delta * y[1]];
    let steps = ((dt * lambda.max(delta).max(1.0)) / 2e-4).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut y = [s.u, s.v];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ModeState::new(y[0], y[1])
}

fn energy_distance(a: ModeState, b: ModeState, lambda: f64) -> f64 {
    energy(ModeState::new(a.u - b.u, a.v - b.v), lambda).sqrt()
}

fn segment() -> impl Strategy<Value = Segment> {
    prop_oneof![
        (0.0..6.0, 0.05..2.0).prop_map(|(v, d)| Segment::constant(v, d)),
        (0.0..6.0, -2.0..3.0, 0.05..2.0).prop_map(|(s, k, d): (f64, f64, f64)| {
            let k = if s + k * d < 0.0 { -s / d } else { k };
            Segment::ramp(s, k, d)
        }),
    ]
}

fn state() -> impl Strategy<Value = ModeState> {
    (-2.0..2.0, -2.0..2.0).prop_filter("nonzero", |(u, v): &(f64, f64)| u.abs() + v.abs() > 1e-3).prop_map(|(u, v)| ModeState::new(u, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_nonincreasing(segs in prop::collection::vec(segment(), 1..5), s in state(), lambda in 0.2..5.0, periodic: bool) {
        let p = DampingProfile::new(segs, periodic).unwrap();
        let traj = propagate_profile(s, lambda, &p, 2.5 * p.period()).unwrap();
        for w in traj.windows(2) {
            let (a, b) = (energy(w[0].state, lambda), energy(w[1].state, lambda));
            prop_assert!(b <= a * (1.0 + 1e-9), "{a} -> {b}");
        }
    }

    #[test]
    fn energy_stays_above_lower_bound(segs in prop::collection::vec(segment(), 1..4), s in state(), lambda in 0.2..4.0) {
        let p = DampingProfile::periodic(segs).unwrap();
        let e0 = energy(s, lambda);
        for sample in propagate_profile(s, lambda, &p, 2.0 * p.period()).unwrap() {
            let e = energy(sample.state, lambda);
            prop_assert!(e >= energy_lower_bound(&p, sample.t) * e0 * (1.0 - 1e-9));
            prop_assert!(e <= e0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn continuous_across_critical_damping(s in state(), lambda in 0.2..5.0, dt in 0.01..3.0) {
        let base = propagate_constant(s, lambda, lambda, dt).unwrap();
        for delta in [lambda - 1e-6, lambda + 1e-6] {
            let x = propagate_constant(s, lambda, delta, dt).unwrap();
            prop_assert!((x.u - base.u).abs() <= 1e-4 && (x.v - base.v).abs() <= 1e-4);
        }
    }

    #[test]
    fn propagation_is_linear(segs in prop::collection::vec(segment(), 1..4), s1 in state(), s2 in state(), a in -3.0..3.0, b in -3.0..3.0, lambda in 0.2..4.0) {
        let p = DampingProfile::periodic(segs).unwrap();
        let t = 1.5 * p.period();
        let end = |s| propagate_profile(s, lambda, &p, t).unwrap().last().unwrap().state;
        let combo = end(s1.scale(a) + s2.scale(b));
        let sep = end(s1).scale(a) + end(s2).scale(b);
        let scale = energy(end(s1).scale(a), lambda).sqrt() + energy(end(s2).scale(b), lambda).sqrt();
        prop_assert!(energy_distance(combo, sep, lambda) <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn closed_form_matches_rk4(s in state(), lambda in 0.2..5.0, delta in 0.0..8.0, dt in 0.01..3.0) {
        let exact = propagate_constant(s, lambda, delta, dt).unwrap();
        let oracle = rk4_oracle(s, lambda, delta, dt);
        let size = energy(oracle, lambda).sqrt();
        prop_assert!(energy_distance(exact, oracle, lambda) <= 1e-8 * size, "{exact:?} vs {oracle:?}");
    }

    #[test]
    fn semigroup(s in state(), lambda in 0.2..5.0, delta in 0.0..8.0, t1 in 0.0..2.0, t2 in 0.0..2.0) {
        let once = propagate_constant(s, lambda, delta, t1 + t2).unwrap();
        let twice = propagate_constant(propagate_constant(s, lambda, delta, t1).unwrap(), lambda, delta, t2).unwrap();
        let size = energy(once, lambda).sqrt();
        prop_assert!(energy_distance(once, twice, lambda) <= 1e-10 * size.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn calibration_is_minimal(lambda in 0.3..4.0, mass in 0.1..8.0) {
        let b = calibrate_bipulse(lambda, mass, CalibrationOptions::default()).unwrap();
        let thr = (-mass).exp();
        let (ev, ew) = b.fundamental_energies();
        prop_assert!(ev <= thr && ew <= thr);
        let below = (b.n - 1).max(search_floor(lambda));
        if below < b.n {
            let (pv, pw) = fundamental_energies(lambda, mass, below);
            prop_assert!(pv > thr || pw > thr);
        }
    }

    #[test]
    fn ode_certificate_sound(lambda in 0.3..3.0, rate in 0.1..2.0) {
        let d = design_ode_exponential(lambda, rate).unwrap();
        let s = Spectrum::single(lambda).unwrap();
        let c = certify(&d.profile, &s, &d.certificate.bound, &CertifyOptions::new(5.0 * d.t0, 64)).unwrap();
        prop_assert!(c.verified, "{c:?}");
        prop_assert!(c.worst_case_margin >= 1.0 - 1e-6);
    }

    #[test]
    fn system_certificate_sound(freqs in prop::collection::btree_set(1u32..40, 1..4), rate in 0.1..1.5, common_n: bool) {
        let s = Spectrum::new(freqs.iter().map(|&k| k as f64 / 8.0 + 0.2).collect()).unwrap();
        let d = design_system(&s, rate, SystemOptions { common_n, ..Default::default() }).unwrap();
        let c = certify(&d.profile, &s, &d.certificate.bound, &CertifyOptions::new(5.0 * d.t0, 64)).unwrap();
        prop_assert!(c.verified, "{c:?}");
    }

    #[test]
    fn lipschitz_profile_shape(lambda in 0.5..3.0, frac in 0.1..0.9, rate in 0.1..1.0) {
        let eps = frac * lambda;
        let d = design_lipschitz(lambda, rate, eps).unwrap();
        let p = &d.profile;
        let n = 20_000;
        let h = p.period() / n as f64;
        let mut prev = p.value_at(0.0);
        for i in 1..=n {
            let v = p.value_at(i as f64 * h);
            prop_assert!(v >= lambda - eps - 1e-9);
            prop_assert!((v - prev).abs() <= eps * h * (1.0 + 1e-6) + 1e-12);
            prev = v;
        }
        prop_assert!(d.t0 <= d.period_bound());
    }

    #[test]
    fn envelope_masses_are_consistent(decay in prop::collection::vec(0.0..3.0, 10), t0 in 0.2..2.0) {
        let mut ln = 0.0;
        let pts: Vec<(f64, f64)> = decay.iter().enumerate().map(|(k, d)| { ln -= d; (k as f64 * t0, ln) }).collect();
        let env = Envelope::from_ln(&pts).unwrap();
        let masses = envelope_masses(&env, t0, 8).unwrap();
        let sched = RateSchedule { target: RateTarget::Envelope(env), block_length: t0, block_masses: masses };
        prop_assert!(sched.is_consistent());
    }

    #[test]
    fn schedule_tables_keep_bookkeeping(dim in 1u32..4, beam: bool, count in 8usize..80) {
        let eq = if beam { Equation::Beam } else { Equation::Wave };
        let spectrum = model_spectrum(&ModelOperator::new(eq, dim, count)).unwrap();
        if let Ok(t) = pde_schedule_table(&spectrum, count) {
            prop_assert!(t.bookkeeping_holds());
            prop_assert!(t.is_monotone());
            prop_assert_eq!(t.rows[0].s, 0.0);
        }
    }
}

#[test]
fn rk4_oracle_is_accurate_on_critical_case() {
    let s = rk4_oracle(ModeState::new(1.0, 0.0), 1.0, 1.0, 1.0);
    assert_relative_eq!(s.u, 2.0 / std::f64::consts::E, max_relative = 1e-10);
    assert!(quarter_period(2.0) > 0.0);
}
