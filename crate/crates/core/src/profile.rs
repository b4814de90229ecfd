//! Piecewise damping profiles and propagation of a single mode through them.

use crate::error::{invalid, Result};
use crate::integrate::{integrate, Tolerance};
use crate::mode::{check_mode_args, constant_transfer, ModeState, Transfer};

/// C-infinity step from 0 to 1 on `[0, 1]`, flat to all orders at both ends.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    let a = f(s);
    let b = f(1.0 - s);
    a / (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    Constant { value: f64 },
    /// `delta(tau) = start + slope * tau`.
    Ramp { start: f64, slope: f64 },
    /// Portion `[phase_start, phase_end]` of a smooth transition `from -> to`.
    Blend { from: f64, to: f64, phase_start: f64, phase_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

impl Segment {
    pub fn constant(value: f64, duration: f64) -> Self {
        Self { kind: SegmentKind::Constant { value }, duration }
    }

    pub fn ramp(start: f64, slope: f64, duration: f64) -> Self {
        Self { kind: SegmentKind::Ramp { start, slope }, duration }
    }

    pub fn blend(from: f64, to: f64, phase_start: f64, phase_end: f64, duration: f64) -> Self {
        Self { kind: SegmentKind::Blend { from, to, phase_start, phase_end }, duration }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid(format!("segment duration must be positive, got {}", self.duration)));
        }
        match self.kind {
            SegmentKind::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(invalid(format!("constant damping must be >= 0, got {value}")));
                }
            }
            SegmentKind::Ramp { start, slope } => {
                if !(start >= 0.0 && start.is_finite() && slope.is_finite()) {
                    return Err(invalid(format!("ramp start must be >= 0, got {start}")));
                }
                let end = start + slope * self.duration;
                // tolerate rounding in start + slope * duration
                if end < -1e-12 * start.abs().max(1.0) {
                    return Err(invalid(format!("ramp goes below zero (end value {end})")));
                }
            }
            SegmentKind::Blend { from, to, phase_start, phase_end } => {
                if !(from >= 0.0 && to >= 0.0 && from.is_finite() && to.is_finite()) {
                    return Err(invalid("blend levels must be >= 0"));
                }
                if !(0.0 <= phase_start && phase_start < phase_end && phase_end <= 1.0) {
                    return Err(invalid("blend phase must satisfy 0 <= start < end <= 1"));
                }
            }
        }
        Ok(())
    }

    /// Damping at local time `tau` in `[0, duration]`.
    pub fn value_at(&self, tau: f64) -> f64 {
        match self.kind {
            SegmentKind::Constant { value } => value,
            SegmentKind::Ramp { start, slope } => (start + slope * tau).max(0.0),
            SegmentKind::Blend { from, to, phase_start, phase_end } => {
                let s = phase_start + (phase_end - phase_start) * (tau / self.duration);
                from + (to - from) * smooth_step(s)
            }
        }
    }

    pub fn start_value(&self) -> f64 {
        self.value_at(0.0)
    }

    pub fn end_value(&self) -> f64 {
        self.value_at(self.duration)
    }

    /// Minimum of the damping over the segment (closed form for constant and ramp).
    pub fn min_value(&self) -> f64 {
        self.start_value().min(self.end_value())
    }

    pub fn max_value(&self) -> f64 {
        self.start_value().max(self.end_value())
    }

    /// `∫_0^tau delta`, exact for constant and ramp segments.
    pub fn integral(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, self.duration);
        match self.kind {
            SegmentKind::Constant { value } => value * tau,
            SegmentKind::Ramp { start, slope } => start * tau + 0.5 * slope * tau * tau,
            SegmentKind::Blend { .. } => simpson(|x| self.value_at(x), 0.0, tau, 2048),
        }
    }

    /// `∫_0^duration delta^2`.
    pub fn square_integral(&self) -> f64 {
        match self.kind {
            SegmentKind::Constant { value } => value * value * self.duration,
            SegmentKind::Ramp { start, slope } => {
                let end = start + slope * self.duration;
                self.duration * (start * start + start * end + end * end) / 3.0
            }
            SegmentKind::Blend { .. } => {
                simpson(|x| self.value_at(x).powi(2), 0.0, self.duration, 2048)
            }
        }
    }

    /// Lipschitz constant of the damping on this segment.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            SegmentKind::Constant { .. } => 0.0,
            SegmentKind::Ramp { slope, .. } => slope.abs(),
            SegmentKind::Blend { from, to, phase_start, phase_end } => {
                // |psi'| <= 2, attained at s = 1/2
                let rate = (phase_end - phase_start) / self.duration;
                (to - from).abs() * rate * 2.0
            }
        }
    }

    /// The first `tau` of this segment.
    pub fn prefix(&self, tau: f64) -> Segment {
        let kind = match self.kind {
            SegmentKind::Blend { from, to, phase_start, phase_end } => SegmentKind::Blend {
                from,
                to,
                phase_start,
                phase_end: phase_start + (phase_end - phase_start) * (tau / self.duration),
            },
            k => k,
        };
        Segment { kind, duration: tau }
    }

    /// The part of this segment after local time `tau`.
    pub fn suffix(&self, tau: f64) -> Segment {
        let kind = match self.kind {
            SegmentKind::Constant { value } => SegmentKind::Constant { value },
            SegmentKind::Ramp { start, slope } => SegmentKind::Ramp { start: start + slope * tau, slope },
            SegmentKind::Blend { from, to, phase_start, phase_end } => SegmentKind::Blend {
                from,
                to,
                phase_start: phase_start + (phase_end - phase_start) * (tau / self.duration),
                phase_end,
            },
        };
        Segment { kind, duration: self.duration - tau }
    }
}

pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Ordered damping segments, optionally repeated with period equal to their total length.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingProfile {
    segments: Vec<Segment>,
    periodic: bool,
    period: f64,
    cumulative: Vec<f64>,
}

impl DampingProfile {
    pub fn new(segments: Vec<Segment>, periodic: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("a damping profile needs at least one segment"));
        }
        for s in &segments {
            s.validate()?;
        }
        Ok(Self::assemble(segments, periodic))
    }

    fn assemble(segments: Vec<Segment>, periodic: bool) -> Self {
        let mut cumulative = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for s in &segments {
            acc += s.duration;
            cumulative.push(acc);
        }
        Self { segments, periodic, period: acc, cumulative }
    }

    /// Start times of each segment plus the total length.
    pub fn boundaries(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn periodic(segments: Vec<Segment>) -> Result<Self> {
        Self::new(segments, true)
    }

    pub fn once(segments: Vec<Segment>) -> Result<Self> {
        Self::new(segments, false)
    }

    /// Constant damping held forever.
    pub fn constant(value: f64) -> Result<Self> {
        Self::periodic(vec![Segment::constant(value, 1.0)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Total length of the segment list (the period when periodic).
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Concatenates another profile's segments after this one's (result is non-periodic).
    pub fn concat(&self, other: &DampingProfile) -> DampingProfile {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        DampingProfile::assemble(segments, false)
    }

    /// Segment active past the end of a non-periodic list: the last value held.
    fn tail_segment(&self, duration: f64) -> Segment {
        let last = self.segments.last().expect("nonempty");
        Segment::constant(last.end_value(), duration)
    }

    /// Walks segments as `(start_time, segment)` covering `[0, t_end]`, truncating the last one.
    pub fn walk(&self, t_end: f64) -> SegmentWalk<'_> {
        SegmentWalk { profile: self, t_end, t: 0.0, k: 0, done: t_end <= 0.0 }
    }

    /// Damping at time `t >= 0`.
    pub fn value_at(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let local = if self.periodic { t.rem_euclid(self.period) } else { t };
        let mut start = 0.0;
        for s in &self.segments {
            if local < start + s.duration {
                return s.value_at(local - start);
            }
            start += s.duration;
        }
        self.segments.last().expect("nonempty").end_value()
    }

    /// `∫_0^t delta`, exact for constant/ramp segments.
    pub fn integral(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let one_period: f64 = self.segments.iter().map(|s| s.integral(s.duration)).sum();
        let (whole, local) = if self.periodic {
            let k = (t / self.period).floor();
            (k * one_period, t - k * self.period)
        } else {
            (0.0, t)
        };
        let mut acc = whole;
        let mut start = 0.0;
        for s in &self.segments {
            if local <= start {
                break;
            }
            acc += s.integral(local - start);
            start += s.duration;
        }
        if !self.periodic && local > start {
            acc += self.segments.last().expect("nonempty").end_value() * (local - start);
        }
        acc
    }

    /// Minimum damping over `[t_from, t_to]`, from exact segment extremes.
    pub fn min_on(&self, t_from: f64, t_to: f64) -> f64 {
        let mut lo = f64::INFINITY;
        for WalkItem { start, segment: seg, .. } in self.walk(t_to) {
            let end = start + seg.duration;
            if end <= t_from {
                continue;
            }
            let cut = if start < t_from { seg.suffix(t_from - start) } else { seg };
            lo = lo.min(cut.min_value());
        }
        if lo.is_infinite() {
            lo = self.value_at(t_from);
        }
        lo
    }

    /// Largest jump or slope-limited variation ratio over one period.
    pub fn lipschitz_constant(&self) -> f64 {
        let mut lip = self.segments.iter().map(Segment::lipschitz).fold(0.0, f64::max);
        let n = self.segments.len();
        let pairs = if self.periodic { n } else { n - 1 };
        for i in 0..pairs {
            let a = self.segments[i].end_value();
            let b = self.segments[(i + 1) % n].start_value();
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                lip = f64::INFINITY;
            }
        }
        lip
    }

    pub fn min_value(&self) -> f64 {
        self.segments.iter().map(Segment::min_value).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.segments.iter().map(Segment::max_value).fold(0.0, f64::max)
    }
}

pub struct SegmentWalk<'a> {
    profile: &'a DampingProfile,
    t_end: f64,
    t: f64,
    k: usize,
    done: bool,
}

/// One step of a [`SegmentWalk`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkItem {
    pub start: f64,
    pub segment: Segment,
    /// Index into the profile's segment list when `segment` is that segment in full.
    pub index: Option<usize>,
}

impl Iterator for SegmentWalk<'_> {
    type Item = WalkItem;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let p = self.profile;
        let n = p.segments.len();
        let start = self.t;
        let (seg, index, nominal_end) = if p.periodic || self.k < n {
            let idx = self.k % n;
            let laps = (self.k / n) as f64;
            (p.segments[idx], Some(idx), laps * p.period + p.cumulative[idx + 1])
        } else {
            (p.tail_segment(self.t_end - start), None, f64::INFINITY)
        };
        self.k += 1;
        if nominal_end >= self.t_end {
            self.done = true;
            let remaining = self.t_end - start;
            if remaining <= 0.0 {
                return None;
            }
            if remaining < seg.duration * (1.0 - 1e-12) {
                return Some(WalkItem { start, segment: seg.prefix(remaining), index: None });
            }
            return Some(WalkItem { start, segment: seg, index });
        }
        self.t = nominal_end;
        Some(WalkItem { start, segment: seg, index })
    }
}

fn ramp_rhs(lambda: f64, delta: impl Fn(f64) -> f64) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    let lam2 = lambda * lambda;
    // columns (a, c) and (b, d) of the transfer matrix
    move |t, y| {
        let two_d = 2.0 * delta(t);
        [y[1], -lam2 * y[0] - two_d * y[1], y[3], -lam2 * y[2] - two_d * y[3]]
    }
}

/// Transfer matrix of one segment for frequency `lambda`.
pub fn segment_transfer(lambda: f64, segment: &Segment) -> Result<Transfer> {
    segment_transfer_with(lambda, segment, Tolerance::default())
}

pub fn segment_transfer_with(lambda: f64, segment: &Segment, tol: Tolerance) -> Result<Transfer> {
    segment.validate()?;
    match segment.kind {
        SegmentKind::Constant { value } => {
            check_mode_args(lambda, value, segment.duration)?;
            Ok(constant_transfer(lambda, value, segment.duration))
        }
        SegmentKind::Ramp { slope: 0.0, .. } => {
            let v = segment.start_value();
            check_mode_args(lambda, v, segment.duration)?;
            Ok(constant_transfer(lambda, v, segment.duration))
        }
        _ => {
            check_mode_args(lambda, 0.0, segment.duration)?;
            let seg = *segment;
            let y = integrate(
                ramp_rhs(lambda, move |t| seg.value_at(t)),
                0.0,
                [1.0, 0.0, 0.0, 1.0],
                segment.duration,
                tol,
            )?;
            Ok(Transfer { a: y[0], b: y[2], c: y[1], d: y[3] })
        }
    }
}

/// State at the end of `segment`.
pub fn propagate_segment(state: ModeState, lambda: f64, segment: &Segment) -> Result<ModeState> {
    state.check_finite()?;
    let out = segment_transfer(lambda, segment)?.apply(state);
    out.check_finite()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: ModeState,
}

pub type Trajectory = Vec<Sample>;

/// Cached per-segment transfers of one period of a profile for a fixed frequency.
#[derive(Debug, Clone)]
pub struct ProfileTransfers {
    lambda: f64,
    transfers: Vec<Transfer>,
}

impl ProfileTransfers {
    pub fn new(profile: &DampingProfile, lambda: f64) -> Result<Self> {
        let transfers =
            profile.segments().iter().map(|s| segment_transfer(lambda, s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { lambda, transfers })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// Composite transfer over the whole segment list.
    pub fn period_transfer(&self) -> Transfer {
        self.transfers.iter().fold(Transfer::IDENTITY, |acc, t| acc.then(t))
    }
}

/// Propagates through `profile` up to `t_end`, sampling at every segment boundary.
pub fn propagate_profile(
    state: ModeState,
    lambda: f64,
    profile: &DampingProfile,
    t_end: f64,
) -> Result<Trajectory> {
    propagate_profile_sampled(state, lambda, profile, t_end, &[])
}

/// As [`propagate_profile`], with extra sample times merged into the boundary grid.
pub fn propagate_profile_sampled(
    state: ModeState,
    lambda: f64,
    profile: &DampingProfile,
    t_end: f64,
    extra: &[f64],
) -> Result<Trajectory> {
    state.check_finite()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("t_end must be >= 0, got {t_end}")));
    }
    let cache = ProfileTransfers::new(profile, lambda)?;
    let mut extra: Vec<f64> = extra.iter().copied().filter(|&t| t > 0.0 && t < t_end).collect();
    extra.sort_by(f64::total_cmp);
    extra.dedup();
    let mut pending = extra.into_iter().peekable();

    let mut out = vec![Sample { t: 0.0, state }];
    let mut current = state;
    for WalkItem { start, segment: seg, index } in profile.walk(t_end) {
        let end = start + seg.duration;
        while let Some(&ts) = pending.peek() {
            if ts >= end {
                break;
            }
            pending.next();
            if ts > start {
                let partial = segment_transfer(lambda, &seg.prefix(ts - start))?.apply(current);
                partial.check_finite()?;
                out.push(Sample { t: ts, state: partial });
            }
        }
        current = match index {
            Some(i) => cache.transfers()[i].apply(current),
            None => segment_transfer(lambda, &seg)?.apply(current),
        };
        current.check_finite()?;
        out.push(Sample { t: end, state: current });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::{energy, propagate_constant};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn quarter_rotation_segment() {
        let lam = 3.0;
        let s = propagate_segment(ModeState::new(1.0 / lam, 0.0), lam, &Segment::constant(0.0, PI / (2.0 * lam)))
            .unwrap();
        assert!(s.u.abs() < 1e-15);
        assert_relative_eq!(s.v, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn flat_ramp_equals_constant() {
        let s0 = ModeState::new(0.3, -0.7);
        let a = propagate_segment(s0, 2.0, &Segment::ramp(5.0, 0.0, 1.0)).unwrap();
        let b = propagate_constant(s0, 2.0, 5.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ramp_below_zero_rejected() {
        assert!(Segment::ramp(1.0, -2.0, 1.0).validate().is_err());
        assert!(Segment::ramp(1.0, -1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn empty_horizon_trajectory() {
        let p = DampingProfile::constant(1.0).unwrap();
        let traj = propagate_profile(ModeState::new(1.0, 0.0), 1.0, &p, 0.0).unwrap();
        assert_eq!(traj, vec![Sample { t: 0.0, state: ModeState::new(1.0, 0.0) }]);
    }

    #[test]
    fn periodic_walk_boundaries() {
        let p = DampingProfile::periodic(vec![Segment::constant(1.0, 0.5), Segment::constant(0.0, 1.0)]).unwrap();
        let times: Vec<f64> = p.walk(3.2).map(|w| w.start + w.segment.duration).collect();
        assert_eq!(times, vec![0.5, 1.5, 2.0, 3.0, 3.2]);
    }

    #[test]
    fn non_periodic_tail_holds_last_value() {
        let p = DampingProfile::once(vec![Segment::ramp(0.0, 1.0, 2.0)]).unwrap();
        assert_eq!(p.value_at(5.0), 2.0);
        assert_relative_eq!(p.integral(3.0), 2.0 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn sampled_times_are_merged() {
        let p = DampingProfile::periodic(vec![Segment::constant(0.5, 1.0)]).unwrap();
        let traj = propagate_profile_sampled(ModeState::new(1.0, 0.0), 1.0, &p, 2.0, &[0.25, 1.5]).unwrap();
        let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.25, 1.0, 1.5, 2.0]);
        let direct = propagate_constant(ModeState::new(1.0, 0.0), 1.0, 0.5, 1.5).unwrap();
        assert_relative_eq!(traj[3].state.u, direct.u, max_relative = 1e-12);
    }

    #[test]
    fn ramp_energy_nonincreasing() {
        let p = DampingProfile::once(vec![Segment::ramp(0.0, 2.0, 3.0), Segment::ramp(6.0, -2.0, 3.0)]).unwrap();
        let traj = propagate_profile_sampled(ModeState::new(0.0, 1.0), 2.0, &p, 6.0, &[0.5, 1.0, 4.5]).unwrap();
        for w in traj.windows(2) {
            assert!(energy(w[1].state, 2.0) <= energy(w[0].state, 2.0) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn smooth_step_symmetry() {
        for s in [0.1, 0.3, 0.5, 0.77] {
            assert_relative_eq!(smooth_step(s) + smooth_step(1.0 - s), 1.0, epsilon = 1e-15);
        }
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
    }
}
