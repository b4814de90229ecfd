use std::sync::OnceLock;

use crate::analysis::smoothing_deviation_bound;
use crate::error::{invalid, Error, Result};
use crate::profile::{simpson, smooth_step, DampingProfile, Segment};

/// `integral_0^1 (psi(s) - H(s - 1/2))^2 ds` for the smooth step `psi`: the squared
/// `L^2` cost of a unit jump smoothed over unit width.
pub fn transition_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 2.0 * simpson(|s| smooth_step(s).powi(2), 0.0, 0.5, 20_000))
}

/// A profile whose jumps were replaced by smooth transitions.
#[derive(Debug, Clone)]
pub struct MollifiedProfile {
    pub profile: DampingProfile,
    /// Width of every transition.
    pub width: f64,
    /// `L^2` distance to the original over one period (or the whole list if not periodic).
    pub l2_distance: f64,
    pub budget: f64,
    pub jumps: usize,
}

impl MollifiedProfile {
    /// Bound on the energy of the difference of the two solutions with equal data at time `t`.
    pub fn deviation_bound(&self, e0: f64, t: f64) -> f64 {
        let periods = if self.profile.is_periodic() { (t / self.profile.period()).ceil().max(1.0) } else { 1.0 };
        smoothing_deviation_bound(e0, t, self.l2_distance * periods.sqrt()).unwrap_or(f64::NAN)
    }
}

fn is_jump(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Replaces each jump (including the wrap-around jump of a periodic profile) by a
/// smooth transition of common width `w`, centred on the jump, with `w` the largest
/// width keeping the `L^2` distance within `l2_budget` (capped at half the shortest segment).
pub fn mollify(profile: &DampingProfile, l2_budget: f64) -> Result<MollifiedProfile> {
    if !(l2_budget > 0.0) {
        return Err(invalid(format!("L2 budget must be positive, got {l2_budget}")));
    }
    let segs = profile.segments();
    let n = segs.len();
    let periodic = profile.is_periodic();
    // jump_after[i]: jump between segment i and the next one
    let jump_after: Vec<bool> = (0..n)
        .map(|i| {
            if i + 1 < n {
                is_jump(segs[i].end_value(), segs[i + 1].start_value())
            } else {
                periodic && n > 1 && is_jump(segs[i].end_value(), segs[0].start_value())
            }
        })
        .collect();
    let jumps = jump_after.iter().filter(|&&j| j).count();
    if jumps == 0 {
        return Ok(MollifiedProfile { profile: profile.clone(), width: 0.0, l2_distance: 0.0, budget: l2_budget, jumps });
    }
    let sum_sq: f64 = (0..n)
        .filter(|&i| jump_after[i])
        .map(|i| (segs[i].end_value() - segs[(i + 1) % n].start_value()).powi(2))
        .sum();
    let shortest = segs.iter().map(|s| s.duration).fold(f64::INFINITY, f64::min);
    let target = l2_budget * (1.0 - 1e-6);
    let mut width = (target * target / (transition_constant() * sum_sq)).min(shortest / 2.0);
    for _ in 0..50 {
        if width < 1e-12 * profile.period() {
            return Err(Error::BudgetTooSmall { width });
        }
        let smooth = build(segs, &jump_after, periodic, width)?;
        let distance = l2_distance(profile, &smooth, &jump_after, width);
        if distance <= l2_budget {
            return Ok(MollifiedProfile { profile: smooth, width, l2_distance: distance, budget: l2_budget, jumps });
        }
        // shrink and retry
        width *= (target / distance).powi(2);
    }
    Err(Error::BudgetTooSmall { width })
}

fn build(segs: &[Segment], jump_after: &[bool], periodic: bool, width: f64) -> Result<DampingProfile> {
    let n = segs.len();
    let half = width / 2.0;
    let mut out = Vec::with_capacity(3 * n);
    let wrap = periodic && jump_after[n - 1];
    if wrap {
        let (a, b) = (segs[n - 1].end_value(), segs[0].start_value());
        out.push(Segment::blend(a, b, 0.5, 1.0, half));
    }
    for i in 0..n {
        let head = if (i > 0 && jump_after[i - 1]) || (i == 0 && wrap) { half } else { 0.0 };
        let tail = if jump_after[i] { half } else { 0.0 };
        let s = segs[i];
        out.push(s.suffix(head).prefix(s.duration - head - tail));
        if jump_after[i] {
            let (a, b) = (s.end_value(), segs[(i + 1) % n].start_value());
            if i + 1 < n {
                out.push(Segment::blend(a, b, 0.0, 1.0, width));
            } else {
                out.push(Segment::blend(a, b, 0.0, 0.5, half));
            }
        }
    }
    DampingProfile::new(out, periodic)
}

/// Distance over one period, integrating the difference only where it can be nonzero.
fn l2_distance(original: &DampingProfile, smooth: &DampingProfile, jump_after: &[bool], width: f64) -> f64 {
    let n = jump_after.len();
    let bounds = original.boundaries();
    let period = original.period();
    let half = width / 2.0;
    let mut sq = 0.0;
    for i in 0..n {
        if !jump_after[i] {
            continue;
        }
        let tj = bounds[i + 1];
        let diff = |t: f64| {
            let tt = t.rem_euclid(period);
            let orig = if t < tj { original_left(original, i, tj - t) } else { original.value_at(tt) };
            (smooth.value_at(tt) - orig).powi(2)
        };
        sq += simpson(diff, tj - half, tj, 2000) + simpson(diff, tj, tj + half, 2000);
    }
    sq.sqrt()
}

/// Value of segment `i` a distance `back` before its end (avoids ambiguity at the jump).
fn original_left(original: &DampingProfile, i: usize, back: f64) -> f64 {
    let s = original.segments()[i];
    s.value_at((s.duration - back).max(0.0))
}
