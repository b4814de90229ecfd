use crate::error::{invalid, Result};
use crate::profile::DampingProfile;

/// `exp(-4 * integral_0^t delta)`: no solution loses energy faster than this.
pub fn energy_lower_bound(profile: &DampingProfile, t: f64) -> f64 {
    (-4.0 * profile.integral(t.max(0.0))).exp()
}

/// `2 E0 e^{2t} d^2`: energy of the difference of two solutions with the same data
/// whose damping coefficients are `d` apart in `L^2(0, t)`.
pub fn smoothing_deviation_bound(e0: f64, t: f64, l2_distance: f64) -> Result<f64> {
    for (name, x) in [("E0", e0), ("t", t), ("l2 distance", l2_distance)] {
        if !(x >= 0.0) {
            return Err(invalid(format!("{name} must be nonnegative, got {x}")));
        }
    }
    if l2_distance == 0.0 || e0 == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * e0 * (2.0 * t).exp() * l2_distance * l2_distance)
}
