use crate::error::{Error, Result};

/// Nonincreasing positive envelope given as a table of `(t, phi)` pairs, read as a
/// step function: `phi(t)` is the value of the last table time `<= t`.
///
/// Values are stored as logarithms so very fast decays stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    times: Vec<f64>,
    ln_values: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidEnvelope(msg.into())
}

impl Envelope {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if let Some(&(t, phi)) = points.iter().find(|(_, phi)| !(*phi > 0.0 && phi.is_finite())) {
            return Err(bad(format!("phi must be positive and finite, got phi({t}) = {phi}")));
        }
        Self::from_ln(&points.iter().map(|&(t, phi)| (t, phi.ln())).collect::<Vec<_>>())
    }

    /// Builds from `(t, ln phi)` pairs.
    pub fn from_ln(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(bad("table is empty"));
        }
        for &(t, l) in points {
            if !t.is_finite() || t < 0.0 {
                return Err(bad(format!("times must be finite and nonnegative, got {t}")));
            }
            if !(l.is_finite()) {
                return Err(bad(format!("phi({t}) is not a positive finite number")));
            }
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(bad(format!("times must be strictly increasing ({} then {})", w[0].0, w[1].0)));
            }
            if w[1].1 > w[0].1 {
                return Err(bad(format!("phi must be nonincreasing (increases after t = {})", w[0].0)));
            }
        }
        Ok(Self { times: points.iter().map(|p| p.0).collect(), ln_values: points.iter().map(|p| p.1).collect() })
    }

    /// Samples `phi` at the given times.
    pub fn sample(times: &[f64], phi: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&times.iter().map(|&t| (t, phi(t))).collect::<Vec<_>>())
    }

    /// Samples `ln phi` at the given times.
    pub fn sample_ln(times: &[f64], ln_phi: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_ln(&times.iter().map(|&t| (t, ln_phi(t))).collect::<Vec<_>>())
    }

    /// Constant envelope `phi = 1`.
    pub fn unit() -> Self {
        Self { times: vec![0.0], ln_values: vec![0.0] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last tabulated time.
    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().zip(&self.ln_values).map(|(&t, &l)| (t, l.exp()))
    }

    pub fn ln_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.ln_values.iter().copied())
    }

    pub fn ln_value(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        self.ln_values[i.saturating_sub(1)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}
