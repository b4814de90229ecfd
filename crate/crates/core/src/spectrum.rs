use crate::error::{invalid, Result};

/// Finite, strictly increasing list of positive modal frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    frequencies: Vec<f64>,
}

impl Spectrum {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(invalid("spectrum must be nonempty"));
        }
        if let Some(bad) = frequencies.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("frequencies must be positive and finite, got {bad}")));
        }
        if let Some(w) = frequencies.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(format!("frequencies must be strictly increasing ({} then {})", w[0], w[1])));
        }
        Ok(Self { frequencies })
    }

    pub fn single(lambda: f64) -> Result<Self> {
        Self::new(vec![lambda])
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.frequencies[0]
    }

    /// `(pi/2) * sum 1/lambda_k` over the first `count` modes.
    pub fn quarter_rotation_time(&self, count: usize) -> f64 {
        std::f64::consts::FRAC_PI_2 * self.frequencies[..count].iter().map(|l| 1.0 / l).sum::<f64>()
    }

    /// The first `count` modes as a spectrum of their own.
    pub fn truncated(&self, count: usize) -> Result<Spectrum> {
        Spectrum::new(self.frequencies[..count.min(self.len())].to_vec())
    }
}
