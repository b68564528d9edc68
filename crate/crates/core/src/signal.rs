use num_complex::Complex64;

use crate::error::{Error, Result};

/// Finite sequence of complex samples with a nominal sample rate.
///
/// Construction rejects empty sequences and non-finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl Signal {
    pub const DEFAULT_RATE: f64 = 1.0;

    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("signal must have at least one sample".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn from_samples(samples: Vec<Complex64>) -> Result<Self> {
        Signal::new(samples, Self::DEFAULT_RATE)
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Signal::from_samples(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Σ|x[n]|².
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Same rate, new samples. Used by stages that preserve timing.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Result<Signal> {
        Signal::new(samples, self.sample_rate)
    }
}

impl std::ops::Index<usize> for Signal {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.samples[i]
    }
}
