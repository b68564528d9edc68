//! Channel impairments: periodic impulsive bursts and AWGN, plus the error
//! measurement used to compare recovered and original signals.
//!
//! All randomness comes from a `ChaCha8Rng` seeded from the noise
//! parameters, so a given signal and parameter set always produce the same
//! output on every platform.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Burst `b` starts at sample `b·period` and hits `burst_len` consecutive
/// samples. Impulse magnitudes are uniform in `[amp_min, amp_max]·max|s|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseNoiseSpec {
    pub period: usize,
    pub burst_len: usize,
    pub amp_min: f64,
    pub amp_max: f64,
    pub seed: u64,
    /// Real ±impulses instead of complex ones with uniform phase.
    #[serde(default)]
    pub real_only: bool,
}

impl Default for ImpulseNoiseSpec {
    fn default() -> Self {
        ImpulseNoiseSpec {
            period: 10,
            burst_len: 1,
            amp_min: 0.1,
            amp_max: 1.0,
            seed: 0,
            real_only: false,
        }
    }
}

impl ImpulseNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidParameter("impulse period must be at least 1".into()));
        }
        if self.burst_len > self.period {
            return Err(Error::InvalidParameter(format!(
                "burst length {} exceeds the period {}",
                self.burst_len, self.period
            )));
        }
        if !(self.amp_min.is_finite() && self.amp_max.is_finite())
            || self.amp_min < 0.0
            || self.amp_min > self.amp_max
        {
            return Err(Error::InvalidParameter(format!(
                "impulse amplitudes need 0 <= amp_min <= amp_max, got [{}, {}]",
                self.amp_min, self.amp_max
            )));
        }
        Ok(())
    }

    /// Indices hit by bursts in a signal of `len` samples.
    pub fn positions(&self, len: usize) -> impl Iterator<Item = usize> + '_ {
        (0..len)
            .step_by(self.period.max(1))
            .flat_map(move |start| start..(start + self.burst_len).min(len))
    }
}

/// Every perturbation applied by [`apply_impulse_noise`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseRecord {
    pub positions: Vec<usize>,
    pub noise_values: Vec<Complex64>,
}

impl NoiseRecord {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.noise_values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn mean_magnitude(&self) -> f64 {
        if self.noise_values.is_empty() {
            return 0.0;
        }
        self.noise_values.iter().map(|v| v.norm()).sum::<f64>() / self.noise_values.len() as f64
    }
}

pub fn apply_impulse_noise(s: &Signal, spec: &ImpulseNoiseSpec) -> Result<(Signal, NoiseRecord)> {
    spec.validate()?;
    let reference = s.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = s.samples().to_vec();
    let mut record = NoiseRecord::default();
    for pos in spec.positions(s.len()) {
        let fraction = if spec.amp_max > spec.amp_min {
            rng.random_range(spec.amp_min..=spec.amp_max)
        } else {
            spec.amp_min
        };
        let magnitude = fraction * reference;
        let noise = if spec.real_only {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(sign * magnitude, 0.0)
        } else {
            Complex64::from_polar(magnitude, rng.random_range(0.0..TAU))
        };
        if magnitude != 0.0 {
            samples[pos] += noise;
        }
        record.positions.push(pos);
        record.noise_values.push(if magnitude != 0.0 { noise } else { Complex64::new(0.0, 0.0) });
    }
    Ok((s.with_samples(samples)?, record))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgnSpec {
    /// `f64::INFINITY` disables the noise.
    pub snr_db: f64,
    pub seed: u64,
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the
/// signal's mean power `‖s‖²/N`.
pub fn apply_awgn(s: &Signal, spec: &AwgnSpec) -> Result<Signal> {
    if spec.snr_db == f64::INFINITY {
        return Ok(s.clone());
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db must be finite or +inf, got {}", spec.snr_db)));
    }
    let power = s.energy() / s.len() as f64;
    if power == 0.0 {
        return Err(Error::ZeroSignalEnergy);
    }
    let noise_power = power / 10f64.powf(spec.snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = s
        .samples()
        .iter()
        .map(|&v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + Complex64::new(re, im) * sigma
        })
        .collect();
    s.with_samples(samples)
}

/// `recovered - original` and `‖recovered - original‖² / ‖original‖²`.
pub fn error_signal(recovered: &Signal, original: &Signal) -> Result<(Signal, f64)> {
    if recovered.len() != original.len() {
        return Err(Error::DimensionMismatch(format!(
            "recovered has {} samples, original {}",
            recovered.len(),
            original.len()
        )));
    }
    let reference = original.energy();
    if reference == 0.0 {
        return Err(Error::ZeroSignalEnergy);
    }
    let diff: Vec<Complex64> = recovered
        .samples()
        .iter()
        .zip(original.samples())
        .map(|(r, o)| r - o)
        .collect();
    let err = diff.iter().map(|d| d.norm_sqr()).sum::<f64>();
    Ok((original.with_samples(diff)?, err / reference))
}
