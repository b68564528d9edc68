//! Spectral measurements: periodogram, occupied bandwidth, spectral flatness,
//! and the test-signal helpers used to probe them.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Rectangular-window periodogram, `bins[k] = |DFT(s)[k]|² / N`, in DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub bins: Vec<f64>,
    /// `sample_rate / N`.
    pub bin_resolution: f64,
    pub n_samples: usize,
}

impl PsdEstimate {
    pub fn total_power(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Bin index folded into `(-N/2, N/2]`.
    pub fn signed_bin(&self, k: usize) -> i64 {
        signed_bin(k as i64, self.bins.len())
    }

    /// Frequency of bin `k` in cycles per sample, in `(-0.5, 0.5]`.
    pub fn frequency(&self, k: usize) -> f64 {
        self.signed_bin(k) as f64 / self.bins.len() as f64
    }

    /// `(signed bin, cycles/sample, power)` rows from the most negative
    /// frequency to the most positive.
    pub fn centered_rows(&self) -> Vec<(i64, f64, f64)> {
        let mut rows: Vec<_> = (0..self.bins.len())
            .map(|k| (self.signed_bin(k), self.frequency(k), self.bins[k]))
            .collect();
        rows.sort_by_key(|r| r.0);
        rows
    }
}

fn signed_bin(k: i64, n: usize) -> i64 {
    let n = n as i64;
    let k = k.rem_euclid(n);
    if 2 * k > n {
        k - n
    } else {
        k
    }
}

pub fn periodogram(s: &Signal) -> Result<PsdEstimate> {
    let n = s.len();
    if n < 2 {
        return Err(Error::InvalidSignal("a periodogram needs at least 2 samples".into()));
    }
    let mut buf = s.samples().to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    Ok(PsdEstimate {
        bins: buf.iter().map(|v| v.norm_sqr() / n as f64).collect(),
        bin_resolution: s.sample_rate() / n as f64,
        n_samples: n,
    })
}

/// Circular run of bins `low..=high`, indices taken mod `N`. The peak bin
/// lies in `0..N`, so `low` is negative or `high` is at least `N` when the
/// band wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupiedBand {
    pub low: i64,
    pub high: i64,
    pub n_bins: usize,
}

impl OccupiedBand {
    pub fn width(&self) -> usize {
        (self.high - self.low + 1) as usize
    }

    pub fn width_cycles(&self) -> f64 {
        self.width() as f64 / self.n_bins as f64
    }

    /// Largest `|frequency|` inside the band, in bins. This is the baseband
    /// band edge: a band hugging DC has a small edge, one shifted towards
    /// Nyquist a large one.
    pub fn upper_edge(&self) -> i64 {
        (self.low..=self.high)
            .map(|k| signed_bin(k, self.n_bins).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn upper_edge_cycles(&self) -> f64 {
        self.upper_edge() as f64 / self.n_bins as f64
    }
}

/// Narrowest circular interval of bins that contains the peak and holds at
/// least `energy_fraction` of the total power. Ties go to the interval that
/// starts lowest.
pub fn occupied_bandwidth(psd: &PsdEstimate, energy_fraction: f64) -> Result<OccupiedBand> {
    if !(energy_fraction > 0.0 && energy_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "energy fraction must lie in (0, 1), got {energy_fraction}"
        )));
    }
    let n = psd.bins.len();
    let total = psd.total_power();
    if n == 0 || total <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let peak = psd
        .bins
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > psd.bins[best] { k } else { best });

    // prefix[i] = sum of bins[(j mod N)] for j in 0..i over three periods
    let mut prefix = Vec::with_capacity(3 * n + 1);
    prefix.push(0.0);
    for i in 0..3 * n {
        prefix.push(prefix[i] + psd.bins[i % n]);
    }
    let target = energy_fraction * total * (1.0 - 1e-12);
    let window = |lo: i64, w: usize| {
        let start = (lo + n as i64) as usize;
        prefix[start + w] - prefix[start]
    };
    for w in 1..=n {
        for lo in (peak as i64 + 1 - w as i64)..=peak as i64 {
            if window(lo, w) >= target {
                return Ok(OccupiedBand {
                    low: lo,
                    high: lo + w as i64 - 1,
                    n_bins: n,
                });
            }
        }
    }
    unreachable!("the full circle always holds the requested fraction")
}

/// Zero bins are floored at this value before taking logarithms.
pub const FLATNESS_FLOOR: f64 = 1e-300;

/// Geometric mean over arithmetic mean of the bins, in `[0, 1]`.
pub fn spectral_flatness(psd: &PsdEstimate) -> Result<f64> {
    let n = psd.bins.len() as f64;
    let mean = psd.total_power() / n;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let log_mean = psd.bins.iter().map(|&b| b.max(FLATNESS_FLOOR).ln()).sum::<f64>() / n;
    Ok((log_mean.exp() / mean).clamp(0.0, 1.0))
}

/// `A · cos(2π·omega·n + phase)` for `n = 0..n_samples`, omega in cycles
/// per sample.
pub fn tone(amplitude: f64, omega: f64, phase: f64, n_samples: usize) -> Result<Signal> {
    Signal::from_real(
        &(0..n_samples)
            .map(|n| amplitude * (TAU * omega * n as f64 + phase).cos())
            .collect::<Vec<_>>(),
    )
}

/// Repeats every sample `factor` times; the bandwidth baseline for a signal
/// spread by `factor` chips per sample.
pub fn zero_order_hold(x: &Signal, factor: usize) -> Result<Signal> {
    if factor == 0 {
        return Err(Error::InvalidParameter("hold factor must be at least 1".into()));
    }
    let samples: Vec<Complex64> = x
        .samples()
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, factor))
        .collect();
    Signal::new(samples, x.sample_rate() * factor as f64)
}
