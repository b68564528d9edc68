//! Temporal spreading: every sample `x[n]` becomes the block of `L` chips
//! `x[n] · C(k, ω₁)`, `k = 0..L`, laid out sample-major.
//!
//! Recovery de-rotates each block by the conjugate chips and reduces the `L`
//! estimates with a configurable estimator. The mean is the matched filter;
//! the median and trimmed mean discard impulsive outliers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::chrestenson::kernel;
use crate::error::{Error, Result};
use crate::padic::{PFraction, Radix};
use crate::signal::Signal;

/// Per-sample reduction used by [`despread`]. Median and trimmed mean act on
/// real and imaginary parts independently.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Estimator {
    #[default]
    Mean,
    Median,
    /// Drop `floor(α·L)` values from each end, `0 <= α < 0.5`.
    Trimmed(f64),
}

impl Estimator {
    pub fn validate(self) -> Result<Self> {
        if let Estimator::Trimmed(alpha) = self {
            if !(0.0..0.5).contains(&alpha) {
                return Err(Error::InvalidParameter(format!(
                    "trim fraction must lie in [0, 0.5), got {alpha}"
                )));
            }
        }
        Ok(self)
    }

    pub fn estimate(self, values: &[Complex64]) -> Complex64 {
        debug_assert!(!values.is_empty());
        match self {
            Estimator::Mean => values.iter().sum::<Complex64>() / values.len() as f64,
            Estimator::Median => Complex64::new(
                median(values.iter().map(|z| z.re).collect()),
                median(values.iter().map(|z| z.im).collect()),
            ),
            Estimator::Trimmed(alpha) => Complex64::new(
                trimmed_mean(values.iter().map(|z| z.re).collect(), alpha),
                trimmed_mean(values.iter().map(|z| z.im).collect(), alpha),
            ),
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn trimmed_mean(mut v: Vec<f64>, alpha: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let cut = (alpha * v.len() as f64).floor() as usize;
    let kept = &v[cut..v.len() - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Mean => f.write_str("mean"),
            Estimator::Median => f.write_str("median"),
            Estimator::Trimmed(alpha) => write!(f, "trimmed:{alpha}"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    /// `mean`, `median` or `trimmed:α`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(Estimator::Mean),
            "median" => Ok(Estimator::Median),
            other => {
                let alpha = other
                    .strip_prefix("trimmed:")
                    .and_then(|a| a.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "unknown estimator {other:?}; expected mean, median or trimmed:α"
                        ))
                    })?;
                Estimator::Trimmed(alpha).validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSpreadConfig {
    radix: Radix,
    omega1: PFraction,
    chips_per_sample: usize,
    estimator: Estimator,
}

impl TemporalSpreadConfig {
    pub fn new(
        radix: Radix,
        omega1: PFraction,
        chips_per_sample: usize,
        estimator: Estimator,
    ) -> Result<Self> {
        if chips_per_sample == 0 {
            return Err(Error::InvalidParameter("chips per sample must be at least 1".into()));
        }
        if omega1.radix() != radix {
            return Err(Error::RadixMismatch {
                fraction: omega1.radix().get(),
                expected: radix.get(),
            });
        }
        Ok(TemporalSpreadConfig {
            radix,
            omega1,
            chips_per_sample,
            estimator: estimator.validate()?,
        })
    }

    pub fn radix(&self) -> Radix {
        self.radix
    }

    pub fn omega1(&self) -> PFraction {
        self.omega1
    }

    pub fn chips_per_sample(&self) -> usize {
        self.chips_per_sample
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Result<Self> {
        self.estimator = estimator.validate()?;
        Ok(self)
    }
}

/// The chips `C(k, ω₁)` for `k = 0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipSequence {
    chips: Vec<Complex64>,
}

impl ChipSequence {
    pub fn chips(&self) -> &[Complex64] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

pub fn chip_sequence(cfg: &TemporalSpreadConfig) -> ChipSequence {
    ChipSequence {
        chips: (0..cfg.chips_per_sample as u64)
            .map(|k| kernel(k, &cfg.omega1))
            .collect(),
    }
}

/// `out[n·L + k] = x[n] · chips[k]`, at `L` times the input rate.
pub fn spread(x: &Signal, cfg: &TemporalSpreadConfig) -> Signal {
    let chips = chip_sequence(cfg);
    let out = x
        .samples()
        .iter()
        .flat_map(|&s| chips.chips.iter().map(move |&c| s * c))
        .collect();
    Signal::new(out, x.sample_rate() * cfg.chips_per_sample as f64)
        .expect("products of finite samples and unit chips are finite")
}

/// Inverse of [`spread`] for an `original_len`-sample source.
pub fn despread(y: &Signal, cfg: &TemporalSpreadConfig, original_len: usize) -> Result<Signal> {
    let l = cfg.chips_per_sample;
    let expected = original_len.saturating_mul(l);
    if y.len() != expected || original_len == 0 {
        return Err(Error::LengthMismatch {
            expected,
            actual: y.len(),
        });
    }
    let chips = chip_sequence(cfg);
    let mut derotated = Vec::with_capacity(l);
    let out = y
        .samples()
        .chunks_exact(l)
        .map(|block| {
            derotated.clear();
            derotated.extend(block.iter().zip(&chips.chips).map(|(v, c)| v * c.conj()));
            cfg.estimator.estimate(&derotated)
        })
        .collect();
    Signal::new(out, y.sample_rate() / l as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(p: u32, k: u64, m: u32, l: usize, est: Estimator) -> TemporalSpreadConfig {
        let radix = Radix::new(p).unwrap();
        TemporalSpreadConfig::new(radix, PFraction::new(k, radix, m).unwrap(), l, est).unwrap()
    }

    fn reals(s: &[Complex64]) -> Vec<f64> {
        s.iter().map(|z| z.re).collect()
    }

    #[test]
    fn chip_sequence_examples() {
        let chips = chip_sequence(&cfg(2, 1, 1, 4, Estimator::Mean));
        assert_eq!(reals(chips.chips()), vec![1.0, -1.0, 1.0, -1.0]);
        let chips = chip_sequence(&cfg(2, 3, 2, 4, Estimator::Mean));
        assert_eq!(reals(chips.chips()), vec![1.0, -1.0, -1.0, 1.0]);
        for p in [2, 3, 8] {
            let chips = chip_sequence(&cfg(p, 0, 1, 3, Estimator::Mean));
            assert_eq!(chips.chips(), &[c(1.0, 0.0); 3]);
        }
    }

    #[test]
    fn spread_examples() {
        let x = Signal::new(vec![c(0.3, -1.0), c(2.0, 0.5)], 8000.0).unwrap();
        let y = spread(&x, &cfg(8, 5, 1, 1, Estimator::Mean));
        assert_eq!(y.samples(), x.samples());

        let x = Signal::from_real(&[1.0, -1.0]).unwrap();
        let y = spread(&x, &cfg(2, 1, 1, 2, Estimator::Mean));
        assert_eq!(reals(y.samples()), vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(y.sample_rate(), 2.0);

        let x = Signal::from_real(&[2.0]).unwrap();
        let y = spread(&x, &cfg(2, 3, 2, 4, Estimator::Mean));
        assert_eq!(reals(y.samples()), vec![2.0, -2.0, -2.0, 2.0]);
    }

    #[test]
    fn despread_hand_example() {
        // chips [1,-1,1,-1]; chip 1 hit by +0.8 -> derotated {1, 0.2, 1, 1}
        let x = Signal::from_real(&[1.0]).unwrap();
        let base = cfg(2, 1, 1, 4, Estimator::Mean);
        let mut y = spread(&x, &base).into_samples();
        y[1] += 0.8;
        let y = Signal::from_samples(y).unwrap();

        let mean = despread(&y, &base, 1).unwrap();
        assert!((mean[0] - c(0.8, 0.0)).norm() < 1e-15);
        let med = despread(&y, &base.clone().with_estimator(Estimator::Median).unwrap(), 1).unwrap();
        assert_eq!(med[0], c(1.0, 0.0));
        let trim = despread(&y, &base.with_estimator(Estimator::Trimmed(0.25)).unwrap(), 1).unwrap();
        assert_eq!(trim[0], c(1.0, 0.0));
    }

    #[test]
    fn despread_single_chip_is_identity() {
        let x = Signal::from_samples(vec![c(0.1, 0.2), c(-3.0, 4.0), c(7.5, -0.25)]).unwrap();
        for est in [Estimator::Mean, Estimator::Median, Estimator::Trimmed(0.4)] {
            let out = despread(&x, &cfg(3, 2, 1, 1, est), 3).unwrap();
            assert_eq!(out.samples(), x.samples());
        }
    }

    #[test]
    fn despread_length_mismatch() {
        let y = Signal::from_real(&[1.0; 7]).unwrap();
        let err = despread(&y, &cfg(2, 1, 1, 4, Estimator::Mean), 2).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 8, actual: 7 }));
        assert!(despread(&y, &cfg(2, 1, 1, 7, Estimator::Mean), 0).is_err());
    }

    #[test]
    fn config_validation() {
        let two = Radix::new(2).unwrap();
        let three = Radix::new(3).unwrap();
        let w = PFraction::new(1, two, 1).unwrap();
        assert!(TemporalSpreadConfig::new(two, w, 0, Estimator::Mean).is_err());
        assert!(TemporalSpreadConfig::new(three, w, 4, Estimator::Mean).is_err());
        assert!(TemporalSpreadConfig::new(two, w, 4, Estimator::Trimmed(0.5)).is_err());
        assert!(TemporalSpreadConfig::new(two, w, 4, Estimator::Trimmed(-0.1)).is_err());
    }

    #[test]
    fn estimator_parsing() {
        assert_eq!("mean".parse::<Estimator>().unwrap(), Estimator::Mean);
        assert_eq!("median".parse::<Estimator>().unwrap(), Estimator::Median);
        assert_eq!("trimmed:0.25".parse::<Estimator>().unwrap(), Estimator::Trimmed(0.25));
        assert!("trimmed:0.5".parse::<Estimator>().is_err());
        assert!("trimmed".parse::<Estimator>().is_err());
        assert!("mode".parse::<Estimator>().is_err());
        assert_eq!(Estimator::Trimmed(0.25).to_string(), "trimmed:0.25");
    }

    #[test]
    fn single_outlier_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (p, k, m) in [(2u32, 3u64, 2u32), (3, 5, 2), (8, 9, 2), (8, 3, 1)] {
            for l in 3..=9usize {
                let base = cfg(p, k, m, l, Estimator::Mean);
                let x = Signal::from_samples(vec![c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))])
                    .unwrap();
                let clean = spread(&x, &base);
                for pos in 0..l {
                    let delta = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                    let mut y = clean.clone().into_samples();
                    y[pos] += delta;
                    let y = Signal::from_samples(y).unwrap();
                    let mean_err = (despread(&y, &base, 1).unwrap()[0] - x[0]).norm();
                    assert!(mean_err <= delta.norm() / l as f64 + 1e-12);
                    let med = base.clone().with_estimator(Estimator::Median).unwrap();
                    let med_err = (despread(&y, &med, 1).unwrap()[0] - x[0]).norm();
                    assert!(med_err < 1e-12, "p={p} L={l} pos={pos} err={med_err}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_scales_and_round_trip_is_exact(
            pi in 0usize..4, m in 1u32..4, k_seed in any::<u64>(), l in 1usize..40, seed in any::<u64>()
        ) {
            let p = [2u32, 3, 5, 8][pi];
            let k = k_seed % (p as u64).pow(m);
            let conf = cfg(p, k, m, l, Estimator::Mean);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..50);
            let x = Signal::from_samples(
                (0..n).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect()
            ).unwrap();
            let y = spread(&x, &conf);
            prop_assert_eq!(y.len(), n * l);
            prop_assert!((y.energy() - l as f64 * x.energy()).abs() <= 1e-12 * l as f64 * x.energy());
            let back = despread(&y, &conf, n).unwrap();
            for (a, b) in back.samples().iter().zip(x.samples()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
            prop_assert!((back.sample_rate() - x.sample_rate()).abs() < 1e-12);
        }
    }
}
