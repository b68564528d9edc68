//! Chrestenson kernel and the discrete Chrestenson transform (DCHT).
//!
//! For `N = p^m` points the basis functions are
//! `C(n, K/p^m) = exp(-2πj · (K/p^m ⊗_p n) / p)`, where `⊗_p` is the carry-free
//! digit-pairing product from [`crate::padic`]. With `p = 2` these are the
//! Walsh functions; with `N = p` the transform coincides with the DFT.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the `1/N` factor, so `dcht_inverse(dcht_forward(x)) == x`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::padic::{pmul_unchecked, PFraction, Radix};
use crate::signal::Signal;

/// Largest row length [`ChrestensonMatrix::new`] accepts.
pub const DEFAULT_ROW_LIMIT: usize = 1 << 16;

/// `exp(-2πj r / p)`. Quarter turns are returned exactly so Walsh entries
/// are exactly ±1.
pub fn unit_root(r: u64, p: u64) -> Complex64 {
    let r = r % p;
    if (4 * r).is_multiple_of(p) {
        return match 4 * r / p {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    let theta = -TAU * r as f64 / p as f64;
    Complex64::new(theta.cos(), theta.sin())
}

fn root_table(p: u32) -> Vec<Complex64> {
    (0..p as u64).map(|r| unit_root(r, p as u64)).collect()
}

/// Chrestenson function `C(n, ω)`.
pub fn kernel(n: u64, omega: &PFraction) -> Complex64 {
    let p = omega.radix().get() as u64;
    unit_root(pmul_unchecked(omega, n) as u64, p)
}

/// The `N × N` table `entries[K][n] = C(n, K/p^m)`.
///
/// Entries are evaluated on demand from the residue `K/p^m ⊗ n`; nothing
/// of size `N²` is stored.
#[derive(Debug, Clone)]
pub struct ChrestensonMatrix {
    radix: Radix,
    exponent: u32,
    size: usize,
    roots: Vec<Complex64>,
}

impl ChrestensonMatrix {
    pub fn new(radix: Radix, m: u32) -> Result<Self> {
        Self::with_limit(radix, m, DEFAULT_ROW_LIMIT)
    }

    pub fn with_limit(radix: Radix, m: u32, limit: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("exponent m must be at least 1".into()));
        }
        let size = (radix.get() as u128).checked_pow(m).unwrap_or(u128::MAX);
        if size > limit as u128 {
            return Err(Error::SizeLimitExceeded { size, limit });
        }
        Ok(ChrestensonMatrix {
            radix,
            exponent: m,
            size: size as usize,
            roots: root_table(radix.get()),
        })
    }

    pub fn radix(&self) -> Radix {
        self.radix
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Frequency `K / p^m` of row `k`.
    pub fn frequency(&self, k: usize) -> PFraction {
        PFraction::new(k as u64, self.radix, self.exponent).expect("row index below p^m")
    }

    pub fn residue(&self, k: usize, n: usize) -> u32 {
        pmul_unchecked(&self.frequency(k), n as u64)
    }

    pub fn entry(&self, k: usize, n: usize) -> Complex64 {
        self.roots[self.residue(k, n) as usize]
    }

    pub fn row(&self, k: usize) -> Vec<Complex64> {
        let omega = self.frequency(k);
        (0..self.size)
            .map(|n| self.roots[pmul_unchecked(&omega, n as u64) as usize])
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<Complex64>> + '_ {
        (0..self.size).map(move |k| self.row(k))
    }
}

fn transform_size(len: usize, radix: Radix) -> Result<u32> {
    radix.log_exact(len).ok_or(Error::LengthNotPowerOfRadix {
        len,
        radix: radix.get(),
    })
}

/// Direct summation shared by both directions. Samples are first gathered
/// per residue class, so each output costs `N` additions and `p` products.
fn direct(x: &[Complex64], radix: Radix, m: u32, inverse: bool) -> Vec<Complex64> {
    let p = radix.get() as usize;
    let roots: Vec<Complex64> = root_table(radix.get())
        .into_iter()
        .map(|w| if inverse { w.conj() } else { w })
        .collect();
    let mut classes = vec![Complex64::new(0.0, 0.0); p];
    (0..x.len())
        .map(|k| {
            let omega = PFraction::new(k as u64, radix, m).expect("k < p^m");
            classes.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (n, &v) in x.iter().enumerate() {
                classes[pmul_unchecked(&omega, n as u64) as usize] += v;
            }
            classes.iter().zip(&roots).map(|(c, w)| c * w).sum()
        })
        .collect()
}

/// Forward DCHT: `X[K] = Σ_n x[n] · C(n, K/p^m)`, length `p^m`, `m >= 1`.
pub fn dcht_forward(x: &Signal, radix: Radix) -> Result<Signal> {
    let m = transform_size(x.len(), radix)?;
    x.with_samples(direct(x.samples(), radix, m, false))
}

/// Inverse DCHT: `x[n] = (1/N) Σ_K X[K] · conj(C(n, K/p^m))`.
pub fn dcht_inverse(spectrum: &Signal, radix: Radix) -> Result<Signal> {
    let m = transform_size(spectrum.len(), radix)?;
    let scale = 1.0 / spectrum.len() as f64;
    let out = direct(spectrum.samples(), radix, m, true)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    spectrum.with_samples(out)
}

/// Fast DCHT via radix-p butterflies in `O(N · m · p)`.
///
/// The kernel factors over digits, `Π_i w^{K_(m-1-i) · n_i}`, so the
/// transform is a p-point DFT along every digit axis followed by a base-p
/// digit reversal of the output index.
pub fn dcht_forward_fast(x: &Signal, radix: Radix) -> Result<Signal> {
    let m = transform_size(x.len(), radix)?;
    x.with_samples(fast(x.samples(), radix, m, false))
}

pub fn dcht_inverse_fast(spectrum: &Signal, radix: Radix) -> Result<Signal> {
    let m = transform_size(spectrum.len(), radix)?;
    let scale = 1.0 / spectrum.len() as f64;
    let mut out = fast(spectrum.samples(), radix, m, true);
    out.iter_mut().for_each(|v| *v *= scale);
    spectrum.with_samples(out)
}

fn fast(x: &[Complex64], radix: Radix, m: u32, inverse: bool) -> Vec<Complex64> {
    let p = radix.get() as usize;
    let n = x.len();
    let roots: Vec<Complex64> = root_table(radix.get())
        .into_iter()
        .map(|w| if inverse { w.conj() } else { w })
        .collect();
    let mut data = x.to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); p];
    let mut stride = 1;
    for _ in 0..m {
        let block = stride * p;
        for base in (0..n).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (f, slot) in scratch.iter_mut().enumerate() {
                    *slot = (0..p)
                        .map(|d| data[start + d * stride] * roots[(f * d) % p])
                        .sum();
                }
                for (f, &v) in scratch.iter().enumerate() {
                    data[start + f * stride] = v;
                }
            }
        }
        stride = block;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (f, v) in data.into_iter().enumerate() {
        out[digit_reverse(f, p, m)] = v;
    }
    out
}

fn digit_reverse(mut v: usize, p: usize, m: u32) -> usize {
    let mut r = 0;
    for _ in 0..m {
        r = r * p + v % p;
        v /= p;
    }
    r
}

/// Unnormalized forward DFT by direct `O(N²)` summation.
pub fn dft_reference(x: &Signal) -> Signal {
    let n = x.len();
    let twiddles: Vec<Complex64> = (0..n as u64).map(|r| unit_root(r, n as u64)).collect();
    let out = (0..n)
        .map(|k| {
            x.samples()
                .iter()
                .enumerate()
                .map(|(t, &v)| v * twiddles[((k as u128 * t as u128) % n as u128) as usize])
                .sum()
        })
        .collect();
    x.with_samples(out).expect("DFT of a finite signal is finite")
}
