//! Exact base-p digit arithmetic and carry-free p-adic multiplication.
//!
//! Everything here is integer arithmetic. A Chrestenson frequency is always a
//! terminating base-p fraction `K / p^m` ([`PFraction`]); it is never stored
//! as a float, so the mod-p residues that drive the kernel are exact.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Base of the digit expansions, `p >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Radix(u32);

impl Radix {
    pub fn new(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidRadix(p as u64));
        }
        Ok(Radix(p))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// `p^m`, or `None` on u64 overflow.
    pub fn pow(self, m: u32) -> Option<u64> {
        (self.0 as u64).checked_pow(m)
    }

    /// Returns `m` if `n == p^m` for some `m >= 1`.
    pub fn log_exact(self, n: usize) -> Option<u32> {
        let p = self.0 as usize;
        if n < p {
            return None;
        }
        let mut rest = n;
        let mut m = 0;
        while rest > 1 {
            if !rest.is_multiple_of(p) {
                return None;
            }
            rest /= p;
            m += 1;
        }
        Some(m)
    }
}

impl fmt::Display for Radix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Base-p digits of `n`, least significant first. Zero has no digits.
pub fn integer_digits(mut n: u64, radix: Radix) -> Vec<u32> {
    let p = radix.get() as u64;
    let mut digits = Vec::new();
    while n > 0 {
        digits.push((n % p) as u32);
        n /= p;
    }
    digits
}

/// Exact base-p expansion of a nonnegative number with a finite expansion.
///
/// `integer_digits[i]` is the coefficient of `p^i`; `fractional_digits[j - 1]`
/// is the coefficient of `p^-j`. Neither list carries trailing (most
/// significant / least significant respectively) zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitVector {
    radix: Radix,
    integer_digits: Vec<u32>,
    fractional_digits: Vec<u32>,
}

impl DigitVector {
    pub fn radix(&self) -> Radix {
        self.radix
    }

    pub fn integer_digits(&self) -> &[u32] {
        &self.integer_digits
    }

    /// Digit `j` of the returned slice is the coefficient of `p^-(j+1)`.
    pub fn fractional_digits(&self) -> &[u32] {
        &self.fractional_digits
    }

    fn int_digit(&self, i: usize) -> u64 {
        self.integer_digits.get(i).copied().unwrap_or(0) as u64
    }

    /// Coefficient of `p^-j`, `j >= 1`.
    fn frac_digit(&self, j: usize) -> u64 {
        debug_assert!(j >= 1);
        self.fractional_digits.get(j - 1).copied().unwrap_or(0) as u64
    }

    /// Rebuilds the represented value exactly.
    pub fn value(&self) -> Ratio<u128> {
        let p = self.radix.get() as u128;
        let int = self
            .integer_digits
            .iter()
            .rev()
            .fold(0u128, |acc, &d| acc * p + d as u128);
        // Horner from the least significant fractional digit; every partial
        // tail has a denominator dividing the final one, so u128 is enough.
        let frac = self
            .fractional_digits
            .iter()
            .rev()
            .fold(Ratio::from_integer(0u128), |acc, &d| {
                (acc + Ratio::from_integer(d as u128)) / Ratio::from_integer(p)
            });
        frac + Ratio::from_integer(int)
    }

    /// Carry-free p-adic product `self ⊗ other`: the mod-p sum over digit
    /// pairs whose place values multiply to `p^-1`. Out-of-range digits are
    /// zero.
    pub fn padic_product(&self, other: &DigitVector) -> Result<u32> {
        if self.radix != other.radix {
            return Err(Error::RadixMismatch {
                fraction: self.radix.get(),
                expected: other.radix.get(),
            });
        }
        let p = self.radix.get() as u64;
        let mut acc = 0u64;
        // other's p^i digit pairs with self's p^-(i+1) digit
        for (i, &d) in other.integer_digits.iter().enumerate() {
            acc = (acc + self.frac_digit(i + 1) * d as u64) % p;
        }
        // other's p^-j digit pairs with self's p^(j-1) digit
        for (j, &d) in other.fractional_digits.iter().enumerate() {
            acc = (acc + self.int_digit(j) * d as u64) % p;
        }
        Ok(acc as u32)
    }
}

/// Expands `value` in base `radix`.
///
/// Fails with [`Error::NonTerminatingExpansion`] when the reduced
/// denominator does not divide any power of `p`.
pub fn to_digits(value: Ratio<u64>, radix: Radix) -> Result<DigitVector> {
    let p = radix.get() as u128;
    let numer = *value.numer() as u128;
    let denom = *value.denom() as u128;

    let mut rest = denom;
    loop {
        let g = gcd(rest, p);
        if g == 1 {
            break;
        }
        while rest.is_multiple_of(g) {
            rest /= g;
        }
    }
    if rest != 1 {
        return Err(Error::NonTerminatingExpansion {
            value: value.to_string(),
            radix: radix.get(),
        });
    }

    let integer_digits = integer_digits((numer / denom) as u64, radix);
    let mut fractional_digits = Vec::new();
    let mut rem = numer % denom;
    while rem != 0 {
        rem *= p;
        fractional_digits.push((rem / denom) as u32);
        rem %= denom;
    }
    Ok(DigitVector {
        radix,
        integer_digits,
        fractional_digits,
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Chrestenson frequency `K / p^m` with `0 <= K < p^m`, `m >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PFraction {
    numerator: u64,
    radix: Radix,
    exponent: u32,
}

impl PFraction {
    pub fn new(numerator: u64, radix: Radix, exponent: u32) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::InvalidFraction("exponent m must be at least 1".into()));
        }
        let denom = radix.pow(exponent).ok_or_else(|| {
            Error::InvalidFraction(format!("{radix}^{exponent} overflows 64 bits"))
        })?;
        if numerator >= denom {
            return Err(Error::InvalidFraction(format!(
                "{numerator}/{radix}^{exponent} is not in [0, 1)"
            )));
        }
        Ok(PFraction {
            numerator,
            radix,
            exponent,
        })
    }

    pub fn zero(radix: Radix) -> Self {
        PFraction {
            numerator: 0,
            radix,
            exponent: 1,
        }
    }

    /// Parses `"K/D"` where `D` must be a power of `radix`.
    pub fn parse_with_radix(s: &str, radix: Radix) -> Result<Self> {
        let frac: PFraction = s.parse()?;
        if frac.radix == radix {
            return Ok(frac);
        }
        // "K/D" parses with radix D; re-express D as a power of `radix`.
        let exponent = radix
            .log_exact(frac.denominator() as usize)
            .ok_or(Error::RadixMismatch {
                fraction: frac.radix.get(),
                expected: radix.get(),
            })?;
        PFraction::new(frac.numerator, radix, exponent)
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn radix(&self) -> Radix {
        self.radix
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn denominator(&self) -> u64 {
        // checked at construction
        self.radix.pow(self.exponent).unwrap()
    }

    pub fn to_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.numerator, self.denominator())
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    /// Coefficient of `p^-j` for `1 <= j <= m`, zero beyond.
    pub fn digit(&self, j: u32) -> u32 {
        if j == 0 || j > self.exponent {
            return 0;
        }
        let p = self.radix.get() as u64;
        ((self.numerator / p.pow(self.exponent - j)) % p) as u32
    }

    /// Fractional digits `[w_1, ..., w_m]` (coefficients of `p^-1 .. p^-m`).
    pub fn fractional_digits(&self) -> Vec<u32> {
        (1..=self.exponent).map(|j| self.digit(j)).collect()
    }

    pub fn to_digits(&self) -> DigitVector {
        let mut fractional_digits = self.fractional_digits();
        while fractional_digits.last() == Some(&0) {
            fractional_digits.pop();
        }
        DigitVector {
            radix: self.radix,
            integer_digits: Vec::new(),
            fractional_digits,
        }
    }
}

impl fmt::Display for PFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}^{}", self.numerator, self.radix, self.exponent)
    }
}

impl FromStr for PFraction {
    type Err = Error;

    /// Accepts `"K/p^m"` or `"K/D"`; the latter is read as `K / D^1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFraction(format!("expected \"K/p^m\", got {s:?}"));
        let (num, den) = s.trim().split_once('/').ok_or_else(bad)?;
        let numerator: u64 = num.trim().parse().map_err(|_| bad())?;
        let (base, exponent) = match den.trim().split_once('^') {
            Some((b, e)) => (
                b.trim().parse::<u32>().map_err(|_| bad())?,
                e.trim().parse::<u32>().map_err(|_| bad())?,
            ),
            None => (den.trim().parse::<u32>().map_err(|_| bad())?, 1),
        };
        PFraction::new(numerator, Radix::new(base)?, exponent)
    }
}

/// `ω ⊗_p n` for a fractional `ω` and integer `n`:
/// `Σ_j ω_j · n_{j-1} mod p`, pairing `ω`'s `p^-j` digit with `n`'s `p^(j-1)` digit.
pub fn pmul(omega: &PFraction, n: u64, radix: Radix) -> Result<u32> {
    if omega.radix != radix {
        return Err(Error::RadixMismatch {
            fraction: omega.radix.get(),
            expected: radix.get(),
        });
    }
    Ok(pmul_unchecked(omega, n))
}

#[inline]
pub(crate) fn pmul_unchecked(omega: &PFraction, mut n: u64) -> u32 {
    let p = omega.radix.get() as u64;
    let m = omega.exponent as usize;
    // K's base-p digits, least significant first; the p^-1 digit of ω is K[m-1].
    let mut k_digits = [0u64; 64];
    let mut k = omega.numerator;
    for d in k_digits.iter_mut().take(m) {
        *d = k % p;
        k /= p;
    }
    let mut acc = 0u64;
    for i in 0..m {
        if n == 0 {
            break;
        }
        acc = (acc + k_digits[m - 1 - i] * (n % p)) % p;
        n /= p;
    }
    acc as u32
}

/// Carry-free digitwise sum `a ⊕_p b`.
pub fn digitwise_add(a: u64, b: u64, radix: Radix) -> u64 {
    let p = radix.get() as u64;
    let (mut a, mut b) = (a, b);
    let mut out = 0u64;
    let mut place = 1u64;
    while a > 0 || b > 0 {
        let d = (a % p + b % p) % p;
        out += d * place;
        a /= p;
        b /= p;
        if a > 0 || b > 0 {
            place *= p;
        }
    }
    out
}
