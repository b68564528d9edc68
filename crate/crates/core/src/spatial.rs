//! Code-division spreading across users.
//!
//! Three code families are available: Walsh rows (`p = 2`), Chrestenson
//! rows for any radix, and ±1 maximal-length sequences from a Fibonacci
//! LFSR. Users are chip-synchronous: symbol `n` of user `u` occupies chips
//! `n·L_s .. (n+1)·L_s` of the composite.

use std::fmt;

use num_complex::Complex64;

use crate::chrestenson::ChrestensonMatrix;
use crate::error::{Error, Result};
use crate::padic::Radix;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeFamily {
    Walsh,
    ChRow,
    PnMsequence,
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeFamily::Walsh => "walsh",
            CodeFamily::ChRow => "ch",
            CodeFamily::PnMsequence => "pn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCode {
    chips: Vec<Complex64>,
    family: CodeFamily,
    id: String,
}

impl SpreadingCode {
    /// Wraps arbitrary unit-modulus chips.
    pub fn custom(chips: Vec<Complex64>, id: impl Into<String>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::DimensionMismatch("a code needs at least one chip".into()));
        }
        if let Some(k) = chips.iter().position(|c| (c.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidParameter(format!("chip {k} is not unit modulus")));
        }
        Ok(SpreadingCode {
            chips,
            family: CodeFamily::ChRow,
            id: id.into(),
        })
    }

    pub fn chips(&self) -> &[Complex64] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn family(&self) -> CodeFamily {
        self.family
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

fn matrix_row(radix: Radix, m: u32, row: u64) -> Result<Vec<Complex64>> {
    let mat = ChrestensonMatrix::new(radix, m)?;
    if row >= mat.size() as u64 {
        return Err(Error::RowOutOfRange {
            row,
            size: mat.size() as u64,
        });
    }
    Ok(mat.row(row as usize))
}

/// Row `row` of the `2^m` Walsh set in Chrestenson (digit-reversed) order.
pub fn walsh_code(m: u32, row: u64) -> Result<SpreadingCode> {
    let radix = Radix::new(2)?;
    Ok(SpreadingCode {
        chips: matrix_row(radix, m, row)?,
        family: CodeFamily::Walsh,
        id: format!("walsh m={m} row={row}"),
    })
}

/// Row `row` of the `p^m` Chrestenson matrix.
pub fn ch_code(radix: Radix, m: u32, row: u64) -> Result<SpreadingCode> {
    Ok(SpreadingCode {
        chips: matrix_row(radix, m, row)?,
        family: CodeFamily::ChRow,
        id: format!("ch p={radix} m={m} row={row}"),
    })
}

/// Fibonacci LFSR description.
///
/// Stages are numbered `1..=degree`; each clock outputs stage `degree`,
/// shifts every stage up by one and loads stage 1 with the XOR of the tapped
/// stages. Taps `{r, a, b, ...}` correspond to the feedback polynomial
/// `x^r + x^a + x^b + ... + 1`. Seed bit `i - 1` is the initial content of
/// stage `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrSpec {
    degree: u32,
    taps: Vec<u32>,
    seed: u64,
}

impl LfsrSpec {
    pub fn new(degree: u32, mut taps: Vec<u32>, seed: u64) -> Result<Self> {
        if !(2..=32).contains(&degree) {
            return Err(Error::InvalidTaps(format!("degree {degree} outside 2..=32")));
        }
        taps.sort_unstable();
        taps.dedup();
        if taps.iter().any(|&t| t == 0 || t > degree) {
            return Err(Error::InvalidTaps(format!("taps {taps:?} must lie in 1..={degree}")));
        }
        if taps.last() != Some(&degree) {
            return Err(Error::InvalidTaps(format!("taps {taps:?} must include the degree {degree}")));
        }
        let mask = (1u64 << degree) - 1;
        if seed & mask == 0 {
            return Err(Error::ZeroSeed);
        }
        if seed & !mask != 0 {
            return Err(Error::InvalidParameter(format!(
                "seed {seed:#x} does not fit in {degree} bits"
            )));
        }
        Ok(LfsrSpec { degree, taps, seed })
    }

    /// Known primitive tap set for `degree` in `2..=16`, seed 1.
    pub fn primitive(degree: u32) -> Result<Self> {
        let taps: &[u32] = match degree {
            2 => &[2, 1],
            3 => &[3, 2],
            4 => &[4, 3],
            5 => &[5, 3],
            6 => &[6, 5],
            7 => &[7, 6],
            8 => &[8, 6, 5, 4],
            9 => &[9, 5],
            10 => &[10, 7],
            11 => &[11, 9],
            12 => &[12, 11, 10, 4],
            13 => &[13, 12, 11, 8],
            14 => &[14, 13, 12, 2],
            15 => &[15, 14],
            16 => &[16, 15, 13, 4],
            _ => {
                return Err(Error::InvalidTaps(format!(
                    "no built-in primitive polynomial for degree {degree}"
                )))
            }
        };
        LfsrSpec::new(degree, taps.to_vec(), 1)
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self> {
        LfsrSpec::new(self.degree, self.taps.clone(), seed)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `2^r - 1`, the period when the taps are primitive.
    pub fn max_period(&self) -> usize {
        (1usize << self.degree) - 1
    }

    /// Output bits, one per clock.
    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        let mask = self.taps.iter().fold(0u64, |m, &t| m | 1 << (t - 1));
        let top = self.degree - 1;
        let full = (1u64 << self.degree) - 1;
        let mut state = self.seed;
        std::iter::from_fn(move || {
            let out = ((state >> top) & 1) as u8;
            let feedback = (state & mask).count_ones() as u64 & 1;
            state = ((state << 1) | feedback) & full;
            Some(out)
        })
    }

    /// Smallest period of the output stream, found by simulation.
    pub fn period(&self) -> usize {
        // the state sequence is purely periodic since the update is invertible
        let mask = self.taps.iter().fold(0u64, |m, &t| m | 1 << (t - 1));
        let full = (1u64 << self.degree) - 1;
        let mut state = self.seed;
        let mut n = 0;
        loop {
            let feedback = (state & mask).count_ones() as u64 & 1;
            state = ((state << 1) | feedback) & full;
            n += 1;
            if state == self.seed {
                return n;
            }
        }
    }
}

impl fmt::Display for LfsrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let taps: Vec<String> = self.taps.iter().rev().map(|t| t.to_string()).collect();
        write!(f, "r={} taps={} seed={:#b}", self.degree, taps.join(":"), self.seed)
    }
}

/// One period (`2^r - 1` chips) of the LFSR output mapped `b -> 1 - 2b`.
pub fn pn_msequence(spec: &LfsrSpec) -> SpreadingCode {
    let chips = spec
        .bits()
        .take(spec.max_period())
        .map(|b| Complex64::new(1.0 - 2.0 * b as f64, 0.0))
        .collect();
    SpreadingCode {
        chips,
        family: CodeFamily::PnMsequence,
        id: format!("pn {spec}"),
    }
}

fn check_code_lengths(codes: &[SpreadingCode]) -> Result<usize> {
    let first = codes
        .first()
        .ok_or_else(|| Error::DimensionMismatch("at least one user is required".into()))?;
    if let Some(bad) = codes.iter().find(|c| c.len() != first.len()) {
        return Err(Error::DimensionMismatch(format!(
            "code lengths differ: {} vs {}",
            first.len(),
            bad.len()
        )));
    }
    Ok(first.len())
}

/// `composite[n·L_s + k] = Σ_u symbols_u[n] · code_u[k]`.
pub fn mux_users(symbols_per_user: &[Signal], codes: &[SpreadingCode]) -> Result<Signal> {
    if symbols_per_user.len() != codes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} users but {} codes",
            symbols_per_user.len(),
            codes.len()
        )));
    }
    let ls = check_code_lengths(codes)?;
    let n = symbols_per_user[0].len();
    if let Some(bad) = symbols_per_user.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "users carry different symbol counts: {n} vs {}",
            bad.len()
        )));
    }
    let mut composite = vec![Complex64::new(0.0, 0.0); n * ls];
    for (symbols, code) in symbols_per_user.iter().zip(codes) {
        for (block, &s) in composite.chunks_exact_mut(ls).zip(symbols.samples()) {
            for (out, &c) in block.iter_mut().zip(code.chips()) {
                *out += s * c;
            }
        }
    }
    Signal::new(composite, symbols_per_user[0].sample_rate() * ls as f64)
}

/// Correlates each `L_s`-chip block with `code` and divides by `L_s`.
pub fn demux_user(composite: &Signal, code: &SpreadingCode, symbol_count: usize) -> Result<Signal> {
    let ls = code.len();
    if composite.len() != symbol_count * ls || symbol_count == 0 {
        return Err(Error::DimensionMismatch(format!(
            "composite has {} chips, expected {symbol_count} symbols x {ls} chips",
            composite.len()
        )));
    }
    let out = composite
        .samples()
        .chunks_exact(ls)
        .map(|block| {
            block
                .iter()
                .zip(code.chips())
                .map(|(v, c)| v * c.conj())
                .sum::<Complex64>()
                / ls as f64
        })
        .collect();
    Signal::new(out, composite.sample_rate() / ls as f64)
}

/// Normalized cyclic correlation `(1/L_s) Σ_k a[k] · conj(b[(k + lag) mod L_s])`.
pub fn cross_correlation(a: &SpreadingCode, b: &SpreadingCode, lag: i64) -> Result<Complex64> {
    let ls = a.len();
    if b.len() != ls {
        return Err(Error::DimensionMismatch(format!(
            "code lengths differ: {ls} vs {}",
            b.len()
        )));
    }
    let shift = lag.rem_euclid(ls as i64) as usize;
    let sum: Complex64 = a
        .chips()
        .iter()
        .enumerate()
        .map(|(k, &x)| x * b.chips()[(k + shift) % ls].conj())
        .sum();
    Ok(sum / ls as f64)
}

/// Pairwise interference summary for a code set.
#[derive(Debug, Clone, PartialEq)]
pub struct MaiEntry {
    pub a: usize,
    pub b: usize,
    pub zero_lag: Complex64,
    /// Largest `|correlation|` over lags `1..L_s`; zero when `L_s == 1`.
    pub max_nonzero_lag: f64,
}

pub fn mai_table(codes: &[SpreadingCode]) -> Result<Vec<MaiEntry>> {
    let ls = check_code_lengths(codes)?;
    let mut table = Vec::with_capacity(codes.len() * codes.len());
    for (i, a) in codes.iter().enumerate() {
        for (j, b) in codes.iter().enumerate() {
            let zero_lag = cross_correlation(a, b, 0)?;
            let mut max_nonzero_lag = 0.0f64;
            for lag in 1..ls as i64 {
                max_nonzero_lag = max_nonzero_lag.max(cross_correlation(a, b, lag)?.norm());
            }
            table.push(MaiEntry {
                a: i,
                b: j,
                zero_lag,
                max_nonzero_lag,
            });
        }
    }
    Ok(table)
}
