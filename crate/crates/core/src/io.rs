//! File formats: signal CSV (`index,re,im`), 16-bit mono WAV input, PSD CSV
//! and the small tables emitted by the pipeline.
//!
//! Floats are written in Rust's shortest round-trip form, so a value read
//! back is bit-identical to the one written.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::PsdEstimate;
use crate::channel::NoiseRecord;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::spatial::{MaiEntry, SpreadingCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Csv,
    Wav,
}

impl SignalFormat {
    /// Guesses from the file extension; anything but `.wav` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("wav") => SignalFormat::Wav,
            _ => SignalFormat::Csv,
        }
    }
}

impl fmt::Display for SignalFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalFormat::Csv => "csv",
            SignalFormat::Wav => "wav",
        })
    }
}

impl FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(SignalFormat::Csv),
            "wav" | "wav16" | "wav16-mono" => Ok(SignalFormat::Wav),
            other => Err(Error::UnsupportedFormat(format!("unknown signal format `{other}`"))),
        }
    }
}

pub fn load_signal(path: &Path, format: SignalFormat) -> Result<Signal> {
    match format {
        SignalFormat::Csv => load_csv(path),
        SignalFormat::Wav => load_wav(path),
    }
}

fn parse_error(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn csv_location(pos: Option<&csv::Position>) -> String {
    match pos {
        Some(p) => format!("line {}, byte {}", p.line(), p.byte()),
        None => "unknown position".into(),
    }
}

fn load_csv(path: &Path) -> Result<Signal> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let location = csv_location(record.position());
        if record.len() != 3 {
            return Err(parse_error(
                path,
                location,
                format!("expected 3 fields (index,re,im), found {}", record.len()),
            ));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| parse_error(path, location.clone(), format!("bad index `{}`", &record[0])))?;
        if index != samples.len() {
            return Err(parse_error(
                path,
                location,
                format!("expected index {}, found {index}", samples.len()),
            ));
        }
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| parse_error(path, location.clone(), format!("bad number `{}`", &record[i])))
        };
        samples.push(Complex64::new(field(1)?, field(2)?));
    }
    if samples.is_empty() {
        return Err(parse_error(path, "end of file".into(), "no samples"));
    }
    Signal::from_samples(samples).map_err(|e| parse_error(path, "data".into(), e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let location = csv_location(e.position());
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => parse_error(path, location, message),
    }
}

fn load_wav(path: &Path) -> Result<Signal> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {}-bit {:?} samples, only 16-bit PCM is supported",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let values = reader
        .into_samples::<i16>()
        .enumerate()
        .map(|(i, s)| {
            s.map(|v| v as f64 / 32768.0)
                .map_err(|e| match wav_error(path, e) {
                    Error::Parse { path, message, .. } => Error::Parse {
                        path,
                        location: format!("sample {i}"),
                        message,
                    },
                    other => other,
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(parse_error(path, "data chunk".into(), "no samples"));
    }
    Signal::new(
        values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        spec.sample_rate as f64,
    )
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedFormat(format!("{}: unsupported WAV encoding", path.display())),
        other => parse_error(path, "header".into(), other.to_string()),
    }
}

/// Writes `header` and then one line per row.
pub fn write_table_to<W, I, R>(w: &mut W, header: &str, rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: fmt::Display,
{
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()
}

pub fn write_table<I, R>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: fmt::Display,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table_to(&mut BufWriter::new(file), header, rows).map_err(|e| Error::io(path, e))
}

pub const SIGNAL_HEADER: &str = "index,re,im";

pub fn signal_rows(samples: &[Complex64]) -> impl Iterator<Item = String> + '_ {
    samples.iter().enumerate().map(|(i, v)| format!("{i},{},{}", v.re, v.im))
}

pub const PSD_HEADER: &str = "bin,freq_cycles_per_sample,power";

pub fn psd_rows(psd: &PsdEstimate) -> impl Iterator<Item = String> {
    psd.centered_rows().into_iter().map(|(k, f, p)| format!("{k},{f},{p}"))
}

pub const CODES_HEADER: &str = "code,chip,re,im";

pub fn code_rows(codes: &[SpreadingCode]) -> impl Iterator<Item = String> + '_ {
    codes.iter().flat_map(|c| {
        c.chips()
            .iter()
            .enumerate()
            .map(move |(k, v)| format!("{},{k},{},{}", c.id(), v.re, v.im))
    })
}

pub fn save_signal(signal: &Signal, path: &Path) -> Result<()> {
    save_samples(signal.samples(), path)
}

/// Like [`save_signal`] but also accepts an empty slice (header-only file).
pub fn save_samples(samples: &[Complex64], path: &Path) -> Result<()> {
    write_table(path, SIGNAL_HEADER, signal_rows(samples))
}

/// Centered order, most negative frequency first.
pub fn save_psd(psd: &PsdEstimate, path: &Path) -> Result<()> {
    write_table(path, PSD_HEADER, psd_rows(psd))
}

pub fn save_noise(record: &NoiseRecord, path: &Path) -> Result<()> {
    write_table(
        path,
        "position,re,im",
        record
            .positions
            .iter()
            .zip(&record.noise_values)
            .map(|(k, v)| format!("{k},{},{}", v.re, v.im)),
    )
}

pub fn save_codes(codes: &[SpreadingCode], path: &Path) -> Result<()> {
    write_table(path, CODES_HEADER, code_rows(codes))
}

pub const MAI_HEADER: &str = "a,b,zero_lag_re,zero_lag_im,zero_lag_abs,max_nonzero_lag_abs";

pub fn mai_row(codes: &[SpreadingCode], e: &MaiEntry) -> String {
    format!(
        "{},{},{},{},{},{}",
        codes[e.a].id(),
        codes[e.b].id(),
        e.zero_lag.re,
        e.zero_lag.im,
        e.zero_lag.norm(),
        e.max_nonzero_lag
    )
}

pub fn save_mai(codes: &[SpreadingCode], table: &[MaiEntry], path: &Path) -> Result<()> {
    write_table(path, MAI_HEADER, table.iter().map(|e| mai_row(codes, e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn csv_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "index,re,im\n0,1,0\n1,0,0\n").unwrap();
        let s = load_signal(&path, SignalFormat::Csv).unwrap();
        assert_eq!(s.samples(), &[c(1.0, 0.0), c(0.0, 0.0)]);

        save_signal(&Signal::from_samples(vec![c(1.0, 2.0)]).unwrap(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "index,re,im\n0,1,2\n");

        save_samples(&[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "index,re,im\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let s = Signal::from_samples(vec![c(0.1, -1e-300), c(1.0 / 3.0, 2.5e17), c(-0.0, f64::MIN_POSITIVE)]).unwrap();
        save_signal(&s, &path).unwrap();
        assert_eq!(load_signal(&path, SignalFormat::Csv).unwrap().samples(), s.samples());
    }

    #[test]
    fn csv_errors_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "index,re,im\n0,1,0\n1,zz,0\n").unwrap();
        match load_signal(&path, SignalFormat::Csv) {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line 3"), "{location}"),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "index,re,im\n0,1,0\n1,2\n").unwrap();
        assert!(matches!(load_signal(&path, SignalFormat::Csv), Err(Error::Parse { .. })));
        fs::write(&path, "index,re,im\n1,1,0\n").unwrap();
        assert!(matches!(load_signal(&path, SignalFormat::Csv), Err(Error::Parse { .. })));
        fs::write(&path, "index,re,im\n").unwrap();
        assert!(matches!(load_signal(&path, SignalFormat::Csv), Err(Error::Parse { .. })));

        let err = load_signal(&dir.path().join("missing.csv"), SignalFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    fn write_wav(path: &Path, channels: u16, bits: u16, values: &[i32]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &v in values {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn wav_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_wav(&path, 1, 16, &[-32768, 0, 16384, 32767]);
        let s = load_signal(&path, SignalFormat::Wav).unwrap();
        let re: Vec<f64> = s.samples().iter().map(|v| v.re).collect();
        assert_eq!(re, vec![-1.0, 0.0, 0.5, 32767.0 / 32768.0]);
        assert!(s.samples().iter().all(|v| v.im == 0.0));
        assert_eq!(s.sample_rate(), 8000.0);
    }

    #[test]
    fn wav_rejects_stereo_and_other_depths() {
        let dir = tempfile::tempdir().unwrap();
        let stereo = dir.path().join("s.wav");
        write_wav(&stereo, 2, 16, &[1, 2, 3, 4]);
        assert!(matches!(load_signal(&stereo, SignalFormat::Wav), Err(Error::UnsupportedFormat(_))));
        let eight = dir.path().join("e.wav");
        write_wav(&eight, 1, 8, &[1, 2]);
        assert!(matches!(load_signal(&eight, SignalFormat::Wav), Err(Error::UnsupportedFormat(_))));
        let junk = dir.path().join("j.wav");
        fs::write(&junk, b"not a wav file at all").unwrap();
        assert_eq!(load_signal(&junk, SignalFormat::Wav).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<SignalFormat>().unwrap(), SignalFormat::Csv);
        assert_eq!("wav16-mono".parse::<SignalFormat>().unwrap(), SignalFormat::Wav);
        assert!("flac".parse::<SignalFormat>().is_err());
        assert_eq!(SignalFormat::from_path(Path::new("a/b.WAV")), SignalFormat::Wav);
        assert_eq!(SignalFormat::from_path(Path::new("a/b.txt")), SignalFormat::Csv);
    }

    #[test]
    fn psd_csv_is_centered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let psd = PsdEstimate {
            bins: vec![1.0, 2.0, 3.0, 4.0],
            bin_resolution: 0.25,
            n_samples: 4,
        };
        save_psd(&psd, &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "bin,freq_cycles_per_sample,power\n-1,-0.25,4\n0,0,1\n1,0.25,2\n2,0.5,3\n"
        );
    }
}
