//! `chspread`: command-line front end for the Chrestenson spreading toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric or
//! domain error.

use std::io::{self as stdio, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chrestenson_spread::analysis;
use chrestenson_spread::channel::{self, AwgnSpec};
use chrestenson_spread::chrestenson;
use chrestenson_spread::io::{self as sio, SignalFormat};
use chrestenson_spread::pipeline::{
    self, AwgnBlock, FamilyName, ImpulseBlock, Overrides, PartialConfig, RunConfig, SpatialBlock, TemporalBlock,
};
use chrestenson_spread::temporal;
use chrestenson_spread::{Error, Radix, Result, Signal};

#[derive(Parser)]
#[command(name = "chspread", version, about = "Chrestenson-function spreading toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward or inverse discrete Chrestenson transform of a signal.
    Transform(TransformArgs),
    /// Temporal spreading with a Chrestenson chip sequence.
    Spread(SpreadArgs),
    /// Temporal despreading with a robust per-sample estimator.
    Despread(DespreadArgs),
    /// Impulse bursts and/or AWGN.
    Channel(ChannelArgs),
    /// Spreading codes and their correlation table.
    Codes(CodesArgs),
    /// Full pipeline from a config file.
    Run(RunArgs),
    /// Periodogram, occupied bandwidth and flatness of a signal.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Signal file (`index,re,im` CSV or 16-bit mono WAV).
    #[arg(long, short)]
    input: PathBuf,
    /// Input format; guessed from the extension when absent.
    #[arg(long, value_parser = parse_format)]
    format: Option<SignalFormat>,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> Result<Signal> {
        let format = self.format.unwrap_or_else(|| SignalFormat::from_path(&self.input));
        sio::load_signal(&self.input, format)
    }
}

fn parse_format(s: &str) -> std::result::Result<SignalFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct TemporalArgs {
    /// Config file; its [temporal] block supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<u32>,
    /// Carrier frequency as `K/p^m`.
    #[arg(long)]
    omega1: Option<String>,
    /// Chips per sample.
    #[arg(long)]
    chips: Option<usize>,
    /// mean, median or trimmed:ALPHA.
    #[arg(long)]
    estimator: Option<String>,
}

impl TemporalArgs {
    fn block(&self) -> Result<TemporalBlock> {
        let base = match &self.config {
            Some(path) => PartialConfig::load(path)?.temporal,
            None => None,
        };
        let missing = |key: &str| Error::Config(format!("missing --{key} (or [temporal] {key} in --config)"));
        Ok(TemporalBlock {
            p: self.p.or(base.as_ref().map(|b| b.p)).ok_or_else(|| missing("p"))?,
            omega1: self
                .omega1
                .clone()
                .or(base.as_ref().map(|b| b.omega1.clone()))
                .ok_or_else(|| missing("omega1"))?,
            chips: self.chips.or(base.as_ref().map(|b| b.chips)).ok_or_else(|| missing("chips"))?,
            estimator: self
                .estimator
                .clone()
                .or(base.map(|b| b.estimator))
                .unwrap_or_else(|| "mean".into()),
        })
    }
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long)]
    p: u32,
    #[arg(long)]
    inverse: bool,
    /// Use the O(N²) direct sum instead of the radix-p butterfly.
    #[arg(long)]
    direct: bool,
}

#[derive(Args)]
struct SpreadArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    temporal: TemporalArgs,
}

#[derive(Args)]
struct DespreadArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    temporal: TemporalArgs,
    /// Number of recovered samples; defaults to input length / chips.
    #[arg(long)]
    original_len: Option<usize>,
}

#[derive(Args)]
struct ChannelArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Config file; its seed, [impulse] and [awgn] blocks supply defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Impulse burst period in samples (enables impulse noise).
    #[arg(long)]
    period: Option<usize>,
    #[arg(long)]
    burst_len: Option<usize>,
    #[arg(long)]
    amp_min: Option<f64>,
    #[arg(long)]
    amp_max: Option<f64>,
    #[arg(long)]
    real_only: bool,
    /// Adds white Gaussian noise at this SNR.
    #[arg(long)]
    snr_db: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Walsh,
    Ch,
    Pn,
}

#[derive(Args)]
struct CodesArgs {
    family: Family,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    /// LFSR degree for pn.
    #[arg(long)]
    degree: Option<u32>,
    /// LFSR taps for pn, e.g. 3,2.
    #[arg(long, value_delimiter = ',')]
    taps: Option<Vec<u32>>,
    /// Rows to emit (LFSR seeds for pn); all rows when absent.
    #[arg(long, value_delimiter = ',')]
    rows: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    omega1: Option<String>,
    #[arg(long)]
    chips: Option<usize>,
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Power fraction for the occupied band.
    #[arg(long, default_value_t = pipeline::ENERGY_FRACTION)]
    fraction: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Transform(a) => cmd_transform(a),
        Command::Spread(a) => cmd_spread(a),
        Command::Despread(a) => cmd_despread(a),
        Command::Channel(a) => cmd_channel(a),
        Command::Codes(a) => cmd_codes(a),
        Command::Run(a) => cmd_run(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    }
}

/// Writes to `DIR/name` when an output directory is given, else stdout.
fn emit<I, R>(out: Option<&Path>, name: &str, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: std::fmt::Display,
{
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            sio::write_table(&dir.join(name), header, rows)
        }
        None => sio::write_table_to(&mut stdio::stdout().lock(), header, rows).map_err(|e| io_error("<stdout>", e)),
    }
}

fn io_error(path: impl AsRef<Path>, e: stdio::Error) -> Error {
    Error::Io {
        path: path.as_ref().to_path_buf(),
        source: e,
    }
}

fn emit_signal(out: Option<&Path>, name: &str, s: &Signal) -> Result<()> {
    emit(out, name, sio::SIGNAL_HEADER, sio::signal_rows(s.samples()))
}

fn cmd_transform(a: TransformArgs) -> Result<()> {
    let x = a.io.load()?;
    let radix = Radix::new(a.p)?;
    let y = match (a.inverse, a.direct) {
        (false, false) => chrestenson::dcht_forward_fast(&x, radix)?,
        (false, true) => chrestenson::dcht_forward(&x, radix)?,
        (true, false) => chrestenson::dcht_inverse_fast(&x, radix)?,
        (true, true) => chrestenson::dcht_inverse(&x, radix)?,
    };
    emit_signal(a.io.out.as_deref(), "transform.csv", &y)
}

fn cmd_spread(a: SpreadArgs) -> Result<()> {
    let cfg = a.temporal.block()?.to_config()?;
    let x = a.io.load()?;
    emit_signal(a.io.out.as_deref(), "spread.csv", &temporal::spread(&x, &cfg))
}

fn cmd_despread(a: DespreadArgs) -> Result<()> {
    let cfg = a.temporal.block()?.to_config()?;
    let y = a.io.load()?;
    let n = a.original_len.unwrap_or(y.len() / cfg.chips_per_sample());
    emit_signal(a.io.out.as_deref(), "despread.csv", &temporal::despread(&y, &cfg, n)?)
}

fn cmd_channel(a: ChannelArgs) -> Result<()> {
    let file = match &a.config {
        Some(path) => PartialConfig::load(path)?,
        None => PartialConfig::default(),
    };
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let flags_set = a.period.is_some() || a.burst_len.is_some() || a.amp_min.is_some() || a.amp_max.is_some() || a.real_only;
    let impulse = match (file.impulse, flags_set) {
        (None, false) => None,
        (base, _) => {
            let base = base.unwrap_or_default();
            Some(ImpulseBlock {
                period: a.period.unwrap_or(base.period),
                burst_len: a.burst_len.unwrap_or(base.burst_len),
                amp_min: a.amp_min.unwrap_or(base.amp_min),
                amp_max: a.amp_max.unwrap_or(base.amp_max),
                real_only: a.real_only || base.real_only,
            })
        }
    };
    let awgn = a.snr_db.map(|snr_db| AwgnBlock { snr_db }).or(file.awgn);
    if impulse.is_none() && awgn.is_none() {
        return Err(Error::Config("nothing to apply: give --period and/or --snr-db".into()));
    }
    let mut s = a.io.load()?;
    let out = a.io.out.as_deref();
    if let Some(b) = impulse {
        let (noisy, record) = channel::apply_impulse_noise(&s, &b.to_spec(seed)?)?;
        s = noisy;
        if let Some(dir) = out {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            sio::save_noise(&record, &dir.join("noise.csv"))?;
        }
    }
    if let Some(b) = awgn {
        s = channel::apply_awgn(
            &s,
            &AwgnSpec {
                snr_db: b.snr_db,
                seed: seed.wrapping_add(1),
            },
        )?;
    }
    emit_signal(out, "channel.csv", &s)
}

fn cmd_codes(a: CodesArgs) -> Result<()> {
    let block = SpatialBlock {
        family: match a.family {
            Family::Walsh => FamilyName::Walsh,
            Family::Ch => FamilyName::Ch,
            Family::Pn => FamilyName::Pn,
        },
        m: a.m,
        p: a.p,
        degree: a.degree,
        taps: a.taps,
        rows: a.rows,
    };
    let (codes, table) = pipeline::code_table(&block)?;
    let out = a.out.as_deref();
    emit(out, "codes.csv", sio::CODES_HEADER, sio::code_rows(&codes))?;
    if out.is_none() {
        println!();
    }
    emit(out, "mai.csv", sio::MAI_HEADER, table.iter().map(|e| sio::mai_row(&codes, e)))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    cfg.apply(&Overrides {
        seed: a.seed,
        output_dir: a.out,
        p: a.p,
        omega1: a.omega1,
        chips: a.chips,
        estimator: a.estimator,
    })?;
    let report = pipeline::run_pipeline(&cfg)?;
    let mut line = format!("wrote {}: nmse {:e}", cfg.output_dir.display(), report.nmse);
    if let Some(s) = &report.spectrum {
        if let Some(w) = s.widening {
            line.push_str(&format!(", widening {w:.3}"));
        }
    }
    writeln!(stdio::stdout(), "{line}").map_err(|e| io_error("<stdout>", e))
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<()> {
    let s = a.io.load()?;
    let psd = analysis::periodogram(&s)?;
    let band = analysis::occupied_bandwidth(&psd, a.fraction)?;
    let flatness = analysis::spectral_flatness(&psd)?;
    emit(a.io.out.as_deref(), "psd.csv", sio::PSD_HEADER, sio::psd_rows(&psd))?;
    eprintln!(
        "occupied band ({}): bins {}..={} width {} ({:.6} cycles/sample), upper edge {} bins, flatness {:.6}",
        a.fraction,
        band.low,
        band.high,
        band.width(),
        band.width_cycles(),
        band.upper_edge(),
        flatness
    );
    Ok(())
}
