//! End-to-end experiment runs driven by a TOML [`RunConfig`].
//!
//! A run loads or synthesizes the input, pushes it through an ordered chain
//! of stages, writes every intermediate signal and spectrum as CSV into the
//! output directory, and finishes with `report.toml`. Everything written is
//! a function of the config and seed only.
//!
//! ```toml
//! pipeline = ["temporal_spread", "impulse_noise", "despread"]
//! seed = 7
//! output_dir = "out/impulse"
//!
//! [input]
//! kind = "tone"
//! omega = 0.05
//! samples = 128
//!
//! [temporal]
//! p = 8
//! omega1 = "9/8^2"
//! chips = 16
//! estimator = "trimmed:0.25"
//!
//! [impulse]
//! period = 10
//! amp_min = 0.1
//! amp_max = 1.0
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, OccupiedBand, PsdEstimate};
use crate::channel::{self, AwgnSpec, ImpulseNoiseSpec, NoiseRecord};
use crate::error::{Error, Result};
use crate::io::{self, SignalFormat};
use crate::padic::{PFraction, Radix};
use crate::signal::Signal;
use crate::spatial::{self, LfsrSpec, MaiEntry, SpreadingCode};
use crate::temporal::{self, Estimator, TemporalSpreadConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fraction of power used for every occupied-bandwidth figure in the report.
pub const ENERGY_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TemporalSpread,
    SpatialSpread,
    ImpulseNoise,
    Awgn,
    Despread,
    Demux,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::TemporalSpread => "temporal_spread",
            Stage::SpatialSpread => "spatial_spread",
            Stage::ImpulseNoise => "impulse_noise",
            Stage::Awgn => "awgn",
            Stage::Despread => "despread",
            Stage::Demux => "demux",
        }
    }

    fn inverse(self) -> Option<Stage> {
        match self {
            Stage::TemporalSpread => Some(Stage::Despread),
            Stage::SpatialSpread => Some(Stage::Demux),
            _ => None,
        }
    }

    fn is_channel(self) -> bool {
        matches!(self, Stage::ImpulseNoise | Stage::Awgn)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tone generator or a signal file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Tone {
        #[serde(default = "one")]
        amplitude: f64,
        /// Cycles per sample.
        omega: f64,
        #[serde(default)]
        phase: f64,
        samples: usize,
    },
    File {
        path: PathBuf,
        /// Defaults to the file extension.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<SignalFormat>,
    },
}

fn one() -> f64 {
    1.0
}

impl InputSpec {
    pub fn load(&self) -> Result<Signal> {
        match self {
            InputSpec::Tone {
                amplitude,
                omega,
                phase,
                samples,
            } => analysis::tone(*amplitude, *omega, *phase, *samples),
            InputSpec::File { path, format } => {
                io::load_signal(path, format.unwrap_or_else(|| SignalFormat::from_path(path)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalBlock {
    pub p: u32,
    /// Exact `K/p^m` form.
    pub omega1: String,
    pub chips: usize,
    #[serde(default = "default_estimator")]
    pub estimator: String,
}

fn default_estimator() -> String {
    "mean".into()
}

impl TemporalBlock {
    pub fn to_config(&self) -> Result<TemporalSpreadConfig> {
        let cfg = || -> Result<TemporalSpreadConfig> {
            let radix = Radix::new(self.p)?;
            let omega1 = PFraction::parse_with_radix(&self.omega1, radix)?;
            let estimator: Estimator = self.estimator.parse()?;
            TemporalSpreadConfig::new(radix, omega1, self.chips, estimator)
        };
        cfg().map_err(|e| Error::Config(format!("[temporal] {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Walsh,
    Ch,
    Pn,
}

/// Code set description. `rows` picks Walsh or Chrestenson rows, or LFSR
/// seeds for `pn`; empty means every row (one code with seed 1 for `pn`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialBlock {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    /// Defaults to the built-in primitive polynomial for `degree`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<u32>>,
    #[serde(default)]
    pub rows: Vec<u64>,
}

impl SpatialBlock {
    pub fn codes(&self) -> Result<Vec<SpreadingCode>> {
        let need = |v: Option<u32>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("[spatial] family {:?} needs `{key}`", self.family)))
        };
        match self.family {
            FamilyName::Walsh => {
                let m = need(self.m, "m")?;
                self.rows_or_all(2, m)?.into_iter().map(|r| spatial::walsh_code(m, r)).collect()
            }
            FamilyName::Ch => {
                let m = need(self.m, "m")?;
                let radix = Radix::new(need(self.p, "p")?)?;
                self.rows_or_all(radix.get(), m)?
                    .into_iter()
                    .map(|r| spatial::ch_code(radix, m, r))
                    .collect()
            }
            FamilyName::Pn => {
                let degree = need(self.degree, "degree")?;
                let base = match &self.taps {
                    Some(t) => LfsrSpec::new(degree, t.clone(), 1)?,
                    None => LfsrSpec::primitive(degree)?,
                };
                let seeds = if self.rows.is_empty() { vec![1] } else { self.rows.clone() };
                seeds
                    .into_iter()
                    .map(|s| Ok(spatial::pn_msequence(&base.with_seed(s)?)))
                    .collect()
            }
        }
    }

    fn rows_or_all(&self, p: u32, m: u32) -> Result<Vec<u64>> {
        if !self.rows.is_empty() {
            return Ok(self.rows.clone());
        }
        let n = (p as u64)
            .checked_pow(m)
            .filter(|&n| n <= crate::chrestenson::DEFAULT_ROW_LIMIT as u64)
            .ok_or(Error::SizeLimitExceeded {
                size: (p as u128).saturating_pow(m),
                limit: crate::chrestenson::DEFAULT_ROW_LIMIT,
            })?;
        Ok((0..n).collect())
    }
}

/// Codes plus their pairwise correlation table.
pub fn code_table(block: &SpatialBlock) -> Result<(Vec<SpreadingCode>, Vec<MaiEntry>)> {
    let codes = block.codes()?;
    let table = spatial::mai_table(&codes)?;
    Ok((codes, table))
}

/// Impulse bursts; the amplitudes are fractions of the peak magnitude of
/// the signal entering the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseBlock {
    #[serde(default = "ten")]
    pub period: usize,
    #[serde(default = "one_usize")]
    pub burst_len: usize,
    #[serde(default = "tenth")]
    pub amp_min: f64,
    #[serde(default = "one")]
    pub amp_max: f64,
    #[serde(default)]
    pub real_only: bool,
}

impl Default for ImpulseBlock {
    fn default() -> Self {
        ImpulseBlock {
            period: ten(),
            burst_len: one_usize(),
            amp_min: tenth(),
            amp_max: one(),
            real_only: false,
        }
    }
}

impl ImpulseBlock {
    pub fn to_spec(&self, seed: u64) -> Result<ImpulseNoiseSpec> {
        let spec = ImpulseNoiseSpec {
            period: self.period,
            burst_len: self.burst_len,
            amp_min: self.amp_min,
            amp_max: self.amp_max,
            seed,
            real_only: self.real_only,
        };
        spec.validate().map_err(|e| Error::Config(format!("[impulse] {e}")))?;
        Ok(spec)
    }
}

fn ten() -> usize {
    10
}
fn one_usize() -> usize {
    1
}
fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgnBlock {
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub seed: u64,
    /// Not echoed into the report, so runs into different directories
    /// still produce identical files.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    pub input: InputSpec,
    /// Users 1.. of a multi-user run; user 0 is `input`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_users: Vec<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<TemporalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse: Option<ImpulseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awgn: Option<AwgnBlock>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub p: Option<u32>,
    pub omega1: Option<String>,
    pub chips: Option<usize>,
    pub estimator: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if o.p.is_none() && o.omega1.is_none() && o.chips.is_none() && o.estimator.is_none() {
            return Ok(());
        }
        let t = match self.temporal.as_mut() {
            Some(t) => t,
            None => {
                let (Some(p), Some(omega1), Some(chips)) = (o.p, o.omega1.clone(), o.chips) else {
                    return Err(Error::Config(
                        "no [temporal] block: --p, --omega1 and --chips are all required".into(),
                    ));
                };
                self.temporal.insert(TemporalBlock {
                    p,
                    omega1,
                    chips,
                    estimator: default_estimator(),
                })
            }
        };
        if let Some(p) = o.p {
            t.p = p;
        }
        if let Some(w) = &o.omega1 {
            t.omega1 = w.clone();
        }
        if let Some(l) = o.chips {
            t.chips = l;
        }
        if let Some(e) = &o.estimator {
            t.estimator = e.clone();
        }
        Ok(())
    }

    /// Checks the stage chain and the parameter blocks it needs.
    pub fn plan(&self) -> Result<Plan> {
        let (tx, ch) = validate_chain(&self.pipeline)?;
        let uses = |s: Stage| self.pipeline.contains(&s);
        let missing = |block: &str, stage: Stage| Error::Config(format!("stage `{stage}` needs a [{block}] block"));

        let temporal = if uses(Stage::TemporalSpread) {
            Some(self.temporal.as_ref().ok_or(missing("temporal", Stage::TemporalSpread))?.to_config()?)
        } else {
            None
        };
        let users = 1 + self.extra_users.len();
        let codes = if uses(Stage::SpatialSpread) {
            let block = self.spatial.as_ref().ok_or(missing("spatial", Stage::SpatialSpread))?;
            let codes = block.codes().map_err(|e| match e {
                Error::Config(_) => e,
                other => Error::Config(format!("[spatial] {other}")),
            })?;
            if codes.len() < users {
                return Err(Error::Config(format!(
                    "[spatial] {} users but only {} codes",
                    users,
                    codes.len()
                )));
            }
            Some(codes.into_iter().take(users).collect())
        } else {
            if users > 1 {
                return Err(Error::Config("extra_users need a spatial_spread stage".into()));
            }
            None
        };
        let impulse = if uses(Stage::ImpulseNoise) {
            let b = self.impulse.as_ref().ok_or(missing("impulse", Stage::ImpulseNoise))?;
            Some(b.to_spec(self.seed)?)
        } else {
            None
        };
        let awgn = if uses(Stage::Awgn) {
            let b = self.awgn.as_ref().ok_or(missing("awgn", Stage::Awgn))?;
            if b.snr_db.is_nan() || b.snr_db == f64::NEG_INFINITY {
                return Err(Error::Config(format!("[awgn] invalid snr_db {}", b.snr_db)));
            }
            Some(AwgnSpec {
                snr_db: b.snr_db,
                seed: self.seed.wrapping_add(1),
            })
        } else {
            None
        };
        Ok(Plan {
            transmit_stages: tx,
            channel_stages: ch,
            temporal,
            codes,
            impulse,
            awgn,
        })
    }
}

/// Parameter blocks of a config file without the run-specific parts, for
/// the single-step commands. Unknown keys are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PartialConfig {
    pub seed: Option<u64>,
    pub temporal: Option<TemporalBlock>,
    pub spatial: Option<SpatialBlock>,
    pub impulse: Option<ImpulseBlock>,
    pub awgn: Option<AwgnBlock>,
}

impl PartialConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Validated, ready-to-run form of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Plan {
    pub transmit_stages: usize,
    pub channel_stages: usize,
    pub temporal: Option<TemporalSpreadConfig>,
    pub codes: Option<Vec<SpreadingCode>>,
    /// Seeded from the run seed.
    pub impulse: Option<ImpulseNoiseSpec>,
    /// Seeded from the run seed plus one.
    pub awgn: Option<AwgnSpec>,
}

/// Returns the number of transmit and channel stages. The chain must be
/// transmit stages, then channel stages, then the inverses of the transmit
/// stages in reverse order.
pub fn validate_chain(stages: &[Stage]) -> Result<(usize, usize)> {
    if stages.is_empty() {
        return Err(Error::Config("pipeline has no stages".into()));
    }
    let tx = stages.iter().take_while(|s| s.inverse().is_some()).count();
    let ch = stages[tx..].iter().take_while(|s| s.is_channel()).count();
    let transmit = &stages[..tx];
    let channel = &stages[tx..tx + ch];
    let receive = &stages[tx + ch..];
    for (i, s) in transmit.iter().enumerate() {
        if transmit[..i].contains(s) {
            return Err(Error::Config(format!("stage `{s}` appears twice")));
        }
    }
    for (i, s) in channel.iter().enumerate() {
        if channel[..i].contains(s) {
            return Err(Error::Config(format!("stage `{s}` appears twice")));
        }
    }
    let expected: Vec<Stage> = transmit.iter().rev().filter_map(|s| s.inverse()).collect();
    if receive != expected.as_slice() {
        let show = |v: &[Stage]| v.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ");
        return Err(Error::Config(format!(
            "receive stages [{}] do not undo the transmit stages; expected [{}]",
            show(receive),
            show(&expected)
        )));
    }
    Ok((tx, ch))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Length of the (first) signal leaving the stage.
    pub output_len: usize,
    pub streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lengths {
    pub original: usize,
    pub transmitted: usize,
    pub received: usize,
    pub recovered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandMeasure {
    pub low_bin: i64,
    pub high_bin: i64,
    pub width_bins: usize,
    pub width_cycles_per_sample: f64,
    pub upper_edge_bins: i64,
    pub upper_edge_cycles_per_sample: f64,
    pub n_bins: usize,
}

impl From<OccupiedBand> for BandMeasure {
    fn from(b: OccupiedBand) -> Self {
        BandMeasure {
            low_bin: b.low,
            high_bin: b.high,
            width_bins: b.width(),
            width_cycles_per_sample: b.width_cycles(),
            upper_edge_bins: b.upper_edge(),
            upper_edge_cycles_per_sample: b.upper_edge_cycles(),
            n_bins: b.n_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub energy_fraction: f64,
    pub original: BandMeasure,
    pub flatness_original: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread: Option<BandMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flatness_spread: Option<f64>,
    /// Zero-order hold of the original to the transmitted length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BandMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flatness_baseline: Option<f64>,
    /// Spread width over baseline width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widening: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSummary {
    pub impulses: usize,
    pub max_magnitude: f64,
    pub mean_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub seed: u64,
    /// User 0.
    pub nmse: f64,
    pub user_nmse: Vec<f64>,
    pub lengths: Lengths,
    pub stages: Vec<StageRecord>,
    /// Absent when the original is too short or identically zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSummary>,
    pub config: RunConfig,
}

impl ExperimentReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub originals: Vec<Signal>,
    pub transmitted: Signal,
    pub received: Signal,
    pub recovered: Vec<Signal>,
    pub errors: Vec<Signal>,
    pub noise: Option<NoiseRecord>,
    pub codes: Option<Vec<SpreadingCode>>,
    pub psd_original: Option<PsdEstimate>,
    pub psd_spread: Option<PsdEstimate>,
    pub psd_baseline: Option<PsdEstimate>,
    pub report: ExperimentReport,
}

/// Runs the chain in memory without touching the output directory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let plan = cfg.plan()?;
    let originals = std::iter::once(&cfg.input)
        .chain(&cfg.extra_users)
        .map(InputSpec::load)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("input"))?;

    let mut stream = originals.clone();
    let mut before_temporal: Vec<usize> = Vec::new();
    let mut before_mux = 0;
    let mut noise = None;
    let mut transmitted = None;
    let mut received = None;
    let mut stages = Vec::with_capacity(cfg.pipeline.len());
    let tx_end = plan.transmit_stages;
    let ch_end = tx_end + plan.channel_stages;
    if tx_end == 0 {
        transmitted = Some(stream[0].clone());
    }
    if ch_end == 0 {
        received = Some(stream[0].clone());
    }

    for (i, &stage) in cfg.pipeline.iter().enumerate() {
        match stage {
            Stage::TemporalSpread => before_temporal = stream.iter().map(Signal::len).collect(),
            Stage::SpatialSpread => before_mux = stream[0].len(),
            _ => {}
        }
        let mut step = || -> Result<Vec<Signal>> {
            Ok(match stage {
                Stage::TemporalSpread => {
                    let t = plan.temporal.as_ref().expect("planned");
                    stream.iter().map(|s| temporal::spread(s, t)).collect()
                }
                Stage::SpatialSpread => vec![spatial::mux_users(&stream, plan.codes.as_ref().expect("planned"))?],
                Stage::ImpulseNoise => {
                    let (s, record) = channel::apply_impulse_noise(&stream[0], plan.impulse.as_ref().expect("planned"))?;
                    noise = Some(record);
                    vec![s]
                }
                Stage::Awgn => vec![channel::apply_awgn(&stream[0], plan.awgn.as_ref().expect("planned"))?],
                Stage::Despread => {
                    let t = plan.temporal.as_ref().expect("planned");
                    stream
                        .iter()
                        .zip(&before_temporal)
                        .map(|(s, &n)| temporal::despread(s, t, n))
                        .collect::<Result<_>>()?
                }
                Stage::Demux => plan
                    .codes
                    .as_ref()
                    .expect("planned")
                    .iter()
                    .map(|c| spatial::demux_user(&stream[0], c, before_mux))
                    .collect::<Result<_>>()?,
            })
        };
        stream = step().map_err(|e| e.in_stage(stage.name()))?;
        stages.push(StageRecord {
            stage,
            output_len: stream[0].len(),
            streams: stream.len(),
        });
        if i + 1 == tx_end {
            transmitted = Some(stream[0].clone());
        }
        if i + 1 == ch_end {
            received = Some(stream[0].clone());
        }
    }
    let transmitted = transmitted.expect("set after the transmit stages");
    let received = received.expect("set after the channel stages");
    let recovered = stream;

    let mut errors = Vec::with_capacity(recovered.len());
    let mut user_nmse = Vec::with_capacity(recovered.len());
    for (r, o) in recovered.iter().zip(&originals) {
        let (e, nmse) = channel::error_signal(r, o).map_err(|e| e.in_stage("compare"))?;
        errors.push(e);
        user_nmse.push(nmse);
    }

    let (spectrum, psd_original, psd_spread, psd_baseline) =
        measure_spectra(&originals[0], (tx_end > 0).then_some(&transmitted)).map_err(|e| e.in_stage("analysis"))?;

    let report = ExperimentReport {
        version: VERSION.to_string(),
        seed: cfg.seed,
        nmse: user_nmse[0],
        user_nmse,
        lengths: Lengths {
            original: originals[0].len(),
            transmitted: transmitted.len(),
            received: received.len(),
            recovered: recovered[0].len(),
        },
        stages,
        spectrum,
        noise: noise.as_ref().map(|n| NoiseSummary {
            impulses: n.len(),
            max_magnitude: n.max_magnitude(),
            mean_magnitude: n.mean_magnitude(),
        }),
        config: cfg.clone(),
    };
    Ok(RunOutput {
        originals,
        transmitted,
        received,
        recovered,
        errors,
        noise,
        codes: plan.codes,
        psd_original,
        psd_spread,
        psd_baseline,
        report,
    })
}

type Spectra = (
    Option<SpectrumReport>,
    Option<PsdEstimate>,
    Option<PsdEstimate>,
    Option<PsdEstimate>,
);

fn measure_spectra(original: &Signal, spread: Option<&Signal>) -> Result<Spectra> {
    if original.len() < 2 || original.energy() == 0.0 {
        return Ok((None, None, None, None));
    }
    let psd_o = analysis::periodogram(original)?;
    let band = |p: &PsdEstimate| analysis::occupied_bandwidth(p, ENERGY_FRACTION);
    let mut report = SpectrumReport {
        energy_fraction: ENERGY_FRACTION,
        original: band(&psd_o)?.into(),
        flatness_original: analysis::spectral_flatness(&psd_o)?,
        spread: None,
        flatness_spread: None,
        baseline: None,
        flatness_baseline: None,
        widening: None,
    };
    let (mut psd_s, mut psd_b) = (None, None);
    if let Some(s) = spread.filter(|s| s.energy() > 0.0) {
        let p = analysis::periodogram(s)?;
        let b = band(&p)?;
        report.spread = Some(b.into());
        report.flatness_spread = Some(analysis::spectral_flatness(&p)?);
        psd_s = Some(p);
        if s.len() % original.len() == 0 {
            let hold = analysis::zero_order_hold(original, s.len() / original.len())?;
            let pb = analysis::periodogram(&hold)?;
            let bb = band(&pb)?;
            report.widening = Some(b.width() as f64 / bb.width() as f64);
            report.baseline = Some(bb.into());
            report.flatness_baseline = Some(analysis::spectral_flatness(&pb)?);
            psd_b = Some(pb);
        }
    }
    Ok((Some(report), Some(psd_o), psd_s, psd_b))
}

/// Runs the config and writes every artifact into `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ExperimentReport> {
    let out = execute(cfg)?;
    write_outputs(&out, &cfg.output_dir).map_err(|e| e.in_stage("output"))?;
    Ok(out.report)
}

fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);
    io::save_signal(&out.originals[0], &path("original.csv"))?;
    io::save_signal(&out.transmitted, &path("transmitted.csv"))?;
    io::save_signal(&out.received, &path("received.csv"))?;
    io::save_signal(&out.recovered[0], &path("recovered.csv"))?;
    io::save_signal(&out.errors[0], &path("error.csv"))?;
    io::write_table(
        &path("waveform.csv"),
        "index,original_re,original_im,recovered_re,recovered_im",
        out.originals[0]
            .samples()
            .iter()
            .zip(out.recovered[0].samples())
            .enumerate()
            .map(|(i, (o, r)): (usize, (&Complex64, &Complex64))| format!("{i},{},{},{},{}", o.re, o.im, r.re, r.im)),
    )?;
    for u in 1..out.originals.len() {
        io::save_signal(&out.originals[u], &path(&format!("user{u}_original.csv")))?;
        io::save_signal(&out.recovered[u], &path(&format!("user{u}_recovered.csv")))?;
        io::save_signal(&out.errors[u], &path(&format!("user{u}_error.csv")))?;
    }
    if let Some(n) = &out.noise {
        io::save_noise(n, &path("noise.csv"))?;
    }
    if let Some(codes) = &out.codes {
        io::save_codes(codes, &path("codes.csv"))?;
        io::save_mai(codes, &spatial::mai_table(codes)?, &path("mai.csv"))?;
    }
    for (psd, name) in [
        (&out.psd_original, "psd_original.csv"),
        (&out.psd_spread, "psd_spread.csv"),
        (&out.psd_baseline, "psd_baseline.csv"),
    ] {
        if let Some(p) = psd {
            io::save_psd(p, &path(name))?;
        }
    }
    let report = path("report.toml");
    fs::write(&report, out.report.to_toml()).map_err(|e| Error::io(&report, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Stage::*;

    const IMPULSE: &str = r#"
pipeline = ["temporal_spread", "impulse_noise", "despread"]
seed = 7

[input]
kind = "tone"
omega = 0.05
samples = 128

[temporal]
p = 8
omega1 = "9/8^2"
chips = 16
estimator = "trimmed:0.25"

[impulse]
period = 10
"#;

    #[test]
    fn chain_validation() {
        assert_eq!(validate_chain(&[TemporalSpread, Despread]).unwrap(), (1, 0));
        assert_eq!(
            validate_chain(&[TemporalSpread, SpatialSpread, ImpulseNoise, Awgn, Demux, Despread]).unwrap(),
            (2, 2)
        );
        assert_eq!(validate_chain(&[SpatialSpread, TemporalSpread, Despread, Demux]).unwrap(), (2, 0));
        assert_eq!(validate_chain(&[Awgn]).unwrap(), (0, 1));
        for bad in [
            &[][..],
            &[TemporalSpread],
            &[Despread],
            &[TemporalSpread, SpatialSpread, Despread, Demux],
            &[TemporalSpread, Despread, ImpulseNoise],
            &[TemporalSpread, TemporalSpread, Despread, Despread],
            &[Awgn, Awgn],
            &[ImpulseNoise, TemporalSpread, Despread],
        ] {
            let err = validate_chain(bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad:?}");
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let mut cfg = RunConfig::from_toml(IMPULSE).unwrap();
        cfg.pipeline = vec![TemporalSpread, Despread];
        let out = execute(&cfg).unwrap();
        assert!(out.report.nmse < 1e-24);
        assert_eq!(out.report.lengths.transmitted, 128 * 16);
        assert_eq!(out.report.lengths.recovered, 128);
    }

    #[test]
    fn impulse_run_recovers() {
        let out = execute(&RunConfig::from_toml(IMPULSE).unwrap()).unwrap();
        assert!(out.report.nmse < 1e-2, "{}", out.report.nmse);
        let noise = out.report.noise.as_ref().unwrap();
        assert_eq!(noise.impulses, 2048usize.div_ceil(10));
        let spec = out.report.spectrum.as_ref().unwrap();
        assert!(spec.widening.unwrap() > 1.0);
        assert_eq!(out.report.stages.len(), 3);
    }

    #[test]
    fn two_user_walsh() {
        let text = r#"
pipeline = ["spatial_spread", "demux"]

[input]
kind = "tone"
omega = 0.05
samples = 32

[[extra_users]]
kind = "tone"
amplitude = 0.5
omega = 0.2
phase = 1.0
samples = 32

[spatial]
family = "walsh"
m = 2
rows = [1, 2]
"#;
        let out = execute(&RunConfig::from_toml(text).unwrap()).unwrap();
        assert_eq!(out.report.user_nmse.len(), 2);
        assert!(out.report.user_nmse.iter().all(|&e| e < 1e-24));
        assert_eq!(out.transmitted.len(), 128);
    }

    #[test]
    fn config_errors_are_class_config() {
        let cases = [
            IMPULSE.replace("omega1 = \"9/8^2\"", "omega1 = \"9/7^2\""),
            IMPULSE.replace("[impulse]\nperiod = 10", ""),
            IMPULSE.replace("period = 10", "period = 0"),
            IMPULSE.replace("estimator = \"trimmed:0.25\"", "estimator = \"mode\""),
            IMPULSE.replace("seed = 7", "seed = 7\nbogus = 1"),
            IMPULSE.replace("\"despread\"", "\"demux\""),
        ];
        for text in cases {
            let err = RunConfig::from_toml(&text).and_then(|c| c.plan()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut cfg = RunConfig::from_toml(IMPULSE).unwrap();
        cfg.input = InputSpec::File {
            path: "/nonexistent/x.csv".into(),
            format: None,
        };
        let err = execute(&cfg).unwrap_err();
        assert!(err.to_string().contains("`input`"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_toml(IMPULSE).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            chips: Some(4),
            estimator: Some("median".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 9);
        let t = cfg.temporal.as_ref().unwrap();
        assert_eq!((t.chips, t.estimator.as_str(), t.p), (4, "median", 8));

        cfg.temporal = None;
        assert!(cfg.apply(&Overrides { p: Some(2), ..Default::default() }).is_err());
        cfg.apply(&Overrides {
            p: Some(2),
            omega1: Some("1/2^1".into()),
            chips: Some(2),
            ..Default::default()
        })
        .unwrap();
        assert!(cfg.plan().is_ok());
    }

    #[test]
    fn report_is_deterministic_and_omits_output_dir() {
        let mut a = RunConfig::from_toml(IMPULSE).unwrap();
        let mut b = a.clone();
        a.output_dir = "one".into();
        b.output_dir = "two".into();
        let ra = execute(&a).unwrap().report.to_toml();
        assert_eq!(ra, execute(&b).unwrap().report.to_toml());
        assert!(!ra.contains("output_dir"));
        assert!(ra.contains("version = "));
    }

    #[test]
    fn code_table_walsh() {
        let block = SpatialBlock {
            family: FamilyName::Walsh,
            m: Some(2),
            p: None,
            degree: None,
            taps: None,
            rows: vec![],
        };
        let (codes, table) = code_table(&block).unwrap();
        assert_eq!(codes.len(), 4);
        assert!(table.iter().filter(|e| e.a != e.b).all(|e| e.zero_lag.norm() < 1e-12));
    }
}
