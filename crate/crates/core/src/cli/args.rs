use std::path::{Path, PathBuf};

use clap::Args;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::signals::{
    make_noise, make_pure_tone, make_two_tone, read_signal, NoiseKind, NoiseSpec, SignalBuffer, SignalFormat,
};
use crate::stats::Centering;
use crate::stft::{default_fft_size, Convention, GridParams};
use crate::windows::{WindowSpec, WindowVariant, DEFAULT_TRUNCATION_RADIUS};

pub const DEFAULT_FS: f64 = 8000.0;
pub const DEFAULT_DURATION: f64 = 0.1;
pub const DEFAULT_SIGMA: f64 = 0.001;
pub const DEFAULT_HOP: usize = 4;

/// Validation messages gathered before any computation starts.
#[derive(Debug, Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn check<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(e.to_string());
                None
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(self.0.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SignalArgs {
    /// Two unit tones at F1,F2 Hz.
    #[arg(long, value_delimiter = ',', value_name = "F1,F2")]
    pub twotone: Option<Vec<f64>>,
    /// A unit tone at this frequency (Hz).
    #[arg(long, value_name = "HZ")]
    pub tone: Option<f64>,
    /// Gaussian white noise.
    #[arg(long)]
    pub noise: bool,
    /// Read the signal from a file instead of generating one.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Input format: wav or csv (default from the extension).
    #[arg(long)]
    pub format: Option<String>,
    /// Sample rate in Hz (generated signals and CSV input).
    #[arg(long)]
    pub fs: Option<f64>,
    /// Duration in seconds (generated signals).
    #[arg(long)]
    pub dur: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variance: Option<f64>,
    /// circular or analytic.
    #[arg(long)]
    pub noise_kind: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SignalSource {
    TwoTone { f1_hz: f64, f2_hz: f64, sample_rate_hz: f64, duration_s: f64 },
    Tone { f0_hz: f64, sample_rate_hz: f64, duration_s: f64 },
    Noise { noise: NoiseSpec, sample_rate_hz: f64, duration_s: f64 },
    File { path: PathBuf, format: SignalFormat, sample_rate_hz: Option<f64> },
}

impl SignalSource {
    pub fn load(&self) -> Result<SignalBuffer> {
        match self {
            SignalSource::TwoTone { f1_hz, f2_hz, sample_rate_hz, duration_s } => {
                make_two_tone(*f1_hz, *f2_hz, *sample_rate_hz, *duration_s)
            }
            SignalSource::Tone { f0_hz, sample_rate_hz, duration_s } => {
                make_pure_tone(*f0_hz, *sample_rate_hz, *duration_s)
            }
            SignalSource::Noise { noise, sample_rate_hz, duration_s } => make_noise(*noise, *sample_rate_hz, *duration_s),
            SignalSource::File { path, format, sample_rate_hz } => read_signal(path, *format, *sample_rate_hz),
        }
    }
}

pub fn parse_noise_kind(name: &str) -> Option<NoiseKind> {
    match name {
        "circular" | "circular_complex" | "circular-complex" => Some(NoiseKind::CircularComplex),
        "analytic" => Some(NoiseKind::Analytic),
        _ => None,
    }
}

fn positive(p: &mut Problems, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        p.push(format!("--{name} must be positive, got {v}"));
    }
}

impl SignalArgs {
    pub fn resolve(&self, p: &mut Problems) -> Option<SignalSource> {
        let fs = self.fs.unwrap_or(DEFAULT_FS);
        let dur = self.dur.unwrap_or(DEFAULT_DURATION);
        positive(p, "fs", fs);
        positive(p, "dur", dur);
        let chosen = [self.twotone.is_some(), self.tone.is_some(), self.noise, self.input.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if chosen != 1 {
            p.push("choose exactly one signal source: --twotone, --tone, --noise or --input");
            return None;
        }
        if let Some(tt) = &self.twotone {
            if tt.len() != 2 {
                p.push("--twotone takes two frequencies F1,F2");
                return None;
            }
            if tt[0] == tt[1] {
                p.push("--twotone frequencies must differ (equal tones have no zeros)");
            }
            return Some(SignalSource::TwoTone {
                f1_hz: tt[0],
                f2_hz: tt[1],
                sample_rate_hz: fs,
                duration_s: dur,
            });
        }
        if let Some(f0) = self.tone {
            return Some(SignalSource::Tone {
                f0_hz: f0,
                sample_rate_hz: fs,
                duration_s: dur,
            });
        }
        if self.noise {
            let kind = match self.noise_kind.as_deref() {
                None => NoiseKind::CircularComplex,
                Some(k) => match parse_noise_kind(k) {
                    Some(kind) => kind,
                    None => {
                        p.push(format!("unknown --noise-kind {k:?} (circular, analytic)"));
                        NoiseKind::CircularComplex
                    }
                },
            };
            let noise = p.check(NoiseSpec::new(self.variance.unwrap_or(1.0), kind, self.seed.unwrap_or(1)))?;
            return Some(SignalSource::Noise {
                noise,
                sample_rate_hz: fs,
                duration_s: dur,
            });
        }
        let path = self.input.clone()?;
        let format = match self.format.as_deref().or_else(|| path.extension().and_then(|e| e.to_str())) {
            Some("wav") => SignalFormat::WavPcm16Mono,
            Some("csv") => SignalFormat::CsvComplex,
            other => {
                p.push(format!("unknown input format {other:?} (wav, csv)"));
                return None;
            }
        };
        Some(SignalSource::File {
            path,
            format,
            sample_rate_hz: self.fs,
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct WindowArgs {
    /// gauss, hamming or rect.
    #[arg(long)]
    pub window: Option<String>,
    /// Gaussian width sigma in seconds.
    #[arg(long)]
    pub gauss_sigma: Option<f64>,
    /// Hamming or rectangular length in seconds.
    #[arg(long)]
    pub length: Option<f64>,
    /// Gaussian truncation radius in units of sigma.
    #[arg(long)]
    pub truncation: Option<f64>,
}

impl WindowArgs {
    pub fn resolve(&self, p: &mut Problems) -> Option<WindowSpec> {
        let spec = match self.window.as_deref().unwrap_or("gauss") {
            "gauss" | "gaussian" => WindowSpec::gaussian(self.gauss_sigma.unwrap_or(DEFAULT_SIGMA)),
            "hamming" => WindowSpec::hamming(self.length.unwrap_or(8.0 * DEFAULT_SIGMA)),
            "rect" | "rectangular" => WindowSpec::rectangular(self.length.unwrap_or(8.0 * DEFAULT_SIGMA)),
            other => {
                p.push(format!("unknown --window {other:?} (gauss, hamming, rect)"));
                return None;
            }
        };
        if let Some(t) = self.truncation {
            positive(p, "truncation", t);
        }
        p.check(spec)
    }

    pub fn truncation(&self) -> f64 {
        self.truncation.unwrap_or(DEFAULT_TRUNCATION_RADIUS)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct GridArgs {
    /// Frame hop in samples.
    #[arg(long)]
    pub hop: Option<usize>,
    /// DFT length (default: next power of two >= 4x the window support).
    #[arg(long)]
    pub fft: Option<usize>,
    /// V (frequency-invariant) or W (time-invariant).
    #[arg(long)]
    pub convention: Option<String>,
}

impl GridArgs {
    pub fn resolve(&self, spec: Option<&WindowSpec>, fs: f64, truncation: f64, p: &mut Problems) -> Option<(GridParams, Convention)> {
        let convention = match self.convention.as_deref() {
            None => Convention::FreqInvariant,
            Some(c) => match Convention::parse(c) {
                Some(c) => c,
                None => {
                    p.push(format!("unknown --convention {c:?} (V, W)"));
                    return None;
                }
            },
        };
        let hop = self.hop.unwrap_or(DEFAULT_HOP);
        if hop == 0 {
            p.push("--hop must be at least 1");
        }
        let fft = match self.fft {
            Some(n) => n,
            None => default_fft_size(spec?, fs, truncation),
        };
        if fft == 0 {
            p.push("--fft must be at least 1");
        }
        let mut params = GridParams::new(hop, fft);
        params.truncation_radius = truncation;
        Some((params, convention))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct OutputArgs {
    /// Output prefix; files are written as PREFIX.csv, PREFIX.json, ...
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    /// Skip the PGM image.
    #[arg(long)]
    pub no_pgm: bool,
    /// Re-read every written file and check its schema.
    #[arg(long)]
    pub validate_outputs: bool,
}

impl OutputArgs {
    pub fn resolve(&self, p: &mut Problems) -> Option<PathBuf> {
        if self.out.is_none() {
            p.push("--out PREFIX is required");
        }
        self.out.clone()
    }
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct StftArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub signal: SignalArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    /// Window variant: g, neg_Dg, Mg, D2g, M2g.
    #[arg(long)]
    pub variant: Option<String>,
    /// JSON file whose keys mirror the flags; flags take precedence.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PhasegradArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub signal: SignalArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    /// dx (time derivative, rad/s) or domega (frequency derivative, rad/Hz).
    #[arg(long)]
    pub direction: Option<String>,
    /// ratio, cartesian or unwrap.
    #[arg(long)]
    pub method: Option<String>,
    /// Cells with |V| below this fraction of the peak are masked.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub vmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub vmax: Option<f64>,
    /// Also write PREFIX.patch.csv around the node nearest X,OMEGA.
    #[arg(long, value_delimiter = ',', value_name = "X,OMEGA")]
    pub patch: Option<Vec<f64>>,
    /// Half-width of the patch in grid cells.
    #[arg(long)]
    pub patch_radius: Option<usize>,
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ZerosArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub signal: SignalArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    /// Candidates have |V| below this fraction of the peak.
    #[arg(long)]
    pub rel_floor: Option<f64>,
    /// Newton stops when |V| < tol * peak.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub degeneracy_floor: Option<f64>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// First frequency offset of the profiles (Hz).
    #[arg(long)]
    pub eps0_hz: Option<f64>,
    /// First time offset of the profiles (s).
    #[arg(long)]
    pub eps0_s: Option<f64>,
    /// Keep candidates in frames whose window leaves the signal.
    #[arg(long)]
    pub include_boundary: bool,
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct NoisehistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub fs: Option<f64>,
    /// Duration of each noise run (s).
    #[arg(long)]
    pub dur: Option<f64>,
    /// Number of independent noise runs; run i uses seed + i.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub noise_kind: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// none, subtract_2pi_omega or per_bin_median.
    #[arg(long)]
    pub centering: Option<String>,
    /// Restrict to rows with LO <= omega < HI (Hz).
    #[arg(long, value_delimiter = ',', value_name = "LO,HI", allow_hyphen_values = true)]
    pub band: Option<Vec<f64>>,
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct OracleArgs {
    #[arg(long, value_delimiter = ',', value_name = "F1,F2")]
    pub twotone: Option<Vec<f64>>,
    #[arg(long)]
    pub gauss_sigma: Option<f64>,
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long)]
    pub dur: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    /// Multiply by the window gain sigma*sqrt(2) so the grid is directly
    /// comparable with `stft` output.
    #[arg(long)]
    pub with_gain: bool,
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn parse_centering(name: Option<&str>, p: &mut Problems) -> Centering {
    match name {
        None => Centering::default(),
        Some(n) => Centering::parse(n).unwrap_or_else(|| {
            p.push(format!("unknown --centering {n:?} (none, subtract_2pi_omega, per_bin_median)"));
            Centering::default()
        }),
    }
}

pub fn parse_variant(name: Option<&str>, p: &mut Problems) -> WindowVariant {
    match name {
        None => WindowVariant::G,
        Some(n) => WindowVariant::parse(n).unwrap_or_else(|| {
            p.push(format!("unknown --variant {n:?} (g, neg_Dg, Mg, D2g, M2g)"));
            WindowVariant::G
        }),
    }
}

fn is_unset(v: &Value) -> bool {
    matches!(v, Value::Null | Value::Bool(false))
}

/// Overlay flags on a JSON config file: a flag wins whenever it was given.
pub fn merge_with_config<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).map_err(json_err)?).map_err(json_err)?);
    };
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let file: Value = serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let Value::Object(mut merged) = file else {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "config must be a JSON object".into(),
        });
    };
    let Value::Object(given) = serde_json::to_value(flags).map_err(json_err)? else {
        unreachable!("argument structs serialize to objects");
    };
    let known: Map<String, Value> = given.clone();
    for key in merged.keys() {
        if !known.contains_key(key) {
            return Err(Error::InvalidParameter(format!("unknown config key {key:?}")));
        }
    }
    for (k, v) in given {
        if !is_unset(&v) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::InvalidParameter(e.to_string())
}
