//! Test signals and signal file I/O.
//!
//! Signals carry physical units: samples are taken at `t_n = start + n / fs`
//! with `fs` in Hz, so closed-form expressions in Hz and seconds apply
//! without rescaling.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A uniformly sampled complex signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
    start_time_s: f64,
}

impl SignalBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        Self::with_start(samples, sample_rate_hz, 0.0)
    }

    pub fn with_start(
        samples: Vec<Complex64>,
        sample_rate_hz: f64,
        start_time_s: f64,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !start_time_s.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        if samples.is_empty() {
            return Err(invalid("signal has no samples"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            start_time_s,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `n` in seconds.
    pub fn time_at(&self, n: usize) -> f64 {
        self.start_time_s + n as f64 / self.sample_rate_hz
    }

    /// Time of the last sample.
    pub fn end_time_s(&self) -> f64 {
        self.time_at(self.samples.len() - 1)
    }

    /// Elementwise `a * self + b * other`. Both buffers must share rate,
    /// start and length.
    pub fn linear_combination(
        &self,
        a: Complex64,
        other: &SignalBuffer,
        b: Complex64,
    ) -> Result<SignalBuffer> {
        if self.len() != other.len()
            || self.sample_rate_hz != other.sample_rate_hz
            || self.start_time_s != other.start_time_s
        {
            return Err(invalid("signals differ in length, rate or start time"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SignalBuffer::with_start(samples, self.sample_rate_hz, self.start_time_s)
    }

    pub fn scaled(&self, c: Complex64) -> SignalBuffer {
        SignalBuffer {
            samples: self.samples.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    pub fn conj(&self) -> SignalBuffer {
        SignalBuffer {
            samples: self.samples.iter().map(|x| x.conj()).collect(),
            ..self.clone()
        }
    }
}

fn sample_count(sample_rate_hz: f64, duration_s: f64) -> Result<usize> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(invalid(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let n = (duration_s * sample_rate_hz).round();
    if n < 1.0 {
        return Err(invalid("duration shorter than one sample"));
    }
    Ok(n as usize)
}

fn check_nyquist(freq_hz: f64, sample_rate_hz: f64) -> Result<()> {
    if !freq_hz.is_finite() || freq_hz.abs() >= sample_rate_hz / 2.0 {
        return Err(invalid(format!(
            "frequency {freq_hz} Hz is not below the Nyquist frequency {} Hz",
            sample_rate_hz / 2.0
        )));
    }
    Ok(())
}

/// `exp(2 pi i f n / fs)` with the phase reduced modulo one cycle before
/// scaling by 2 pi.
fn tone_sample(freq_hz: f64, n: usize, sample_rate_hz: f64) -> Complex64 {
    let cycles = (freq_hz * n as f64 / sample_rate_hz).rem_euclid(1.0);
    Complex64::from_polar(1.0, 2.0 * PI * cycles)
}

/// A unit-amplitude complex exponential at `f0_hz`.
pub fn make_pure_tone(f0_hz: f64, sample_rate_hz: f64, duration_s: f64) -> Result<SignalBuffer> {
    let n = sample_count(sample_rate_hz, duration_s)?;
    check_nyquist(f0_hz, sample_rate_hz)?;
    let samples = (0..n)
        .map(|i| tone_sample(f0_hz, i, sample_rate_hz))
        .collect();
    SignalBuffer::new(samples, sample_rate_hz)
}

/// Sum of two unit complex exponentials.
pub fn make_two_tone(
    f1_hz: f64,
    f2_hz: f64,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<SignalBuffer> {
    let n = sample_count(sample_rate_hz, duration_s)?;
    check_nyquist(f1_hz, sample_rate_hz)?;
    check_nyquist(f2_hz, sample_rate_hz)?;
    if f1_hz == f2_hz {
        return Err(invalid(
            "two-tone frequencies must differ (equal tones have no zeros)",
        ));
    }
    let samples = (0..n)
        .map(|i| tone_sample(f1_hz, i, sample_rate_hz) + tone_sample(f2_hz, i, sample_rate_hz))
        .collect();
    SignalBuffer::new(samples, sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Independent real and imaginary parts.
    CircularComplex,
    /// One-sided spectrum built from real white noise.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(variance: f64, kind: NoiseKind, seed: u64) -> Result<Self> {
        let spec = Self {
            variance,
            kind,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(invalid(format!(
                "noise variance must be positive, got {}",
                self.variance
            )));
        }
        Ok(())
    }
}

/// Gaussian white noise; real and imaginary parts each have variance
/// `variance / 2`.
pub fn make_noise(spec: NoiseSpec, sample_rate_hz: f64, duration_s: f64) -> Result<SignalBuffer> {
    spec.validate()?;
    let n = sample_count(sample_rate_hz, duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, (spec.variance / 2.0).sqrt())
        .map_err(|e| invalid(e.to_string()))?;
    let samples = match spec.kind {
        NoiseKind::CircularComplex => (0..n)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect(),
        NoiseKind::Analytic => {
            let real: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            analytic_signal(&real)
        }
    };
    SignalBuffer::new(samples, sample_rate_hz)
}

/// Discrete analytic signal: positive-frequency bins doubled, negative ones
/// zeroed, DC and Nyquist left unchanged. The real part is preserved.
pub fn analytic_signal(real: &[f64]) -> Vec<Complex64> {
    let n = real.len();
    let mut buf: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // Bins 1..ceil(n/2) are strictly positive; for even n bin n/2 is Nyquist.
    let positive_end = n.div_ceil(2);
    for (k, z) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        }
        if k < positive_end {
            *z *= 2.0;
        } else {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|z| z * scale).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFormat {
    WavPcm16Mono,
    CsvComplex,
}

/// Read a signal from disk. `csv_sample_rate_hz` is required for CSV input
/// and ignored for WAV, which carries its own rate.
pub fn read_signal(
    path: &Path,
    format: SignalFormat,
    csv_sample_rate_hz: Option<f64>,
) -> Result<SignalBuffer> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    match format {
        SignalFormat::WavPcm16Mono => {
            let bytes = fs::read(path)?;
            let (rate, samples) = parse_wav(path, &bytes)?;
            SignalBuffer::new(samples, rate)
        }
        SignalFormat::CsvComplex => {
            let rate = csv_sample_rate_hz
                .ok_or_else(|| invalid("csv input needs an explicit sample rate"))?;
            let text = fs::read_to_string(path)?;
            SignalBuffer::new(parse_csv(&text)?, rate)
        }
    }
}

fn parse_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match parse_csv_pair(line) {
            Some(z) => samples.push(z),
            // A single optional header line.
            None if idx == 0 => continue,
            None => {
                return Err(Error::UnparsableLine {
                    line: idx + 1,
                    content: raw.to_string(),
                })
            }
        }
    }
    if samples.is_empty() {
        return Err(invalid("csv input contains no samples"));
    }
    Ok(samples)
}

fn parse_csv_pair(line: &str) -> Option<Complex64> {
    let mut parts = line.split(',');
    let re = parts.next()?.trim().parse::<f64>().ok()?;
    let im = parts.next()?.trim().parse::<f64>().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some(Complex64::new(re, im))
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_wav(path: &Path, bytes: &[u8]) -> Result<(f64, Vec<Complex64>)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed(path, "missing RIFF/WAVE signature"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);

    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed(path, "chunk extends past end of file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(path, "fmt chunk too short"));
                }
                format = Some((
                    u16_at(body_start),
                    u16_at(body_start + 2),
                    u32_at(body_start + 4),
                    u16_at(body_start + 14),
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are padded to even sizes.
        pos = body_end + (size & 1);
    }
    let (audio_format, channels, rate, bits) =
        format.ok_or_else(|| malformed(path, "no fmt chunk"))?;
    if audio_format != 1 {
        return Err(malformed(path, format!("audio format {audio_format} is not PCM")));
    }
    if channels != 1 {
        return Err(Error::NotMono(channels));
    }
    if bits != 16 {
        return Err(malformed(path, format!("{bits}-bit samples, expected 16")));
    }
    if rate == 0 {
        return Err(malformed(path, "zero sample rate"));
    }
    let data = data.ok_or_else(|| malformed(path, "no data chunk"))?;
    let samples = data
        .chunks_exact(2)
        .map(|b| Complex64::new(i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0, 0.0))
        .collect();
    Ok((rate as f64, samples))
}

/// Write the signal as `re,im` lines with a header, 17 significant digits.
pub fn write_csv_signal(path: &Path, signal: &SignalBuffer) -> Result<()> {
    let mut out = String::with_capacity(signal.len() * 48);
    out.push_str("re,im\n");
    for z in signal.samples() {
        out.push_str(&format!("{:.16e},{:.16e}\n", z.re, z.im));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the real part as 16-bit mono PCM, clipped to [-1, 1).
pub fn write_wav_pcm16(path: &Path, signal: &SignalBuffer) -> Result<()> {
    let rate = signal.sample_rate_hz().round();
    if rate < 1.0 || rate > u32::MAX as f64 {
        return Err(invalid("sample rate not representable in a wav header"));
    }
    let rate = rate as u32;
    let data_len = (signal.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for z in signal.samples() {
        let v = (z.re * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}
