//! Short-time Fourier transform on a lattice and at continuous points.
//!
//! The canonical convention is the frequency-invariant
//! `V(x, w) = int f(t) g(t - x) e^{-2 pi i w t} dt`, with absolute-time phase
//! referencing. The time-invariant `W = e^{2 pi i w x} V` is derived from it.
//! Sums carry a `1 / fs` factor so values approximate the continuous integral.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signals::SignalBuffer;
use crate::windows::{
    sample_window, support_radius_samples, WindowSpec, WindowVariant, DEFAULT_TRUNCATION_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// `V`, frequency-invariant.
    #[serde(rename = "V_freq_invariant")]
    FreqInvariant,
    /// `W = e^{2 pi i w x} V`, time-invariant.
    #[serde(rename = "W_time_invariant")]
    TimeInvariant,
}

impl Convention {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "V" | "v" | "V_freq_invariant" => Some(Convention::FreqInvariant),
            "W" | "w" | "W_time_invariant" => Some(Convention::TimeInvariant),
            _ => None,
        }
    }
}

/// What a grid holds: the transform with one window variant, or a partial
/// derivative of the plain transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variant")]
pub enum GridContent {
    Transform(WindowVariant),
    PartialX,
    PartialOmega,
}

/// A point of the time-frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfPoint {
    pub x_s: f64,
    pub omega_hz: f64,
}

impl TfPoint {
    pub fn new(x_s: f64, omega_hz: f64) -> Self {
        Self { x_s, omega_hz }
    }
}

/// Lattice parameters: frame hop, DFT length and Gaussian truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub hop_samples: usize,
    pub fft_size: usize,
    pub truncation_radius: f64,
}

impl GridParams {
    pub fn new(hop_samples: usize, fft_size: usize) -> Self {
        Self {
            hop_samples,
            fft_size,
            truncation_radius: DEFAULT_TRUNCATION_RADIUS,
        }
    }

    /// Uses the default DFT length for the window.
    pub fn with_default_fft(spec: &WindowSpec, sample_rate_hz: f64, hop_samples: usize) -> Self {
        Self::new(
            hop_samples,
            default_fft_size(spec, sample_rate_hz, DEFAULT_TRUNCATION_RADIUS),
        )
    }
}

/// Next power of two at least four times the window support.
pub fn default_fft_size(spec: &WindowSpec, sample_rate_hz: f64, truncation_radius: f64) -> usize {
    let support = 2 * support_radius_samples(spec, sample_rate_hz, truncation_radius) + 1;
    (4 * support).next_power_of_two()
}

/// STFT coefficients on a time-frequency lattice, stored row-major with
/// one row per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct StftGrid {
    coeffs: Vec<Complex64>,
    n_freq: usize,
    n_time: usize,
    pub time_axis_s: Vec<f64>,
    pub freq_axis_hz: Vec<f64>,
    pub convention: Convention,
    pub window: WindowSpec,
    pub content: GridContent,
    /// Frames whose window support leaves the signal (implicit zero padding).
    pub boundary_frames: Vec<bool>,
    pub params: GridParams,
    frame_samples: Vec<usize>,
    sample_rate_hz: f64,
    start_time_s: f64,
}

impl StftGrid {
    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at frequency bin `k`, frame `n`.
    pub fn at(&self, k: usize, n: usize) -> Complex64 {
        self.coeffs[k * self.n_time + n]
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.coeffs[k * self.n_time..(k + 1) * self.n_time]
    }

    pub fn max_modulus(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn time_step_s(&self) -> f64 {
        self.params.hop_samples as f64 / self.sample_rate_hz
    }

    pub fn freq_step_hz(&self) -> f64 {
        self.sample_rate_hz / self.params.fft_size as f64
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn point(&self, k: usize, n: usize) -> TfPoint {
        TfPoint::new(self.time_axis_s[n], self.freq_axis_hz[k])
    }

    /// Grid node closest to `p`, if `p` lies within the axes' range.
    pub fn nearest_node(&self, p: TfPoint) -> Option<(usize, usize)> {
        let n = ((p.x_s - self.time_axis_s[0]) / self.time_step_s()).round();
        let k = ((p.omega_hz - self.freq_axis_hz[0]) / self.freq_step_hz()).round();
        if n < 0.0 || k < 0.0 || n as usize >= self.n_time || k as usize >= self.n_freq {
            return None;
        }
        Some((k as usize, n as usize))
    }

    /// `omega_k * x_n` in cycles, reduced to [0, 1). The lattice part is
    /// computed exactly in integers.
    pub fn phase_cycles(&self, k: usize, n: usize) -> f64 {
        let big_n = self.params.fft_size as u128;
        let lattice = ((k as u128 * self.frame_samples[n] as u128) % big_n) as f64 / big_n as f64;
        (lattice + self.freq_axis_hz[k] * self.start_time_s).rem_euclid(1.0)
    }

    /// `e^{2 pi i omega_k x_n}`, the factor taking `V` to `W`.
    pub fn convention_factor(&self, k: usize, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * self.phase_cycles(k, n))
    }

    /// True when both grids share the lattice.
    pub fn same_axes(&self, other: &StftGrid) -> bool {
        self.n_freq == other.n_freq
            && self.n_time == other.n_time
            && self.time_axis_s == other.time_axis_s
            && self.freq_axis_hz == other.freq_axis_hz
    }

    fn map_nodes(&self, content: GridContent, f: impl Fn(usize, usize, Complex64) -> Complex64 + Sync) -> StftGrid {
        let n_time = self.n_time;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(idx, &z)| f(idx / n_time, idx % n_time, z))
            .collect();
        StftGrid {
            coeffs,
            content,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> StftGrid {
        StftGrid {
            coeffs: Vec::new(),
            n_freq: self.n_freq,
            n_time: self.n_time,
            time_axis_s: self.time_axis_s.clone(),
            freq_axis_hz: self.freq_axis_hz.clone(),
            convention: self.convention,
            window: self.window,
            content: self.content,
            boundary_frames: self.boundary_frames.clone(),
            params: self.params,
            frame_samples: self.frame_samples.clone(),
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.start_time_s,
        }
    }

    /// Re-express a transform grid in another convention. Derivative grids
    /// cannot be converted on their own; use [`derivative_stfts`].
    pub fn to_convention(&self, target: Convention) -> Result<StftGrid> {
        if let GridContent::PartialX | GridContent::PartialOmega = self.content {
            return Err(Error::Unsupported(
                "derivative grids change convention together with the transform".into(),
            ));
        }
        if target == self.convention {
            return Ok(self.clone());
        }
        let sign = match target {
            Convention::TimeInvariant => 1.0,
            Convention::FreqInvariant => -1.0,
        };
        let mut out = self.map_nodes(self.content, |k, n, z| {
            z * Complex64::from_polar(1.0, sign * 2.0 * PI * self.phase_cycles(k, n))
        });
        out.convention = target;
        Ok(out)
    }
}

struct FrameLayout {
    frame_samples: Vec<usize>,
    boundary: Vec<bool>,
    radius: usize,
}

fn frame_layout(signal: &SignalBuffer, spec: &WindowSpec, params: &GridParams) -> Result<FrameLayout> {
    spec.validate()?;
    if params.hop_samples == 0 {
        return Err(invalid("hop must be at least one sample"));
    }
    if params.fft_size == 0 {
        return Err(invalid("fft size must be positive"));
    }
    if !(params.truncation_radius.is_finite() && params.truncation_radius > 0.0) {
        return Err(invalid("truncation radius must be positive"));
    }
    if signal.is_empty() {
        return Err(invalid("signal is empty"));
    }
    let radius = support_radius_samples(spec, signal.sample_rate_hz(), params.truncation_radius);
    let support = 2 * radius + 1;
    if support > params.fft_size {
        return Err(invalid(format!(
            "window support of {support} samples exceeds the fft size {}",
            params.fft_size
        )));
    }
    let len = signal.len();
    let frame_samples: Vec<usize> = (0..len).step_by(params.hop_samples).collect();
    let boundary = frame_samples
        .iter()
        .map(|&c| c < radius || c + radius >= len)
        .collect();
    Ok(FrameLayout {
        frame_samples,
        boundary,
        radius,
    })
}

/// Raw windowed DFTs for several variants, one column per frame:
/// `raw[v][n][k] = sum_j f[c_n + j] g_v(j / fs) e^{-2 pi i k j / N}`.
fn raw_frames(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    variants: &[WindowVariant],
    params: &GridParams,
    layout: &FrameLayout,
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let fs = signal.sample_rate_hz();
    let windows = variants
        .iter()
        .map(|&v| sample_window(spec, v, fs, params.truncation_radius))
        .collect::<Result<Vec<_>>>()?;
    let big_n = params.fft_size;
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(big_n);
    let samples = signal.samples();
    let radius = layout.radius as isize;

    let per_frame: Vec<Vec<Vec<Complex64>>> = layout
        .frame_samples
        .par_iter()
        .map(|&c| {
            windows
                .iter()
                .map(|w| {
                    let mut buf = vec![Complex64::new(0.0, 0.0); big_n];
                    for j in -radius..=radius {
                        let idx = c as isize + j;
                        if idx < 0 || idx as usize >= samples.len() {
                            continue;
                        }
                        let slot = j.rem_euclid(big_n as isize) as usize;
                        buf[slot] = samples[idx as usize] * w.at(j);
                    }
                    fft.process(&mut buf);
                    buf
                })
                .collect()
        })
        .collect();

    // Reorder to [variant][frame][bin].
    let mut out: Vec<Vec<Vec<Complex64>>> = (0..variants.len()).map(|_| Vec::new()).collect();
    for frame in per_frame {
        for (v, column) in frame.into_iter().enumerate() {
            out[v].push(column);
        }
    }
    Ok(out)
}

fn grid_from_columns(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    params: &GridParams,
    layout: &FrameLayout,
    columns: &[Vec<Complex64>],
    content: GridContent,
) -> StftGrid {
    let fs = signal.sample_rate_hz();
    let n_freq = params.fft_size;
    let n_time = layout.frame_samples.len();
    let mut grid = StftGrid {
        coeffs: Vec::new(),
        n_freq,
        n_time,
        time_axis_s: layout.frame_samples.iter().map(|&c| signal.time_at(c)).collect(),
        freq_axis_hz: (0..n_freq).map(|k| k as f64 * fs / n_freq as f64).collect(),
        convention: Convention::FreqInvariant,
        window: *spec,
        content,
        boundary_frames: layout.boundary.clone(),
        params: *params,
        frame_samples: layout.frame_samples.clone(),
        sample_rate_hz: fs,
        start_time_s: signal.start_time_s(),
    };
    let inv_fs = 1.0 / fs;
    let coeffs: Vec<Complex64> = (0..n_freq * n_time)
        .into_par_iter()
        .map(|idx| {
            let (k, n) = (idx / n_time, idx % n_time);
            // Shift the frame-local phase reference to absolute time.
            let factor = Complex64::from_polar(inv_fs, -2.0 * PI * grid.phase_cycles(k, n));
            columns[n][k] * factor
        })
        .collect();
    grid.coeffs = coeffs;
    grid
}

/// STFT of `signal` with the given window variant on the lattice
/// `x_n = t(n * hop)`, `omega_k = k fs / N`.
pub fn stft_grid(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    variant: WindowVariant,
    params: &GridParams,
    convention: Convention,
) -> Result<StftGrid> {
    spec.supports(variant)?;
    let layout = frame_layout(signal, spec, params)?;
    let raw = raw_frames(signal, spec, &[variant], params, &layout)?;
    let grid = grid_from_columns(signal, spec, params, &layout, &raw[0], GridContent::Transform(variant));
    grid.to_convention(convention)
}

/// A transform grid together with its partial derivatives in time and
/// frequency, all in the same convention.
#[derive(Debug, Clone)]
pub struct DerivativeStfts {
    pub value: StftGrid,
    pub d_x: StftGrid,
    pub d_omega: StftGrid,
}

/// `V_x = V(f, -Dg)` and `V_omega = -2 pi i (x V + V(f, Mg))`, evaluated per
/// node. For the time-invariant convention the partials of `W` are returned:
/// `W_x = e (V_x + 2 pi i omega V)` and `W_omega = e (V_omega + 2 pi i x V)`.
pub fn derivative_stfts(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    params: &GridParams,
    convention: Convention,
) -> Result<DerivativeStfts> {
    spec.supports(WindowVariant::NegDg)?;
    let layout = frame_layout(signal, spec, params)?;
    let variants = [WindowVariant::G, WindowVariant::NegDg, WindowVariant::Mg];
    let raw = raw_frames(signal, spec, &variants, params, &layout)?;
    let v = grid_from_columns(signal, spec, params, &layout, &raw[0], GridContent::Transform(WindowVariant::G));
    let v_neg_dg = grid_from_columns(signal, spec, params, &layout, &raw[1], GridContent::PartialX);
    let v_mg = grid_from_columns(signal, spec, params, &layout, &raw[2], GridContent::Transform(WindowVariant::Mg));

    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let v_omega = v.map_nodes(GridContent::PartialOmega, |k, n, z| {
        -two_pi_i * (v.time_axis_s[n] * z + v_mg.at(k, n))
    });

    match convention {
        Convention::FreqInvariant => Ok(DerivativeStfts {
            value: v,
            d_x: v_neg_dg,
            d_omega: v_omega,
        }),
        Convention::TimeInvariant => {
            let w = v.to_convention(Convention::TimeInvariant)?;
            let mut w_x = v_neg_dg.map_nodes(GridContent::PartialX, |k, n, vx| {
                v.convention_factor(k, n) * (vx + two_pi_i * v.freq_axis_hz[k] * v.at(k, n))
            });
            let mut w_omega = v_omega.map_nodes(GridContent::PartialOmega, |k, n, vw| {
                v.convention_factor(k, n) * (vw + two_pi_i * v.time_axis_s[n] * v.at(k, n))
            });
            w_x.convention = Convention::TimeInvariant;
            w_omega.convention = Convention::TimeInvariant;
            Ok(DerivativeStfts {
                value: w,
                d_x: w_x,
                d_omega: w_omega,
            })
        }
    }
}

/// Index range of samples whose offset from `x_s` lies within the support.
fn support_range(signal: &SignalBuffer, x_s: f64, radius_s: f64) -> Option<(usize, usize)> {
    let fs = signal.sample_rate_hz();
    let lo = ((x_s - radius_s - signal.start_time_s()) * fs - 1e-9).ceil().max(0.0);
    let hi = ((x_s + radius_s - signal.start_time_s()) * fs + 1e-9).floor();
    let last = (signal.len() - 1) as f64;
    if hi < 0.0 || lo > last {
        return None;
    }
    Some((lo as usize, hi.min(last) as usize))
}

fn check_point(signal: &SignalBuffer, spec: &WindowSpec, p: TfPoint, truncation_radius: f64) -> Result<f64> {
    spec.validate()?;
    if !(p.x_s.is_finite() && p.omega_hz.is_finite()) {
        return Err(invalid("time-frequency point must be finite"));
    }
    if !(truncation_radius.is_finite() && truncation_radius > 0.0) {
        return Err(invalid("truncation radius must be positive"));
    }
    let radius_s = spec.support_radius_s(truncation_radius);
    if p.x_s < signal.start_time_s() - radius_s || p.x_s > signal.end_time_s() + radius_s {
        return Err(Error::OutOfSpan(format!(
            "x = {} s is outside [{}, {}] s",
            p.x_s,
            signal.start_time_s() - radius_s,
            signal.end_time_s() + radius_s
        )));
    }
    Ok(radius_s)
}

/// Riemann sums `sum_n f(t_n) g_v(t_n - x) e^{-2 pi i w (t_n - x)} / fs` for
/// each requested variant.
fn local_sums<const K: usize>(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    variants: [WindowVariant; K],
    p: TfPoint,
    radius_s: f64,
) -> [Complex64; K] {
    let mut sums = [Complex64::new(0.0, 0.0); K];
    let Some((lo, hi)) = support_range(signal, p.x_s, radius_s) else {
        return sums;
    };
    let fs = signal.sample_rate_hz();
    let samples = signal.samples();
    for (n, &s) in samples.iter().enumerate().take(hi + 1).skip(lo) {
        let tau = signal.time_at(n) - p.x_s;
        let term = s * Complex64::from_polar(1.0, -2.0 * PI * p.omega_hz * tau);
        for (sum, &v) in sums.iter_mut().zip(&variants) {
            *sum += term * spec.eval_unchecked(v, tau);
        }
    }
    for sum in &mut sums {
        *sum /= fs;
    }
    sums
}

fn v_factor(p: TfPoint) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * (p.omega_hz * p.x_s).rem_euclid(1.0))
}

/// STFT at a continuous point by direct quadrature over the truncated
/// window support.
pub fn stft_point(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    variant: WindowVariant,
    p: TfPoint,
    convention: Convention,
    truncation_radius: f64,
) -> Result<Complex64> {
    spec.supports(variant)?;
    let radius_s = check_point(signal, spec, p, truncation_radius)?;
    let [local] = local_sums(signal, spec, [variant], p, radius_s);
    Ok(match convention {
        Convention::FreqInvariant => local * v_factor(p),
        Convention::TimeInvariant => local,
    })
}

/// `V` and its first and second partials at one point, frequency-invariant
/// convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPartials {
    pub v: Complex64,
    pub v_x: Complex64,
    pub v_omega: Complex64,
    pub v_xx: Complex64,
    pub v_omega_omega: Complex64,
}

impl PointPartials {
    /// Jacobian of `(Re V, Im V)` with respect to `(x, omega)`:
    /// `[[U_x, U_omega], [W_x, W_omega]]`.
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        [
            [self.v_x.re, self.v_omega.re],
            [self.v_x.im, self.v_omega.im],
        ]
    }

    /// Phase derivative in `x` of `V`.
    pub fn dphase_dx(&self) -> f64 {
        (self.v_x * self.v.conj()).im / self.v.norm_sqr()
    }

    /// Phase derivative in `omega` of `V`.
    pub fn dphase_domega(&self) -> f64 {
        (self.v_omega * self.v.conj()).im / self.v.norm_sqr()
    }
}

/// Evaluate `V`, `V_x = V(f, -Dg)`, `V_omega = -2 pi i (x V + V(f, Mg))`,
/// `V_xx = V(f, D^2 g)` and
/// `V_omega_omega = -2 pi i x V_omega - 4 pi^2 (x V(f, Mg) + V(f, M^2 g))`
/// in one pass over the support.
pub fn point_partials(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    p: TfPoint,
    truncation_radius: f64,
) -> Result<PointPartials> {
    spec.supports(WindowVariant::D2g)?;
    let radius_s = check_point(signal, spec, p, truncation_radius)?;
    let sums = local_sums(
        signal,
        spec,
        [
            WindowVariant::G,
            WindowVariant::NegDg,
            WindowVariant::Mg,
            WindowVariant::D2g,
            WindowVariant::M2g,
        ],
        p,
        radius_s,
    );
    let e = v_factor(p);
    let [v, v_neg_dg, v_mg, v_d2g, v_m2g] = sums.map(|s| s * e);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let x = p.x_s;
    let v_omega = -two_pi_i * (x * v + v_mg);
    let v_omega_omega = -two_pi_i * x * v_omega - 4.0 * PI * PI * (x * v_mg + v_m2g);
    Ok(PointPartials {
        v,
        v_x: v_neg_dg,
        v_omega,
        v_xx: v_d2g,
        v_omega_omega,
    })
}
