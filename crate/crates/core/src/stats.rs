//! Distribution of the phase derivative of Gaussian white noise.
//!
//! For circular white noise, `d psi/dx = Im(V_x / V)` with `V` and `V_x`
//! uncorrelated, so it is the imaginary part of a ratio of independent
//! complex Gaussians and follows `rho(v) = 1 / (2 (1 + v^2)^{3/2})` up to the
//! scale `a = sqrt(sum Dg^2 / sum g^2)` (`sqrt(pi / 2) / sigma` in the
//! continuous limit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phasegrad::{phase_deriv_ratio, Direction, DEFAULT_THRESHOLD_REL};
use crate::signals::{make_noise, NoiseSpec};
use crate::stft::{derivative_stfts, Convention, GridParams};
use crate::windows::{sample_window, WindowFamily, WindowSpec, WindowVariant};

pub const MIN_FIT_SAMPLES: usize = 10_000;

/// `1 / (2 (1 + v^2)^{3/2})`.
pub fn rho_density(v: f64) -> f64 {
    0.5 / (1.0 + v * v).powf(1.5)
}

/// Cumulative distribution `(1 + v / sqrt(1 + v^2)) / 2`.
pub fn rho_cdf(v: f64) -> f64 {
    if v.is_infinite() {
        return if v > 0.0 { 1.0 } else { 0.0 };
    }
    0.5 * (1.0 + v / (1.0 + v * v).sqrt())
}

/// Inverse of [`rho_cdf`], `(2u - 1) / sqrt(1 - (2u - 1)^2)`, written as
/// `(2u - 1) / (2 sqrt(u (1 - u)))` to keep precision near the ends.
pub fn rho_inverse_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    (2.0 * u - 1.0) / (2.0 * (u * (1.0 - u)).sqrt())
}

/// `n` draws from `rho(v / a) / a` by inverse-CDF sampling.
pub fn sample_rho(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            // Open interval (0, 1).
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            scale * rho_inverse_cdf(u)
        })
        .collect()
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    ks_sorted(&sorted(samples), cdf)
}

fn ks_sorted(s: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Maximum-likelihood scale of `rho(v / a) / a`: the root of
/// `sum v^2 / (a^2 + v^2) = n / 3`, found by bisection in `log a`.
pub fn fit_scale(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let nonzero = samples.iter().filter(|&&v| v != 0.0).count();
    // The left side tends to the number of non-zero samples as a -> 0.
    if 3 * nonzero <= n || samples.iter().all(|&v| v == samples[0]) {
        return Err(Error::InsufficientData("samples are degenerate".into()));
    }
    let target = n as f64 / 3.0;
    let excess = |log_a: f64| {
        let a2 = (2.0 * log_a).exp();
        samples.iter().map(|v| v * v / (a2 + v * v)).sum::<f64>() - target
    };
    let mut abs: Vec<f64> = samples.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    let mid = abs.len() / 2;
    let (_, &mut median, _) = abs.select_nth_unstable_by(mid, f64::total_cmp);
    let (mut lo, mut hi) = (median.ln() - 10.0, median.ln() + 10.0);
    while excess(lo) < 0.0 {
        lo -= 10.0;
    }
    while excess(hi) > 0.0 {
        hi += 10.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if excess(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Counts,
    Density,
}

/// Equal-width histogram over `[edges[0], edges[n])`; `total` counts the
/// samples inside the range, `outside` the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
    pub normalization: Normalization,
}

impl Histogram {
    pub fn new(samples: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(invalid("histogram needs at least one bin"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("histogram range must be finite and non-empty"));
        }
        let width = (hi - lo) / n_bins as f64;
        let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; n_bins];
        let mut outside = 0u64;
        for &v in samples {
            if !(v >= lo && v < hi) {
                outside += 1;
                continue;
            }
            let i = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[i] += 1;
        }
        let total = counts.iter().sum();
        Ok(Self {
            edges,
            counts,
            total,
            outside,
            normalization: Normalization::Density,
        })
    }

    /// `counts / (total * width)` per bin.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// `bin_left,bin_right,density` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (e, d) in self.edges.windows(2).zip(self.density()) {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", e[0], e[1], d));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityFit {
    pub scale: f64,
    pub ks_distance: f64,
    pub n_samples: usize,
}

/// Fit the scale by maximum likelihood, compute the KS distance to the
/// scaled `rho`, and histogram the samples over `+-10 a`.
pub fn fit_and_test(samples: &[f64], n_bins: usize) -> Result<(DensityFit, Histogram)> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples; at least {MIN_FIT_SAMPLES} are needed",
            samples.len()
        )));
    }
    let scale = fit_scale(samples)?;
    let ks = ks_distance(samples, |v| rho_cdf(v / scale));
    let hist = Histogram::new(samples, n_bins, -10.0 * scale, 10.0 * scale)?;
    Ok((
        DensityFit {
            scale,
            ks_distance: ks,
            n_samples: samples.len(),
        },
        hist,
    ))
}

/// Scale of `d psi/dx` for white noise under a sampled window:
/// `sqrt(sum Dg^2 / sum g^2)`.
pub fn white_noise_scale(spec: &WindowSpec, sample_rate_hz: f64, truncation_radius: f64) -> Result<f64> {
    let g = sample_window(spec, WindowVariant::G, sample_rate_hz, truncation_radius)?;
    let dg = sample_window(spec, WindowVariant::NegDg, sample_rate_hz, truncation_radius)?;
    let num: f64 = dg.values.iter().map(|v| v * v).sum();
    let den: f64 = g.values.iter().map(|v| v * v).sum();
    Ok((num / den).sqrt())
}

/// How the frequency-dependent offset is removed before pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    None,
    /// Subtract `2 pi omega` (the time-invariant convention's offset).
    SubtractTwoPiOmega,
    /// Subtract each frequency row's median.
    #[default]
    PerBinMedian,
}

impl Centering {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Centering::None),
            "subtract_2pi_omega" | "subtract-2pi-omega" => Some(Centering::SubtractTwoPiOmega),
            "per_bin_median" | "per-bin-median" => Some(Centering::PerBinMedian),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Centering::None => "none",
            Centering::SubtractTwoPiOmega => "subtract_2pi_omega",
            Centering::PerBinMedian => "per_bin_median",
        }
    }
}

/// Where and how samples are taken from each noise realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectOptions {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub params: GridParams,
    pub convention: Convention,
    pub centering: Centering,
    /// Only rows with `lo <= omega < hi` are used.
    pub band_hz: Option<(f64, f64)>,
    pub threshold_rel: f64,
}

impl CollectOptions {
    pub fn new(sample_rate_hz: f64, duration_s: f64, params: GridParams) -> Self {
        Self {
            sample_rate_hz,
            duration_s,
            params,
            convention: Convention::FreqInvariant,
            centering: Centering::default(),
            band_hz: None,
            threshold_rel: DEFAULT_THRESHOLD_REL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<f64>,
    pub n_runs: usize,
    /// The density is derived for a Gaussian window only.
    pub non_gaussian_window: bool,
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    let (_, &mut m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    m
}

/// Pool the valid `d psi/dx` values (ratio route, boundary frames
/// excluded) of every noise run, after centering each run.
pub fn collect_phase_deriv_samples(
    runs: &[NoiseSpec],
    spec: &WindowSpec,
    opts: &CollectOptions,
) -> Result<SampleSet> {
    if runs.is_empty() {
        return Err(invalid("at least one noise run is required"));
    }
    let per_run: Vec<Result<Vec<f64>>> = runs
        .par_iter()
        .map(|run| {
            let f = make_noise(*run, opts.sample_rate_hz, opts.duration_s)?;
            let d = derivative_stfts(&f, spec, &opts.params, opts.convention)?;
            let pg = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, opts.threshold_rel)?;
            let mut out = Vec::new();
            for k in 0..pg.n_freq {
                let omega = pg.freq_axis_hz[k];
                if let Some((lo, hi)) = opts.band_hz {
                    if !(omega >= lo && omega < hi) {
                        continue;
                    }
                }
                let mut row: Vec<f64> = (0..pg.n_time)
                    .filter(|&n| !pg.boundary_frames[n])
                    .filter_map(|n| pg.at(k, n))
                    .collect();
                if row.is_empty() {
                    continue;
                }
                let offset = match opts.centering {
                    Centering::None => 0.0,
                    Centering::SubtractTwoPiOmega => 2.0 * std::f64::consts::PI * omega,
                    Centering::PerBinMedian => median_in_place(&mut row.clone()),
                };
                row.iter_mut().for_each(|v| *v -= offset);
                out.extend(row);
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::new();
    for r in per_run {
        samples.extend(r?);
    }
    Ok(SampleSet {
        samples,
        n_runs: runs.len(),
        non_gaussian_window: spec.family != WindowFamily::Gaussian,
    })
}

/// Sample median and interquartile range.
pub fn median_iqr(samples: &[f64]) -> (f64, f64) {
    let s = sorted(samples);
    let q = |p: f64| {
        let idx = p * (s.len() - 1) as f64;
        let (i, frac) = (idx.floor() as usize, idx.fract());
        if i + 1 < s.len() {
            s[i] * (1.0 - frac) + s[i + 1] * frac
        } else {
            s[i]
        }
    };
    (q(0.5), q(0.75) - q(0.25))
}
