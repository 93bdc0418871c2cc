//! Closed-form references for the two-tone and pure-tone signals under a
//! Gaussian window `g(t) = exp(-pi t^2 / (2 sigma^2))`.
//!
//! Nothing here calls into the numeric STFT code, so comparisons against it
//! are independent checks.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stft::{Convention, TfPoint};

/// Parameters of `f(t) = e^{2 pi i w1 t} + e^{2 pi i w2 t}` analyzed with a
/// Gaussian window of width `sigma_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoToneParams {
    pub omega1_hz: f64,
    pub omega2_hz: f64,
    pub sigma_s: f64,
}

impl TwoToneParams {
    pub fn new(omega1_hz: f64, omega2_hz: f64, sigma_s: f64) -> Result<Self> {
        if !(omega1_hz.is_finite() && omega2_hz.is_finite()) || omega1_hz == omega2_hz {
            return Err(invalid("two-tone frequencies must be finite and distinct"));
        }
        if !(sigma_s.is_finite() && sigma_s > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        Ok(Self {
            omega1_hz,
            omega2_hz,
            sigma_s,
        })
    }

    /// Midpoint frequency `(w1 + w2) / 2`.
    pub fn omega_mid(&self) -> f64 {
        0.5 * (self.omega1_hz + self.omega2_hz)
    }

    /// Half separation `(w2 - w1) / 2`.
    pub fn delta(&self) -> f64 {
        0.5 * (self.omega2_hz - self.omega1_hz)
    }

    /// `s = 4 pi sigma^2 (w - w_m) delta`.
    pub fn s(&self, omega_hz: f64) -> f64 {
        4.0 * PI * self.sigma_s * self.sigma_s * (omega_hz - self.omega_mid()) * self.delta()
    }

    /// Integral of the window, `sigma sqrt(2)`. The closed form below is
    /// normalized to unit gain; an STFT computed as an integral carries this
    /// factor.
    pub fn window_gain(&self) -> f64 {
        self.sigma_s * 2f64.sqrt()
    }
}

fn unit_phase(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * cycles.rem_euclid(1.0))
}

fn gaussian_bump(sigma_s: f64, xi_hz: f64) -> f64 {
    (-2.0 * PI * sigma_s * sigma_s * xi_hz * xi_hz).exp()
}

/// Time-invariant two-tone STFT,
/// `W = e^{2 pi i x w1} e^{-2 pi sigma^2 (w - w1)^2} + e^{2 pi i x w2} e^{-2 pi sigma^2 (w - w2)^2}`.
pub fn two_tone_stft(p: &TwoToneParams, x_s: f64, omega_hz: f64) -> Complex64 {
    unit_phase(x_s * p.omega1_hz) * gaussian_bump(p.sigma_s, omega_hz - p.omega1_hz)
        + unit_phase(x_s * p.omega2_hz) * gaussian_bump(p.sigma_s, omega_hz - p.omega2_hz)
}

/// Two-tone STFT in either convention; `V = e^{-2 pi i w x} W`.
pub fn two_tone_stft_in(p: &TwoToneParams, x_s: f64, omega_hz: f64, convention: Convention) -> Complex64 {
    match convention {
        Convention::TimeInvariant => two_tone_stft(p, x_s, omega_hz),
        // Each term's phase is (w_i - w) x; combining before reduction keeps
        // the argument small.
        Convention::FreqInvariant => {
            unit_phase(x_s * (p.omega1_hz - omega_hz)) * gaussian_bump(p.sigma_s, omega_hz - p.omega1_hz)
                + unit_phase(x_s * (p.omega2_hz - omega_hz))
                    * gaussian_bump(p.sigma_s, omega_hz - p.omega2_hz)
        }
    }
}

/// Zeros `(x_k, w_m)` with `x_k = (1 + 2k) / (2 (w1 - w2))`.
pub fn two_tone_zero_lattice(p: &TwoToneParams, k_range: RangeInclusive<i64>) -> Vec<TfPoint> {
    let denom = 2.0 * (p.omega1_hz - p.omega2_hz);
    k_range
        .map(|k| TfPoint::new((1 + 2 * k) as f64 / denom, p.omega_mid()))
        .collect()
}

/// Time derivative of the argument of the time-invariant two-tone STFT, in
/// rad/s:
/// `2 pi (w_m + delta tanh(s) (1 + tan^2) / (1 + tan^2 tanh^2(s)))` with
/// `tan = tan(2 pi delta x)`. Where `|tan| > 1` the cotangent form
/// `(cot^2 + 1) / (cot^2 + tanh^2(s))` is used, which stays finite at the
/// poles of the tangent.
pub fn two_tone_phase_deriv(p: &TwoToneParams, x_s: f64, omega_hz: f64) -> Result<f64> {
    let delta = p.delta();
    let th = p.s(omega_hz).tanh();
    let angle = 2.0 * PI * delta * x_s;
    let (sin, cos) = angle.sin_cos();
    let shape = if cos.abs() >= sin.abs() {
        let t2 = (sin / cos).powi(2);
        (1.0 + t2) / (1.0 + t2 * th * th)
    } else {
        let c2 = (cos / sin).powi(2);
        if th == 0.0 && c2 < 1e-24 {
            return Err(Error::Domain(format!(
                "({x_s} s, {omega_hz} Hz) is a zero of the two-tone transform"
            )));
        }
        (c2 + 1.0) / (c2 + th * th)
    };
    Ok(2.0 * PI * (p.omega_mid() + delta * th * shape))
}

/// Pure-tone STFT `V = e^{-2 pi i (w - f0) x} sigma sqrt(2) e^{-2 pi sigma^2 (w - f0)^2}`,
/// or `W = e^{2 pi i f0 x} sigma sqrt(2) e^{-2 pi sigma^2 (w - f0)^2}`.
pub fn pure_tone_stft(
    f0_hz: f64,
    sigma_s: f64,
    x_s: f64,
    omega_hz: f64,
    convention: Convention,
) -> Complex64 {
    let xi = omega_hz - f0_hz;
    let modulus = sigma_s * 2f64.sqrt() * gaussian_bump(sigma_s, xi);
    let cycles = match convention {
        Convention::FreqInvariant => -xi * x_s,
        Convention::TimeInvariant => f0_hz * x_s,
    };
    unit_phase(cycles) * modulus
}
