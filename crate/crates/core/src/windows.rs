//! Analysis windows and their operator images.
//!
//! Every family is evaluated analytically: `NegDg` is `-g'`, `Mg` is
//! `t g(t)`, `D2g` is `g''` and `M2g` is `t^2 g(t)`. Windows are real and
//! even, centered at `t = 0`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default Gaussian truncation radius, in units of sigma.
pub const DEFAULT_TRUNCATION_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFamily {
    Gaussian,
    Hamming,
    Rectangular,
}

/// Which operator image of the window is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowVariant {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "neg_Dg")]
    NegDg,
    #[serde(rename = "Mg")]
    Mg,
    #[serde(rename = "D2g")]
    D2g,
    #[serde(rename = "M2g")]
    M2g,
}

impl WindowVariant {
    pub const ALL: [WindowVariant; 5] = [
        WindowVariant::G,
        WindowVariant::NegDg,
        WindowVariant::Mg,
        WindowVariant::D2g,
        WindowVariant::M2g,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WindowVariant::G => "g",
            WindowVariant::NegDg => "neg_Dg",
            WindowVariant::Mg => "Mg",
            WindowVariant::D2g => "D2g",
            WindowVariant::M2g => "M2g",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    fn needs_derivative(self) -> bool {
        matches!(self, WindowVariant::NegDg | WindowVariant::D2g)
    }
}

impl fmt::Display for WindowVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parametric window. `sigma_s` is used by the Gaussian
/// `g(t) = exp(-pi t^2 / (2 sigma^2))`, `length_s` by the compact families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub family: WindowFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_s: Option<f64>,
}

impl WindowSpec {
    pub fn gaussian(sigma_s: f64) -> Result<Self> {
        let spec = Self {
            family: WindowFamily::Gaussian,
            sigma_s: Some(sigma_s),
            length_s: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn hamming(length_s: f64) -> Result<Self> {
        let spec = Self {
            family: WindowFamily::Hamming,
            sigma_s: None,
            length_s: Some(length_s),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rectangular(length_s: f64) -> Result<Self> {
        let spec = Self {
            family: WindowFamily::Rectangular,
            sigma_s: None,
            length_s: Some(length_s),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: Option<f64>| v.is_some_and(|x| x.is_finite() && x > 0.0);
        match self.family {
            WindowFamily::Gaussian if !positive(self.sigma_s) => {
                Err(invalid("gaussian window needs a positive sigma"))
            }
            WindowFamily::Hamming | WindowFamily::Rectangular if !positive(self.length_s) => {
                Err(invalid("hamming and rectangular windows need a positive length"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        self.family != WindowFamily::Rectangular
    }

    pub fn supports(&self, variant: WindowVariant) -> Result<()> {
        if variant.needs_derivative() && !self.is_differentiable() {
            return Err(Error::Unsupported(format!(
                "variant {variant} requires a differentiable window; the rectangular \
                 window is discontinuous"
            )));
        }
        Ok(())
    }

    /// Half-width of the sampled support in seconds. `truncation_radius` is
    /// in units of sigma and only affects the Gaussian.
    pub fn support_radius_s(&self, truncation_radius: f64) -> f64 {
        match self.family {
            WindowFamily::Gaussian => truncation_radius * self.sigma(),
            _ => self.length() / 2.0,
        }
    }

    /// Time scale that balances time and frequency spread: lengths are
    /// measured as `x / scale` and frequencies as `omega * scale`.
    pub fn tf_scale_s(&self) -> f64 {
        match self.family {
            // |V| of an impulse decays as exp(-pi x^2 / (2 sigma^2)), of a tone
            // as exp(-2 pi sigma^2 xi^2); both are exp(-pi u^2 / 4) at this scale.
            WindowFamily::Gaussian => self.sigma() * 2f64.sqrt(),
            _ => self.length() / 4.0,
        }
    }

    fn sigma(&self) -> f64 {
        self.sigma_s.unwrap_or(f64::NAN)
    }

    fn length(&self) -> f64 {
        self.length_s.unwrap_or(f64::NAN)
    }

    /// Evaluate the variant at `t` seconds, without truncation.
    pub fn eval(&self, variant: WindowVariant, t: f64) -> Result<f64> {
        self.supports(variant)?;
        Ok(self.eval_unchecked(variant, t))
    }

    pub(crate) fn eval_unchecked(&self, variant: WindowVariant, t: f64) -> f64 {
        match self.family {
            WindowFamily::Gaussian => {
                let s2 = self.sigma() * self.sigma();
                let g = (-PI * t * t / (2.0 * s2)).exp();
                match variant {
                    WindowVariant::G => g,
                    WindowVariant::NegDg => PI * t / s2 * g,
                    WindowVariant::Mg => t * g,
                    WindowVariant::D2g => (-PI / s2 + PI * PI * t * t / (s2 * s2)) * g,
                    WindowVariant::M2g => t * t * g,
                }
            }
            WindowFamily::Hamming => {
                let len = self.length();
                if outside_support(t, len) {
                    return 0.0;
                }
                let k = 2.0 * PI / len;
                let g = 0.54 + 0.46 * (k * t).cos();
                match variant {
                    WindowVariant::G => g,
                    WindowVariant::NegDg => 0.46 * k * (k * t).sin(),
                    WindowVariant::Mg => t * g,
                    WindowVariant::D2g => -0.46 * k * k * (k * t).cos(),
                    WindowVariant::M2g => t * t * g,
                }
            }
            WindowFamily::Rectangular => {
                if outside_support(t, self.length()) {
                    return 0.0;
                }
                match variant {
                    WindowVariant::G => 1.0,
                    WindowVariant::Mg => t,
                    WindowVariant::M2g => t * t,
                    // Rejected by `supports`.
                    WindowVariant::NegDg | WindowVariant::D2g => f64::NAN,
                }
            }
        }
    }
}

// The edge sample belongs to the support even when `t` carries rounding error.
fn outside_support(t: f64, length: f64) -> bool {
    t.abs() > 0.5 * length * (1.0 + 1e-12)
}

/// A window variant sampled at `j / fs` for `j = -R..=R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWindow {
    pub values: Vec<f64>,
    pub center_index: usize,
    pub sample_rate_hz: f64,
    pub variant: WindowVariant,
}

impl SampledWindow {
    /// Number of samples on each side of the center.
    pub fn radius(&self) -> usize {
        self.center_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at offset `j` samples from the center.
    pub fn at(&self, j: isize) -> f64 {
        self.values[(self.center_index as isize + j) as usize]
    }
}

/// Number of samples on each side of the center covered by the support.
pub fn support_radius_samples(spec: &WindowSpec, sample_rate_hz: f64, truncation_radius: f64) -> usize {
    let r = spec.support_radius_s(truncation_radius) * sample_rate_hz;
    // Tolerate representation error when the edge lands on a sample.
    (r + 1e-9).floor() as usize
}

pub fn sample_window(
    spec: &WindowSpec,
    variant: WindowVariant,
    sample_rate_hz: f64,
    truncation_radius: f64,
) -> Result<SampledWindow> {
    spec.validate()?;
    spec.supports(variant)?;
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(invalid("sample rate must be positive"));
    }
    if !(truncation_radius.is_finite() && truncation_radius > 0.0) {
        return Err(invalid("truncation radius must be positive"));
    }
    let radius = support_radius_samples(spec, sample_rate_hz, truncation_radius);
    let values = (-(radius as isize)..=radius as isize)
        .map(|j| spec.eval_unchecked(variant, j as f64 / sample_rate_hz))
        .collect();
    Ok(SampledWindow {
        values,
        center_index: radius,
        sample_rate_hz,
        variant,
    })
}
