//! Zeros of the STFT: detection on a grid, Newton refinement at continuous
//! points, and numerical checks of the phase-derivative behavior around each
//! simple zero.
//!
//! Near a simple zero `(x0, w0)` with Jacobian determinant `det` of
//! `(Re V, Im V)`:
//!
//! * `d psi/dx (x0, w0 + e) ~ -det / (e |V_w|^2)`, so the vertical profile
//!   has sign `sign(det)` below the zero and `-sign(det)` above it;
//! * `d psi/dw (x0 + e, w0) ~ det / (e |V_x|^2)`, so the horizontal profile
//!   has sign `-sign(det)` left of the zero and `sign(det)` right of it;
//! * along the other direction each derivative tends to a finite value,
//!   `c = Im(conj(V_x) V_xx) / (2 |V_x|^2)` and
//!   `c' = Im(conj(V_w) V_ww) / (2 |V_w|^2)`.
//!
//! `x` derivatives use the phase of `V`, `w` derivatives that of
//! `W = e^{2 pi i w x} V`: both are unchanged by time shifts and modulations
//! of the signal, so no origin-dependent offset competes with the `1/e` term.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phasegrad::DEFAULT_THRESHOLD_REL;
use crate::signals::SignalBuffer;
use crate::stft::{point_partials, PointPartials, StftGrid, TfPoint};
use crate::windows::{WindowSpec, DEFAULT_TRUNCATION_RADIUS};

pub const DEFAULT_DEGENERACY_FLOOR: f64 = 1e-6;
pub const DEFAULT_CANDIDATE_FLOOR: f64 = 0.1;
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-8;
pub const DEFAULT_REFINE_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_ITER: usize = 50;
pub const DEFAULT_N_STEPS: usize = 8;
/// Largest profile offset as a fraction of the local length scale
/// `|V_w| / |V_ww|` (or `|V_x| / |V_xx|`).
pub const DEFAULT_LOCAL_FRACTION: f64 = 0.05;
const MAX_SCALED_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetSign {
    Positive,
    Negative,
}

impl DetSign {
    pub fn of(det: f64) -> Self {
        if det >= 0.0 {
            DetSign::Positive
        } else {
            DetSign::Negative
        }
    }

    fn as_sign(self) -> Sign {
        match self {
            DetSign::Positive => Sign::Positive,
            DetSign::Negative => Sign::Negative,
        }
    }
}

/// Sign of the samples on one side of a zero; `Mixed` when they disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "mixed")]
    Mixed,
}

impl Sign {
    fn of_all(values: &[f64]) -> Self {
        if values.iter().all(|&v| v > 0.0) {
            Sign::Positive
        } else if values.iter().all(|&v| v < 0.0) {
            Sign::Negative
        } else {
            Sign::Mixed
        }
    }

    fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::Mixed => Sign::Mixed,
        }
    }
}

/// Which phase derivative is sampled, and along which line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `d psi/dx` at `(x0, w0 -+ e)`, offsets in Hz.
    DxAlongOmega,
    /// `d psi/dw` at `(x0 -+ e, w0)`, offsets in seconds.
    DomegaAlongX,
}

/// Samples of a diverging phase derivative on both sides of a zero. "Below"
/// is the negative offset (lower frequency or earlier time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceFit {
    pub kind: ProfileKind,
    pub epsilons: Vec<f64>,
    pub values_below: Vec<f64>,
    pub values_above: Vec<f64>,
    pub loglog_slope_below: f64,
    pub loglog_slope_above: f64,
    pub sign_below: Sign,
    pub sign_above: Sign,
}

impl DivergenceFit {
    /// Exactly one sign change across the zero, in the orientation predicted
    /// by `det`.
    pub fn matches(&self, det: DetSign) -> bool {
        let (below, above) = expected_signs(self.kind, det);
        self.sign_below == below && self.sign_above == above
    }

    pub fn slopes_within(&self, target: f64, tol: f64) -> bool {
        (self.loglog_slope_below - target).abs() <= tol && (self.loglog_slope_above - target).abs() <= tol
    }
}

/// Predicted `(below, above)` signs of the diverging derivative.
pub fn expected_signs(kind: ProfileKind, det: DetSign) -> (Sign, Sign) {
    let s = det.as_sign();
    match kind {
        ProfileKind::DxAlongOmega => (s, s.flipped()),
        ProfileKind::DomegaAlongX => (s.flipped(), s),
    }
}

/// Formula value of a finite one-directional limit together with symmetric
/// samples approaching it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLimit {
    pub value: f64,
    pub epsilons: Vec<f64>,
    pub values_below: Vec<f64>,
    pub values_above: Vec<f64>,
    /// `(below + above) / 2` per offset; converges quadratically in the
    /// offset, one-sided values linearly.
    pub symmetric_means: Vec<f64>,
    /// Magnitude below which errors are measured absolutely: `1 / scale`
    /// for `d psi/dx`, `scale` for `d psi/dw`.
    pub reference_scale: f64,
}

impl FiniteLimit {
    /// `|mean - value| / max(|value|, reference_scale)` at the smallest offset.
    pub fn relative_error(&self) -> f64 {
        match self.symmetric_means.last() {
            Some(m) => (m - self.value).abs() / self.value.abs().max(self.reference_scale),
            None => f64::INFINITY,
        }
    }

    /// Relative change of the symmetric mean over the last two offsets.
    pub fn cauchy_gap(&self) -> f64 {
        let n = self.symmetric_means.len();
        if n < 2 {
            return f64::INFINITY;
        }
        (self.symmetric_means[n - 1] - self.symmetric_means[n - 2]).abs()
            / self.value.abs().max(self.reference_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub below: f64,
    pub above: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signs {
    pub below: Sign,
    pub above: Sign,
    pub left: Sign,
    pub right: Sign,
}

/// Result of refining and profiling one zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    #[serde(flatten)]
    pub location: TfPoint,
    /// `|V|` at the refined point relative to the reference modulus.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// `[[U_x, U_w], [W_x, W_w]]` for `V = U + i W`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub det_sign: DetSign,
    pub interior: bool,
    pub degenerate: bool,
    pub slopes: Option<Slopes>,
    pub signs: Option<Signs>,
    pub c: Option<f64>,
    pub c_prime: Option<f64>,
    pub classified: bool,
    pub pattern_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertical_profile: Option<DivergenceFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizontal_profile: Option<DivergenceFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Options for candidate detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateOptions {
    /// Candidates have `|V| < rel_floor * max|V|`.
    pub rel_floor: f64,
    /// At least one neighbor must exceed `noise_floor * max|V|`; regions
    /// where the whole neighborhood is at roundoff level hold no resolvable
    /// zeros.
    pub noise_floor: f64,
    pub include_boundary: bool,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            rel_floor: DEFAULT_CANDIDATE_FLOOR,
            noise_floor: DEFAULT_NOISE_FLOOR,
            include_boundary: false,
        }
    }
}

/// Grid nodes that are strict local minima of `|V|` over their
/// 8-neighborhood with `|V| < rel_floor * max|V|`. Edge rows and columns and
/// boundary frames are skipped.
pub fn detect_zero_candidates(v: &StftGrid, rel_floor: f64) -> Vec<TfPoint> {
    detect_zero_candidates_with(
        v,
        &CandidateOptions {
            rel_floor,
            ..CandidateOptions::default()
        },
    )
}

pub fn detect_zero_candidates_with(v: &StftGrid, opts: &CandidateOptions) -> Vec<TfPoint> {
    let (nf, nt) = (v.n_freq(), v.n_time());
    if nf < 3 || nt < 3 {
        return Vec::new();
    }
    let peak = v.max_modulus();
    if peak == 0.0 {
        return Vec::new();
    }
    let modulus: Vec<f64> = v.coeffs().iter().map(|z| z.norm()).collect();
    let at = |k: usize, n: usize| modulus[k * nt + n];
    let mut out = Vec::new();
    for k in 1..nf - 1 {
        for n in 1..nt - 1 {
            if !opts.include_boundary && v.boundary_frames[n] {
                continue;
            }
            let m = at(k, n);
            if m >= opts.rel_floor * peak {
                continue;
            }
            let mut is_min = true;
            let mut neighbor_max = 0.0f64;
            for dk in [-1isize, 0, 1] {
                for dn in [-1isize, 0, 1] {
                    if dk == 0 && dn == 0 {
                        continue;
                    }
                    let q = at((k as isize + dk) as usize, (n as isize + dn) as usize);
                    neighbor_max = neighbor_max.max(q);
                    if q <= m {
                        is_min = false;
                    }
                }
            }
            if is_min && neighbor_max >= opts.noise_floor * peak {
                out.push(v.point(k, n));
            }
        }
    }
    out
}

/// Options for Newton refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    /// Stop once `|V| < tol * reference_modulus`.
    pub tol: f64,
    pub max_iter: usize,
    /// Usually the grid maximum of `|V|`.
    pub reference_modulus: f64,
    pub truncation_radius: f64,
    pub degeneracy_floor: f64,
}

impl RefineOptions {
    pub fn new(reference_modulus: f64) -> Self {
        Self {
            tol: DEFAULT_REFINE_TOL,
            max_iter: DEFAULT_MAX_ITER,
            reference_modulus,
            truncation_radius: DEFAULT_TRUNCATION_RADIUS,
            degeneracy_floor: DEFAULT_DEGENERACY_FLOOR,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("refinement tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.reference_modulus > 0.0 && self.reference_modulus.is_finite()) {
            return Err(invalid("reference modulus must be positive"));
        }
        if !(self.degeneracy_floor >= 0.0) {
            return Err(invalid("degeneracy floor must be non-negative"));
        }
        Ok(())
    }
}

fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// `|det J|` is compared against `floor * ||J diag(s, 1/s)||_F^2` with `s`
/// the window's time-frequency scale, so that both columns carry the units
/// of `V` and the test does not depend on the choice of seconds and Hz.
pub fn degeneracy_threshold(jacobian: &[[f64; 2]; 2], tf_scale_s: f64, floor: f64) -> f64 {
    let s = tf_scale_s;
    let fro2 = (jacobian[0][0] * s).powi(2)
        + (jacobian[1][0] * s).powi(2)
        + (jacobian[0][1] / s).powi(2)
        + (jacobian[1][1] / s).powi(2);
    floor * fro2
}

pub fn is_degenerate(jacobian: &[[f64; 2]; 2], tf_scale_s: f64, floor: f64) -> bool {
    let det = det2(jacobian);
    !(det.abs() > degeneracy_threshold(jacobian, tf_scale_s, floor))
}

struct Newton {
    location: TfPoint,
    partials: PointPartials,
    residual_history: Vec<f64>,
}

fn newton(signal: &SignalBuffer, spec: &WindowSpec, seed: TfPoint, opts: &RefineOptions) -> Result<Newton> {
    opts.validate()?;
    let eval = |p: TfPoint| point_partials(signal, spec, p, opts.truncation_radius);
    let reference = opts.reference_modulus;
    let scale = spec.tf_scale_s();
    let mut p = seed;
    let mut pp = eval(p)?;
    let mut history = vec![pp.v.norm() / reference];
    for _ in 0..opts.max_iter {
        let r = pp.v.norm();
        if r < opts.tol * reference {
            break;
        }
        // Newton on e^{2 pi i w x_k} V, which has the same zeros; referencing
        // the phase to the current time removes the rotation e^{-2 pi i w x}
        // that V picks up from the time origin.
        let a = pp.v_omega + Complex64::new(0.0, 2.0 * PI * p.x_s) * pp.v;
        let j = [[pp.v_x.re, a.re], [pp.v_x.im, a.im]];
        let det = det2(&j);
        if det == 0.0 || !det.is_finite() {
            return Err(Error::DegenerateZero { det, floor: 0.0 });
        }
        let (u, w) = (pp.v.re, pp.v.im);
        let dx = (j[1][1] * u - j[0][1] * w) / det;
        let dw = (-j[1][0] * u + j[0][0] * w) / det;
        // Trust region: at most half a time-frequency cell per step, so the
        // iteration cannot slide down the Gaussian tails of |V|.
        let step = ((dx / scale).powi(2) + (dw * scale).powi(2)).sqrt();
        let mut lambda = if step > MAX_SCALED_STEP { MAX_SCALED_STEP / step } else { 1.0 };
        let mut accepted = None;
        for _ in 0..30 {
            let q = TfPoint::new(p.x_s - lambda * dx, p.omega_hz - lambda * dw);
            if let Ok(qq) = eval(q) {
                if qq.v.norm() < r {
                    accepted = Some((q, qq));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((q, qq)) = accepted else {
            break;
        };
        p = q;
        pp = qq;
        history.push(pp.v.norm() / reference);
    }
    if pp.v.norm() < opts.tol * reference {
        let gradient = ((pp.v_x * scale).norm_sqr() + (pp.v_omega / scale).norm_sqr()).sqrt();
        if gradient < DEFAULT_NOISE_FLOOR * reference {
            return Err(Error::Domain(format!(
                "iteration ended at ({} s, {} Hz) where |V| and its gradient are at roundoff level",
                p.x_s, p.omega_hz
            )));
        }
        return Ok(Newton {
            location: p,
            partials: pp,
            residual_history: history,
        });
    }
    Err(Error::NoConvergence {
        x_s: p.x_s,
        omega_hz: p.omega_hz,
        residual: pp.v.norm() / reference,
        iterations: history.len() - 1,
    })
}

fn bare_report(n: &Newton, spec: &WindowSpec, floor: f64) -> ZeroReport {
    let jacobian = n.partials.jacobian();
    let det = det2(&jacobian);
    ZeroReport {
        location: n.location,
        residual: *n.residual_history.last().unwrap_or(&f64::NAN),
        residual_history: n.residual_history.clone(),
        iterations: n.residual_history.len() - 1,
        jacobian,
        det,
        det_sign: DetSign::of(det),
        interior: true,
        degenerate: is_degenerate(&jacobian, spec.tf_scale_s(), floor),
        slopes: None,
        signs: None,
        c: None,
        c_prime: None,
        classified: false,
        pattern_ok: false,
        vertical_profile: None,
        horizontal_profile: None,
        note: None,
    }
}

/// Refine a zero by Newton iteration on `(Re V, Im V) = 0` with the
/// Jacobian built from `V(f, -Dg)` and `-2 pi i (x V + V(f, Mg))`, with
/// step halving when a full step does not reduce `|V|`.
pub fn refine_zero(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    seed: TfPoint,
    opts: &RefineOptions,
) -> Result<ZeroReport> {
    let n = newton(signal, spec, seed, opts)?;
    let report = bare_report(&n, spec, opts.degeneracy_floor);
    if report.degenerate {
        return Err(Error::DegenerateZero {
            det: report.det.abs(),
            floor: degeneracy_threshold(&report.jacobian, spec.tf_scale_s(), opts.degeneracy_floor),
        });
    }
    Ok(report)
}

/// Central-difference Jacobian of `(Re V, Im V)` at `p`.
pub fn finite_difference_jacobian(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    p: TfPoint,
    h_x_s: f64,
    h_omega_hz: f64,
    truncation_radius: f64,
) -> Result<[[f64; 2]; 2]> {
    let v = |q: TfPoint| point_partials(signal, spec, q, truncation_radius).map(|pp| pp.v);
    let dx = (v(TfPoint::new(p.x_s + h_x_s, p.omega_hz))? - v(TfPoint::new(p.x_s - h_x_s, p.omega_hz))?)
        / (2.0 * h_x_s);
    let dw = (v(TfPoint::new(p.x_s, p.omega_hz + h_omega_hz))?
        - v(TfPoint::new(p.x_s, p.omega_hz - h_omega_hz))?)
        / (2.0 * h_omega_hz);
    Ok([[dx.re, dw.re], [dx.im, dw.im]])
}

/// Options shared by the profile evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub n_steps: usize,
    /// Offsets with `|V| < mask_rel * reference_modulus` are dropped.
    pub mask_rel: f64,
    pub reference_modulus: f64,
    pub truncation_radius: f64,
}

impl ProfileOptions {
    pub fn new(reference_modulus: f64) -> Self {
        Self {
            n_steps: DEFAULT_N_STEPS,
            mask_rel: DEFAULT_THRESHOLD_REL,
            reference_modulus,
            truncation_radius: DEFAULT_TRUNCATION_RADIUS,
        }
    }
}

/// Default starting offset along frequency: the smaller of two grid bins and
/// a fixed fraction of the local scale `min(|V_w| / |V_ww|, 1 / s)`, with
/// `s` the window's time-frequency scale, so that every offset stays in the
/// range where the linear term of `V` dominates.
pub fn default_eps0_hz(partials: &PointPartials, spec: &WindowSpec, freq_step_hz: f64) -> f64 {
    let local = (partials.v_omega.norm() / partials.v_omega_omega.norm()).min(1.0 / spec.tf_scale_s());
    (2.0 * freq_step_hz).min(DEFAULT_LOCAL_FRACTION * local)
}

/// Time counterpart of [`default_eps0_hz`], using `min(|V_x| / |V_xx|, s)`
/// and two frame hops.
pub fn default_eps0_s(partials: &PointPartials, spec: &WindowSpec, time_step_s: f64) -> f64 {
    let local = (partials.v_x.norm() / partials.v_xx.norm()).min(spec.tf_scale_s());
    (2.0 * time_step_s).min(DEFAULT_LOCAL_FRACTION * local)
}

fn geometric(eps0: f64, n_steps: usize) -> Result<Vec<f64>> {
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(invalid("starting offset must be positive"));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    Ok((0..n_steps).map(|j| eps0 * 0.5f64.powi(j as i32)).collect())
}

/// `d psi/dx` of `V`. It does not change when the signal is shifted in time
/// or modulated.
fn dpsi_dx(pp: &PointPartials, _: TfPoint) -> f64 {
    pp.dphase_dx()
}

/// `d psi/dw` of `W = e^{2 pi i w x} V`, which likewise does not depend on
/// the time origin; that of `V` carries an extra `-2 pi x`.
fn dpsi_domega(pp: &PointPartials, p: TfPoint) -> f64 {
    pp.dphase_domega() + 2.0 * PI * p.x_s
}

/// Phase derivatives at points on both sides of `zero` along
/// one axis, dropping offsets where either side falls under the mask.
fn sample_pairs(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    zero: TfPoint,
    epsilons: &[f64],
    along_omega: bool,
    derivative: fn(&PointPartials, TfPoint) -> f64,
    opts: &ProfileOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let threshold = opts.mask_rel * opts.reference_modulus;
    let mut kept = Vec::new();
    let mut below = Vec::new();
    let mut above = Vec::new();
    for &e in epsilons {
        let at = |s: f64| {
            let p = if along_omega {
                TfPoint::new(zero.x_s, zero.omega_hz + s * e)
            } else {
                TfPoint::new(zero.x_s + s * e, zero.omega_hz)
            };
            point_partials(signal, spec, p, opts.truncation_radius).map(|pp| (p, pp))
        };
        let ((p_lo, lo), (p_hi, hi)) = (at(-1.0)?, at(1.0)?);
        if lo.v.norm() < threshold || hi.v.norm() < threshold {
            continue;
        }
        kept.push(e);
        below.push(derivative(&lo, p_lo));
        above.push(derivative(&hi, p_hi));
    }
    Ok((kept, below, above))
}

fn loglog_slope(eps: &[f64], values: &[f64]) -> f64 {
    let n = eps.len() as f64;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn divergence_fit(
    kind: ProfileKind,
    (epsilons, below, above): (Vec<f64>, Vec<f64>, Vec<f64>),
) -> Result<DivergenceFit> {
    if epsilons.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} profile offsets survived the mask; at least 3 are needed",
            epsilons.len()
        )));
    }
    Ok(DivergenceFit {
        kind,
        loglog_slope_below: loglog_slope(&epsilons, &below),
        loglog_slope_above: loglog_slope(&epsilons, &above),
        sign_below: Sign::of_all(&below),
        sign_above: Sign::of_all(&above),
        epsilons,
        values_below: below,
        values_above: above,
    })
}

/// `d psi/dx` at `(x0, w0 -+ eps_j)` with `eps_j = eps0_hz 2^{-j}`, its
/// signs and the least-squares slope of `log|value|` against `log eps`.
pub fn vertical_profile(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    zero: TfPoint,
    eps0_hz: f64,
    opts: &ProfileOptions,
) -> Result<DivergenceFit> {
    let eps = geometric(eps0_hz, opts.n_steps)?;
    let samples = sample_pairs(signal, spec, zero, &eps, true, dpsi_dx, opts)?;
    divergence_fit(ProfileKind::DxAlongOmega, samples)
}

fn limit_from_samples(value: f64, reference_scale: f64, (epsilons, below, above): (Vec<f64>, Vec<f64>, Vec<f64>)) -> FiniteLimit {
    let symmetric_means = below.iter().zip(&above).map(|(a, b)| 0.5 * (a + b)).collect();
    FiniteLimit {
        value,
        epsilons,
        values_below: below,
        values_above: above,
        symmetric_means,
        reference_scale,
    }
}

/// Limit of `d psi/dx` along the time axis through a zero:
/// `c = Im(conj(V_x) V_xx) / (2 |V_x|^2)` in rad/s (V convention), with
/// samples at `(x0 -+ eps_j, w0)`. The time-invariant value is `c + 2 pi w0`.
pub fn horizontal_limit(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    zero: TfPoint,
    eps0_s: f64,
    opts: &ProfileOptions,
) -> Result<FiniteLimit> {
    let pp = point_partials(signal, spec, zero, opts.truncation_radius)?;
    let denom = 2.0 * pp.v_x.norm_sqr();
    let scale = spec.tf_scale_s();
    if !(denom > 0.0) || pp.v_x.norm() * scale < opts.mask_rel * opts.reference_modulus {
        return Err(Error::Inconsistent(format!(
            "|V_x| vanishes at the zero ({} s, {} Hz), contradicting det J != 0",
            zero.x_s, zero.omega_hz
        )));
    }
    let c = (pp.v_x.conj() * pp.v_xx).im / denom;
    let eps = geometric(eps0_s, opts.n_steps)?;
    let samples = sample_pairs(signal, spec, zero, &eps, false, dpsi_dx, opts)?;
    Ok(limit_from_samples(c, 1.0 / scale, samples))
}

/// The frequency-derivative counterparts: `d psi/dw` diverging along the
/// time axis and its finite limit `c'` (rad/Hz) along the frequency axis.
/// Both use the time-invariant phase, so `c'` is `c'_V + 2 pi x0`.
pub fn frequency_direction_profiles(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    zero: TfPoint,
    eps0_s: f64,
    eps0_hz: f64,
    opts: &ProfileOptions,
) -> Result<(DivergenceFit, FiniteLimit)> {
    let eps_x = geometric(eps0_s, opts.n_steps)?;
    let samples = sample_pairs(signal, spec, zero, &eps_x, false, dpsi_domega, opts)?;
    let fit = divergence_fit(ProfileKind::DomegaAlongX, samples)?;

    let pp = point_partials(signal, spec, zero, opts.truncation_radius)?;
    let scale = spec.tf_scale_s();
    let denom = 2.0 * pp.v_omega.norm_sqr();
    if !(denom > 0.0) || pp.v_omega.norm() / scale < opts.mask_rel * opts.reference_modulus {
        return Err(Error::Inconsistent(format!(
            "|V_w| vanishes at the zero ({} s, {} Hz), contradicting det J != 0",
            zero.x_s, zero.omega_hz
        )));
    }
    let c_prime = (pp.v_omega.conj() * pp.v_omega_omega).im / denom + 2.0 * PI * zero.x_s;
    let eps_w = geometric(eps0_hz, opts.n_steps)?;
    let samples = sample_pairs(signal, spec, zero, &eps_w, true, dpsi_domega, opts)?;
    Ok((fit, limit_from_samples(c_prime, scale, samples)))
}

/// Options for the full detect/refine/profile pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub candidates: CandidateOptions,
    pub tol: f64,
    pub max_iter: usize,
    pub degeneracy_floor: f64,
    pub n_steps: usize,
    pub mask_rel: f64,
    /// Starting offsets; `None` selects the local-scale defaults.
    pub eps0_hz: Option<f64>,
    pub eps0_s: Option<f64>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            candidates: CandidateOptions::default(),
            tol: DEFAULT_REFINE_TOL,
            max_iter: DEFAULT_MAX_ITER,
            degeneracy_floor: DEFAULT_DEGENERACY_FLOOR,
            n_steps: DEFAULT_N_STEPS,
            mask_rel: DEFAULT_THRESHOLD_REL,
            eps0_hz: None,
            eps0_s: None,
        }
    }
}

/// Outcome of [`analyze_zeros`]: distinct refined zeros plus counts of seeds
/// that did not lead to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroAnalysis {
    pub reports: Vec<ZeroReport>,
    pub n_candidates: usize,
    pub n_unrefined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroSummary {
    pub count: usize,
    pub classified: usize,
    pub pattern_ok: usize,
    pub pass_rate: f64,
    pub mean_slope_below: f64,
    pub mean_slope_above: f64,
    pub mean_slope_left: f64,
    pub mean_slope_right: f64,
}

impl ZeroAnalysis {
    pub fn summary(&self) -> ZeroSummary {
        let classified: Vec<&ZeroReport> = self.reports.iter().filter(|r| r.classified).collect();
        let ok = classified.iter().filter(|r| r.pattern_ok).count();
        let mean = |f: fn(&Slopes) -> f64| {
            let v: Vec<f64> = classified.iter().filter_map(|r| r.slopes.as_ref().map(f)).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        ZeroSummary {
            count: self.reports.len(),
            classified: classified.len(),
            pattern_ok: ok,
            pass_rate: if classified.is_empty() {
                f64::NAN
            } else {
                ok as f64 / classified.len() as f64
            },
            mean_slope_below: mean(|s| s.below),
            mean_slope_above: mean(|s| s.above),
            mean_slope_left: mean(|s| s.left),
            mean_slope_right: mean(|s| s.right),
        }
    }
}

fn profile_report(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    grid: &StftGrid,
    report: &mut ZeroReport,
    partials: &PointPartials,
    opts: &AnalyzeOptions,
    popts: &ProfileOptions,
) -> Result<()> {
    let zero = report.location;
    let eps_hz = opts
        .eps0_hz
        .unwrap_or_else(|| default_eps0_hz(partials, spec, grid.freq_step_hz()));
    let eps_s = opts
        .eps0_s
        .unwrap_or_else(|| default_eps0_s(partials, spec, grid.time_step_s()));
    let vertical = vertical_profile(signal, spec, zero, eps_hz, popts)?;
    let c = horizontal_limit(signal, spec, zero, eps_s, popts)?;
    let (horizontal, c_prime) = frequency_direction_profiles(signal, spec, zero, eps_s, eps_hz, popts)?;
    report.slopes = Some(Slopes {
        below: vertical.loglog_slope_below,
        above: vertical.loglog_slope_above,
        left: horizontal.loglog_slope_below,
        right: horizontal.loglog_slope_above,
    });
    report.signs = Some(Signs {
        below: vertical.sign_below,
        above: vertical.sign_above,
        left: horizontal.sign_below,
        right: horizontal.sign_above,
    });
    report.c = Some(c.value);
    report.c_prime = Some(c_prime.value);
    report.pattern_ok = vertical.matches(report.det_sign) && horizontal.matches(report.det_sign);
    report.vertical_profile = Some(vertical);
    report.horizontal_profile = Some(horizontal);
    Ok(())
}

fn is_interior(signal: &SignalBuffer, spec: &WindowSpec, p: TfPoint, truncation_radius: f64) -> bool {
    let r = spec.support_radius_s(truncation_radius);
    p.x_s - r >= signal.start_time_s() && p.x_s + r <= signal.end_time_s()
}

/// Detect candidates on `grid` (the plain transform of `signal`), refine
/// each, drop duplicates, and profile the non-degenerate interior zeros.
pub fn analyze_zeros(
    signal: &SignalBuffer,
    spec: &WindowSpec,
    grid: &StftGrid,
    opts: &AnalyzeOptions,
) -> Result<ZeroAnalysis> {
    let candidates = detect_zero_candidates_with(grid, &opts.candidates);
    let reference = grid.max_modulus();
    if candidates.is_empty() || reference == 0.0 {
        return Ok(ZeroAnalysis {
            reports: Vec::new(),
            n_candidates: candidates.len(),
            n_unrefined: 0,
        });
    }
    let truncation = grid.params.truncation_radius;
    let ropts = RefineOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        reference_modulus: reference,
        truncation_radius: truncation,
        degeneracy_floor: opts.degeneracy_floor,
    };
    ropts.validate()?;
    let refined: Vec<Option<(Newton, ZeroReport)>> = candidates
        .par_iter()
        .map(|&seed| {
            let n = newton(signal, spec, seed, &ropts).ok()?;
            let r = bare_report(&n, spec, opts.degeneracy_floor);
            Some((n, r))
        })
        .collect();
    let n_unrefined = refined.iter().filter(|r| r.is_none()).count();

    // Distinct zeros, in a fixed order so that output is deterministic.
    let scale = spec.tf_scale_s();
    let mut found: Vec<(Newton, ZeroReport)> = refined.into_iter().flatten().collect();
    found.sort_by(|a, b| {
        a.1.location
            .x_s
            .total_cmp(&b.1.location.x_s)
            .then(a.1.location.omega_hz.total_cmp(&b.1.location.omega_hz))
    });
    let mut distinct: Vec<(Newton, ZeroReport)> = Vec::with_capacity(found.len());
    for item in found {
        let p = item.1.location;
        let dup = distinct.iter().rev().take(16).any(|(_, q)| {
            let q = q.location;
            ((p.x_s - q.x_s) / scale).abs() + ((p.omega_hz - q.omega_hz) * scale).abs() < 1e-6
        });
        if !dup {
            distinct.push(item);
        }
    }

    let popts = ProfileOptions {
        n_steps: opts.n_steps,
        mask_rel: opts.mask_rel,
        reference_modulus: reference,
        truncation_radius: truncation,
    };
    let reports = distinct
        .into_par_iter()
        .map(|(n, mut report)| {
            report.interior = is_interior(signal, spec, report.location, truncation);
            if report.degenerate {
                report.note = Some("degenerate: |det J| below the floor".into());
            } else if !report.interior {
                report.note = Some("window support leaves the signal".into());
            } else {
                match profile_report(signal, spec, grid, &mut report, &n.partials, opts, &popts) {
                    Ok(()) => report.classified = true,
                    Err(e) => report.note = Some(e.to_string()),
                }
            }
            report
        })
        .collect();
    Ok(ZeroAnalysis {
        reports,
        n_candidates: candidates.len(),
        n_unrefined,
    })
}

/// The time-invariant counterpart of a V-convention `d psi/dx` value at
/// frequency `omega_hz`.
pub fn to_time_invariant_dx(value: f64, omega_hz: f64) -> f64 {
    value + 2.0 * PI * omega_hz
}
