//! Phase derivatives of an STFT grid.
//!
//! Three routes are provided: the auxiliary-transform ratio
//! `Im(V_aux conj(V)) / |V|^2`, the Cartesian form
//! `(U W'_aux - W U'_aux) / (U^2 + W^2)` on real and imaginary parts, and
//! differencing of the unwrapped argument. Cells where `|V|` falls below
//! `threshold_rel * max |V|` are masked.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{Convention, GridContent, StftGrid};
use crate::windows::WindowVariant;

/// Default relative modulus threshold below which cells are masked.
pub const DEFAULT_THRESHOLD_REL: f64 = 1e-10;

/// Wrapped phase increments at or above this fraction of pi are ambiguous.
const UNWRAP_LIMIT: f64 = PI * (1.0 - 1e-6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Derivative along time, in rad/s.
    DDx,
    /// Derivative along frequency, in rad/Hz.
    DDomega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ratio,
    Cartesian,
    Unwrap,
}

/// Phase derivative values with a validity mask (`true` = valid). Masked
/// cells hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradGrid {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub n_freq: usize,
    pub n_time: usize,
    pub threshold_rel: f64,
    pub direction: Direction,
    pub convention: Convention,
    pub time_axis_s: Vec<f64>,
    pub freq_axis_hz: Vec<f64>,
    pub boundary_frames: Vec<bool>,
}

impl PhaseGradGrid {
    fn empty_like(v: &StftGrid, direction: Direction, threshold_rel: f64) -> Self {
        let cells = v.n_freq() * v.n_time();
        Self {
            values: vec![f64::NAN; cells],
            mask: vec![false; cells],
            n_freq: v.n_freq(),
            n_time: v.n_time(),
            threshold_rel,
            direction,
            convention: v.convention,
            time_axis_s: v.time_axis_s.clone(),
            freq_axis_hz: v.freq_axis_hz.clone(),
            boundary_frames: v.boundary_frames.clone(),
        }
    }

    pub fn at(&self, k: usize, n: usize) -> Option<f64> {
        let idx = k * self.n_time + n;
        self.mask[idx].then_some(self.values[idx])
    }

    pub fn is_valid(&self, k: usize, n: usize) -> bool {
        self.mask[k * self.n_time + n]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter_map(|(&v, &m)| m.then_some(v))
    }

    /// Same grid with time derivatives expressed in Hz (divided by 2 pi).
    pub fn in_hz(&self) -> PhaseGradGrid {
        let scale = match self.direction {
            Direction::DDx => 1.0 / (2.0 * PI),
            Direction::DDomega => 1.0,
        };
        PhaseGradGrid {
            values: self.values.iter().map(|v| v * scale).collect(),
            ..self.clone()
        }
    }
}

fn check_pair(v: &StftGrid, aux: &StftGrid, direction: Direction) -> Result<()> {
    if !matches!(v.content, GridContent::Transform(WindowVariant::G)) {
        return Err(Error::AxisMismatch(
            "primary grid must hold the transform with the plain window".into(),
        ));
    }
    if !v.same_axes(aux) {
        return Err(Error::AxisMismatch(format!(
            "grids differ: {}x{} vs {}x{}",
            v.n_freq(),
            v.n_time(),
            aux.n_freq(),
            aux.n_time()
        )));
    }
    if v.convention != aux.convention {
        return Err(Error::AxisMismatch("grids use different conventions".into()));
    }
    let compatible = match (direction, aux.content) {
        (Direction::DDx, GridContent::PartialX) => true,
        // V(f, -Dg) is the x-partial only in the frequency-invariant convention.
        (Direction::DDx, GridContent::Transform(WindowVariant::NegDg)) => {
            aux.convention == Convention::FreqInvariant
        }
        (Direction::DDomega, GridContent::PartialOmega) => true,
        _ => false,
    };
    if !compatible {
        return Err(Error::AxisMismatch(format!(
            "auxiliary grid {:?} does not hold the {direction:?} partial",
            aux.content
        )));
    }
    Ok(())
}

fn pointwise(
    v: &StftGrid,
    aux: &StftGrid,
    direction: Direction,
    threshold_rel: f64,
    formula: impl Fn(Complex64, Complex64) -> f64,
) -> Result<PhaseGradGrid> {
    check_pair(v, aux, direction)?;
    let floor = threshold_rel * v.max_modulus();
    let mut out = PhaseGradGrid::empty_like(v, direction, threshold_rel);
    for (idx, (&z, &a)) in v.coeffs().iter().zip(aux.coeffs()).enumerate() {
        if z.norm() < floor || z.norm_sqr() == 0.0 {
            continue;
        }
        out.values[idx] = formula(z, a);
        out.mask[idx] = true;
    }
    Ok(out)
}

/// `Im(V_aux conj(V)) / |V|^2`, where `V_aux` is the partial of the grid's
/// transform in the chosen direction.
pub fn phase_deriv_ratio(
    v: &StftGrid,
    aux: &StftGrid,
    direction: Direction,
    threshold_rel: f64,
) -> Result<PhaseGradGrid> {
    pointwise(v, aux, direction, threshold_rel, |z, a| {
        (a * z.conj()).im / z.norm_sqr()
    })
}

/// `(U A_im - W A_re) / (U^2 + W^2)` with `V = U + iW` and `A` the partial.
pub fn phase_deriv_cartesian(
    v: &StftGrid,
    aux: &StftGrid,
    direction: Direction,
    threshold_rel: f64,
) -> Result<PhaseGradGrid> {
    pointwise(v, aux, direction, threshold_rel, |z, a| {
        let (u, w) = (z.re, z.im);
        (u * a.im - w * a.re) / (u * u + w * w)
    })
}

/// Phase derivative from the unwrapped argument along rows (`DDx`) or
/// columns (`DDomega`), with central differences inside runs of valid cells
/// and one-sided differences at their ends. Cells whose wrapped phase step
/// to both neighbors is ambiguous (within 1e-6 of pi) are masked.
///
/// The linear carrier of the convention (`2 pi omega x`) is removed before
/// unwrapping and its derivative added back exactly: `W` is differenced in
/// time as `V` plus `2 pi omega`, and `V` in frequency as `W` minus
/// `2 pi x`. Otherwise the carrier alone advances the phase by more than pi
/// per step once `omega * hop > fs / 2`.
pub fn phase_deriv_unwrap(v: &StftGrid, direction: Direction, threshold_rel: f64) -> PhaseGradGrid {
    let floor = threshold_rel * v.max_modulus();
    let demodulate = match (direction, v.convention) {
        (Direction::DDx, Convention::TimeInvariant) => Some(-1.0),
        (Direction::DDomega, Convention::FreqInvariant) => Some(1.0),
        _ => None,
    };
    let mut out = PhaseGradGrid::empty_like(v, direction, threshold_rel);
    let (lines, len, step) = match direction {
        Direction::DDx => (v.n_freq(), v.n_time(), v.time_step_s()),
        Direction::DDomega => (v.n_time(), v.n_freq(), v.freq_step_hz()),
    };
    let index = |line: usize, i: usize| match direction {
        Direction::DDx => line * v.n_time() + i,
        Direction::DDomega => i * v.n_time() + line,
    };

    let mut line_values = vec![Complex64::new(0.0, 0.0); len];
    let mut unwrapped = vec![0.0; len];
    let mut linked = vec![false; len.saturating_sub(1)];
    for line in 0..lines {
        for (i, z) in line_values.iter_mut().enumerate() {
            let idx = index(line, i);
            *z = v.coeffs()[idx];
            if let Some(sign) = demodulate {
                let (k, n) = (idx / v.n_time(), idx % v.n_time());
                let e = v.convention_factor(k, n);
                *z *= if sign > 0.0 { e } else { e.conj() };
            }
        }
        let valid = |i: usize| {
            let z: Complex64 = line_values[i];
            z.norm() >= floor && z.norm_sqr() > 0.0
        };

        for i in 0..len.saturating_sub(1) {
            linked[i] = valid(i)
                && valid(i + 1)
                && wrap_to_pi(line_values[i + 1].arg() - line_values[i].arg()).abs() < UNWRAP_LIMIT;
        }
        // Unwrap along runs of cells joined by unambiguous steps.
        for i in 0..len {
            if !valid(i) {
                continue;
            }
            let raw = line_values[i].arg();
            unwrapped[i] = if i > 0 && linked[i - 1] {
                unwrapped[i - 1] + wrap_to_pi(raw - line_values[i - 1].arg())
            } else {
                raw
            };
        }

        for i in 0..len {
            if !valid(i) {
                continue;
            }
            let back = i > 0 && linked[i - 1];
            let fwd = i + 1 < len && linked[i];
            let d = match (back, fwd) {
                (true, true) => (unwrapped[i + 1] - unwrapped[i - 1]) / (2.0 * step),
                (false, true) => (unwrapped[i + 1] - unwrapped[i]) / step,
                (true, false) => (unwrapped[i] - unwrapped[i - 1]) / step,
                (false, false) => continue,
            };
            let idx = index(line, i);
            let carrier = match demodulate {
                Some(_) if direction == Direction::DDx => 2.0 * PI * v.freq_axis_hz[idx / v.n_time()],
                Some(_) => -2.0 * PI * v.time_axis_s[idx % v.n_time()],
                None => 0.0,
            };
            out.values[idx] = d + carrier;
            out.mask[idx] = true;
        }
    }
    out
}

/// Wrap an angle difference into (-pi, pi].
fn wrap_to_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Principal argument in (-pi, pi]; the branch cut lies on the negative
/// real axis.
pub fn arg_branch(z: Complex64) -> Result<f64> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::Domain("the argument of zero is undefined".into()));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain("argument of a non-finite number".into()));
    }
    let a = z.im.atan2(z.re);
    // atan2 yields -pi for a negative real with negative zero imaginary part.
    Ok(if a == -PI { PI } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{make_noise, make_pure_tone, NoiseKind, NoiseSpec, SignalBuffer};
    use crate::stft::{derivative_stfts, stft_grid, GridParams};
    use crate::windows::WindowSpec;

    fn tone_grids(conv: Convention) -> crate::stft::DerivativeStfts {
        let spec = WindowSpec::gaussian(0.004).unwrap();
        let f = make_pure_tone(600.0, 8000.0, 0.15).unwrap();
        derivative_stfts(&f, &spec, &GridParams::new(8, 1024), conv).unwrap()
    }

    #[test]
    fn pure_tone_time_derivative_v() {
        let d = tone_grids(Convention::FreqInvariant);
        // Roundoff in |V| near 1e-10 of the peak perturbs the ratio at the
        // 1e-6 level, so the relative check uses cells above 1e-9.
        let pg = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, 1e-9).unwrap();
        let mut checked = 0;
        for k in 0..pg.n_freq {
            let expected = -2.0 * PI * (pg.freq_axis_hz[k] - 600.0);
            for n in (0..pg.n_time).filter(|&n| !pg.boundary_frames[n]) {
                if let Some(val) = pg.at(k, n) {
                    assert!((val - expected).abs() <= 1e-6 * expected.abs().max(1.0), "k={k} n={n}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn pure_tone_time_derivative_w() {
        let d = tone_grids(Convention::TimeInvariant);
        let pg = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, 1e-9).unwrap();
        let expected = 2.0 * PI * 600.0;
        for k in 0..pg.n_freq {
            for n in (0..pg.n_time).filter(|&n| !pg.boundary_frames[n]) {
                if let Some(val) = pg.at(k, n) {
                    assert!((val - expected).abs() < 1e-6 * expected, "k={k} n={n}");
                }
            }
        }
    }

    #[test]
    fn ratio_and_cartesian_agree() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = make_noise(NoiseSpec::new(1.0, NoiseKind::CircularComplex, 1).unwrap(), 8000.0, 0.1).unwrap();
        for conv in [Convention::FreqInvariant, Convention::TimeInvariant] {
            let d = derivative_stfts(&f, &spec, &GridParams::new(4, 512), conv).unwrap();
            for (aux, dir) in [(&d.d_x, Direction::DDx), (&d.d_omega, Direction::DDomega)] {
                let a = phase_deriv_ratio(&d.value, aux, dir, 1e-10).unwrap();
                let b = phase_deriv_cartesian(&d.value, aux, dir, 1e-10).unwrap();
                assert_eq!(a.mask, b.mask);
                for (x, y) in a.valid_values().zip(b.valid_values()) {
                    assert!((x - y).abs() <= 1e-13 * x.abs().max(y.abs()).max(1e-300));
                }
            }
        }
    }

    #[test]
    fn conjugate_signal_negates_derivative() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = make_noise(NoiseSpec::new(1.0, NoiseKind::CircularComplex, 8).unwrap(), 8000.0, 0.1).unwrap();
        let g = f.conj();
        let params = GridParams::new(4, 512);
        let df = derivative_stfts(&f, &spec, &params, Convention::FreqInvariant).unwrap();
        let dg = derivative_stfts(&g, &spec, &params, Convention::FreqInvariant).unwrap();
        let a = phase_deriv_cartesian(&df.value, &df.d_x, Direction::DDx, 1e-10).unwrap();
        let b = phase_deriv_cartesian(&dg.value, &dg.d_x, Direction::DDx, 1e-10).unwrap();
        // conj(f) maps V(x, w) to conj(V(x, -w)); bin k pairs with N - k.
        let n_freq = a.n_freq;
        for k in 1..n_freq {
            for n in 0..a.n_time {
                if let (Some(x), Some(y)) = (a.at(k, n), b.at(n_freq - k, n)) {
                    assert!((x + y).abs() < 1e-8 * x.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn mask_matches_threshold() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = make_pure_tone(1000.0, 8000.0, 0.05).unwrap();
        let d = derivative_stfts(&f, &spec, &GridParams::new(4, 512), Convention::FreqInvariant).unwrap();
        let thr = 1e-6;
        let pg = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, thr).unwrap();
        let peak = d.value.max_modulus();
        for (idx, z) in d.value.coeffs().iter().enumerate() {
            assert_eq!(pg.mask[idx], z.norm() >= thr * peak);
        }
        assert!(pg.valid_count() < pg.values.len());
    }

    #[test]
    fn axis_mismatch_is_rejected() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = make_pure_tone(1000.0, 8000.0, 0.05).unwrap();
        let a = derivative_stfts(&f, &spec, &GridParams::new(4, 512), Convention::FreqInvariant).unwrap();
        let b = derivative_stfts(&f, &spec, &GridParams::new(5, 512), Convention::FreqInvariant).unwrap();
        assert!(matches!(
            phase_deriv_ratio(&a.value, &b.d_x, Direction::DDx, 1e-10),
            Err(Error::AxisMismatch(_))
        ));
        assert!(phase_deriv_ratio(&a.value, &a.d_omega, Direction::DDx, 1e-10).is_err());
        let w = derivative_stfts(&f, &spec, &GridParams::new(4, 512), Convention::TimeInvariant).unwrap();
        assert!(phase_deriv_ratio(&a.value, &w.d_x, Direction::DDx, 1e-10).is_err());
    }

    #[test]
    fn neg_dg_transform_is_accepted_as_x_partial() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = make_pure_tone(1000.0, 8000.0, 0.05).unwrap();
        let params = GridParams::new(4, 512);
        let d = derivative_stfts(&f, &spec, &params, Convention::FreqInvariant).unwrap();
        let vx = stft_grid(&f, &spec, WindowVariant::NegDg, &params, Convention::FreqInvariant).unwrap();
        let a = phase_deriv_ratio(&d.value, &vx, Direction::DDx, 1e-10).unwrap();
        let b = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, 1e-10).unwrap();
        assert_eq!(a.mask, b.mask);
        assert!(a.valid_values().zip(b.valid_values()).all(|(x, y)| x == y));
    }

    #[test]
    fn unwrap_pure_tone() {
        let d = tone_grids(Convention::FreqInvariant);
        let pg = phase_deriv_unwrap(&d.value, Direction::DDx, DEFAULT_THRESHOLD_REL);
        let h = d.value.time_step_s();
        let mut checked = 0;
        for k in 0..pg.n_freq / 2 {
            let rate = -2.0 * PI * (pg.freq_axis_hz[k] - 600.0);
            // Exact phase is linear, so differencing is exact when the step
            // per hop stays below pi.
            if (rate * h).abs() > 0.9 * PI {
                continue;
            }
            for n in (0..pg.n_time).filter(|&n| !pg.boundary_frames[n]) {
                if let Some(val) = pg.at(k, n) {
                    assert!((val - rate).abs() < 1e-6 * rate.abs().max(1.0), "k={k} n={n}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn unwrap_constant_signal_is_flat_at_dc() {
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let f = SignalBuffer::new(vec![Complex64::new(0.7, 0.0); 800], 8000.0).unwrap();
        let v = stft_grid(&f, &spec, WindowVariant::G, &GridParams::new(4, 512), Convention::FreqInvariant).unwrap();
        let pg = phase_deriv_unwrap(&v, Direction::DDx, DEFAULT_THRESHOLD_REL);
        for n in (0..pg.n_time).filter(|&n| !pg.boundary_frames[n]) {
            assert!(pg.at(0, n).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_into_half_open_interval() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert_eq!(wrap_to_pi(-PI), PI);
        assert!((wrap_to_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_to_pi(0.25)).abs() - 0.25 < 1e-15);
    }

    #[test]
    fn arg_branch_cases() {
        assert_eq!(arg_branch(Complex64::new(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(arg_branch(Complex64::new(0.0, 1.0)).unwrap(), PI / 2.0);
        assert_eq!(arg_branch(Complex64::new(0.0, -1.0)).unwrap(), -PI / 2.0);
        assert_eq!(arg_branch(Complex64::new(-1.0, 0.0)).unwrap(), PI);
        assert_eq!(arg_branch(Complex64::new(-1.0, -0.0)).unwrap(), PI);
        assert!(matches!(arg_branch(Complex64::new(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn arg_branch_gradient_on_unit_circle() {
        // d psi / dx = -y / r^2, d psi / dy = x / r^2 away from the cut.
        let h = 1e-6;
        for i in 0..32 {
            let theta = -3.0 + 6.0 * i as f64 / 31.0;
            let (x, y) = (theta.cos(), theta.sin());
            let arg = |a: f64, b: f64| arg_branch(Complex64::new(a, b)).unwrap();
            let dx = (arg(x + h, y) - arg(x - h, y)) / (2.0 * h);
            let dy = (arg(x, y + h) - arg(x, y - h)) / (2.0 * h);
            assert!((dx + y).abs() < 1e-8, "theta={theta}");
            assert!((dy - x).abs() < 1e-8, "theta={theta}");
        }
    }
}
