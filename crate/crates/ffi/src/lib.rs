//! C ABI for the zerophase library.
//!
//! Objects cross the boundary as opaque handles created by `zp_*_new`/
//! constructor functions and released by the matching `zp_*_free`. Every
//! fallible call returns a [`ZpStatus`]; on failure a description is kept
//! per thread and can be read with [`zp_last_error_message`]. Panics are
//! caught at the boundary and reported as [`ZpStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;

use zerophase::oracle::{two_tone_stft_in, TwoToneParams};
use zerophase::phasegrad::{
    phase_deriv_cartesian, phase_deriv_ratio, phase_deriv_unwrap, Direction, PhaseGradGrid,
};
use zerophase::signals::{make_noise, make_pure_tone, make_two_tone, NoiseKind, NoiseSpec, SignalBuffer};
use zerophase::stats::{fit_and_test, rho_cdf, rho_density};
use zerophase::stft::{default_fft_size, derivative_stfts, stft_grid, Convention, GridParams, StftGrid};
use zerophase::windows::{WindowSpec, WindowVariant, DEFAULT_TRUNCATION_RADIUS};
use zerophase::zeros::{analyze_zeros, AnalyzeOptions, DetSign, ZeroReport};
use zerophase::{Error, ErrorClass};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Unsupported = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpWindowFamily {
    Gaussian = 0,
    Hamming = 1,
    Rectangular = 2,
}

/// Window description. `width_s` is sigma for the Gaussian and the total
/// length for Hamming and rectangular windows.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ZpWindow {
    pub family: ZpWindowFamily,
    pub width_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpVariant {
    G = 0,
    NegDg = 1,
    Mg = 2,
    D2g = 3,
    M2g = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpConvention {
    /// Frequency-invariant `V`.
    V = 0,
    /// Time-invariant `W = e^{2 pi i omega x} V`.
    W = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpDirection {
    Dx = 0,
    Domega = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpMethod {
    Ratio = 0,
    Cartesian = 1,
    Unwrap = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpNoiseKind {
    CircularComplex = 0,
    Analytic = 1,
}

/// Lattice parameters. `fft_size == 0` selects the default length and a
/// non-positive `truncation_radius` the default radius.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ZpGridParams {
    pub hop_samples: usize,
    pub fft_size: usize,
    pub truncation_radius: f64,
}

/// One analysed zero. Fields that were not computed (unclassified zeros)
/// hold NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ZpZero {
    pub x_s: f64,
    pub omega_hz: f64,
    pub residual: f64,
    pub det: f64,
    /// +1 or -1.
    pub det_sign: i32,
    pub interior: bool,
    pub degenerate: bool,
    pub classified: bool,
    pub pattern_ok: bool,
    pub slope_below: f64,
    pub slope_above: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    pub c: f64,
    pub c_prime: f64,
}

pub struct ZpSignal(SignalBuffer);
pub struct ZpStftGrid(StftGrid);
pub struct ZpPhaseGrad(PhaseGradGrid);
pub struct ZpZeroList(Vec<ZeroReport>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ZpStatus {
    match e {
        Error::InvalidParameter(_) => ZpStatus::InvalidParameter,
        Error::Unsupported(_) => ZpStatus::Unsupported,
        _ => match e.class() {
            ErrorClass::Usage => ZpStatus::InvalidParameter,
            ErrorClass::Io => ZpStatus::Io,
            ErrorClass::Numerical => ZpStatus::Numerical,
        },
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZpStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            ZpStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside zerophase".into());
            ZpStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, name: &'static str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    if len < need {
        return Err(Error::InvalidParameter(format!("{name} holds {len} elements, {need} required")).into());
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn window_spec(w: &ZpWindow) -> Result<WindowSpec, Failure> {
    Ok(match w.family {
        ZpWindowFamily::Gaussian => WindowSpec::gaussian(w.width_s)?,
        ZpWindowFamily::Hamming => WindowSpec::hamming(w.width_s)?,
        ZpWindowFamily::Rectangular => WindowSpec::rectangular(w.width_s)?,
    })
}

fn grid_params(p: &ZpGridParams, spec: &WindowSpec, fs: f64) -> GridParams {
    let trunc = if p.truncation_radius > 0.0 {
        p.truncation_radius
    } else {
        DEFAULT_TRUNCATION_RADIUS
    };
    let fft = if p.fft_size == 0 {
        default_fft_size(spec, fs, trunc)
    } else {
        p.fft_size
    };
    GridParams {
        hop_samples: p.hop_samples,
        fft_size: fft,
        truncation_radius: trunc,
    }
}

fn variant(v: ZpVariant) -> WindowVariant {
    match v {
        ZpVariant::G => WindowVariant::G,
        ZpVariant::NegDg => WindowVariant::NegDg,
        ZpVariant::Mg => WindowVariant::Mg,
        ZpVariant::D2g => WindowVariant::D2g,
        ZpVariant::M2g => WindowVariant::M2g,
    }
}

fn convention(c: ZpConvention) -> Convention {
    match c {
        ZpConvention::V => Convention::FreqInvariant,
        ZpConvention::W => Convention::TimeInvariant,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (truncated and
/// NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, or 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Forget the calling thread's last error.
#[no_mangle]
pub extern "C" fn zp_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Wrap `n` complex samples. `im` may be NULL for a real signal.
///
/// # Safety
/// `re` (and `im` when non-NULL) must point to `n` readable doubles; `out`
/// must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_from_samples(
    re: *const f64,
    im: *const f64,
    n: usize,
    sample_rate_hz: f64,
    out: *mut *mut ZpSignal,
) -> ZpStatus {
    guard(|| {
        if re.is_null() {
            return Err(Failure::Null("re"));
        }
        let re = std::slice::from_raw_parts(re, n);
        let samples = if im.is_null() {
            re.iter().map(|&r| Complex64::new(r, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, n);
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
        };
        put(out, ZpSignal(SignalBuffer::new(samples, sample_rate_hz)?))
    })
}

/// `e^{2 pi i f1 t} + e^{2 pi i f2 t}`.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_two_tone(
    f1_hz: f64,
    f2_hz: f64,
    sample_rate_hz: f64,
    duration_s: f64,
    out: *mut *mut ZpSignal,
) -> ZpStatus {
    guard(|| put(out, ZpSignal(make_two_tone(f1_hz, f2_hz, sample_rate_hz, duration_s)?)))
}

/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_pure_tone(
    f0_hz: f64,
    sample_rate_hz: f64,
    duration_s: f64,
    out: *mut *mut ZpSignal,
) -> ZpStatus {
    guard(|| put(out, ZpSignal(make_pure_tone(f0_hz, sample_rate_hz, duration_s)?)))
}

/// Seeded white Gaussian noise.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_noise(
    variance: f64,
    kind: ZpNoiseKind,
    seed: u64,
    sample_rate_hz: f64,
    duration_s: f64,
    out: *mut *mut ZpSignal,
) -> ZpStatus {
    guard(|| {
        let kind = match kind {
            ZpNoiseKind::CircularComplex => NoiseKind::CircularComplex,
            ZpNoiseKind::Analytic => NoiseKind::Analytic,
        };
        let spec = NoiseSpec::new(variance, kind, seed)?;
        put(out, ZpSignal(make_noise(spec, sample_rate_hz, duration_s)?))
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_len(signal: *const ZpSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `signal` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zp_signal_free(signal: *mut ZpSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// STFT of `signal` on a lattice, for one window variant.
///
/// # Safety
/// Pointer arguments must be valid; `out` receives the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_stft(
    signal: *const ZpSignal,
    window: *const ZpWindow,
    variant_: ZpVariant,
    params: *const ZpGridParams,
    convention_: ZpConvention,
    out: *mut *mut ZpStftGrid,
) -> ZpStatus {
    guard(|| {
        let f = &get(signal, "signal")?.0;
        let spec = window_spec(get(window, "window")?)?;
        let p = grid_params(get(params, "params")?, &spec, f.sample_rate_hz());
        let g = stft_grid(f, &spec, variant(variant_), &p, convention(convention_))?;
        put(out, ZpStftGrid(g))
    })
}

/// # Safety
/// `grid` must be a live handle; `n_freq` and `n_time` writable.
#[no_mangle]
pub unsafe extern "C" fn zp_grid_dims(grid: *const ZpStftGrid, n_freq: *mut usize, n_time: *mut usize) -> ZpStatus {
    guard(|| {
        let g = &get(grid, "grid")?.0;
        *out_slice(n_freq, 1, 1, "n_freq")?.first_mut().unwrap() = g.n_freq();
        *out_slice(n_time, 1, 1, "n_time")?.first_mut().unwrap() = g.n_time();
        Ok(())
    })
}

/// Copy coefficients row-major (one row per frequency bin) into `re` and
/// `im`, each holding at least `n_freq * n_time` doubles.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zp_grid_copy_coeffs(grid: *const ZpStftGrid, re: *mut f64, im: *mut f64, len: usize) -> ZpStatus {
    guard(|| {
        let g = &get(grid, "grid")?.0;
        let need = g.coeffs().len();
        let re = out_slice(re, len, need, "re")?;
        let im = out_slice(im, len, need, "im")?;
        for ((r, i), z) in re.iter_mut().zip(im.iter_mut()).zip(g.coeffs()) {
            *r = z.re;
            *i = z.im;
        }
        Ok(())
    })
}

/// Copy the time axis (seconds) and frequency axis (Hz).
///
/// # Safety
/// `times` must hold `n_time` and `freqs` `n_freq` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zp_grid_copy_axes(
    grid: *const ZpStftGrid,
    times: *mut f64,
    n_time: usize,
    freqs: *mut f64,
    n_freq: usize,
) -> ZpStatus {
    guard(|| {
        let g = &get(grid, "grid")?.0;
        out_slice(times, n_time, g.n_time(), "times")?.copy_from_slice(&g.time_axis_s);
        out_slice(freqs, n_freq, g.n_freq(), "freqs")?.copy_from_slice(&g.freq_axis_hz);
        Ok(())
    })
}

/// # Safety
/// `grid` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zp_grid_free(grid: *mut ZpStftGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Phase derivative along `direction` (rad/s or rad/Hz). Cells with
/// `|V| < threshold_rel * max|V|` are masked.
///
/// # Safety
/// Pointer arguments must be valid; `out` receives the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_phasegrad(
    signal: *const ZpSignal,
    window: *const ZpWindow,
    params: *const ZpGridParams,
    convention_: ZpConvention,
    direction: ZpDirection,
    method: ZpMethod,
    threshold_rel: f64,
    out: *mut *mut ZpPhaseGrad,
) -> ZpStatus {
    guard(|| {
        let f = &get(signal, "signal")?.0;
        let spec = window_spec(get(window, "window")?)?;
        let p = grid_params(get(params, "params")?, &spec, f.sample_rate_hz());
        if !(threshold_rel >= 0.0 && threshold_rel.is_finite()) {
            return Err(Error::InvalidParameter("threshold_rel must be non-negative".into()).into());
        }
        let conv = convention(convention_);
        let dir = match direction {
            ZpDirection::Dx => Direction::DDx,
            ZpDirection::Domega => Direction::DDomega,
        };
        let pg = if method == ZpMethod::Unwrap {
            let v = stft_grid(f, &spec, WindowVariant::G, &p, conv)?;
            phase_deriv_unwrap(&v, dir, threshold_rel)
        } else {
            let d = derivative_stfts(f, &spec, &p, conv)?;
            let aux = match dir {
                Direction::DDx => &d.d_x,
                Direction::DDomega => &d.d_omega,
            };
            if method == ZpMethod::Ratio {
                phase_deriv_ratio(&d.value, aux, dir, threshold_rel)?
            } else {
                phase_deriv_cartesian(&d.value, aux, dir, threshold_rel)?
            }
        };
        put(out, ZpPhaseGrad(pg))
    })
}

/// # Safety
/// `pg` must be a live handle; `n_freq` and `n_time` writable.
#[no_mangle]
pub unsafe extern "C" fn zp_phasegrad_dims(pg: *const ZpPhaseGrad, n_freq: *mut usize, n_time: *mut usize) -> ZpStatus {
    guard(|| {
        let g = &get(pg, "pg")?.0;
        *out_slice(n_freq, 1, 1, "n_freq")?.first_mut().unwrap() = g.n_freq;
        *out_slice(n_time, 1, 1, "n_time")?.first_mut().unwrap() = g.n_time;
        Ok(())
    })
}

/// Copy values (NaN where masked) and the mask (1 = valid) row-major.
/// `mask` may be NULL.
///
/// # Safety
/// `values` (and `mask` when non-NULL) must hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn zp_phasegrad_copy(pg: *const ZpPhaseGrad, values: *mut f64, mask: *mut u8, len: usize) -> ZpStatus {
    guard(|| {
        let g = &get(pg, "pg")?.0;
        out_slice(values, len, g.values.len(), "values")?.copy_from_slice(&g.values);
        if !mask.is_null() {
            for (m, &v) in out_slice(mask, len, g.mask.len(), "mask")?.iter_mut().zip(&g.mask) {
                *m = u8::from(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `pg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zp_phasegrad_free(pg: *mut ZpPhaseGrad) {
    if !pg.is_null() {
        drop(Box::from_raw(pg));
    }
}

/// Detect, refine and classify the zeros of the Gaussian STFT of `signal`
/// with default options.
///
/// # Safety
/// Pointer arguments must be valid; `out` receives the handle.
#[no_mangle]
pub unsafe extern "C" fn zp_zeros_analyze(
    signal: *const ZpSignal,
    window: *const ZpWindow,
    params: *const ZpGridParams,
    out: *mut *mut ZpZeroList,
) -> ZpStatus {
    guard(|| {
        let f = &get(signal, "signal")?.0;
        let spec = window_spec(get(window, "window")?)?;
        let p = grid_params(get(params, "params")?, &spec, f.sample_rate_hz());
        let g = stft_grid(f, &spec, WindowVariant::G, &p, Convention::FreqInvariant)?;
        let a = analyze_zeros(f, &spec, &g, &AnalyzeOptions::default())?;
        put(out, ZpZeroList(a.reports))
    })
}

/// Number of zeros, or 0 for NULL.
///
/// # Safety
/// `list` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zp_zero_list_len(list: *const ZpZeroList) -> usize {
    list.as_ref().map_or(0, |l| l.0.len())
}

/// # Safety
/// `list` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zp_zero_list_get(list: *const ZpZeroList, index: usize, out: *mut ZpZero) -> ZpStatus {
    guard(|| {
        let l = &get(list, "list")?.0;
        let r = l
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("index {index} out of range ({} zeros)", l.len())))?;
        let slopes = r.slopes.as_ref();
        let pick = |f: fn(&zerophase::zeros::Slopes) -> f64| slopes.map_or(f64::NAN, f);
        let z = ZpZero {
            x_s: r.location.x_s,
            omega_hz: r.location.omega_hz,
            residual: r.residual,
            det: r.det,
            det_sign: if r.det_sign == DetSign::Positive { 1 } else { -1 },
            interior: r.interior,
            degenerate: r.degenerate,
            classified: r.classified,
            pattern_ok: r.pattern_ok,
            slope_below: pick(|s| s.below),
            slope_above: pick(|s| s.above),
            slope_left: pick(|s| s.left),
            slope_right: pick(|s| s.right),
            c: r.c.unwrap_or(f64::NAN),
            c_prime: r.c_prime.unwrap_or(f64::NAN),
        };
        *out_slice(out, 1, 1, "out")?.first_mut().unwrap() = z;
        Ok(())
    })
}

/// # Safety
/// `list` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zp_zero_list_free(list: *mut ZpZeroList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Closed-form STFT of `e^{2 pi i f1 t} + e^{2 pi i f2 t}` with a Gaussian
/// window of width `sigma_s`, without the window gain `sigma sqrt(2)`.
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zp_two_tone_stft(
    f1_hz: f64,
    f2_hz: f64,
    sigma_s: f64,
    x_s: f64,
    omega_hz: f64,
    convention_: ZpConvention,
    re: *mut f64,
    im: *mut f64,
) -> ZpStatus {
    guard(|| {
        let p = TwoToneParams::new(f1_hz, f2_hz, sigma_s)?;
        let z = two_tone_stft_in(&p, x_s, omega_hz, convention(convention_));
        *out_slice(re, 1, 1, "re")?.first_mut().unwrap() = z.re;
        *out_slice(im, 1, 1, "im")?.first_mut().unwrap() = z.im;
        Ok(())
    })
}

/// `rho(v) = 1 / (2 (1 + v^2)^{3/2})`.
#[no_mangle]
pub extern "C" fn zp_rho_density(v: f64) -> f64 {
    rho_density(v)
}

#[no_mangle]
pub extern "C" fn zp_rho_cdf(v: f64) -> f64 {
    rho_cdf(v)
}

/// Maximum-likelihood scale of `rho` for `n` samples and the KS distance
/// of the scaled samples.
///
/// # Safety
/// `samples` must point to `n` readable doubles; `scale` and `ks` writable.
#[no_mangle]
pub unsafe extern "C" fn zp_fit_rho(samples: *const f64, n: usize, scale: *mut f64, ks: *mut f64) -> ZpStatus {
    guard(|| {
        if samples.is_null() {
            return Err(Failure::Null("samples"));
        }
        let (fit, _) = fit_and_test(std::slice::from_raw_parts(samples, n), 1)?;
        *out_slice(scale, 1, 1, "scale")?.first_mut().unwrap() = fit.scale;
        *out_slice(ks, 1, 1, "ks")?.first_mut().unwrap() = fit.ks_distance;
        Ok(())
    })
}
