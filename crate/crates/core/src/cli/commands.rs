use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::json;

use super::args::*;
use crate::error::Result;
use crate::export::{
    default_range, grid_sidecar, grid_to_csv, mesh_patch_csv, modulus_pgm, phasegrad_pgm, phasegrad_sidecar,
    phasegrad_to_csv, validate_csv, validate_json, validate_pgm, write_json, CellKind,
};
use crate::oracle::{two_tone_stft_in, TwoToneParams};
use crate::phasegrad::{
    phase_deriv_cartesian, phase_deriv_ratio, phase_deriv_unwrap, Direction, Method, DEFAULT_THRESHOLD_REL,
};
use crate::signals::{make_two_tone, NoiseKind, NoiseSpec};
use crate::stats::{collect_phase_deriv_samples, fit_and_test, white_noise_scale, CollectOptions};
use crate::stft::{derivative_stfts, stft_grid};
use crate::windows::WindowVariant;
use crate::zeros::{analyze_zeros, AnalyzeOptions, CandidateOptions};

const MODULUS_RANGE_DB: f64 = 120.0;

/// What a command wrote, for validation and reporting.
#[derive(Debug, Default)]
pub struct Written {
    files: Vec<(PathBuf, Schema)>,
}

#[derive(Debug, Clone, Copy)]
enum Schema {
    Csv(CellKind, &'static str),
    Json,
    Pgm,
}

impl Written {
    fn text(&mut self, path: PathBuf, contents: &str, schema: Schema) -> Result<()> {
        fs::write(&path, contents)?;
        self.files.push((path, schema));
        Ok(())
    }

    fn json(&mut self, path: PathBuf, value: &impl serde::Serialize) -> Result<()> {
        write_json(&path, value)?;
        self.files.push((path, Schema::Json));
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn validate(&self) -> Result<()> {
        for (path, schema) in &self.files {
            match *schema {
                Schema::Csv(kind, head) => {
                    validate_csv(path, kind, Some(head))?;
                }
                Schema::Json => {
                    validate_json(path)?;
                }
                Schema::Pgm => {
                    validate_pgm(path)?;
                }
            }
        }
        Ok(())
    }
}

fn finish(written: Written, validate: bool) -> Result<Written> {
    if validate {
        written.validate()?;
        eprintln!("validated {} output files", written.files.len());
    }
    Ok(written)
}

pub fn cmd_stft(args: &StftArgs) -> Result<Written> {
    let mut p = Problems::default();
    let source = args.signal.resolve(&mut p);
    let spec = args.window.resolve(&mut p);
    let variant = parse_variant(args.variant.as_deref(), &mut p);
    let fs_hint = args.signal.fs.unwrap_or(DEFAULT_FS);
    let grid = args.grid.resolve(spec.as_ref(), fs_hint, args.window.truncation(), &mut p);
    let out = args.output.resolve(&mut p);
    if let Some(spec) = &spec {
        p.check(spec.supports(variant));
    }
    p.finish()?;
    let (source, spec, (params, convention), out) = (source.unwrap(), spec.unwrap(), grid.unwrap(), out.unwrap());

    let signal = source.load()?;
    let g = stft_grid(&signal, &spec, variant, &params, convention)?;
    let config = json!({
        "command": "stft",
        "signal": source,
        "window": spec,
        "variant": variant,
        "params": params,
        "convention": convention,
    });
    let mut w = Written::default();
    w.text(with_suffix(&out, ".csv"), &grid_to_csv(&g), Schema::Csv(CellKind::Complex, "freq_hz"))?;
    w.json(with_suffix(&out, ".json"), &grid_sidecar(&g, &config))?;
    if !args.output.no_pgm {
        w.text(with_suffix(&out, ".pgm"), &modulus_pgm(&g, MODULUS_RANGE_DB)?, Schema::Pgm)?;
    }
    finish(w, args.output.validate_outputs)
}

fn parse_direction(name: Option<&str>, p: &mut Problems) -> Direction {
    match name.unwrap_or("dx") {
        "dx" | "x" | "time" => Direction::DDx,
        "domega" | "omega" | "freq" => Direction::DDomega,
        other => {
            p.push(format!("unknown --direction {other:?} (dx, domega)"));
            Direction::DDx
        }
    }
}

fn parse_method(name: Option<&str>, p: &mut Problems) -> Method {
    match name.unwrap_or("ratio") {
        "ratio" => Method::Ratio,
        "cartesian" => Method::Cartesian,
        "unwrap" => Method::Unwrap,
        other => {
            p.push(format!("unknown --method {other:?} (ratio, cartesian, unwrap)"));
            Method::Ratio
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ratio => "ratio",
        Method::Cartesian => "cartesian",
        Method::Unwrap => "unwrap",
    }
}

pub fn cmd_phasegrad(args: &PhasegradArgs) -> Result<Written> {
    let mut p = Problems::default();
    let source = args.signal.resolve(&mut p);
    let spec = args.window.resolve(&mut p);
    let fs_hint = args.signal.fs.unwrap_or(DEFAULT_FS);
    let grid = args.grid.resolve(spec.as_ref(), fs_hint, args.window.truncation(), &mut p);
    let out = args.output.resolve(&mut p);
    let direction = parse_direction(args.direction.as_deref(), &mut p);
    let method = parse_method(args.method.as_deref(), &mut p);
    let threshold = args.threshold.unwrap_or(DEFAULT_THRESHOLD_REL);
    if !(threshold >= 0.0 && threshold.is_finite()) {
        p.push("--threshold must be non-negative");
    }
    if let (Some(lo), Some(hi)) = (args.vmin, args.vmax) {
        if !(lo < hi) {
            p.push("--vmin must be below --vmax");
        }
    }
    if matches!(&args.patch, Some(v) if v.len() != 2) {
        p.push("--patch takes X,OMEGA");
    }
    if let Some(spec) = &spec {
        if method != Method::Unwrap {
            p.check(spec.supports(WindowVariant::NegDg));
        }
    }
    p.finish()?;
    let (source, spec, (params, convention), out) = (source.unwrap(), spec.unwrap(), grid.unwrap(), out.unwrap());

    let signal = source.load()?;
    let pg = if method == Method::Unwrap {
        let v = stft_grid(&signal, &spec, WindowVariant::G, &params, convention)?;
        phase_deriv_unwrap(&v, direction, threshold)
    } else {
        let d = derivative_stfts(&signal, &spec, &params, convention)?;
        let aux = match direction {
            Direction::DDx => &d.d_x,
            Direction::DDomega => &d.d_omega,
        };
        match method {
            Method::Ratio => phase_deriv_ratio(&d.value, aux, direction, threshold)?,
            _ => phase_deriv_cartesian(&d.value, aux, direction, threshold)?,
        }
    };
    let valid: Vec<f64> = pg.valid_values().collect();
    let (dlo, dhi) = default_range(&valid);
    let (vmin, vmax) = (args.vmin.unwrap_or(dlo), args.vmax.unwrap_or(dhi));
    let config = json!({
        "command": "phasegrad",
        "signal": source,
        "window": spec,
        "params": params,
        "convention": convention,
        "direction": direction,
        "method": method_name(method),
        "threshold": threshold,
        "vmin": vmin,
        "vmax": vmax,
        "patch": args.patch,
        "patch_radius": args.patch_radius,
    });
    let mut w = Written::default();
    w.text(with_suffix(&out, ".csv"), &phasegrad_to_csv(&pg), Schema::Csv(CellKind::RealOrEmpty, "freq_hz"))?;
    w.json(
        with_suffix(&out, ".json"),
        &phasegrad_sidecar(&pg, method_name(method), vmin, vmax, &config),
    )?;
    if !args.output.no_pgm {
        w.text(with_suffix(&out, ".pgm"), &phasegrad_pgm(&pg, vmin, vmax)?, Schema::Pgm)?;
    }
    if let Some(at) = &args.patch {
        let csv = mesh_patch_csv(&pg, at[0], at[1], args.patch_radius.unwrap_or(16))?;
        w.text(with_suffix(&out, ".patch.csv"), &csv, Schema::Csv(CellKind::RealOrEmpty, "x_s,omega_hz,value"))?;
    }
    finish(w, args.output.validate_outputs)
}

pub fn cmd_zeros(args: &ZerosArgs) -> Result<Written> {
    let mut p = Problems::default();
    let source = args.signal.resolve(&mut p);
    let spec = args.window.resolve(&mut p);
    let fs_hint = args.signal.fs.unwrap_or(DEFAULT_FS);
    let grid = args.grid.resolve(spec.as_ref(), fs_hint, args.window.truncation(), &mut p);
    let out = args.output.resolve(&mut p);
    if let Some(spec) = &spec {
        p.check(spec.supports(WindowVariant::D2g));
    }
    let defaults = AnalyzeOptions::default();
    let opts = AnalyzeOptions {
        candidates: CandidateOptions {
            rel_floor: args.rel_floor.unwrap_or(defaults.candidates.rel_floor),
            include_boundary: args.include_boundary,
            ..defaults.candidates
        },
        tol: args.tol.unwrap_or(defaults.tol),
        max_iter: args.max_iter.unwrap_or(defaults.max_iter),
        degeneracy_floor: args.degeneracy_floor.unwrap_or(defaults.degeneracy_floor),
        n_steps: args.n_steps.unwrap_or(defaults.n_steps),
        eps0_hz: args.eps0_hz,
        eps0_s: args.eps0_s,
        ..defaults
    };
    for (name, v) in [("rel-floor", opts.candidates.rel_floor), ("tol", opts.tol)] {
        if !(v > 0.0 && v.is_finite()) {
            p.push(format!("--{name} must be positive"));
        }
    }
    if opts.n_steps < 3 {
        p.push("--n-steps must be at least 3");
    }
    p.finish()?;
    let (source, spec, (params, convention), out) = (source.unwrap(), spec.unwrap(), grid.unwrap(), out.unwrap());

    let signal = source.load()?;
    let g = stft_grid(&signal, &spec, WindowVariant::G, &params, convention)?;
    let analysis = analyze_zeros(&signal, &spec, &g, &opts)?;
    let summary = analysis.summary();
    let config = json!({
        "command": "zeros",
        "signal": source,
        "window": spec,
        "params": params,
        "convention": convention,
        "options": opts,
    });
    println!("zeros      classified  pattern_ok  pass_rate  slope_below  slope_above  slope_left  slope_right");
    println!(
        "{:<10} {:<11} {:<11} {:<10.4} {:<12.4} {:<12.4} {:<11.4} {:.4}",
        summary.count,
        summary.classified,
        summary.pattern_ok,
        summary.pass_rate,
        summary.mean_slope_below,
        summary.mean_slope_above,
        summary.mean_slope_left,
        summary.mean_slope_right
    );
    let mut w = Written::default();
    w.json(with_suffix(&out, ".json"), &analysis.reports)?;
    w.json(
        with_suffix(&out, ".summary.json"),
        &json!({
            "summary": summary,
            "n_candidates": analysis.n_candidates,
            "n_unrefined": analysis.n_unrefined,
            "config": config,
        }),
    )?;
    finish(w, args.output.validate_outputs)
}

pub fn cmd_noisehist(args: &NoisehistArgs) -> Result<Written> {
    let mut p = Problems::default();
    let spec = args.window.resolve(&mut p);
    let fs = args.fs.unwrap_or(DEFAULT_FS);
    let dur = args.dur.unwrap_or(2.0);
    let runs = args.runs.unwrap_or(4);
    let bins = args.bins.unwrap_or(201);
    if !(fs > 0.0 && fs.is_finite()) || !(dur > 0.0 && dur.is_finite()) {
        p.push("--fs and --dur must be positive");
    }
    if runs == 0 || bins == 0 {
        p.push("--runs and --bins must be at least 1");
    }
    let mut grid_args = args.grid.clone();
    if grid_args.hop.is_none() {
        grid_args.hop = Some(8);
    }
    let grid = grid_args.resolve(spec.as_ref(), fs, args.window.truncation(), &mut p);
    let out = args.output.resolve(&mut p);
    let centering = parse_centering(args.centering.as_deref(), &mut p);
    let kind = match args.noise_kind.as_deref() {
        None => NoiseKind::CircularComplex,
        Some(k) => parse_noise_kind(k).unwrap_or_else(|| {
            p.push(format!("unknown --noise-kind {k:?} (circular, analytic)"));
            NoiseKind::CircularComplex
        }),
    };
    let seed = args.seed.unwrap_or(1);
    let specs: Vec<NoiseSpec> = (0..runs as u64)
        .filter_map(|i| p.check(NoiseSpec::new(args.variance.unwrap_or(1.0), kind, seed.wrapping_add(i))))
        .collect();
    if let Some(spec) = &spec {
        p.check(spec.supports(WindowVariant::NegDg));
    }
    let band = match &args.band {
        Some(b) if b.len() == 2 && b[0] < b[1] => Some((b[0], b[1])),
        Some(_) => {
            p.push("--band takes LO,HI with LO < HI");
            None
        }
        None => None,
    };
    p.finish()?;
    let (spec, (params, convention), out) = (spec.unwrap(), grid.unwrap(), out.unwrap());

    let opts = CollectOptions {
        convention,
        centering,
        band_hz: band,
        ..CollectOptions::new(fs, dur, params)
    };
    let set = collect_phase_deriv_samples(&specs, &spec, &opts)?;
    let (fit, hist) = fit_and_test(&set.samples, bins)?;
    let theory = white_noise_scale(&spec, fs, params.truncation_radius)?;
    if set.non_gaussian_window {
        eprintln!("warning: the density is derived for a Gaussian window");
    }
    println!(
        "n = {}  scale = {:.6e}  (white-noise scale {:.6e})  KS = {:.5}",
        fit.n_samples, fit.scale, theory, fit.ks_distance
    );
    let config = json!({
        "command": "noisehist",
        "window": spec,
        "params": params,
        "convention": convention,
        "sample_rate_hz": fs,
        "duration_s": dur,
        "runs": specs,
        "bins": bins,
        "band_hz": band,
    });
    let mut w = Written::default();
    w.text(with_suffix(&out, ".csv"), &hist.to_csv(), Schema::Csv(CellKind::Real, "bin_left,bin_right,density"))?;
    w.json(
        with_suffix(&out, ".json"),
        &json!({
            "scale": fit.scale,
            "ks_distance": fit.ks_distance,
            "n_samples": fit.n_samples,
            "centering": centering.name(),
            "white_noise_scale": theory,
            "non_gaussian_window": set.non_gaussian_window,
            "histogram_outside": hist.outside,
            "config": config,
        }),
    )?;
    finish(w, args.output.validate_outputs)
}

pub fn cmd_twotone_oracle(args: &OracleArgs) -> Result<Written> {
    let mut p = Problems::default();
    let fs = args.fs.unwrap_or(DEFAULT_FS);
    let dur = args.dur.unwrap_or(DEFAULT_DURATION);
    let sigma = args.gauss_sigma.unwrap_or(DEFAULT_SIGMA);
    let params = match &args.twotone {
        Some(t) if t.len() == 2 => p.check(TwoToneParams::new(t[0], t[1], sigma)),
        _ => {
            p.push("--twotone F1,F2 is required");
            None
        }
    };
    let spec = p.check(crate::windows::WindowSpec::gaussian(sigma));
    let grid = args.grid.resolve(spec.as_ref(), fs, crate::windows::DEFAULT_TRUNCATION_RADIUS, &mut p);
    let out = args.output.resolve(&mut p);
    p.finish()?;
    let (tt, spec, (gp, convention), out) = (params.unwrap(), spec.unwrap(), grid.unwrap(), out.unwrap());

    // Same time axis as the numeric grid of the generated signal.
    let signal = make_two_tone(tt.omega1_hz, tt.omega2_hz, fs, dur)?;
    let times: Vec<f64> = (0..signal.len()).step_by(gp.hop_samples).map(|n| signal.time_at(n)).collect();
    let freqs: Vec<f64> = (0..gp.fft_size).map(|k| k as f64 * fs / gp.fft_size as f64).collect();
    let gain = if args.with_gain { tt.window_gain() } else { 1.0 };
    let mut coeffs = Vec::with_capacity(times.len() * freqs.len());
    for &w in &freqs {
        for &x in &times {
            coeffs.push(two_tone_stft_in(&tt, x, w, convention) * gain);
        }
    }
    let grid = OracleGrid { times, freqs, coeffs };
    let config = json!({
        "command": "twotone-oracle",
        "two_tone": tt,
        "window": spec,
        "params": gp,
        "convention": convention,
        "with_gain": args.with_gain,
        "window_gain": tt.window_gain(),
    });
    let mut w = Written::default();
    w.text(with_suffix(&out, ".csv"), &grid.to_csv(), Schema::Csv(CellKind::Complex, "freq_hz"))?;
    w.json(
        with_suffix(&out, ".json"),
        &json!({
            "kind": "two_tone_oracle",
            "convention": convention,
            "time_axis_s": grid.times,
            "freq_axis_hz": grid.freqs,
            "config": config,
        }),
    )?;
    finish(w, args.output.validate_outputs)
}

struct OracleGrid {
    times: Vec<f64>,
    freqs: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl OracleGrid {
    fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz");
        for t in &self.times {
            out.push_str(&format!(",{t:.16e}"));
        }
        out.push('\n');
        for (k, f) in self.freqs.iter().enumerate() {
            out.push_str(&format!("{f:.16e}"));
            for z in &self.coeffs[k * self.times.len()..(k + 1) * self.times.len()] {
                out.push_str(&format!(",{:.16e}{:+.16e}j", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}
