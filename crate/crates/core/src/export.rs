//! Text and image exports: grid CSV with JSON sidecar, phase-gradient CSV,
//! 16-bit PGM heatmaps, and readers used to validate written files.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::phasegrad::PhaseGradGrid;
use crate::stats::median_iqr;
use crate::stft::StftGrid;

pub const PGM_MAXVAL: u32 = 65535;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn complex_cell(z: Complex64) -> String {
    format!("{:.16e}{:+.16e}j", z.re, z.im)
}

fn header(time_axis_s: &[f64]) -> String {
    let mut line = String::from("freq_hz");
    for &t in time_axis_s {
        line.push(',');
        line.push_str(&num(t));
    }
    line.push('\n');
    line
}

/// One row per frequency: `freq_hz` followed by `re+imj` cells, one per frame.
pub fn grid_to_csv(grid: &StftGrid) -> String {
    let mut out = header(&grid.time_axis_s);
    for k in 0..grid.n_freq() {
        out.push_str(&num(grid.freq_axis_hz[k]));
        for &z in grid.row(k) {
            out.push(',');
            out.push_str(&complex_cell(z));
        }
        out.push('\n');
    }
    out
}

/// Same layout as [`grid_to_csv`] with real cells; masked cells are empty.
pub fn phasegrad_to_csv(pg: &PhaseGradGrid) -> String {
    let mut out = header(&pg.time_axis_s);
    for k in 0..pg.n_freq {
        out.push_str(&num(pg.freq_axis_hz[k]));
        for n in 0..pg.n_time {
            out.push(',');
            if let Some(v) = pg.at(k, n) {
                out.push_str(&num(v));
            }
        }
        out.push('\n');
    }
    out
}

/// JSON sidecar describing a grid, with the effective run configuration.
pub fn grid_sidecar(grid: &StftGrid, config: &Value) -> Value {
    json!({
        "kind": "stft_grid",
        "convention": grid.convention,
        "window": grid.window,
        "content": grid.content,
        "params": grid.params,
        "sample_rate_hz": grid.sample_rate_hz(),
        "n_freq": grid.n_freq(),
        "n_time": grid.n_time(),
        "time_axis_s": grid.time_axis_s,
        "freq_axis_hz": grid.freq_axis_hz,
        "boundary_frames": grid.boundary_frames,
        "config": config,
    })
}

pub fn phasegrad_sidecar(pg: &PhaseGradGrid, method: &str, vmin: f64, vmax: f64, config: &Value) -> Value {
    json!({
        "kind": "phase_gradient",
        "direction": pg.direction,
        "method": method,
        "convention": pg.convention,
        "units": "rad/s for d/dx, rad/Hz for d/domega",
        "threshold_rel": pg.threshold_rel,
        "n_freq": pg.n_freq,
        "n_time": pg.n_time,
        "valid_cells": pg.valid_count(),
        "vmin": vmin,
        "vmax": vmax,
        "time_axis_s": pg.time_axis_s,
        "freq_axis_hz": pg.freq_axis_hz,
        "boundary_frames": pg.boundary_frames,
        "config": config,
    })
}

/// Row-major `[k][n]` field rendered as a P2 16-bit image with the highest
/// frequency at the top. Values map linearly from `[vmin, vmax]` onto
/// `0..=65534` (clipped); `None` cells are white (65535).
pub fn pgm_from_field(values: &[Option<f64>], n_freq: usize, n_time: usize, vmin: f64, vmax: f64) -> Result<String> {
    if values.len() != n_freq * n_time {
        return Err(invalid("field size does not match its dimensions"));
    }
    if !(vmin.is_finite() && vmax.is_finite() && vmin < vmax) {
        return Err(invalid(format!("invalid value range [{vmin}, {vmax}]")));
    }
    let top = (PGM_MAXVAL - 1) as f64;
    let mut out = format!("P2\n{n_time} {n_freq}\n{PGM_MAXVAL}\n");
    for k in (0..n_freq).rev() {
        let row: Vec<String> = (0..n_time)
            .map(|n| match values[k * n_time + n] {
                Some(v) if v.is_finite() => {
                    let level = ((v - vmin) / (vmax - vmin) * top).round().clamp(0.0, top);
                    (level as u32).to_string()
                }
                _ => PGM_MAXVAL.to_string(),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// `median -+ 3 IQR` of the valid cells; falls back to a unit range around
/// the median when the spread vanishes.
pub fn default_range(valid: &[f64]) -> (f64, f64) {
    if valid.is_empty() {
        return (-1.0, 1.0);
    }
    let (median, iqr) = median_iqr(valid);
    if iqr > 0.0 && iqr.is_finite() {
        (median - 3.0 * iqr, median + 3.0 * iqr)
    } else {
        (median - 1.0, median + 1.0)
    }
}

pub fn phasegrad_pgm(pg: &PhaseGradGrid, vmin: f64, vmax: f64) -> Result<String> {
    let field: Vec<Option<f64>> = (0..pg.n_freq * pg.n_time)
        .map(|i| if pg.mask[i] { Some(pg.values[i]) } else { None })
        .collect();
    pgm_from_field(&field, pg.n_freq, pg.n_time, vmin, vmax)
}

/// Modulus in dB relative to the grid peak, over `[-dynamic_range_db, 0]`.
pub fn modulus_pgm(grid: &StftGrid, dynamic_range_db: f64) -> Result<String> {
    let peak = grid.max_modulus();
    let field: Vec<Option<f64>> = grid
        .coeffs()
        .iter()
        .map(|z| {
            let m = z.norm();
            Some(if peak > 0.0 && m > 0.0 {
                20.0 * (m / peak).log10()
            } else {
                -dynamic_range_db
            })
        })
        .collect();
    pgm_from_field(&field, grid.n_freq(), grid.n_time(), -dynamic_range_db, 0.0)
}

/// `x_s,omega_hz,value` rows for the nodes within `radius` cells of the
/// node nearest to `(x_s, omega_hz)`; masked cells have an empty value.
pub fn mesh_patch_csv(pg: &PhaseGradGrid, x_s: f64, omega_hz: f64, radius: usize) -> Result<String> {
    let nearest = |axis: &[f64], v: f64| {
        axis.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
            .map(|(i, _)| i)
    };
    let (Some(k0), Some(n0)) = (nearest(&pg.freq_axis_hz, omega_hz), nearest(&pg.time_axis_s, x_s)) else {
        return Err(invalid("empty grid"));
    };
    let mut out = String::from("x_s,omega_hz,value\n");
    for k in k0.saturating_sub(radius)..=(k0 + radius).min(pg.n_freq - 1) {
        for n in n0.saturating_sub(radius)..=(n0 + radius).min(pg.n_time - 1) {
            let v = pg.at(k, n).map(num).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", num(pg.time_axis_s[n]), num(pg.freq_axis_hz[k]), v));
        }
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Shape of a validated table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableShape {
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Complex,
    /// Real or empty.
    RealOrEmpty,
    Real,
}

fn parse_complex_cell(s: &str) -> Option<Complex64> {
    let body = s.strip_suffix('j')?;
    // The imaginary part starts at the last sign that is not part of an
    // exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E')?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

/// Check that a CSV file has a header and rows of equal width whose cells
/// parse as `kind` (the first column is always real).
pub fn validate_csv(path: &Path, kind: CellKind, expected_header: Option<&str>) -> Result<TableShape> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| malformed(path, "empty file"))?;
    let columns = head.split(',').count();
    if let Some(expected) = expected_header {
        let first = head.split(',').next().unwrap_or_default();
        if first != expected && head != expected {
            return Err(malformed(path, format!("header starts with {first:?}, expected {expected:?}")));
        }
    }
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns {
            return Err(Error::UnparsableLine {
                line: i + 2,
                content: format!("{} cells, expected {columns}", cells.len()),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let ok = match (j, kind) {
                (0, CellKind::Complex) | (_, CellKind::Real) => cell.parse::<f64>().is_ok(),
                (_, CellKind::Complex) => parse_complex_cell(cell).is_some(),
                (_, CellKind::RealOrEmpty) => cell.is_empty() || cell.parse::<f64>().is_ok(),
            };
            if !ok {
                return Err(Error::UnparsableLine {
                    line: i + 2,
                    content: (*cell).to_string(),
                });
            }
        }
        rows += 1;
    }
    Ok(TableShape { rows, columns })
}

/// Read a grid CSV back into axes and coefficients (row-major).
pub fn read_grid_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Complex64>)> {
    validate_csv(path, CellKind::Complex, Some("freq_hz"))?;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let times: Vec<f64> = head.split(',').skip(1).filter_map(|c| c.parse().ok()).collect();
    let mut freqs = Vec::new();
    let mut coeffs = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        freqs.push(cells.next().and_then(|c| c.parse().ok()).unwrap_or(f64::NAN));
        coeffs.extend(cells.filter_map(parse_complex_cell));
    }
    Ok((times, freqs, coeffs))
}

/// Check a P2 file: header, dimensions, value count and range.
pub fn validate_pgm(path: &Path) -> Result<(usize, usize)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("P2") {
        return Err(malformed(path, "missing P2 magic"));
    }
    let mut next_num = |what: &str| -> Result<u32> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(path, format!("missing {what}")))
    };
    let width = next_num("width")? as usize;
    let height = next_num("height")? as usize;
    let maxval = next_num("maxval")?;
    if maxval != PGM_MAXVAL {
        return Err(malformed(path, format!("maxval {maxval}, expected {PGM_MAXVAL}")));
    }
    let mut count = 0usize;
    while let Some(t) = tokens.next() {
        let v: u32 = t.parse().map_err(|_| malformed(path, format!("bad pixel {t:?}")))?;
        if v > maxval {
            return Err(malformed(path, format!("pixel {v} above maxval")));
        }
        count += 1;
    }
    if count != width * height {
        return Err(malformed(path, format!("{count} pixels, expected {}", width * height)));
    }
    Ok((width, height))
}

pub fn validate_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrad::{phase_deriv_ratio, Direction};
    use crate::signals::make_two_tone;
    use crate::stft::{derivative_stfts, Convention, GridParams};
    use crate::windows::WindowSpec;

    #[test]
    fn complex_cells_round_trip() {
        for z in [
            Complex64::new(1.0, -2.0),
            Complex64::new(-3.5e-17, 4.25e12),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1e-300, -0.1),
        ] {
            let s = complex_cell(z);
            assert_eq!(parse_complex_cell(&s), Some(z), "{s}");
        }
    }

    #[test]
    fn grid_csv_and_pgm_are_valid() {
        let dir = tempfile::tempdir().unwrap();
        let f = make_two_tone(500.0, 1500.0, 8000.0, 0.03).unwrap();
        let spec = WindowSpec::gaussian(0.002).unwrap();
        let d = derivative_stfts(&f, &spec, &GridParams::new(16, 256), Convention::FreqInvariant).unwrap();
        let csv = dir.path().join("g.csv");
        fs::write(&csv, grid_to_csv(&d.value)).unwrap();
        let shape = validate_csv(&csv, CellKind::Complex, Some("freq_hz")).unwrap();
        assert_eq!(shape.rows, d.value.n_freq());
        assert_eq!(shape.columns, d.value.n_time() + 1);
        let (times, freqs, coeffs) = read_grid_csv(&csv).unwrap();
        assert_eq!(times, d.value.time_axis_s);
        assert_eq!(freqs, d.value.freq_axis_hz);
        assert_eq!(coeffs, d.value.coeffs());

        let pg = phase_deriv_ratio(&d.value, &d.d_x, Direction::DDx, 1e-3).unwrap();
        let pcsv = dir.path().join("p.csv");
        fs::write(&pcsv, phasegrad_to_csv(&pg)).unwrap();
        validate_csv(&pcsv, CellKind::RealOrEmpty, Some("freq_hz")).unwrap();
        let text = fs::read_to_string(&pcsv).unwrap();
        let empty = text.lines().skip(1).flat_map(|l| l.split(',').skip(1)).filter(|c| c.is_empty()).count();
        assert_eq!(empty, pg.n_freq * pg.n_time - pg.valid_count());

        let valid: Vec<f64> = pg.valid_values().collect();
        let (lo, hi) = default_range(&valid);
        let pgm = dir.path().join("p.pgm");
        fs::write(&pgm, phasegrad_pgm(&pg, lo, hi).unwrap()).unwrap();
        assert_eq!(validate_pgm(&pgm).unwrap(), (pg.n_time, pg.n_freq));
    }

    #[test]
    fn pgm_orientation_and_mask() {
        let field = vec![Some(0.0), None, Some(1.0), Some(0.5)];
        let text = pgm_from_field(&field, 2, 2, 0.0, 1.0).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "P2");
        // Highest frequency (row k = 1) first.
        assert_eq!(lines[3], "65534 32767");
        assert_eq!(lines[4], "0 65535");
    }
}
