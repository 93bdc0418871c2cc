use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use zerophase_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 512];
    unsafe { zp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn two_tone() -> *mut ZpSignal {
    let mut sig = ptr::null_mut();
    assert_eq!(unsafe { zp_signal_two_tone(500.0, 1500.0, 8000.0, 0.05, &mut sig) }, ZpStatus::Ok);
    sig
}

const GAUSS: ZpWindow = ZpWindow { family: ZpWindowFamily::Gaussian, width_s: 0.001 };
const PARAMS: ZpGridParams = ZpGridParams { hop_samples: 4, fft_size: 0, truncation_radius: 0.0 };

#[test]
fn grid_round_trip_matches_oracle() {
    let sig = two_tone();
    let mut grid = ptr::null_mut();
    let s = unsafe { zp_stft(sig, &GAUSS, ZpVariant::G, &PARAMS, ZpConvention::W, &mut grid) };
    assert_eq!(s, ZpStatus::Ok, "{}", last_error());
    let (mut nf, mut nt) = (0usize, 0usize);
    assert_eq!(unsafe { zp_grid_dims(grid, &mut nf, &mut nt) }, ZpStatus::Ok);
    let mut re = vec![0.0; nf * nt];
    let mut im = vec![0.0; nf * nt];
    let (mut times, mut freqs) = (vec![0.0; nt], vec![0.0; nf]);
    unsafe {
        assert_eq!(zp_grid_copy_coeffs(grid, re.as_mut_ptr(), im.as_mut_ptr(), re.len()), ZpStatus::Ok);
        assert_eq!(zp_grid_copy_axes(grid, times.as_mut_ptr(), nt, freqs.as_mut_ptr(), nf), ZpStatus::Ok);
    }
    // Interior node at 1000 Hz, 25 ms: compare with the closed form times the window gain.
    let k = freqs.iter().position(|&f| f == 1000.0).unwrap();
    let n = times.iter().position(|&t| (t - 0.025).abs() < 1e-12).unwrap();
    let (mut ore, mut oim) = (0.0, 0.0);
    let s = unsafe { zp_two_tone_stft(500.0, 1500.0, 0.001, times[n], freqs[k], ZpConvention::W, &mut ore, &mut oim) };
    assert_eq!(s, ZpStatus::Ok);
    let gain = 0.001 * 2f64.sqrt();
    let (ore, oim) = (ore * gain, oim * gain);
    let i = k * nt + n;
    let err = ((re[i] - ore).powi(2) + (im[i] - oim).powi(2)).sqrt();
    assert!(err <= 1e-6 * (ore * ore + oim * oim).sqrt(), "{} {} vs {ore} {oim}", re[i], im[i]);

    let short = unsafe { zp_grid_copy_coeffs(grid, re.as_mut_ptr(), im.as_mut_ptr(), 3) };
    assert_eq!(short, ZpStatus::InvalidParameter);
    unsafe {
        zp_grid_free(grid);
        zp_signal_free(sig);
    }
}

#[test]
fn phasegrad_routes_agree() {
    let sig = two_tone();
    let mut out = [ptr::null_mut(); 2];
    for (slot, method) in out.iter_mut().zip([ZpMethod::Ratio, ZpMethod::Cartesian]) {
        let s = unsafe { zp_phasegrad(sig, &GAUSS, &PARAMS, ZpConvention::V, ZpDirection::Dx, method, 1e-10, slot) };
        assert_eq!(s, ZpStatus::Ok, "{}", last_error());
    }
    let (mut nf, mut nt) = (0usize, 0usize);
    assert_eq!(unsafe { zp_phasegrad_dims(out[0], &mut nf, &mut nt) }, ZpStatus::Ok);
    let mut a = vec![0.0; nf * nt];
    let mut b = vec![0.0; nf * nt];
    let mut mask = vec![0u8; nf * nt];
    unsafe {
        assert_eq!(zp_phasegrad_copy(out[0], a.as_mut_ptr(), mask.as_mut_ptr(), a.len()), ZpStatus::Ok);
        assert_eq!(zp_phasegrad_copy(out[1], b.as_mut_ptr(), ptr::null_mut(), b.len()), ZpStatus::Ok);
    }
    for ((x, y), m) in a.iter().zip(&b).zip(&mask) {
        if *m == 1 {
            assert!((x - y).abs() <= 1e-13 * x.abs().max(y.abs()).max(1e-300));
        } else {
            assert!(x.is_nan() && y.is_nan());
        }
    }
    unsafe {
        zp_phasegrad_free(out[0]);
        zp_phasegrad_free(out[1]);
        zp_signal_free(sig);
    }
}

#[test]
fn zeros_on_the_two_tone_lattice() {
    let sig = two_tone();
    let params = ZpGridParams { hop_samples: 2, ..PARAMS };
    let mut list = ptr::null_mut();
    assert_eq!(unsafe { zp_zeros_analyze(sig, &GAUSS, &params, &mut list) }, ZpStatus::Ok, "{}", last_error());
    let n = unsafe { zp_zero_list_len(list) };
    assert!(n > 10);
    let mut classified = 0;
    for i in 0..n {
        let mut z = std::mem::MaybeUninit::<ZpZero>::uninit();
        assert_eq!(unsafe { zp_zero_list_get(list, i, z.as_mut_ptr()) }, ZpStatus::Ok);
        let z = unsafe { z.assume_init() };
        if z.classified {
            classified += 1;
            assert!(z.pattern_ok);
            assert!((z.omega_hz - 1000.0).abs() < 1e-6);
            assert!((z.slope_below + 1.0).abs() < 0.1);
        }
    }
    assert!(classified > 10);
    let mut z = std::mem::MaybeUninit::<ZpZero>::uninit();
    assert_eq!(unsafe { zp_zero_list_get(list, n, z.as_mut_ptr()) }, ZpStatus::InvalidParameter);
    assert!(last_error().contains("out of range"));
    unsafe {
        zp_zero_list_free(list);
        zp_signal_free(sig);
    }
}

#[test]
fn status_codes_and_errors() {
    zp_clear_error();
    assert_eq!(unsafe { zp_last_error_message(ptr::null_mut(), 0) }, 0);

    let mut sig = ptr::null_mut();
    let s = unsafe { zp_signal_two_tone(500.0, 500.0, 8000.0, 0.05, &mut sig) };
    assert_eq!(s, ZpStatus::InvalidParameter);
    assert!(sig.is_null());
    assert!(last_error().contains("differ"));

    assert_eq!(unsafe { zp_signal_two_tone(500.0, 1500.0, 8000.0, 0.05, ptr::null_mut()) }, ZpStatus::NullPointer);
    let mut grid = ptr::null_mut();
    let s = unsafe { zp_stft(ptr::null(), &GAUSS, ZpVariant::G, &PARAMS, ZpConvention::V, &mut grid) };
    assert_eq!(s, ZpStatus::NullPointer);
    assert!(last_error().contains("signal"));

    let sig = two_tone();
    let rect = ZpWindow { family: ZpWindowFamily::Rectangular, width_s: 0.004 };
    let s = unsafe { zp_stft(sig, &rect, ZpVariant::NegDg, &PARAMS, ZpConvention::V, &mut grid) };
    assert_eq!(s, ZpStatus::Unsupported);
    assert!(grid.is_null());

    let few = [0.5, -0.2, 3.0];
    let (mut scale, mut ks) = (0.0, 0.0);
    assert_eq!(unsafe { zp_fit_rho(few.as_ptr(), few.len(), &mut scale, &mut ks) }, ZpStatus::Numerical);

    // Freeing NULL is a no-op.
    unsafe {
        zp_signal_free(ptr::null_mut());
        zp_grid_free(ptr::null_mut());
        zp_phasegrad_free(ptr::null_mut());
        zp_zero_list_free(ptr::null_mut());
        zp_signal_free(sig);
    }
}

#[test]
fn samples_and_density() {
    let re = [1.0, 0.0, -1.0, 0.0];
    let im = [0.0, 1.0, 0.0, -1.0];
    let mut sig = ptr::null_mut();
    assert_eq!(unsafe { zp_signal_from_samples(re.as_ptr(), im.as_ptr(), 4, 4.0, &mut sig) }, ZpStatus::Ok);
    assert_eq!(unsafe { zp_signal_len(sig) }, 4);
    unsafe { zp_signal_free(sig) };
    assert_eq!(zp_rho_density(0.0), 0.5);
    assert_eq!(zp_rho_cdf(0.0), 0.5);
    let v = unsafe { CStr::from_ptr(zp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_builds_against_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include").join("zerophase.h");
    assert!(header.exists(), "header is generated by the build script");
    let lib_dir = target_dir();
    assert!(lib_dir.join("libzerophase_ffi.so").exists() || lib_dir.join("libzerophase_ffi.dylib").exists());
    let tmp = tempfile::TempDir::new().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(manifest.join("tests").join("c").join("smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lzerophase_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("classified zeros"));
}
