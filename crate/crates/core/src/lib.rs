//! Short-time Fourier transform phase analysis around zeros.
//!
//! The crate computes STFTs and their partial derivatives for Gaussian and
//! Hamming windows, evaluates phase derivatives by three independent routes,
//! locates and refines STFT zeros by Newton iteration, and checks the
//! singular behavior of the phase derivative at each simple zero.

pub mod cli;
pub mod error;
pub mod export;
pub mod oracle;
pub mod phasegrad;
pub mod signals;
pub mod stats;
pub mod stft;
pub mod windows;
pub mod zeros;

pub use error::{Error, ErrorClass, Result};
