//! Link-level simulator and analysis library for a multiple-layer shift
//! linear space-time block code over an intensity-modulated / direct-detected
//! visible-light MISO channel.
//!
//! The crate is organized around the signal path:
//!
//! * [`codec`] — codeword construction (banded spreading / convolution
//!   matrices), bit-to-symbol mapping, rate accounting.
//! * [`channel`] — per-LED gains, LED clipping, first-order low-pass
//!   frequency selectivity, AWGN, fading draws.
//! * [`receiver`] — zero-forcing equalization, MLSE over the artificial
//!   convolutive channel, constellation slicing.
//! * [`analysis`] — closed-form SEP expressions, exponential upper bounds,
//!   averaged diversity bound, determinant-bound checks, BER slope fits.
//! * [`ofdm`] — DCO-OFDM baseline transceiver for the power-sweep comparison.
//! * [`harness`] — configuration-driven Monte Carlo sweep engine and report
//!   emission; the `vlcsim` binary is a thin CLI over it.
//!
//! Monte Carlo sweep points are embarrassingly parallel; with the default
//! `parallel` feature they run on a rayon pool, and
//! [`harness::run_sweep_serial`] is the sequential fallback. Both produce
//! byte-identical records because every point owns a seed-derived random
//! stream.

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod harness;
pub mod ofdm;
pub mod receiver;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported configuration: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
