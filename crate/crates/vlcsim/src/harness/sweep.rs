//! Monte Carlo bit-error-rate sweep engine.
//!
//! Each power point owns a counter-derived random stream, so records are
//! reproducible bit-for-bit, points can run in any order (or concurrently),
//! and adding points to a sweep never perturbs existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_linear, draw_fading, lowpass_filter, transmit_with_gains, Fading};
use crate::codec::{Constellation, SymbolVector};
use crate::ofdm::DcoOfdm;
use crate::receiver::{blind_thresholds, build_zf, mlse_detect, zf_detect, SlicingMode};
use crate::Result;

use super::config::{ReceiverMode, Scheme, SimConfig};

/// Number of codewords used to learn blind OOK thresholds at each point.
pub const BLIND_PREAMBLE_CODEWORDS: usize = 256;

/// One Monte Carlo sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: String,
    /// Code layers; 0 for the OFDM baseline.
    pub n: usize,
    /// Code shift slots; 0 for the OFDM baseline.
    pub m: usize,
    pub power_dbm: f64,
    pub snr_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ber_stderr: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Per-point random stream: the master seed keys the cipher, the power point
/// (in milli-dBm) selects the stream counter.
fn point_rng(master_seed: u64, power_dbm: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((power_dbm * 1000.0).round() as i64 as u64);
    rng
}

fn random_bits(rng: &mut impl Rng, count: usize) -> Vec<u8> {
    (0..count).map(|_| rng.gen_range(0..2u8)).collect()
}

fn count_errors(tx: &[u8], rx: &[u8]) -> u64 {
    debug_assert_eq!(tx.len(), rx.len());
    tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64
}

/// Simulate a single power point of the configured sweep.
pub fn run_point(cfg: &SimConfig, power_dbm: f64) -> Result<BerRecord> {
    let mut rng = point_rng(cfg.master_seed, power_dbm);
    let (bits_sent, bit_errors) = match cfg.scheme {
        Scheme::MlpsLstbc => run_point_mlps(cfg, power_dbm, &mut rng)?,
        Scheme::DcoOfdm => run_point_ofdm(cfg, power_dbm, &mut rng)?,
    };
    let ber = if bits_sent == 0 {
        0.0
    } else {
        bit_errors as f64 / bits_sent as f64
    };
    let stderr = if bits_sent == 0 {
        0.0
    } else {
        (ber * (1.0 - ber) / bits_sent as f64).sqrt()
    };
    let (n, m) = match cfg.scheme {
        Scheme::MlpsLstbc => (cfg.code.n_layers, cfg.code.m_slots),
        Scheme::DcoOfdm => (0, 0),
    };
    Ok(BerRecord {
        scheme: cfg.scheme.as_str().to_string(),
        n,
        m,
        power_dbm,
        snr_db: power_dbm - cfg.channel.noise_power_dbm,
        bits_sent,
        bit_errors,
        ber,
        ber_stderr: stderr,
        config_hash: cfg.config_hash(),
        seed: cfg.master_seed,
    })
}

fn run_point_mlps(cfg: &SimConfig, power_dbm: f64, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    let code = &cfg.code;
    let avg_power = dbm_to_linear(power_dbm);
    let constellation = Constellation::new(code.modulation, avg_power)?;
    let complex_noise = code.modulation.is_complex();
    let bps = constellation.bits_per_symbol();
    let bits_per_cw = code.n_layers * bps;
    let fading = cfg.channel.fading != Fading::Fixed;
    let eq = build_zf(code);

    let draw_gains = |rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        if fading {
            draw_fading(&cfg.channel, code.n_layers, rng)
        } else {
            Ok(cfg.channel.gains.clone())
        }
    };

    let send = |rng: &mut ChaCha8Rng| -> Result<(Vec<u8>, crate::channel::ReceivedVector, Vec<f64>)> {
        let gains = draw_gains(rng)?;
        let bits = random_bits(rng, bits_per_cw);
        let mut values = Vec::with_capacity(code.n_layers);
        for chunk in bits.chunks(bps) {
            values.push(constellation.map_bits(chunk)?);
        }
        let s = SymbolVector {
            values,
            avg_symbol_energy: avg_power,
        };
        let r = transmit_with_gains(&s, code, &cfg.channel, &gains, rng, complex_noise)?;
        Ok((bits, r, gains))
    };

    // Blind thresholds are learned once per point from an uncounted window.
    let thresholds = if cfg.receiver_mode == ReceiverMode::ZfBlind {
        let unit = vec![1.0; code.n_layers];
        let mut window = Vec::with_capacity(BLIND_PREAMBLE_CODEWORDS);
        for _ in 0..BLIND_PREAMBLE_CODEWORDS {
            let (_, r, _) = send(rng)?;
            let det = zf_detect(&r, &eq, SlicingMode::Genie(&unit), &constellation)?;
            window.push(det.per_symbol_metric.iter().map(|y| y.re).collect());
        }
        Some(blind_thresholds(&window)?)
    } else {
        None
    };

    let mut bits_sent = 0u64;
    let mut bit_errors = 0u64;
    while bit_errors < cfg.min_bit_errors && bits_sent < cfg.max_bits {
        let (tx_bits, r, gains) = send(rng)?;
        let rx_bits = match cfg.receiver_mode {
            ReceiverMode::ZfGenie => {
                zf_detect(&r, &eq, SlicingMode::Genie(&gains), &constellation)?.hard_bits
            }
            ReceiverMode::ZfBlind => {
                let t = thresholds.as_ref().expect("thresholds trained");
                zf_detect(&r, &eq, SlicingMode::Blind(t), &constellation)?.hard_bits
            }
            ReceiverMode::Mlse => mlse_detect(&r.samples, &gains, code, &constellation)?,
        };
        bits_sent += bits_per_cw as u64;
        bit_errors += count_errors(&tx_bits, &rx_bits);
    }
    Ok((bits_sent, bit_errors))
}

fn run_point_ofdm(cfg: &SimConfig, power_dbm: f64, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    let mut params = cfg
        .ofdm
        .clone()
        .expect("validated DCO_OFDM config carries ofdm parameters");
    // The channel model is the single source of truth for the LED ceiling.
    if params.clip_level_dbm.is_none() {
        params.clip_level_dbm = cfg.channel.clip_level_dbm;
    }
    let sample_rate = params.sample_rate_hz;
    let ofdm = DcoOfdm::new(params)?;
    let avg_power = dbm_to_linear(power_dbm);
    let gain = cfg.channel.gains[0];
    let lpf_bw = cfg.channel.lpf.as_ref().map(|l| l.bandwidth_hz);
    let estimate = ofdm.genie_estimate(avg_power, gain, lpf_bw)?;
    let sigma = cfg.channel.noise_variance().sqrt();
    let bits_per_frame = ofdm.bits_per_frame();

    let mut bits_sent = 0u64;
    let mut bit_errors = 0u64;
    while bit_errors < cfg.min_bit_errors && bits_sent < cfg.max_bits {
        let tx_bits = random_bits(rng, bits_per_frame);
        let wave = ofdm.modulate(&tx_bits, avg_power)?;
        let mut received = match lpf_bw {
            Some(b) => lowpass_filter(&wave, b, sample_rate)?,
            None => wave,
        };
        for sample in received.iter_mut() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *sample = gain * *sample + sigma * z;
        }
        let rx_bits = ofdm.demodulate(&received, &estimate)?;
        bits_sent += bits_per_frame as u64;
        bit_errors += count_errors(&tx_bits, &rx_bits);
    }
    Ok((bits_sent, bit_errors))
}

/// Run every point of the sweep on the rayon pool (with the default
/// `parallel` feature) and return records in power order.
#[cfg(feature = "parallel")]
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    cfg.power_sweep_dbm
        .points()
        .par_iter()
        .map(|&p| run_point(cfg, p))
        .collect()
}

/// Sequential build: `run_sweep` falls back to the serial engine.
#[cfg(not(feature = "parallel"))]
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    run_sweep_serial(cfg)
}

/// Sequential sweep; always available and record-identical to [`run_sweep`].
pub fn run_sweep_serial(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    cfg.power_sweep_dbm
        .points()
        .iter()
        .map(|&p| run_point(cfg, p))
        .collect()
}
