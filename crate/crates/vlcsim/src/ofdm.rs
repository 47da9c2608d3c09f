//! DCO-OFDM baseline transceiver: Gray-mapped QAM on Hermitian-symmetric
//! subcarriers, cyclic prefix, DC bias, optional clipping, and one-tap
//! genie equalization at the receiver.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_linear, SinglePoleLpf};
use crate::codec::{Constellation, Modulation};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmParams {
    #[serde(default = "default_n_subcarriers")]
    pub n_subcarriers: usize,
    /// Cyclic prefix length in samples.
    #[serde(default = "default_n_guard")]
    pub n_guard: usize,
    /// Null edge subcarriers (none by default; the guard interval is the
    /// cyclic prefix).
    #[serde(default)]
    pub n_null: usize,
    pub constellation_size: u32,
    /// DC bias above the signal RMS, in dB.
    #[serde(default = "default_dc_bias_db")]
    pub dc_bias_db: f64,
    /// Absolute electrical clip power, shared with the channel model.
    #[serde(default)]
    pub clip_level_dbm: Option<f64>,
    /// Waveform sample rate; must exceed twice the channel filter bandwidth
    /// when a low-pass channel is simulated.
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
}

fn default_n_subcarriers() -> usize {
    1024
}
fn default_n_guard() -> usize {
    4
}
fn default_dc_bias_db() -> f64 {
    7.0
}
fn default_sample_rate() -> f64 {
    4e8
}

impl OfdmParams {
    pub fn validate(&self) -> Result<()> {
        if !self.n_subcarriers.is_power_of_two() || self.n_subcarriers < 4 {
            return Err(Error::InvalidArgument(
                "n_subcarriers must be a power of two >= 4".into(),
            ));
        }
        Modulation::SquareQam(self.constellation_size).validate()?;
        if self.n_null + 1 >= self.n_subcarriers / 2 {
            return Err(Error::InvalidArgument("too many null subcarriers".into()));
        }
        Ok(())
    }

    pub fn data_subcarriers(&self) -> usize {
        self.n_subcarriers / 2 - 1 - self.n_null
    }
}

/// A planned DCO-OFDM transceiver.
pub struct DcoOfdm {
    pub params: OfdmParams,
    constellation: Constellation,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl DcoOfdm {
    pub fn new(params: OfdmParams) -> Result<Self> {
        params.validate()?;
        // Unit-energy constellation; the waveform power scale carries E_s.
        let constellation =
            Constellation::new(Modulation::SquareQam(params.constellation_size), 1.0)?;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft(params.n_subcarriers, FftDirection::Forward);
        let ifft = planner.plan_fft(params.n_subcarriers, FftDirection::Inverse);
        Ok(Self {
            params,
            constellation,
            fft,
            ifft,
        })
    }

    pub fn bits_per_frame(&self) -> usize {
        self.params.data_subcarriers() * self.constellation.bits_per_symbol()
    }

    /// Samples per emitted frame (body plus cyclic prefix).
    pub fn frame_len(&self) -> usize {
        self.params.n_subcarriers + self.params.n_guard
    }

    /// Analytic mean power of the unscaled, unbiased frame body.
    fn signal_power(&self) -> f64 {
        2.0 * self.params.data_subcarriers() as f64
            / (self.params.n_subcarriers as f64).powi(2)
    }

    fn bias_ratio(&self) -> f64 {
        10f64.powf(self.params.dc_bias_db / 20.0)
    }

    /// Amplitude scale applied so the biased waveform's mean electrical power
    /// equals `avg_power` (before any clipping).
    pub fn power_scale(&self, avg_power: f64) -> f64 {
        let beta2 = self.bias_ratio().powi(2);
        (avg_power / (self.signal_power() * (1.0 + beta2))).sqrt()
    }

    /// Modulate a bit stream (an integer number of frames) into the real,
    /// DC-biased, optionally clipped time waveform with cyclic prefixes.
    pub fn modulate(&self, bits: &[u8], avg_power: f64) -> Result<Vec<f64>> {
        let bpf = self.bits_per_frame();
        if bits.is_empty() || bits.len() % bpf != 0 {
            return Err(Error::Framing(format!(
                "bit count {} is not a positive multiple of the frame size {bpf}",
                bits.len()
            )));
        }
        let ns = self.params.n_subcarriers;
        let data = self.params.data_subcarriers();
        let bps = self.constellation.bits_per_symbol();
        let g = self.power_scale(avg_power);
        let bias = g * self.bias_ratio() * self.signal_power().sqrt();
        let a_clip = self.params.clip_level_dbm.map(|p| dbm_to_linear(p).sqrt());

        let mut out = Vec::with_capacity(bits.len() / bpf * self.frame_len());
        let mut spectrum = vec![Complex64::new(0.0, 0.0); ns];
        for frame_bits in bits.chunks(bpf) {
            for x in spectrum.iter_mut() {
                *x = Complex64::new(0.0, 0.0);
            }
            for (k, sym_bits) in frame_bits.chunks(bps).enumerate() {
                let sym = self.constellation.map_bits(sym_bits)?;
                // DC and Nyquist bins stay zero; Hermitian image makes the
                // time samples real.
                spectrum[k + 1] = sym;
                spectrum[ns - 1 - k] = sym.conj();
            }
            let mut time = spectrum.clone();
            self.ifft.process(&mut time);
            let inv_ns = 1.0 / ns as f64;
            debug_assert!(
                time.iter().all(|v| (v.im * inv_ns).abs() <= 1e-10),
                "Hermitian symmetry violated"
            );
            let body: Vec<f64> = time
                .iter()
                .map(|v| {
                    let x = g * v.re * inv_ns + bias;
                    match a_clip {
                        Some(a) => x.clamp(0.0, a),
                        None => x,
                    }
                })
                .collect();
            out.extend_from_slice(&body[ns - self.params.n_guard..]);
            out.extend_from_slice(&body);
        }
        let _ = data;
        Ok(out)
    }

    /// One-tap genie channel estimate per data subcarrier: the power scale,
    /// a flat gain, and (optionally) the discrete low-pass response of the
    /// channel filter at this transceiver's sample rate.
    pub fn genie_estimate(
        &self,
        avg_power: f64,
        gain: f64,
        lpf_bandwidth_hz: Option<f64>,
    ) -> Result<Vec<Complex64>> {
        let g = self.power_scale(avg_power) * gain;
        let ns = self.params.n_subcarriers as f64;
        let lpf = match lpf_bandwidth_hz {
            Some(b) => Some(SinglePoleLpf::new(b, self.params.sample_rate_hz)?),
            None => None,
        };
        Ok((0..self.params.data_subcarriers())
            .map(|k| {
                let omega = 2.0 * std::f64::consts::PI * (k + 1) as f64 / ns;
                let h = match &lpf {
                    Some(f) => f.response(omega),
                    None => Complex64::new(1.0, 0.0),
                };
                g * h
            })
            .collect())
    }

    /// Demodulate a frame-aligned waveform: strip prefixes, transform,
    /// equalize each data subcarrier by the estimate, slice, Gray-demap.
    pub fn demodulate(&self, waveform: &[f64], channel_estimate: &[Complex64]) -> Result<Vec<u8>> {
        let frame = self.frame_len();
        if waveform.is_empty() || waveform.len() % frame != 0 {
            return Err(Error::Framing(format!(
                "waveform length {} is not a positive multiple of the frame length {frame}",
                waveform.len()
            )));
        }
        let data = self.params.data_subcarriers();
        if channel_estimate.len() != data {
            return Err(Error::InvalidArgument(format!(
                "channel estimate length {} != data subcarriers {data}",
                channel_estimate.len()
            )));
        }
        let ns = self.params.n_subcarriers;
        let mut bits = Vec::with_capacity(waveform.len() / frame * self.bits_per_frame());
        let mut spectrum = vec![Complex64::new(0.0, 0.0); ns];
        for chunk in waveform.chunks(frame) {
            let body = &chunk[self.params.n_guard..];
            for (x, &v) in spectrum.iter_mut().zip(body) {
                *x = Complex64::new(v, 0.0);
            }
            self.fft.process(&mut spectrum);
            for (k, &est) in channel_estimate.iter().enumerate() {
                let y = spectrum[k + 1] / est;
                let idx = self.constellation.slice(y);
                bits.extend_from_slice(self.constellation.bits_of(idx));
            }
        }
        Ok(bits)
    }
}

/// Peak-to-average power ratio of a frame, in dB.
pub fn papr(frame: &[f64]) -> f64 {
    assert!(!frame.is_empty(), "papr of empty frame");
    let peak = frame.iter().fold(0.0f64, |acc, &x| acc.max(x * x));
    let mean = frame.iter().map(|&x| x * x).sum::<f64>() / frame.len() as f64;
    10.0 * (peak / mean).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(d: u32) -> OfdmParams {
        OfdmParams {
            n_subcarriers: 256,
            n_guard: 4,
            n_null: 0,
            constellation_size: d,
            dc_bias_db: 7.0,
            clip_level_dbm: None,
            sample_rate_hz: 4e8,
        }
    }

    #[test]
    fn all_zero_bits_fill_data_bins_but_impulse_gives_constant() {
        // A frame with an all-zero spectrum is a constant at the bias level.
        let ofdm = DcoOfdm::new(params(4)).unwrap();
        // feed through the internals by modulating and checking the mean:
        // instead check that the clipped, biased output of a zero spectrum is
        // the bias: zero bits still map to a constellation point, so build
        // the constant directly from power_scale.
        let avg_power = 2.0;
        let g = ofdm.power_scale(avg_power);
        let bias = g * ofdm.bias_ratio() * ofdm.signal_power().sqrt();
        assert!(bias > 0.0);
        // mean power of the emitted waveform matches the configured power
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..ofdm.bits_per_frame() * 50)
            .map(|_| rng.gen_range(0..2u8))
            .collect();
        let wave = ofdm.modulate(&bits, avg_power).unwrap();
        let mean_power = wave.iter().map(|x| x * x).sum::<f64>() / wave.len() as f64;
        assert!(
            (mean_power - avg_power).abs() / avg_power < 0.01,
            "mean power {mean_power}"
        );
    }

    #[test]
    fn waveform_nonnegative_when_clipped() {
        let mut p = params(16);
        p.clip_level_dbm = Some(60.0);
        let ofdm = DcoOfdm::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bits: Vec<u8> = (0..ofdm.bits_per_frame() * 20)
            .map(|_| rng.gen_range(0..2u8))
            .collect();
        let wave = ofdm.modulate(&bits, 1.0).unwrap();
        assert!(wave.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn roundtrip_no_impairments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [4u32, 16, 64, 256] {
            let ofdm = DcoOfdm::new(params(d)).unwrap();
            let est = ofdm.genie_estimate(3.0, 1.0, None).unwrap();
            for _ in 0..20 {
                let bits: Vec<u8> = (0..ofdm.bits_per_frame() * 3)
                    .map(|_| rng.gen_range(0..2u8))
                    .collect();
                let wave = ofdm.modulate(&bits, 3.0).unwrap();
                let rx = ofdm.demodulate(&wave, &est).unwrap();
                assert_eq!(rx, bits, "D = {d}");
            }
        }
    }

    #[test]
    fn framing_errors_rejected() {
        let ofdm = DcoOfdm::new(params(4)).unwrap();
        assert!(matches!(
            ofdm.modulate(&[1, 0, 1], 1.0),
            Err(Error::Framing(_))
        ));
        let est = ofdm.genie_estimate(1.0, 1.0, None).unwrap();
        assert!(matches!(
            ofdm.demodulate(&[0.0; 17], &est),
            Err(Error::Framing(_))
        ));
    }

    #[test]
    fn papr_constant_waveform_is_zero_db() {
        assert_abs_diff_eq!(papr(&[2.5; 64]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn papr_single_impulse() {
        let mut frame = vec![0.0; 1024];
        frame[100] = 1.0;
        assert_abs_diff_eq!(papr(&frame), 10.0 * 1024f64.log10(), epsilon = 1e-9);
    }

    #[test]
    fn papr_median_in_expected_range() {
        // 4-QAM, Ns = 1024: median PAPR of the unbiased body in 10-13 dB.
        let p = OfdmParams {
            n_subcarriers: 1024,
            n_guard: 0,
            n_null: 0,
            constellation_size: 4,
            dc_bias_db: 7.0,
            clip_level_dbm: None,
            sample_rate_hz: 4e8,
        };
        let ofdm = DcoOfdm::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames = 2000;
        let mut paprs = Vec::with_capacity(frames);
        for _ in 0..frames {
            let bits: Vec<u8> = (0..ofdm.bits_per_frame())
                .map(|_| rng.gen_range(0..2u8))
                .collect();
            // Remove the bias so PAPR reflects the OFDM signal itself.
            let g = ofdm.power_scale(1.0);
            let bias = g * ofdm.bias_ratio() * ofdm.signal_power().sqrt();
            let wave = ofdm.modulate(&bits, 1.0).unwrap();
            let body: Vec<f64> = wave.iter().map(|x| x - bias).collect();
            paprs.push(papr(&body));
        }
        paprs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = paprs[frames / 2];
        assert!((10.0..13.0).contains(&median), "median PAPR {median} dB");
    }
}
