//! IM/DD VLC channel model: per-LED flat gains, LED clipping, first-order
//! low-pass frequency selectivity, AWGN, and fading draws for diversity
//! experiments.
//!
//! The canonical noiseless model is `r = T(e_M) * diag(h) * s` with `T(e_M)`
//! the all-ones convolution matrix; the equivalent slot-domain view is a
//! moving sum over the active layers. `transmit` implements the matrix form
//! directly and switches to an oversampled waveform path when the low-pass
//! filter is configured.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::{conv_matrix, CodeParams, SymbolVector};
use crate::{Error, Result};

pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

pub fn linear_to_dbm(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Gain ensembles for the diversity experiments. IM/DD gains carry no usable
/// phase, so fading draws are magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fading {
    #[serde(rename = "FIXED")]
    Fixed,
    /// `h_i = |g_i|` with `g` circularly-symmetric complex Gaussian,
    /// `E[g g^H] = Sigma`.
    #[serde(rename = "RAYLEIGH_MAGNITUDE")]
    RayleighMagnitude,
    /// `h = |z|` componentwise with `z ~ N(0, Sigma)` real.
    #[serde(rename = "GAUSSIAN_MAGNITUDE")]
    GaussianMagnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpfConfig {
    pub bandwidth_hz: f64,
    /// Oversampling factor for the waveform-domain path.
    #[serde(default = "default_samples_per_slot")]
    pub samples_per_slot: usize,
}

fn default_samples_per_slot() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Per-LED flat gains `h`, length `N`.
    pub gains: Vec<f64>,
    pub noise_power_dbm: f64,
    /// Absolute electrical clip power; `None` disables clipping entirely.
    #[serde(default)]
    pub clip_level_dbm: Option<f64>,
    #[serde(default)]
    pub lpf: Option<LpfConfig>,
    #[serde(default = "default_fading")]
    pub fading: Fading,
    /// Fading covariance `Sigma` (row-major); `None` means identity.
    #[serde(default)]
    pub fading_covariance: Option<Vec<Vec<f64>>>,
}

fn default_fading() -> Fading {
    Fading::Fixed
}

impl ChannelModel {
    pub fn noise_variance(&self) -> f64 {
        dbm_to_linear(self.noise_power_dbm)
    }

    /// Clip amplitude ceiling `A_clip = sqrt(linear(clip_level_dbm))`.
    pub fn clip_amplitude(&self) -> Option<f64> {
        self.clip_level_dbm.map(|p| dbm_to_linear(p).sqrt())
    }

    pub fn validate(&self, code: &CodeParams) -> Result<()> {
        if self.gains.len() != code.n_layers {
            return Err(Error::InvalidArgument(format!(
                "gains length {} != n_layers {}",
                self.gains.len(),
                code.n_layers
            )));
        }
        if !self.gains.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidArgument("gains must be finite".into()));
        }
        if !(self.noise_variance() > 0.0) {
            return Err(Error::InvalidArgument("noise power must be finite".into()));
        }
        if let Some(lpf) = &self.lpf {
            let fs = lpf.samples_per_slot as f64 / code.slot_duration;
            if fs <= 2.0 * lpf.bandwidth_hz {
                return Err(Error::InvalidArgument(format!(
                    "oversampled rate {fs} must exceed 2B = {}",
                    2.0 * lpf.bandwidth_hz
                )));
            }
        }
        if let Some(cov) = &self.fading_covariance {
            if cov.len() != code.n_layers || cov.iter().any(|r| r.len() != code.n_layers) {
                return Err(Error::InvalidArgument(
                    "fading covariance must be N x N".into(),
                ));
            }
        }
        Ok(())
    }

    fn covariance_matrix(&self, n: usize) -> DMatrix<f64> {
        match &self.fading_covariance {
            Some(rows) => {
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            None => DMatrix::identity(n, n),
        }
    }
}

/// Received slot samples for one codeword.
#[derive(Clone, Debug)]
pub struct ReceivedVector {
    pub samples: Vec<Complex64>,
    pub noise_variance: f64,
}

/// Amplitude clipping to `[0, A_clip]`; `None` is the identity.
pub fn clip(samples: &[f64], clip_level_dbm: Option<f64>) -> Vec<f64> {
    match clip_level_dbm {
        None => samples.to_vec(),
        Some(level) => {
            let a_clip = dbm_to_linear(level).sqrt();
            samples.iter().map(|&x| x.clamp(0.0, a_clip)).collect()
        }
    }
}

/// Single-pole IIR low-pass: `y[k] = alpha x[k] + (1 - alpha) y[k-1]` with
/// `alpha = 1 - exp(-2 pi B / fs)`, zero initial state. Unit DC gain, -3 dB
/// point at `B` for `fs >> B`.
#[derive(Clone, Debug)]
pub struct SinglePoleLpf {
    alpha: f64,
    state: f64,
}

impl SinglePoleLpf {
    pub fn new(bandwidth_hz: f64, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 2.0 * bandwidth_hz) {
            return Err(Error::InvalidArgument(format!(
                "sample_rate {sample_rate} must exceed 2B = {}",
                2.0 * bandwidth_hz
            )));
        }
        Ok(Self {
            alpha: lpf_alpha(bandwidth_hz, sample_rate),
            state: 0.0,
        })
    }

    pub fn step(&mut self, x: f64) -> f64 {
        self.state += self.alpha * (x - self.state);
        self.state
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
    }

    /// Complex frequency response at normalized angular frequency
    /// `omega = 2 pi f / fs`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::new(omega.cos(), -omega.sin());
        Complex64::new(self.alpha, 0.0) / (Complex64::new(1.0, 0.0) - (1.0 - self.alpha) * z_inv)
    }
}

pub fn lpf_alpha(bandwidth_hz: f64, sample_rate: f64) -> f64 {
    1.0 - (-2.0 * std::f64::consts::PI * bandwidth_hz / sample_rate).exp()
}

/// Filter a whole waveform from zero initial state.
pub fn lowpass_filter(waveform: &[f64], bandwidth_hz: f64, sample_rate: f64) -> Result<Vec<f64>> {
    let mut f = SinglePoleLpf::new(bandwidth_hz, sample_rate)?;
    Ok(waveform.iter().map(|&x| f.step(x)).collect())
}

/// Transmit one codeword through the channel using explicit gains.
///
/// `complex_noise` adds an independent Gaussian component of the same
/// variance on the imaginary part (per-dimension convention for QAM).
pub fn transmit_with_gains(
    s: &SymbolVector,
    code: &CodeParams,
    chan: &ChannelModel,
    gains: &[f64],
    rng: &mut impl Rng,
    complex_noise: bool,
) -> Result<ReceivedVector> {
    let n = code.n_layers;
    let m = code.m_slots;
    if s.values.len() != n {
        return Err(Error::InvalidArgument(format!(
            "symbol vector length {} != n_layers {}",
            s.values.len(),
            n
        )));
    }
    if gains.len() != n {
        return Err(Error::InvalidArgument(format!(
            "gains length {} != n_layers {}",
            gains.len(),
            n
        )));
    }
    let span = code.span();
    let a_clip = chan.clip_amplitude();
    // LED nonlinearity acts on the emitted (real) amplitude.
    let amps: Vec<Complex64> = s
        .values
        .iter()
        .map(|&v| match a_clip {
            Some(a) => Complex64::new(v.re.clamp(0.0, a), v.im),
            None => v,
        })
        .collect();

    let sigma2 = chan.noise_variance();
    let sigma = sigma2.sqrt();
    let mut r = vec![Complex64::new(0.0, 0.0); span];

    match &chan.lpf {
        None => {
            for t in 0..span {
                let lo = t.saturating_sub(m - 1);
                let hi = (n - 1).min(t);
                for i in lo..=hi {
                    r[t] += gains[i] * amps[i];
                }
            }
        }
        Some(lpf) => {
            let os = lpf.samples_per_slot;
            let fs = os as f64 / code.slot_duration;
            let total = span * os;
            let has_imag = amps.iter().any(|a| a.im != 0.0);
            let mut wave = vec![0.0f64; total];
            for i in 0..n {
                // Rectangular pulse over slots i ..= i+M-1 on the real axis.
                for x in wave.iter_mut() {
                    *x = 0.0;
                }
                for slot in i..i + m {
                    for k in 0..os {
                        wave[slot * os + k] = amps[i].re;
                    }
                }
                let filtered = lowpass_filter(&wave, lpf.bandwidth_hz, fs)?;
                for t in 0..span {
                    // Sample at the end of each slot.
                    r[t].re += gains[i] * filtered[(t + 1) * os - 1];
                }
                if has_imag {
                    for x in wave.iter_mut() {
                        *x = 0.0;
                    }
                    for slot in i..i + m {
                        for k in 0..os {
                            wave[slot * os + k] = amps[i].im;
                        }
                    }
                    let filtered = lowpass_filter(&wave, lpf.bandwidth_hz, fs)?;
                    for t in 0..span {
                        r[t].im += gains[i] * filtered[(t + 1) * os - 1];
                    }
                }
            }
        }
    }

    for sample in r.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        sample.re += sigma * z;
        if complex_noise {
            let z: f64 = rng.sample(StandardNormal);
            sample.im += sigma * z;
        }
    }

    Ok(ReceivedVector {
        samples: r,
        noise_variance: sigma2,
    })
}

/// Transmit using the channel's configured fixed gains.
pub fn transmit(
    s: &SymbolVector,
    code: &CodeParams,
    chan: &ChannelModel,
    rng: &mut impl Rng,
    complex_noise: bool,
) -> Result<ReceivedVector> {
    transmit_with_gains(s, code, chan, &chan.gains, rng, complex_noise)
}

/// Draw a per-codeword gain vector from the configured fading ensemble.
pub fn draw_fading(chan: &ChannelModel, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if chan.fading == Fading::Fixed {
        return Err(Error::InvalidArgument(
            "draw_fading requires a non-FIXED fading model".into(),
        ));
    }
    let sigma = chan.covariance_matrix(n);
    let identity = chan.fading_covariance.is_none();
    let chol = if identity {
        None
    } else {
        Some(
            nalgebra::Cholesky::new(sigma)
                .ok_or_else(|| {
                    Error::InvalidArgument("fading covariance must be positive definite".into())
                })?
                .l(),
        )
    };
    let correlate = |z: Vec<f64>| -> Vec<f64> {
        match &chol {
            None => z,
            Some(l) => {
                let v = nalgebra::DVector::from_vec(z);
                (l * v).iter().copied().collect()
            }
        }
    };
    match chan.fading {
        Fading::RayleighMagnitude => {
            let zr: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let zi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let gr = correlate(zr);
            let gi = correlate(zi);
            Ok(gr
                .iter()
                .zip(&gi)
                .map(|(&a, &b)| ((a * a + b * b) / 2.0).sqrt())
                .collect())
        }
        Fading::GaussianMagnitude => {
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            Ok(correlate(z).iter().map(|v| v.abs()).collect())
        }
        Fading::Fixed => unreachable!(),
    }
}

/// Effective channel matrix `T(e_M) * diag(h)`.
pub fn effective_channel(gains: &[f64], m_slots: usize) -> Result<DMatrix<f64>> {
    let n = gains.len();
    let t = conv_matrix(&vec![1.0; m_slots], n)?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(gains));
    Ok(t * d)
}
