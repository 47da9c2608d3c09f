//! Codeword construction and bit-to-symbol mapping.
//!
//! A codeword stacks `N` layers, one per transmitter LED. Layer `i` repeats
//! its symbol over `M` consecutive slots and is delayed one slot behind layer
//! `i - 1`, so the whole codeword spans `N + M - 1` slots. The two matrix
//! views of that structure — the `N x (N+M-1)` spreading matrix and the
//! `(N+M-1) x N` banded convolution matrix — are both built here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Modulation alphabets supported by the codec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "OOK")]
    Ook,
    #[serde(rename = "BPSK")]
    Bpsk,
    /// Square QAM with the given order (4, 16, 64 or 256).
    #[serde(rename = "SQUARE_QAM")]
    SquareQam(u32),
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Ook | Modulation::Bpsk => 1,
            Modulation::SquareQam(d) => (d as f64).log2() as usize,
        }
    }

    pub fn order(self) -> usize {
        match self {
            Modulation::Ook | Modulation::Bpsk => 2,
            Modulation::SquareQam(d) => d as usize,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Modulation::SquareQam(_))
    }

    pub fn validate(self) -> Result<()> {
        if let Modulation::SquareQam(d) = self {
            if ![4, 16, 64, 256].contains(&d) {
                return Err(Error::InvalidArgument(format!(
                    "square QAM order must be one of 4, 16, 64, 256, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Code geometry and modulation choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    /// Number of layers / transmitter LEDs (`N`).
    pub n_layers: usize,
    /// Shift intervals per layer (`M`).
    pub m_slots: usize,
    /// Slot duration in seconds.
    pub slot_duration: f64,
    pub modulation: Modulation,
}

impl CodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 {
            return Err(Error::InvalidArgument("n_layers must be >= 1".into()));
        }
        if self.m_slots < 1 {
            return Err(Error::InvalidArgument("m_slots must be >= 1".into()));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::InvalidArgument("slot_duration must be > 0".into()));
        }
        self.modulation.validate()
    }

    /// Codeword span in slots: `N + M - 1`.
    pub fn span(&self) -> usize {
        self.n_layers + self.m_slots - 1
    }
}

/// One codeword worth of symbols, one per layer.
#[derive(Clone, Debug)]
pub struct SymbolVector {
    pub values: Vec<Complex64>,
    /// Average electrical symbol energy `E_s` in linear units.
    pub avg_symbol_energy: f64,
}

/// The banded `N x (N+M-1)` codeword matrix: row `i` holds its generator
/// element on columns `i ..= i+M-1` (0-indexed) and zeros elsewhere.
#[derive(Clone, Debug)]
pub struct SpreadMatrix {
    pub entries: DMatrix<Complex64>,
    pub generator: Vec<Complex64>,
    pub m_slots: usize,
}

/// Build the spreading matrix for a generator vector (the symbol vector `s`,
/// or the all-ones vector for the unit-tap structure).
pub fn build_spread_matrix(generator: &[Complex64], m_slots: usize) -> Result<SpreadMatrix> {
    if generator.is_empty() {
        return Err(Error::InvalidArgument("empty generator".into()));
    }
    if m_slots < 1 {
        return Err(Error::InvalidArgument("m_slots must be >= 1".into()));
    }
    let n = generator.len();
    let span = n + m_slots - 1;
    let mut entries = DMatrix::zeros(n, span);
    for (i, &g) in generator.iter().enumerate() {
        for j in i..i + m_slots {
            entries[(i, j)] = g;
        }
    }
    Ok(SpreadMatrix {
        entries,
        generator: generator.to_vec(),
        m_slots,
    })
}

/// Banded Toeplitz convolution matrix: `(N+M-1) x N` with entry
/// `(j, i) = taps[j - i]` when `0 <= j - i < M`, zero elsewhere.
/// Always has full column rank `N`.
pub fn conv_matrix(taps: &[f64], n_cols: usize) -> Result<DMatrix<f64>> {
    if taps.is_empty() {
        return Err(Error::InvalidArgument("empty taps".into()));
    }
    if n_cols < 1 {
        return Err(Error::InvalidArgument("n_cols must be >= 1".into()));
    }
    let m = taps.len();
    let rows = n_cols + m - 1;
    let mut t = DMatrix::zeros(rows, n_cols);
    for i in 0..n_cols {
        for (k, &tap) in taps.iter().enumerate() {
            t[(i + k, i)] = tap;
        }
    }
    Ok(t)
}

fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// A concrete constellation at a configured average electrical power.
///
/// Point order is significant: nearest-point slicing breaks ties toward the
/// lower index, which for OOK puts the midpoint decision on the zero level.
#[derive(Clone, Debug)]
pub struct Constellation {
    pub modulation: Modulation,
    points: Vec<Complex64>,
    /// Gray bit label per point, MSB first.
    labels: Vec<Vec<u8>>,
    /// Point index for each bit-pattern integer.
    index_of_bits: Vec<usize>,
    bits_per_symbol: usize,
    /// Average symbol energy `E_s` (equals the configured average power).
    pub avg_symbol_energy: f64,
    /// Per-axis level spacing (QAM) or the on/peak amplitude (OOK/BPSK).
    scale: f64,
}

impl Constellation {
    pub fn new(modulation: Modulation, avg_power: f64) -> Result<Self> {
        modulation.validate()?;
        if !(avg_power > 0.0) {
            return Err(Error::InvalidArgument("avg_power must be > 0".into()));
        }
        let bps = modulation.bits_per_symbol();
        let (points, labels, scale) = match modulation {
            Modulation::Ook => {
                // Levels {0, A} with A = sqrt(2 * avg_power) so equiprobable
                // bits yield the configured average electrical power.
                let a = (2.0 * avg_power).sqrt();
                (
                    vec![Complex64::new(0.0, 0.0), Complex64::new(a, 0.0)],
                    vec![vec![0], vec![1]],
                    a,
                )
            }
            Modulation::Bpsk => {
                let a = avg_power.sqrt();
                (
                    vec![Complex64::new(-a, 0.0), Complex64::new(a, 0.0)],
                    vec![vec![0], vec![1]],
                    a,
                )
            }
            Modulation::SquareQam(d) => {
                let l = (d as f64).sqrt().round() as usize;
                // E_s = (D - 1) d^2 / 6 for level spacing d.
                let spacing = (6.0 * avg_power / (d as f64 - 1.0)).sqrt();
                let levels: Vec<f64> = (0..l)
                    .map(|k| (2.0 * k as f64 - (l as f64 - 1.0)) * spacing / 2.0)
                    .collect();
                let axis_bits = bps / 2;
                let mut points = Vec::with_capacity(d as usize);
                let mut labels = Vec::with_capacity(d as usize);
                for (li, &re) in levels.iter().enumerate() {
                    for (lq, &im) in levels.iter().enumerate() {
                        points.push(Complex64::new(re, im));
                        let gi = gray(li as u32);
                        let gq = gray(lq as u32);
                        let mut bits = Vec::with_capacity(bps);
                        for b in (0..axis_bits).rev() {
                            bits.push(((gi >> b) & 1) as u8);
                        }
                        for b in (0..axis_bits).rev() {
                            bits.push(((gq >> b) & 1) as u8);
                        }
                        labels.push(bits);
                    }
                }
                (points, labels, spacing)
            }
        };
        let mut index_of_bits = vec![0usize; points.len()];
        for (idx, bits) in labels.iter().enumerate() {
            let key = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            index_of_bits[key] = idx;
        }
        Ok(Self {
            modulation,
            points,
            labels,
            index_of_bits,
            bits_per_symbol: bps,
            avg_symbol_energy: avg_power,
            scale,
        })
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        self.points[idx]
    }

    pub fn bits_of(&self, idx: usize) -> &[u8] {
        &self.labels[idx]
    }

    /// On-level for OOK, peak amplitude for BPSK, level spacing for QAM.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Map `bits_per_symbol` bits to a constellation point index.
    pub fn index_for_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::Framing(format!(
                "expected {} bits per symbol, got {}",
                self.bits_per_symbol,
                bits.len()
            )));
        }
        let key = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        Ok(self.index_of_bits[key])
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Complex64> {
        Ok(self.points[self.index_for_bits(bits)?])
    }

    /// Nearest constellation point, ties to the lowest index.
    pub fn slice(&self, y: Complex64) -> usize {
        match self.modulation {
            Modulation::Ook => {
                if y.re > self.scale / 2.0 {
                    1
                } else {
                    0
                }
            }
            Modulation::Bpsk => {
                if y.re > 0.0 {
                    1
                } else {
                    0
                }
            }
            Modulation::SquareQam(d) => {
                let l = (d as f64).sqrt().round() as usize;
                let half = self.scale / 2.0;
                let axis = |v: f64| -> usize {
                    let u = (v / half + (l as f64 - 1.0)) / 2.0;
                    (u.round().max(0.0) as usize).min(l - 1)
                };
                axis(y.re) * l + axis(y.im)
            }
        }
    }
}

/// Map a bit stream to a stream of length-`N` symbol vectors.
///
/// `avg_power` is the average electrical power per modulated symbol.
pub fn modulate(bits: &[u8], params: &CodeParams, avg_power: f64) -> Result<Vec<SymbolVector>> {
    params.validate()?;
    let constellation = Constellation::new(params.modulation, avg_power)?;
    let block = constellation.bits_per_symbol() * params.n_layers;
    if bits.is_empty() || bits.len() % block != 0 {
        return Err(Error::Framing(format!(
            "bit count {} is not a positive multiple of {} (bits/symbol x N)",
            bits.len(),
            block
        )));
    }
    let bps = constellation.bits_per_symbol();
    bits.chunks(block)
        .map(|chunk| {
            let values = chunk
                .chunks(bps)
                .map(|b| constellation.map_bits(b))
                .collect::<Result<Vec<_>>>()?;
            Ok(SymbolVector {
                values,
                avg_symbol_energy: avg_power,
            })
        })
        .collect()
}

/// Hard-slice a stream of symbol vectors back to bits (nearest point).
pub fn demodulate(symbols: &[SymbolVector], constellation: &Constellation) -> Vec<u8> {
    let mut bits = Vec::new();
    for sv in symbols {
        for &y in &sv.values {
            bits.extend_from_slice(constellation.bits_of(constellation.slice(y)));
        }
    }
    bits
}

/// Symbol transmission rate `N / (N + M - 1)`, exact.
pub fn symbol_rate(params: &CodeParams) -> Ratio<u64> {
    Ratio::new(
        params.n_layers as u64,
        (params.n_layers + params.m_slots - 1) as u64,
    )
}

/// Spectral efficiency `M N / (M + N - 1)` in receiver-side symbols per slot,
/// exact. Approaches `min(M, N)` as the other dimension grows.
pub fn spectral_efficiency(params: &CodeParams) -> Ratio<u64> {
    Ratio::new(
        (params.m_slots * params.n_layers) as u64,
        (params.m_slots + params.n_layers - 1) as u64,
    )
}

/// Gross data rate in bit/s for a given per-LED baud rate.
pub fn gross_data_rate(params: &CodeParams, baud_per_led_hz: f64) -> f64 {
    let se = spectral_efficiency(params);
    let se = *se.numer() as f64 / *se.denom() as f64;
    se * baud_per_led_hz * params.modulation.bits_per_symbol() as f64
}
