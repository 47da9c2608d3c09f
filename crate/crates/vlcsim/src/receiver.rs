//! Detection: zero-forcing equalization built from the code structure alone
//! (no channel state needed), maximum-likelihood sequence estimation over the
//! artificial convolutive channel, and constellation slicing.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ReceivedVector;
use crate::codec::{conv_matrix, CodeParams, Constellation, Modulation};
use crate::{Error, Result};

/// Trellis state cap for MLSE: constellation size ^ (M - 1).
pub const MLSE_MAX_STATES: usize = 4096;

/// Left pseudo-inverse of the all-ones convolution matrix for a given (N, M).
///
/// Depends only on the code dimensions, never on the channel gains.
#[derive(Clone, Debug)]
pub struct ZfEqualizer {
    pub n_layers: usize,
    pub m_slots: usize,
    /// `N x (N+M-1)` matrix `(T' T)^-1 T'`.
    pub pseudo_inverse: DMatrix<f64>,
    /// Diagonal of `(T' T)^-1`: per-subchannel noise enhancement.
    pub noise_enhancement: Vec<f64>,
}

type ZfCache = Mutex<HashMap<(usize, usize), Arc<ZfEqualizer>>>;

fn zf_cache() -> &'static ZfCache {
    static CACHE: OnceLock<ZfCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Build (or fetch from the per-process cache) the ZF equalizer for a code.
pub fn build_zf(code: &CodeParams) -> Arc<ZfEqualizer> {
    let key = (code.n_layers, code.m_slots);
    if let Some(eq) = zf_cache().lock().unwrap().get(&key) {
        return Arc::clone(eq);
    }
    let eq = Arc::new(compute_zf(code.n_layers, code.m_slots));
    zf_cache()
        .lock()
        .unwrap()
        .insert(key, Arc::clone(&eq));
    eq
}

fn compute_zf(n: usize, m: usize) -> ZfEqualizer {
    let t = conv_matrix(&vec![1.0; m], n).expect("valid dims");
    let svd = t.clone().svd(true, true);
    let pinv = svd
        .pseudo_inverse(1e-12)
        .expect("banded convolution matrix has full column rank");
    let gram = t.transpose() * &t;
    let gram_inv = gram
        .cholesky()
        .expect("T'T is positive definite")
        .inverse();
    let noise_enhancement: Vec<f64> = (0..n).map(|k| gram_inv[(k, k)]).collect();
    // The identity pinv * T = I is the contract; condition of T'T grows with
    // M so assert rather than trust.
    let residual = (&pinv * &t - DMatrix::<f64>::identity(n, n)).amax();
    assert!(
        residual <= 1e-9,
        "ZF identity residual {residual} exceeds 1e-9 for N={n}, M={m}"
    );
    ZfEqualizer {
        n_layers: n,
        m_slots: m,
        pseudo_inverse: pinv,
        noise_enhancement,
    }
}

/// Per-codeword detection output.
#[derive(Clone, Debug)]
pub struct DetectionResult {
    /// Detected constellation points, one per layer.
    pub symbol_estimates: Vec<Complex64>,
    pub hard_bits: Vec<u8>,
    /// Post-equalization decision statistic `y_k` per layer.
    pub per_symbol_metric: Vec<Complex64>,
}

/// How the per-subchannel statistic is sliced.
pub enum SlicingMode<'a> {
    /// Genie channel knowledge: slice `y_k / h_k` against the constellation.
    Genie(&'a [f64]),
    /// Blind per-subchannel thresholds (OOK only): decide `y_k > t_k`.
    Blind(&'a [f64]),
}

/// Nearest constellation point for a gain-scaled statistic. Ties break to the
/// lower point index (the zero level for OOK).
pub fn slice(y: Complex64, constellation: &Constellation, gain: f64) -> (Complex64, Vec<u8>) {
    let idx = constellation.slice(y / gain);
    (
        constellation.point(idx),
        constellation.bits_of(idx).to_vec(),
    )
}

/// Zero-forcing detection: equalize, then slice each subchannel independently.
pub fn zf_detect(
    r: &ReceivedVector,
    eq: &ZfEqualizer,
    mode: SlicingMode<'_>,
    constellation: &Constellation,
) -> Result<DetectionResult> {
    let n = eq.n_layers;
    let span = n + eq.m_slots - 1;
    if r.samples.len() != span {
        return Err(Error::InvalidArgument(format!(
            "received vector length {} != N+M-1 = {span}",
            r.samples.len()
        )));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let row = eq.pseudo_inverse.row(k);
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &sample) in r.samples.iter().enumerate() {
            acc += row[t] * sample;
        }
        y[k] = acc;
    }

    let mut symbol_estimates = Vec::with_capacity(n);
    let mut hard_bits = Vec::with_capacity(n * constellation.bits_per_symbol());
    match mode {
        SlicingMode::Genie(h) => {
            if h.len() != n {
                return Err(Error::InvalidArgument(
                    "gain vector length mismatch".into(),
                ));
            }
            for k in 0..n {
                let (point, bits) = slice(y[k], constellation, h[k]);
                symbol_estimates.push(point);
                hard_bits.extend(bits);
            }
        }
        SlicingMode::Blind(thresholds) => {
            if constellation.modulation != Modulation::Ook {
                return Err(Error::InvalidArgument(
                    "blind thresholding supports OOK only".into(),
                ));
            }
            if thresholds.len() != n {
                return Err(Error::InvalidArgument(
                    "threshold vector length mismatch".into(),
                ));
            }
            for k in 0..n {
                let idx = usize::from(y[k].re > thresholds[k]);
                symbol_estimates.push(constellation.point(idx));
                hard_bits.extend_from_slice(constellation.bits_of(idx));
            }
        }
    }

    Ok(DetectionResult {
        symbol_estimates,
        hard_bits,
        per_symbol_metric: y,
    })
}

/// Blind OOK thresholds from a preamble window: half the empirical 90th
/// percentile of `|y_k|` per subchannel.
pub fn blind_thresholds(preamble: &[Vec<f64>]) -> Result<Vec<f64>> {
    if preamble.is_empty() {
        return Err(Error::InvalidArgument("empty preamble".into()));
    }
    let n = preamble[0].len();
    let mut thresholds = Vec::with_capacity(n);
    for k in 0..n {
        let mut mags: Vec<f64> = preamble.iter().map(|cw| cw[k].abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((mags.len() as f64 * 0.9).ceil() as usize).saturating_sub(1);
        thresholds.push(mags[idx] / 2.0);
    }
    Ok(thresholds)
}

/// MLSE over the moving-sum channel with per-LED gains and perfect CSIR.
///
/// State is the last `M - 1` symbol decisions; the branch metric at slot `t`
/// is `|r_t - sum over active layers of h_i * s_i|^2`. Returns the hard bits
/// of the maximum-likelihood symbol sequence.
pub fn mlse_detect(
    r: &[Complex64],
    h: &[f64],
    code: &CodeParams,
    constellation: &Constellation,
) -> Result<Vec<u8>> {
    let n = code.n_layers;
    let m = code.m_slots;
    let span = code.span();
    if r.len() != span {
        return Err(Error::InvalidArgument(format!(
            "received vector length {} != N+M-1 = {span}",
            r.len()
        )));
    }
    if h.len() != n {
        return Err(Error::InvalidArgument("gain vector length mismatch".into()));
    }
    let d = constellation.size();
    if m >= 2 {
        let states = (d as u64).checked_pow(m as u32 - 1);
        match states {
            Some(s) if s <= MLSE_MAX_STATES as u64 => {}
            _ => {
                return Err(Error::Infeasible(format!(
                    "MLSE needs D^(M-1) = {d}^{} trellis states, cap is {MLSE_MAX_STATES}",
                    m - 1
                )));
            }
        }
    }
    let points = constellation.points();

    if m == 1 {
        // Memoryless channel: per-symbol ML equals nearest-neighbor slicing.
        let mut bits = Vec::with_capacity(n * constellation.bits_per_symbol());
        for t in 0..n {
            let (_, b) = slice(r[t], constellation, h[t]);
            bits.extend(b);
        }
        return Ok(bits);
    }

    // Survivor paths keyed by the symbols still visible to future slots.
    let mut survivors: HashMap<Vec<usize>, (f64, Vec<usize>)> = HashMap::new();
    survivors.insert(Vec::new(), (0.0, Vec::new()));
    for t in 0..span {
        let mut expanded: Vec<(f64, Vec<usize>)> = Vec::new();
        if t < n {
            for (cost, path) in survivors.values() {
                for sym in 0..d {
                    let mut p = path.clone();
                    p.push(sym);
                    expanded.push((*cost, p));
                }
            }
        } else {
            expanded.extend(survivors.values().cloned());
        }
        let lo = t.saturating_sub(m - 1);
        let hi = (n - 1).min(t);
        let mut next: HashMap<Vec<usize>, (f64, Vec<usize>)> = HashMap::new();
        for (mut cost, path) in expanded {
            let mut pred = Complex64::new(0.0, 0.0);
            for i in lo..=hi {
                pred += h[i] * points[path[i]];
            }
            cost += (r[t] - pred).norm_sqr();
            // Symbols with index >= t - M + 2 remain active at later slots.
            let key_start = (t + 2).saturating_sub(m).min(path.len());
            let key = path[key_start..].to_vec();
            match next.get(&key) {
                Some((best, _)) if *best <= cost => {}
                _ => {
                    next.insert(key, (cost, path));
                }
            }
        }
        survivors = next;
    }
    let (_, best_path) = survivors
        .into_values()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least one survivor");
    let mut bits = Vec::with_capacity(n * constellation.bits_per_symbol());
    for sym in best_path {
        bits.extend_from_slice(constellation.bits_of(sym));
    }
    Ok(bits)
}
