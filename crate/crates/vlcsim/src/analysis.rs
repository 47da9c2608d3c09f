//! Closed-form error-probability expressions for the ZF receiver, the
//! exponential upper bound, the averaged diversity bound, determinant-bound
//! checks on the Gram matrix, and diversity-order estimation from measured
//! BER curves.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn craig_integral(x: f64, upper: f64) -> f64 {
    // angle-integral form: (1/pi) * int_0^upper exp(-x^2 / (2 sin^2 theta))
    let f = |theta: f64| -> f64 {
        if theta == 0.0 {
            if x == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            let s = theta.sin();
            (-x * x / (2.0 * s * s)).exp()
        }
    };
    simpson(f, 0.0, upper, 4096) / std::f64::consts::PI
}

/// `Q(x)` by numeric quadrature of the angle-integral form over `[0, pi/2]`.
pub fn craig_q(x: f64) -> f64 {
    craig_integral(x, std::f64::consts::FRAC_PI_2)
}

/// `Q^2(x)` by quadrature of the angle-integral form over `[0, pi/4]`.
pub fn craig_q2(x: f64) -> f64 {
    craig_integral(x, std::f64::consts::FRAC_PI_4)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Parameters of the per-subchannel SEP expressions.
///
/// `noise_variance` is the per-real-dimension noise variance; the Monte Carlo
/// QAM path adds independent Gaussian noise of this variance on each of the
/// real and imaginary components.
#[derive(Clone, Debug)]
pub struct SepParams {
    pub constellation_size: u32,
    pub symbol_energy: f64,
    pub noise_variance: f64,
    /// Gram matrix `P = G' G` of the effective channel `G = T(e_M) diag(h)`.
    pub gram: DMatrix<f64>,
    /// Diagonal of `P^-1`.
    pub p_inv_diag: Vec<f64>,
    /// `a = 3 E_s / (2 (D - 1) sigma^2)`.
    pub snr_coefficient: f64,
}

impl SepParams {
    pub fn new(
        constellation_size: u32,
        symbol_energy: f64,
        noise_variance: f64,
        gains: &[f64],
        m_slots: usize,
    ) -> Result<Self> {
        let d = constellation_size;
        let sqrt_d = (d as f64).sqrt();
        if d < 4 || sqrt_d.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "constellation size must be a perfect square >= 4, got {d}"
            )));
        }
        if !(symbol_energy > 0.0 && noise_variance > 0.0) {
            return Err(Error::InvalidArgument(
                "symbol energy and noise variance must be positive".into(),
            ));
        }
        let g = crate::channel::effective_channel(gains, m_slots)?;
        let gram = g.transpose() * &g;
        let inv = gram.clone().try_inverse().ok_or_else(|| {
            Error::InvalidArgument("Gram matrix is singular (zero gain?)".into())
        })?;
        let p_inv_diag: Vec<f64> = (0..gram.nrows()).map(|k| inv[(k, k)]).collect();
        let snr_coefficient =
            3.0 * symbol_energy / (2.0 * (d as f64 - 1.0) * noise_variance);
        Ok(Self {
            constellation_size,
            symbol_energy,
            noise_variance,
            gram,
            p_inv_diag,
            snr_coefficient,
        })
    }

    pub fn n_subchannels(&self) -> usize {
        self.p_inv_diag.len()
    }

    fn arg_squared(&self, k: usize) -> f64 {
        self.snr_coefficient / self.p_inv_diag[k]
    }
}

/// Exact SEP of the ZF receiver on subchannel `k` for square QAM:
/// `4 c Q(sqrt(g)) - 4 c^2 Q^2(sqrt(g))` with `c = 1 - 1/sqrt(D)` and
/// `g = 3 E_s / (2 (D-1) sigma^2 [P^-1]_kk)`.
pub fn sep_qam_zf(params: &SepParams, k: usize) -> Result<f64> {
    if k >= params.n_subchannels() {
        return Err(Error::InvalidArgument(format!(
            "subchannel index {k} out of range"
        )));
    }
    let d = params.constellation_size as f64;
    let c = 1.0 - 1.0 / d.sqrt();
    let q = q_function(params.arg_squared(k).sqrt());
    Ok(4.0 * c * q - 4.0 * c * c * q * q)
}

/// Exponential upper bound `((D-1)/D) exp(-g/2)`; always dominates
/// [`sep_qam_zf`]. The `1/2` is the Craig-kernel factor: bounding
/// `exp(-g / (2 sin^2 theta))` by its value at `theta = pi/2` on both
/// segments of the split integral gives exactly this prefactor and exponent.
pub fn sep_upper_bound(params: &SepParams, k: usize) -> Result<f64> {
    if k >= params.n_subchannels() {
        return Err(Error::InvalidArgument(format!(
            "subchannel index {k} out of range"
        )));
    }
    let d = params.constellation_size as f64;
    Ok((d - 1.0) / d * (-params.arg_squared(k) / 2.0).exp())
}

/// The two forms of the fading-averaged SEP bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AveragedSepBound {
    /// `((D-1)/D) det(I + a C M Sigma)^-1`.
    pub det_form: f64,
    /// `((D-1)/D) det(C M Sigma)^-1 a^-N`.
    pub asymptote: f64,
}

/// Evaluate the averaged bound and its `a^-N` asymptote over the gain
/// ensemble with covariance `sigma`.
pub fn averaged_sep_bound(
    constellation_size: u32,
    a: f64,
    c: f64,
    m_slots: usize,
    sigma: &DMatrix<f64>,
) -> Result<AveragedSepBound> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::InvalidArgument("Sigma must be square".into()));
    }
    let chol = sigma.clone().cholesky().ok_or_else(|| {
        Error::InvalidArgument("Sigma must be positive definite".into())
    })?;
    let det_sigma = chol.determinant();
    let d = constellation_size as f64;
    let prefactor = (d - 1.0) / d;
    let cm = c * m_slots as f64;
    let scaled = DMatrix::identity(n, n) + sigma * (a * cm);
    let det = scaled.determinant();
    Ok(AveragedSepBound {
        det_form: prefactor / det,
        asymptote: prefactor / (cm.powi(n as i32) * det_sigma) * a.powf(-(n as f64)),
    })
}

/// Numeric verification report for the determinant bounds on `P`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheckReport {
    pub n: usize,
    pub m: usize,
    pub det_p: f64,
    /// `(M/N)^N ||h||^{2N}` — provable upper bound on `det P`.
    pub upper: f64,
    pub upper_holds: bool,
    /// Fitted existential constant: `det P / (M^N prod |h_i|^2)`.
    pub fitted_c_tilde: f64,
    /// `C M^N ||h||^{2N}` with `C = fitted_c_tilde * prod |h_i|^2 / ||h||^{2N}`.
    pub lower_certificate: f64,
    pub diag_inverse_entries: Vec<f64>,
    /// Relative error of `det P(c h) = c^{2N} det P(h)` at `c = 2`.
    pub homogeneity_rel_err: f64,
}

/// Check the computable parts of the determinant bounds for a gain vector.
pub fn check_corollary1(h: &[f64], m: usize) -> Result<BoundCheckReport> {
    let n = h.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty gain vector".into()));
    }
    if h.contains(&0.0) {
        return Err(Error::InvalidArgument("zero gain".into()));
    }
    let gram_of = |gains: &[f64]| -> Result<DMatrix<f64>> {
        let g = crate::channel::effective_channel(gains, m)?;
        Ok(g.transpose() * g)
    };
    let p = gram_of(h)?;
    let det_p = p.determinant();
    let inv = p.clone().try_inverse().ok_or_else(|| {
        Error::InvalidArgument("Gram matrix is singular".into())
    })?;
    let diag_inverse_entries: Vec<f64> = (0..n).map(|k| inv[(k, k)]).collect();
    let norm2: f64 = h.iter().map(|v| v * v).sum();
    let upper = (m as f64 / n as f64).powi(n as i32) * norm2.powi(n as i32);
    let prod_h2: f64 = h.iter().map(|v| v * v).product();
    let m_pow_n = (m as f64).powi(n as i32);
    let fitted_c_tilde = det_p / (m_pow_n * prod_h2);
    let c = fitted_c_tilde * prod_h2 / norm2.powi(n as i32);
    let lower_certificate = c * m_pow_n * norm2.powi(n as i32);
    // Homogeneity of degree 2N.
    let scaled: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
    let det_scaled = gram_of(&scaled)?.determinant();
    let expect = 4f64.powi(n as i32) * det_p;
    let homogeneity_rel_err = ((det_scaled - expect) / expect).abs();
    Ok(BoundCheckReport {
        n,
        m,
        det_p,
        upper,
        upper_holds: det_p <= upper * (1.0 + 1e-10),
        fitted_c_tilde,
        lower_certificate,
        diag_inverse_entries,
        homogeneity_rel_err,
    })
}

/// Least-squares fit of a measured BER curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiversityFit {
    /// Slope of `log10(ber)` against `snr_db / 10`; the high-SNR magnitude is
    /// the operational diversity order.
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Fit the log-log BER slope over a (snr_dB, ber) window. Zero-BER points
/// (censored by trial count) are excluded.
pub fn estimate_diversity_order(points: &[(f64, f64)]) -> Result<DiversityFit> {
    let mut excluded = 0usize;
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, ber)| {
            if *ber > 0.0 {
                true
            } else {
                excluded += 1;
                false
            }
        })
        .copied()
        .collect();
    if usable.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 positive-BER points, have {}",
            usable.len()
        )));
    }
    for w in usable.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidArgument(
                "SNR points must be strictly ascending".into(),
            ));
        }
    }
    let n = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|(snr, _)| snr / 10.0).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, ber)| ber.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(DiversityFit {
        slope,
        intercept: my - slope * mx,
        points_used: usable.len(),
        points_excluded: excluded,
    })
}
