//! Comparative figure, rate-claim, and file-emission reports built on the
//! sweep engine.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::codec::{gross_data_rate, spectral_efficiency, symbol_rate};
use crate::{Error, Result};

use super::config::{Figure1Config, SimConfig};
use super::sweep::{run_sweep, BerRecord};

/// FEC limit: BER below this is treated as error-free after coding.
pub const FEC_THRESHOLD: f64 = 2e-3;

/// Per-scheme digest of one sweep curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub optimum_power_dbm: f64,
    pub min_ber: f64,
    /// Lowest and highest sweep powers meeting the FEC limit.
    pub fec_interval_dbm: Option<(f64, f64)>,
    /// True when the BER past the clip level rises at least 10x above the
    /// resolved minimum of the curve.
    pub clip_onset_degraded: bool,
}

/// Joint power-sweep comparison of the layered code against DCO-OFDM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure1Report {
    pub mlps: Vec<BerRecord>,
    pub ofdm: Vec<BerRecord>,
    pub mlps_summary: SchemeSummary,
    pub ofdm_summary: SchemeSummary,
}

/// Summarize one curve. `clip_level_dbm` marks where LED clipping starts;
/// a zero-error record is resolved to its binomial floor `1/bits` before the
/// degradation ratio is taken.
pub fn summarize(records: &[BerRecord], clip_level_dbm: Option<f64>) -> Result<SchemeSummary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to summarize".into()));
    }
    let resolved = |r: &BerRecord| r.ber.max(1.0 / r.bits_sent as f64);
    let best = records
        .iter()
        .min_by(|a, b| a.ber.partial_cmp(&b.ber).unwrap())
        .expect("nonempty");
    let floor = records.iter().map(resolved).fold(f64::INFINITY, f64::min);
    let passing: Vec<f64> = records
        .iter()
        .filter(|r| r.ber < FEC_THRESHOLD)
        .map(|r| r.power_dbm)
        .collect();
    let fec_interval = passing
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        });
    let clip_onset_degraded = clip_level_dbm.is_some_and(|clip| {
        records
            .iter()
            .filter(|r| r.power_dbm > clip)
            .map(resolved)
            .fold(0.0f64, f64::max)
            >= 10.0 * floor
    });
    Ok(SchemeSummary {
        scheme: records[0].scheme.clone(),
        optimum_power_dbm: best.power_dbm,
        min_ber: best.ber,
        fec_interval_dbm: fec_interval,
        clip_onset_degraded,
    })
}

/// Run both sweeps of a comparative figure configuration.
pub fn run_figure1(cfg: &Figure1Config) -> Result<Figure1Report> {
    cfg.validate()?;
    let mlps = run_sweep(&cfg.mlps)?;
    let ofdm = run_sweep(&cfg.ofdm)?;
    let mlps_summary = summarize(&mlps, cfg.mlps.channel.clip_level_dbm)?;
    let ofdm_summary = summarize(&ofdm, cfg.ofdm.channel.clip_level_dbm)?;
    Ok(Figure1Report {
        mlps,
        ofdm,
        mlps_summary,
        ofdm_summary,
    })
}

/// Rate accounting plus a simulated BER check for one code size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub m: usize,
    /// Symbols per slot, `N / (N + M - 1)`.
    pub symbol_rate: f64,
    /// Bits per slot per bit-per-symbol, `M N / (M + N - 1)`.
    pub spectral_efficiency: f64,
    pub gross_data_rate_bps: f64,
    pub optimum_power_dbm: f64,
    pub min_ber: f64,
    /// True when the best sweep point clears the FEC limit.
    pub meets_fec: bool,
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Evaluate rate formulas and a BER sweep for each `(N, M)` pair, reusing the
/// base configuration's channel, receiver, and sweep settings. The gain
/// vector is resized to each pair's layer count by repeating its first entry.
pub fn run_rate_report(pairs: &[(usize, usize)], base: &SimConfig) -> Result<Vec<RateReport>> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no (N, M) pairs given".into()));
    }
    let mut reports = Vec::with_capacity(pairs.len());
    for &(n, m) in pairs {
        let mut cfg = base.clone();
        cfg.code.n_layers = n;
        cfg.code.m_slots = m;
        let fill = base.channel.gains.first().copied().unwrap_or(1.0);
        cfg.channel.gains = vec![fill; n];
        let records = run_sweep(&cfg)?;
        let summary = summarize(&records, cfg.channel.clip_level_dbm)?;
        reports.push(RateReport {
            n,
            m,
            symbol_rate: ratio_to_f64(symbol_rate(&cfg.code)),
            spectral_efficiency: ratio_to_f64(spectral_efficiency(&cfg.code)),
            gross_data_rate_bps: gross_data_rate(&cfg.code, cfg.baud_per_led_hz),
            optimum_power_dbm: summary.optimum_power_dbm,
            min_ber: summary.min_ber,
            meets_fec: summary.min_ber < FEC_THRESHOLD,
        });
    }
    Ok(reports)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format '{other}', expected csv or json"
            ))),
        }
    }
}

/// Schema version stamped into JSON result files.
pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct JsonEnvelope {
    schema_version: u32,
    records: Vec<BerRecord>,
}

const CSV_HEADER: [&str; 10] = [
    "scheme", "n", "m", "power_dbm", "snr_db", "bits", "errors", "ber", "stderr", "seed",
];

/// Serialize records to a writer in a stable, plot-ready column order.
pub fn write_records<W: Write>(
    records: &[BerRecord],
    format: OutputFormat,
    writer: W,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(CSV_HEADER)
                .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
            for r in records {
                w.write_record([
                    r.scheme.clone(),
                    r.n.to_string(),
                    r.m.to_string(),
                    r.power_dbm.to_string(),
                    r.snr_db.to_string(),
                    r.bits_sent.to_string(),
                    r.bit_errors.to_string(),
                    r.ber.to_string(),
                    r.ber_stderr.to_string(),
                    r.seed.to_string(),
                ])
                .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let envelope = JsonEnvelope {
                schema_version: RESULT_SCHEMA_VERSION,
                records: records.to_vec(),
            };
            serde_json::to_writer_pretty(writer, &envelope)
                .map_err(|e| Error::Config(format!("json write failed: {e}")))?;
        }
    }
    Ok(())
}

/// Write records to a file; refuses to create the file for an empty list.
pub fn emit(records: &[BerRecord], format: OutputFormat, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    let file = std::fs::File::create(path)?;
    write_records(records, format, std::io::BufWriter::new(file))
}

/// Read a JSON result file back into records (exact-field roundtrip).
pub fn read_json(path: &Path) -> Result<Vec<BerRecord>> {
    let text = std::fs::read_to_string(path)?;
    let envelope: JsonEnvelope =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad result file: {e}")))?;
    if envelope.schema_version != RESULT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema version {}",
            envelope.schema_version
        )));
    }
    Ok(envelope.records)
}
