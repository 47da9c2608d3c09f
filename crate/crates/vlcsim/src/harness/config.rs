//! Sweep configuration: deserialized from TOML or JSON files whose keys
//! mirror the struct field names exactly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelModel;
use crate::codec::{CodeParams, Modulation};
use crate::ofdm::OfdmParams;
use crate::receiver::MLSE_MAX_STATES;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MLPS_LSTBC")]
    MlpsLstbc,
    #[serde(rename = "DCO_OFDM")]
    DcoOfdm,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::MlpsLstbc => "MLPS_LSTBC",
            Scheme::DcoOfdm => "DCO_OFDM",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiverMode {
    #[serde(rename = "ZF_GENIE")]
    ZfGenie,
    #[serde(rename = "ZF_BLIND")]
    ZfBlind,
    #[serde(rename = "MLSE")]
    Mlse,
}

/// Electrical power sweep in dBm, inclusive of `stop` when it lands on the
/// grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for PowerSweep {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 60.0,
            step: 2.0,
        }
    }
}

impl PowerSweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

fn default_power_sweep() -> PowerSweep {
    PowerSweep::default()
}
fn default_min_bit_errors() -> u64 {
    100
}
fn default_max_bits() -> u64 {
    10_000_000
}
fn default_baud() -> f64 {
    100e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub code: CodeParams,
    pub channel: ChannelModel,
    pub receiver_mode: ReceiverMode,
    #[serde(default = "default_power_sweep")]
    pub power_sweep_dbm: PowerSweep,
    /// Early-stop target per point.
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    /// Hard bit budget per point.
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    pub master_seed: u64,
    #[serde(default = "default_baud")]
    pub baud_per_led_hz: f64,
    /// Baseline transceiver parameters; required when `scheme = DCO_OFDM`.
    #[serde(default)]
    pub ofdm: Option<OfdmParams>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.code.validate().map_err(config_err)?;
        self.channel.validate(&self.code).map_err(config_err)?;
        let sweep = &self.power_sweep_dbm;
        if !(sweep.start <= sweep.stop) {
            return Err(Error::Config("power sweep start must be <= stop".into()));
        }
        if !(sweep.step > 0.0) {
            return Err(Error::Config("power sweep step must be > 0".into()));
        }
        if self.max_bits < 1_000 {
            return Err(Error::Config("max_bits must be >= 1000".into()));
        }
        if self.min_bit_errors == 0 {
            return Err(Error::Config("min_bit_errors must be >= 1".into()));
        }
        if !(self.baud_per_led_hz > 0.0) {
            return Err(Error::Config("baud_per_led_hz must be > 0".into()));
        }
        match self.scheme {
            Scheme::MlpsLstbc => {
                if self.receiver_mode == ReceiverMode::ZfBlind
                    && self.code.modulation != Modulation::Ook
                {
                    return Err(Error::Config(
                        "ZF_BLIND thresholding supports OOK only".into(),
                    ));
                }
                if self.receiver_mode == ReceiverMode::Mlse && self.code.m_slots >= 2 {
                    let d = self.code.modulation.order() as u64;
                    let feasible = d
                        .checked_pow(self.code.m_slots as u32 - 1)
                        .is_some_and(|s| s <= MLSE_MAX_STATES as u64);
                    if !feasible {
                        return Err(Error::Infeasible(format!(
                            "MLSE needs {}^{} trellis states, cap is {MLSE_MAX_STATES}",
                            d,
                            self.code.m_slots - 1
                        )));
                    }
                }
            }
            Scheme::DcoOfdm => {
                let ofdm = self.ofdm.as_ref().ok_or_else(|| {
                    Error::Config("scheme DCO_OFDM requires an [ofdm] section".into())
                })?;
                ofdm.validate().map_err(config_err)?;
                if let Some(lpf) = &self.channel.lpf {
                    if ofdm.sample_rate_hz <= 2.0 * lpf.bandwidth_hz {
                        return Err(Error::Config(format!(
                            "ofdm sample rate {} must exceed 2B = {}",
                            ofdm.sample_rate_hz,
                            2.0 * lpf.bandwidth_hz
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Stable hex digest of the canonical JSON form, recorded in every
    /// emitted record so result files are traceable to their configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let cfg: SimConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad config: {e}")))?;
            cfg.validate()?;
            Ok(cfg)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    }
}

/// Paired configuration for the comparative power-sweep figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure1Config {
    pub mlps: SimConfig,
    pub ofdm: SimConfig,
}

impl Figure1Config {
    pub fn validate(&self) -> Result<()> {
        self.mlps.validate()?;
        self.ofdm.validate()?;
        if self.mlps.scheme != Scheme::MlpsLstbc || self.ofdm.scheme != Scheme::DcoOfdm {
            return Err(Error::Config(
                "figure1 needs one MLPS_LSTBC and one DCO_OFDM config".into(),
            ));
        }
        if self.mlps.power_sweep_dbm != self.ofdm.power_sweep_dbm {
            return Err(Error::Config("mismatched power sweeps".into()));
        }
        let (a, b) = (&self.mlps.channel, &self.ofdm.channel);
        if a.noise_power_dbm != b.noise_power_dbm
            || a.clip_level_dbm != b.clip_level_dbm
            || a.lpf.as_ref().map(|l| l.bandwidth_hz) != b.lpf.as_ref().map(|l| l.bandwidth_hz)
        {
            return Err(Error::Config(
                "figure1 configs must share noise, clip, and bandwidth".into(),
            ));
        }
        Ok(())
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Figure1Config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
