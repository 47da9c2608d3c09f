//! Configuration-driven Monte Carlo engine: power sweeps per scheme, error
//! counting with early stopping, comparative and rate reports, and stable
//! CSV/JSON emission.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{Figure1Config, PowerSweep, ReceiverMode, Scheme, SimConfig};
pub use report::{
    emit, read_json, run_figure1, run_rate_report, summarize, write_records, Figure1Report,
    OutputFormat, RateReport, SchemeSummary, FEC_THRESHOLD, RESULT_SCHEMA_VERSION,
};
pub use sweep::{run_point, run_sweep, run_sweep_serial, BerRecord, BLIND_PREAMBLE_CODEWORDS};
