//! Command-line front end for the sweep engine and analysis reports.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlcsim::analysis::{check_corollary1, estimate_diversity_order};
use vlcsim::harness::{
    emit, run_figure1, run_rate_report, run_sweep, write_records, Figure1Config, OutputFormat,
    SimConfig,
};
use vlcsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vlcsim",
    about = "Link-level Monte Carlo simulator for a layered space-time code \
             over an IM/DD visible-light MISO channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker threads for the sweep (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured BER-vs-power sweep.
    Sweep(CommonArgs),
    /// Run the paired layered-code vs DCO-OFDM comparison.
    Figure1(CommonArgs),
    /// Rate accounting plus a BER sweep per (N, M) pair.
    Rates {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated code sizes, e.g. "32x32,16x32".
        #[arg(long)]
        pairs: String,
    },
    /// Determinant-bound checks over random gain vectors.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of random gain vectors.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// BER-vs-SNR sweep over fading gains with a diversity-order slope fit.
    Diversity(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Framing(_) => {
                    ExitCode::from(2)
                }
                Error::Infeasible(_) => ExitCode::from(3),
                Error::Io(_) => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(common) => {
            let (cfg, format) = load(&common)?;
            let records = run_sweep(&cfg)?;
            output_records(&records, format, common.out.as_deref())
        }
        Command::Figure1(common) => {
            let format: OutputFormat = common.format.parse()?;
            init_pool(common.jobs)?;
            let mut pair = Figure1Config::from_path(&common.config)?;
            if let Some(seed) = common.seed {
                pair.mlps.master_seed = seed;
                pair.ofdm.master_seed = seed;
            }
            let report = run_figure1(&pair)?;
            let mut joint = report.mlps.clone();
            joint.extend(report.ofdm.iter().cloned());
            output_records(&joint, format, common.out.as_deref())?;
            let summary = serde_json::json!({
                "mlps": report.mlps_summary,
                "ofdm": report.ofdm_summary,
            });
            // Keep stdout clean for the records when no output file is given.
            if common.out.is_some() {
                println!("{summary:#}");
            } else {
                eprintln!("{summary:#}");
            }
            Ok(())
        }
        Command::Rates { common, pairs } => {
            let (cfg, format) = load(&common)?;
            let pairs = parse_pairs(&pairs)?;
            let reports = run_rate_report(&pairs, &cfg)?;
            let text = match format {
                OutputFormat::Json => serde_json::to_string_pretty(&reports)
                    .map_err(|e| Error::Config(e.to_string()))?,
                OutputFormat::Csv => {
                    let mut s = String::from(
                        "n,m,symbol_rate,spectral_efficiency,gross_data_rate_bps,\
                         optimum_power_dbm,min_ber,meets_fec\n",
                    );
                    for r in &reports {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            r.n,
                            r.m,
                            r.symbol_rate,
                            r.spectral_efficiency,
                            r.gross_data_rate_bps,
                            r.optimum_power_dbm,
                            r.min_ber,
                            r.meets_fec
                        ));
                    }
                    s
                }
            };
            output_text(&text, common.out.as_deref())
        }
        Command::Bounds { common, trials } => {
            let (cfg, format) = load(&common)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
            let n = cfg.code.n_layers;
            let mut reports = Vec::with_capacity(trials as usize);
            for _ in 0..trials {
                let h: Vec<f64> = (0..n)
                    .map(|_| {
                        let a: f64 = rng.sample(rand_distr::StandardNormal);
                        let b: f64 = rng.sample(rand_distr::StandardNormal);
                        ((a * a + b * b) / 2.0).sqrt()
                    })
                    .collect();
                reports.push(check_corollary1(&h, cfg.code.m_slots)?);
            }
            let violations = reports.iter().filter(|r| !r.upper_holds).count();
            let text = match format {
                OutputFormat::Json => serde_json::to_string_pretty(&reports)
                    .map_err(|e| Error::Config(e.to_string()))?,
                OutputFormat::Csv => {
                    let mut s = String::from(
                        "n,m,det_p,upper,upper_holds,fitted_c_tilde,lower_certificate,\
                         homogeneity_rel_err\n",
                    );
                    for r in &reports {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            r.n,
                            r.m,
                            r.det_p,
                            r.upper,
                            r.upper_holds,
                            r.fitted_c_tilde,
                            r.lower_certificate,
                            r.homogeneity_rel_err
                        ));
                    }
                    s
                }
            };
            output_text(&text, common.out.as_deref())?;
            eprintln!("bounds: {trials} trials, {violations} violations");
            if violations > 0 {
                return Err(Error::InvalidArgument(format!(
                    "{violations} determinant-bound violations"
                )));
            }
            Ok(())
        }
        Command::Diversity(common) => {
            let (cfg, format) = load(&common)?;
            if cfg.channel.fading == vlcsim::channel::Fading::Fixed {
                return Err(Error::Config(
                    "diversity requires a fading channel (fading != FIXED)".into(),
                ));
            }
            let records = run_sweep(&cfg)?;
            output_records(&records, format, common.out.as_deref())?;
            let points: Vec<(f64, f64)> = records.iter().map(|r| (r.snr_db, r.ber)).collect();
            let fit = estimate_diversity_order(&points)?;
            let summary = serde_json::json!({
                "slope": fit.slope,
                "intercept": fit.intercept,
                "points_used": fit.points_used,
                "points_excluded": fit.points_excluded,
                "estimated_diversity_order": -fit.slope,
            })
            .to_string();
            if common.out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(())
        }
    }
}

fn load(common: &CommonArgs) -> Result<(SimConfig, OutputFormat)> {
    let format: OutputFormat = common.format.parse()?;
    init_pool(common.jobs)?;
    let mut cfg = SimConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok((cfg, format))
}

#[cfg(feature = "parallel")]
fn init_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_pool(_jobs: Option<usize>) -> Result<()> {
    Ok(())
}

fn output_records(
    records: &[vlcsim::harness::BerRecord],
    format: OutputFormat,
    out: Option<&std::path::Path>,
) -> Result<()> {
    match out {
        Some(path) => emit(records, format, path),
        None => {
            let stdout = std::io::stdout();
            write_records(records, format, stdout.lock())
        }
    }
}

fn output_text(text: &str, out: Option<&std::path::Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let (n, m) = item
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("bad pair '{item}', expected NxM")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad layer count in '{item}'")))?;
        let m: usize = m
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad slot count in '{item}'")))?;
        pairs.push((n, m));
    }
    if pairs.is_empty() {
        return Err(Error::Config("no pairs given".into()));
    }
    Ok(pairs)
}
