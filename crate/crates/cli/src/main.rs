//! `pktlat`: experiment runner for the packet-latency toolkit.
//!
//! Subcommands: `simulate` (rate sweep through the pipeline model),
//! `capacity` (maximum-rate prediction table), `analyze` (TX/RX capture
//! pair to reports), `burst-study` (burst x batch CDF grid), `alias-sim`
//! (interrupt-sampling scatter).
//!
//! Exit codes: 0 success, 1 delivery/latency target violated (with
//! `--fail-on-violation`), 2 usage or config error, 3 I/O or parse error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("delivery/latency target violated")]
    Violation,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<pktlat::trace::TraceError> for CliError {
    fn from(e: pktlat::trace::TraceError) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "pktlat", version, about = "Deterministic packet-pipeline latency toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in profile name (overrides the config).
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep rates in kpackets/s, comma separated (e.g. 10,60,120).
    #[arg(long, value_delimiter = ',')]
    rate: Vec<f64>,
    /// Traffic duration in seconds.
    #[arg(long)]
    duration: Option<String>,
    /// Warm-up interval to exclude, in seconds.
    #[arg(long)]
    skip_warmup: Option<String>,
    /// Number of worst-case samples in scatter files.
    #[arg(long)]
    worst_k: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep packet rates through the pipeline simulation.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Packets per burst (1 = CBR).
        #[arg(long)]
        burst: Option<u32>,
        /// Batch size override.
        #[arg(long)]
        batch: Option<u32>,
        /// Replay arrivals from a `counter,time_ps` CSV instead of
        /// generating traffic (mutually exclusive with --rate).
        #[arg(long, conflicts_with = "rate")]
        arrivals: Option<PathBuf>,
        /// Write the generated arrival sequences next to the reports.
        #[arg(long)]
        emit_arrivals: bool,
        /// Exit nonzero when a delivery/latency target is violated.
        #[arg(long)]
        fail_on_violation: bool,
    },
    /// Compute the capacity prediction table.
    Capacity {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Match a TX/RX capture pair and emit the full report set.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// TX-side capture (.pcap or .csv).
        #[arg(long)]
        tx: PathBuf,
        /// RX-side capture (.pcap or .csv).
        #[arg(long)]
        rx: PathBuf,
        /// Row label in the report.
        #[arg(long, default_value = "capture")]
        label: String,
        /// Counter offset into the UDP payload.
        #[arg(long, default_value_t = 0)]
        counter_offset: usize,
        /// Counter width in bytes.
        #[arg(long, default_value_t = 8)]
        counter_width: usize,
        /// Counter byte order: be or le.
        #[arg(long, default_value = "be")]
        counter_endian: String,
        /// UDP destination port filter; 0 disables the filter.
        #[arg(long, default_value_t = 53)]
        udp_port: u16,
        #[arg(long)]
        skip_warmup: Option<String>,
        #[arg(long)]
        worst_k: Option<usize>,
        #[arg(long)]
        fail_on_violation: bool,
    },
    /// Run the burst-size x batch-size study and emit one CDF per pair.
    BurstStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// Burst sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 4, 8, 16, 32, 64])]
        burst: Vec<u32>,
        /// Batch sizes, comma separated.
        #[arg(long = "batch", value_delimiter = ',', default_values_t = vec![4u32, 32])]
        batch: Vec<u32>,
        /// Average rate in kpackets/s.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long)]
        duration: Option<String>,
    },
    /// Interrupt-sampling simulation: constant-rate probes vs the profile's
    /// interrupt schedule, emitted as a worst-case scatter.
    AliasSim {
        #[command(flatten)]
        common: CommonArgs,
        /// Probe rate in kpackets/s.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long)]
        duration: Option<String>,
        /// Baseline latency in microseconds (default: the profile floor).
        #[arg(long)]
        base_latency_us: Option<String>,
        #[arg(long)]
        worst_k: Option<usize>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(name) = &common.profile {
        cfg.profile = config::ProfileSection { name: Some(name.clone()), ..Default::default() };
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn parse_secs_arg(text: &str) -> Result<pktlat::time::Duration, CliError> {
    pktlat::time::parse_secs(text).map_err(CliError::Config)
}

fn apply_sweep_args(cfg: &mut ScenarioConfig, sweep: &SweepArgs) -> Result<(), CliError> {
    if !sweep.rate.is_empty() {
        cfg.traffic.rate_kpps = sweep.rate.clone();
    }
    if let Some(d) = &sweep.duration {
        cfg.traffic.duration_s = config::Decimal(parse_secs_arg(d)?.as_ps());
    }
    if let Some(s) = &sweep.skip_warmup {
        cfg.analysis.warmup_skip_s = config::Decimal(parse_secs_arg(s)?.as_ps());
    }
    if let Some(k) = sweep.worst_k {
        cfg.analysis.worst_k = k;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            sweep,
            burst,
            batch,
            arrivals,
            emit_arrivals,
            fail_on_violation,
        } => {
            let mut cfg = load_config(&common)?;
            apply_sweep_args(&mut cfg, &sweep)?;
            if let Some(b) = burst {
                cfg.traffic.burst_size = b;
            }
            if let Some(b) = batch {
                cfg.profile.batch_size = Some(b);
            }
            let options = commands::SimulateOptions {
                fail_on_violation,
                emit_arrivals,
                arrivals_csv: arrivals,
            };
            commands::simulate(&cfg, &options)
        }
        Command::Capacity { common } => {
            let cfg = load_config(&common)?;
            commands::capacity(&cfg)
        }
        Command::Analyze {
            common,
            tx,
            rx,
            label,
            counter_offset,
            counter_width,
            counter_endian,
            udp_port,
            skip_warmup,
            worst_k,
            fail_on_violation,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = &skip_warmup {
                cfg.analysis.warmup_skip_s = config::Decimal(parse_secs_arg(s)?.as_ps());
            }
            if let Some(k) = worst_k {
                cfg.analysis.worst_k = k;
            }
            let byte_order = match counter_endian.as_str() {
                "be" => pktlat::trace::ByteOrder::Big,
                "le" => pktlat::trace::ByteOrder::Little,
                other => {
                    return Err(CliError::Config(format!(
                        "bad --counter-endian {other:?} (expected be or le)"
                    )))
                }
            };
            let layout = pktlat::trace::CounterLayout {
                payload_offset: counter_offset,
                width: counter_width,
                byte_order,
            };
            commands::analyze(&cfg, &tx, &rx, &label, layout, udp_port, fail_on_violation)
        }
        Command::BurstStudy { common, burst, batch, rate, duration } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = &duration {
                cfg.traffic.duration_s = config::Decimal(parse_secs_arg(d)?.as_ps());
            }
            if cfg.profile.name.is_none() && cfg.profile.transfer_us.is_none() {
                cfg.profile.name = Some("vm-snort-filter".into());
            }
            commands::burst_study(&cfg, &burst, &batch, rate)
        }
        Command::AliasSim { common, rate, duration, base_latency_us, worst_k } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = &duration {
                cfg.traffic.duration_s = config::Decimal(parse_secs_arg(d)?.as_ps());
            }
            if let Some(k) = worst_k {
                cfg.analysis.worst_k = k;
            }
            if cfg.profile.name.is_none() && cfg.profile.transfer_us.is_none() {
                cfg.profile.name = Some("hw-l2fwd".into());
            }
            let base = base_latency_us
                .map(|s| pktlat::time::parse_us(&s).map_err(CliError::Config))
                .transpose()?;
            commands::alias_sim(&cfg, rate, base)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Violation) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
