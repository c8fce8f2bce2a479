//! Subcommand implementations: run the core, write plot-ready CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use pktlat::capacity::{evaluate, predict_overload, OverloadPrediction};
use pktlat::interrupts::build_interrupt_schedule;
use pktlat::profiles;
use pktlat::report::{
    capacity_csv, cdf_csv, report_csv, samples_csv, scatter_csv, CapacityRow, ReportRow,
};
use pktlat::sim::simulate_interrupt_sampling;
use pktlat::stats::{
    empirical_cdf, standard_levels, urllc_check, worst_k, LatencyDistribution, UrllcVerdict,
};
use pktlat::time::Duration;
use pktlat::trace::{
    match_traces, read_csv, read_pcap_pair, warmup_filter, CaptureOptions, CounterLayout,
};
use pktlat::traffic::{generate, TrafficSpec};

use crate::config::ScenarioConfig;
use crate::CliError;

fn out_dir(cfg: &ScenarioConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "out".into()));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn check_verdict(
    cfg: &ScenarioConfig,
    report: &pktlat::stats::PercentileReport,
    label: &str,
) -> Result<bool, CliError> {
    let requirement = cfg.urllc.requirement()?;
    let verdict =
        urllc_check(report, &requirement).map_err(|e| CliError::Config(e.to_string()))?;
    match verdict {
        UrllcVerdict::Compliant => {
            println!("{label}: compliant");
            Ok(true)
        }
        UrllcVerdict::Violated(reasons) => {
            for r in &reasons {
                println!("{label}: violated: {r}");
            }
            Ok(false)
        }
    }
}

/// Controls for the `simulate` subcommand beyond the scenario config.
#[derive(Debug, Default)]
pub struct SimulateOptions {
    pub fail_on_violation: bool,
    /// Also write each generated arrival sequence as `counter,time_ps` CSV.
    pub emit_arrivals: bool,
    /// Replay this arrival CSV instead of generating traffic.
    pub arrivals_csv: Option<PathBuf>,
}

/// Rate sweep through the pipeline model. Per rate: one table row, a
/// worst-case scatter file, raw samples, and a delivery/latency verdict.
pub fn simulate(cfg: &ScenarioConfig, options: &SimulateOptions) -> Result<(), CliError> {
    let replay = match &options.arrivals_csv {
        Some(path) => {
            let records = read_csv(path)?;
            let seq = pktlat::traffic::ArrivalSequence::from_records(&records)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if seq.is_empty() {
                return Err(CliError::Config(format!("{}: empty sequence", path.display())));
            }
            Some(seq)
        }
        None => {
            cfg.validate_sweep()?;
            None
        }
    };
    let profile = cfg.profile.build()?;
    let dir = out_dir(cfg)?;
    let warmup = cfg.analysis.warmup_skip_s.duration();
    let mut rows = Vec::new();
    let mut all_compliant = true;

    let sweep: Vec<(u64, pktlat::traffic::ArrivalSequence)> = match replay {
        Some(seq) => vec![(arrival_rate(&seq), seq)],
        None => cfg
            .sweep_pps()
            .into_iter()
            .map(|rate_pps| {
                let spec = TrafficSpec {
                    rate_pps,
                    burst_size: cfg.traffic.burst_size,
                    duration: cfg.traffic.duration_s.duration(),
                    frame_size: cfg.traffic.frame_size,
                    link_speed_bps: cfg.traffic.link_speed_bps,
                };
                generate(&spec)
                    .map(|seq| (rate_pps, seq))
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
    };

    for (rate_pps, arrivals) in sweep {
        let result = simulate_core(&profile, &arrivals)?;
        let dist = result.warmup_filtered(warmup);
        if dist.is_empty() {
            return Err(CliError::Config(format!(
                "no samples left after warm-up at {rate_pps} pps"
            )));
        }
        let report = dist.report(&standard_levels()).map_err(|e| CliError::Config(e.to_string()))?;
        let rate_label = pktlat::report::format_rate_kpps(rate_pps);

        let scatter = worst_k(&dist, cfg.analysis.worst_k, Duration::ZERO);
        write(&dir.join(format!("scatter_{rate_label}kpps.csv")), &scatter_csv(&scatter))?;
        if cfg.output.emit_samples {
            write(&dir.join(format!("samples_{rate_label}kpps.csv")), &samples_csv(&dist))?;
        }
        if options.emit_arrivals {
            write(
                &dir.join(format!("arrivals_{rate_label}kpps.csv")),
                &pktlat::trace::csv_string(&arrivals.to_records()),
            )?;
        }
        println!(
            "{} @ {rate_label} kpps: median {} us, max {} us, loss {}",
            profile.label,
            pktlat::report::format_us_tenths(
                report.value_at(pktlat::stats::Level::from_percent(50.0).unwrap()).unwrap()
            ),
            pktlat::report::format_us_tenths(report.max()),
            pktlat::report::format_loss(report.drop_count(), report.tx_count()),
        );
        all_compliant &=
            check_verdict(cfg, &report, &format!("{} @ {rate_label} kpps", profile.label))?;
        rows.push(ReportRow {
            scenario: profile.label.clone(),
            mode: mode_of(&profile.label),
            rate_pps,
            report,
        });
    }

    let csv = report_csv(&rows).map_err(|e| CliError::Config(e.to_string()))?;
    write(&dir.join("report.csv"), &csv)?;
    // Effective config alongside the outputs, for exact re-runs.
    write(&dir.join("scenario.toml"), &cfg.to_toml())?;
    println!("wrote {}", dir.join("report.csv").display());
    if options.fail_on_violation && !all_compliant {
        return Err(CliError::Violation);
    }
    Ok(())
}

/// Average rate of an explicit arrival sequence, rounded to pps.
fn arrival_rate(seq: &pktlat::traffic::ArrivalSequence) -> u64 {
    let times = seq.times();
    if times.len() < 2 {
        return 0;
    }
    let span = (*times.last().unwrap() - times[0]).as_ps();
    if span <= 0 {
        return 0;
    }
    ((times.len() as u128 - 1) * 1_000_000_000_000u128 / span as u128) as u64
}

fn simulate_core(
    profile: &pktlat::sim::NodeProfile,
    arrivals: &pktlat::traffic::ArrivalSequence,
) -> Result<pktlat::sim::SimResult, CliError> {
    pktlat::sim::simulate(profile, arrivals).map_err(|e| CliError::Config(e.to_string()))
}

fn mode_of(label: &str) -> String {
    match label.split('-').next() {
        Some(m @ ("hw" | "vm")) => m.to_string(),
        _ => "custom".into(),
    }
}

/// Capacity prediction table. Falls back to the four reference scenarios
/// when the config carries none.
pub fn capacity(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let mut rows = Vec::new();
    if cfg.capacity.scenarios.is_empty() {
        for r in profiles::reference_scenarios() {
            let result = evaluate(&r.inputs).map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(CapacityRow {
                scenario: r.scenario.into(),
                mode: r.mode.into(),
                inputs: r.inputs,
                result,
            });
        }
    } else {
        for s in &cfg.capacity.scenarios {
            let inputs = s.inputs()?;
            let result = evaluate(&inputs).map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(CapacityRow {
                scenario: s.scenario.clone(),
                mode: s.mode.clone(),
                inputs,
                result,
            });
        }
    }
    let csv = capacity_csv(&rows).map_err(|e| CliError::Config(e.to_string()))?;
    print!("{csv}");
    write(&dir.join("capacity.csv"), &csv)?;
    // With sweep rates configured, also print overload predictions.
    for row in &rows {
        for rate_pps in cfg.sweep_pps() {
            let note = match predict_overload(rate_pps, &row.result) {
                OverloadPrediction::OverloadPredicted => "overload_predicted",
                OverloadPrediction::Safe => "safe",
            };
            println!(
                "predict {}/{} @ {} kpps: {note}",
                row.scenario,
                row.mode,
                pktlat::report::format_rate_kpps(rate_pps)
            );
        }
    }
    println!("wrote {}", dir.join("capacity.csv").display());
    Ok(())
}

/// Match a TX/RX capture pair and emit the full report set: percentile row,
/// worst-case scatter, CDF, raw samples, loss, verdict.
pub fn analyze(
    cfg: &ScenarioConfig,
    tx: &Path,
    rx: &Path,
    label: &str,
    layout: CounterLayout,
    udp_port: u16,
    fail_on_violation: bool,
) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let is_csv = |p: &Path| {
        p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    };
    let (tx_records, rx_records, skipped) = if is_csv(tx) && is_csv(rx) {
        (read_csv(tx)?, read_csv(rx)?, 0)
    } else if !is_csv(tx) && !is_csv(rx) {
        let options = CaptureOptions {
            udp_dst_port: (udp_port != 0).then_some(udp_port),
            ..Default::default()
        };
        let (tx_cap, rx_cap) = read_pcap_pair(tx, rx, &layout, &options)?;
        let skipped = tx_cap.stats.skipped_filter
            + tx_cap.stats.skipped_short_payload
            + rx_cap.stats.skipped_filter
            + rx_cap.stats.skipped_short_payload;
        (tx_cap.records, rx_cap.records, skipped)
    } else {
        return Err(CliError::Config(
            "tx and rx captures must both be pcap or both be csv".into(),
        ));
    };
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} non-matching or short packets");
    }

    let matched = match_traces(&tx_records, &rx_records)?;
    if !matched.duplicate_counters.is_empty() {
        eprintln!("warning: {} duplicate counters (first kept)", matched.duplicate_counters.len());
    }
    if !matched.spurious_counters.is_empty() {
        eprintln!("warning: {} spurious rx counters", matched.spurious_counters.len());
    }
    let filtered = warmup_filter(&matched, cfg.analysis.warmup_skip_s.duration());
    let dist: &LatencyDistribution = &filtered.distribution;
    if dist.is_empty() {
        return Err(CliError::Config("no matched samples after warm-up".into()));
    }
    let report = dist.report(&standard_levels()).map_err(|e| CliError::Config(e.to_string()))?;

    write(
        &dir.join("scatter.csv"),
        &scatter_csv(&worst_k(dist, cfg.analysis.worst_k, Duration::ZERO)),
    )?;
    let steps = empirical_cdf(dist).map_err(|e| CliError::Config(e.to_string()))?;
    write(&dir.join("cdf.csv"), &cdf_csv(&steps))?;
    if cfg.output.emit_samples {
        write(&dir.join("samples.csv"), &samples_csv(dist))?;
    }
    let row = ReportRow {
        scenario: label.to_string(),
        mode: "capture".into(),
        rate_pps: estimated_rate(dist),
        report: report.clone(),
    };
    let csv = report_csv(&[row]).map_err(|e| CliError::Config(e.to_string()))?;
    write(&dir.join("report.csv"), &csv)?;
    print!("{csv}");

    let compliant = check_verdict(cfg, &report, label)?;
    println!("wrote reports under {}", dir.display());
    if fail_on_violation && !compliant {
        return Err(CliError::Violation);
    }
    Ok(())
}

/// Average send rate of the matched samples, rounded to pps.
fn estimated_rate(dist: &LatencyDistribution) -> u64 {
    let samples = dist.samples();
    if samples.len() < 2 {
        return 0;
    }
    let span = (samples.last().unwrap().send_time - samples[0].send_time).as_ps();
    if span <= 0 {
        return 0;
    }
    let n = samples.len() as u128 - 1;
    (n * 1_000_000_000_000u128 / span as u128) as u64
}

/// Burst x batch study: one CDF per combination plus a median/max summary.
/// Infeasible combinations (burst above line rate) are reported and
/// skipped; the run continues.
pub fn burst_study(
    cfg: &ScenarioConfig,
    bursts: &[u32],
    batches: &[u32],
    rate_kpps: f64,
) -> Result<(), CliError> {
    if bursts.is_empty() || batches.is_empty() {
        return Err(CliError::Config("empty burst or batch list".into()));
    }
    if bursts.iter().any(|&b| b == 0 || b > 64) {
        return Err(CliError::Config("burst sizes must be in 1..=64".into()));
    }
    let dir = out_dir(cfg)?;
    let rate_pps = (rate_kpps * 1_000.0).round() as u64;
    let base_profile = cfg.profile.build()?;
    let mut summary = String::from("burst,batch,median_us,max_us,loss_pct\n");

    for &batch in batches {
        for &burst in bursts {
            let mut profile = base_profile.clone();
            profile.batch_size = batch;
            profile.queue_capacity = profile.queue_capacity.max(batch);
            if let Err(e) = profile.validate() {
                eprintln!("burst {burst} batch {batch}: skipped ({e})");
                continue;
            }
            let spec = TrafficSpec {
                rate_pps,
                burst_size: burst,
                duration: cfg.traffic.duration_s.duration(),
                frame_size: cfg.traffic.frame_size,
                link_speed_bps: cfg.traffic.link_speed_bps,
            };
            let arrivals = match generate(&spec) {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("burst {burst} batch {batch}: skipped ({e})");
                    continue;
                }
            };
            let result = simulate_core(&profile, &arrivals)?;
            let dist = &result.distribution;
            if dist.is_empty() {
                eprintln!("burst {burst} batch {batch}: no samples");
                continue;
            }
            let steps = empirical_cdf(dist).map_err(|e| CliError::Config(e.to_string()))?;
            write(&dir.join(format!("cdf_burst{burst}_batch{batch}.csv")), &cdf_csv(&steps))?;
            let median =
                dist.percentile(pktlat::stats::Level::from_percent(50.0).unwrap()).unwrap();
            let max = dist.percentile(pktlat::stats::Level::MAX).unwrap();
            summary.push_str(&format!(
                "{burst},{batch},{},{},{}\n",
                pktlat::report::format_us_tenths(median),
                pktlat::report::format_us_tenths(max),
                pktlat::report::format_loss(dist.drop_count(), dist.tx_count()),
            ));
        }
    }
    write(&dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    println!("wrote {}", dir.join("summary.csv").display());
    Ok(())
}

/// Interrupt-sampling scatter: probes at a constant rate against the
/// profile's interrupt schedule.
pub fn alias_sim(
    cfg: &ScenarioConfig,
    rate_kpps: f64,
    base_latency: Option<Duration>,
) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let profile = cfg.profile.build()?;
    let rate_pps = (rate_kpps * 1_000.0).round() as u64;
    if rate_pps == 0 {
        return Err(CliError::Config("probe rate must be > 0".into()));
    }
    let duration = cfg.traffic.duration_s.duration();
    let schedule = build_interrupt_schedule(&profile.interrupts, duration);
    let base = base_latency.unwrap_or_else(|| profile.baseline_latency());
    let probes = simulate_interrupt_sampling(rate_pps, &schedule, base, duration);
    if probes.is_empty() {
        return Err(CliError::Config("no probes generated (duration too short?)".into()));
    }
    let elevated = probes.iter().filter(|&&(_, l)| l > base).count();

    // Worst-k scatter keeps the elevated stripes and a baseline backdrop.
    let mut by_latency: Vec<(pktlat::time::TimePoint, Duration)> = probes.clone();
    by_latency.sort_by_key(|&(t, l)| (std::cmp::Reverse(l), t));
    by_latency.truncate(cfg.analysis.worst_k);
    by_latency.sort_by_key(|&(t, _)| t);
    write(&dir.join("alias_scatter.csv"), &scatter_csv(&by_latency))?;
    println!(
        "alias-sim {}: {} probes, {elevated} elevated above {} us, {} windows",
        profile.label,
        probes.len(),
        pktlat::report::format_us_tenths(base),
        schedule.len(),
    );
    println!("wrote {}", dir.join("alias_scatter.csv").display());
    Ok(())
}
