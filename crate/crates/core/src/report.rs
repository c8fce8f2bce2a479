//! CSV report schemas and number formatting.
//!
//! Table rows report latencies in microseconds at 0.1 us precision and loss
//! at 0.1 percentage points ("-" when nothing was dropped). Scatter and CDF
//! files keep full precision so every table is re-derivable from the raw
//! artifacts. All formatting goes through integer arithmetic, which keeps
//! repeated runs byte-identical.

use std::fmt::Write as _;

use crate::capacity::{CapacityInputs, CapacityResult};
use crate::stats::{standard_levels, PercentileReport, StatsError};
use crate::time::{Duration, TimePoint, PS_PER_SEC, PS_PER_US};

/// `Duration` at 0.1 us display precision, rounding half away from zero.
pub fn format_us_tenths(d: Duration) -> String {
    let ps = d.as_ps();
    let step = PS_PER_US / 10;
    let half = if ps >= 0 { step / 2 } else { -step / 2 };
    let tenths = (ps + half) / step;
    format!("{}.{}", tenths / 10, (tenths % 10).abs())
}

/// `Duration` as exact microseconds with six decimals (ps-lossless).
pub fn format_us_exact(d: Duration) -> String {
    let ps = d.as_ps();
    let sign = if ps < 0 { "-" } else { "" };
    let ps = ps.abs();
    format!("{sign}{}.{:06}", ps / PS_PER_US, ps % PS_PER_US)
}

/// `TimePoint` as seconds with nine decimals (ns resolution).
pub fn format_seconds(t: TimePoint) -> String {
    let ps = t.as_ps();
    let sign = if ps < 0 { "-" } else { "" };
    let ps = ps.abs();
    format!("{sign}{}.{:09}", ps / PS_PER_SEC, (ps % PS_PER_SEC) / 1_000)
}

/// Loss display: `-` when no packet was dropped, otherwise a percentage at
/// 0.1 precision.
pub fn format_loss(drops: u64, tx: u64) -> String {
    if drops == 0 || tx == 0 {
        return "-".into();
    }
    let tenths = (drops as u128 * 1_000 + tx as u128 / 2) / tx as u128;
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Packet rate as kpackets/s with trailing zeros trimmed (`10`, `87.5`).
pub fn format_rate_kpps(rate_pps: u64) -> String {
    let whole = rate_pps / 1_000;
    let frac = rate_pps % 1_000;
    if frac == 0 {
        return whole.to_string();
    }
    let s = format!("{frac:03}");
    format!("{whole}.{}", s.trim_end_matches('0'))
}

pub const REPORT_HEADER: &str =
    "scenario,mode,rate_kpps,loss_pct,p50_us,p99_us,p99.9_us,p99.99_us,p99.999_us,max_us";

/// One labelled table row.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub scenario: String,
    pub mode: String,
    pub rate_pps: u64,
    pub report: PercentileReport,
}

/// Renders rows in the standard table schema. Reports must carry the five
/// standard levels.
pub fn report_csv(rows: &[ReportRow]) -> Result<String, StatsError> {
    let levels = standard_levels();
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        let mut cells = vec![
            row.scenario.clone(),
            row.mode.clone(),
            format_rate_kpps(row.rate_pps),
            format_loss(row.report.drop_count(), row.report.tx_count()),
        ];
        for &level in &levels {
            let v = row.report.value_at(level).ok_or(StatsError::LevelNotInReport(level))?;
            cells.push(format_us_tenths(v));
        }
        cells.push(format_us_tenths(row.report.max()));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub const SCATTER_HEADER: &str = "time_s,latency_us";

/// Worst-case scatter points as `time_s,latency_us`.
pub fn scatter_csv(points: &[(TimePoint, Duration)]) -> String {
    let mut out = String::with_capacity(points.len() * 24 + SCATTER_HEADER.len() + 1);
    out.push_str(SCATTER_HEADER);
    out.push('\n');
    for &(t, l) in points {
        let _ = writeln!(out, "{},{}", format_seconds(t), format_us_exact(l));
    }
    out
}

pub const CDF_HEADER: &str = "latency_us,fraction";

/// CDF steps as `latency_us,fraction`.
pub fn cdf_csv(steps: &[(Duration, f64)]) -> String {
    let mut out = String::with_capacity(steps.len() * 24 + CDF_HEADER.len() + 1);
    out.push_str(CDF_HEADER);
    out.push('\n');
    for &(l, frac) in steps {
        let _ = writeln!(out, "{},{}", format_us_exact(l), frac);
    }
    out
}

pub const SAMPLES_HEADER: &str = "counter,time_ps,latency_ps";

/// Raw matched samples, lossless. Reports are pure functions of this file.
pub fn samples_csv(dist: &crate::stats::LatencyDistribution) -> String {
    let mut out = String::with_capacity(dist.samples().len() * 32 + SAMPLES_HEADER.len() + 1);
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for s in dist.samples() {
        let _ = writeln!(out, "{},{},{}", s.counter, s.send_time.as_ps(), s.latency.as_ps());
    }
    out
}

pub const CAPACITY_HEADER: &str =
    "scenario,mode,transfer2_us,median_e2e_us,tcpu_us,dsigma_us,rmax_kpps";

/// One capacity table row: scenario inputs plus derived figures.
#[derive(Debug, Clone)]
pub struct CapacityRow {
    pub scenario: String,
    pub mode: String,
    pub inputs: CapacityInputs,
    pub result: CapacityResult,
}

/// Renders capacity rows; `rmax_kpps` is truncated to 0.1 (the published
/// table's convention), everything else rounds to 0.1.
pub fn capacity_csv(rows: &[CapacityRow]) -> Result<String, crate::capacity::CapacityError> {
    let mut out = String::from(CAPACITY_HEADER);
    out.push('\n');
    for row in rows {
        let rmax = crate::capacity::r_max_kpps_string(row.result.t_cpu, row.result.d_sigma)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.scenario,
            row.mode,
            format_us_tenths(row.inputs.median_l2fwd_e2e),
            format_us_tenths(row.inputs.median_app_e2e),
            format_us_tenths(row.result.t_cpu),
            format_us_tenths(row.result.d_sigma),
            rmax,
        );
    }
    Ok(out)
}
