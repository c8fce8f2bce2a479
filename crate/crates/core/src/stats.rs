//! Latency sample containers and statistical reporting.
//!
//! Percentiles are nearest-rank: the reported value at level `p` over `n`
//! sorted samples is the element at 1-based index `ceil(p/100 * n)`. Every
//! reported value is therefore an actually observed sample, which is the
//! right convention when the interesting events are individual worst cases.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::time::{Duration, TimePoint};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no samples")]
    NoSamples,
    #[error("percentile level {0} outside (0, 100]")]
    InvalidLevel(f64),
    #[error("percentile level {0} not present in report")]
    LevelNotInReport(Level),
    #[error("duplicate packet counter {0}")]
    DuplicateCounter(u64),
    #[error("negative latency for counter {0}")]
    NegativeLatency(u64),
    #[error("received {rx} samples but only {tx} transmissions")]
    MoreReceivedThanSent { rx: u64, tx: u64 },
    #[error("invalid requirement: {0}")]
    InvalidRequirement(&'static str),
}

/// Percentile level with micro-percent resolution.
///
/// Levels are stored as an integer number of 1e-6 percent so that levels
/// written as decimals (99.9, 99.999) produce exact ranks; plain binary
/// floating point would misplace the rank by one for common inputs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u64);

const MICRO_PERCENT_SCALE: u64 = 1_000_000;
const FULL_SCALE: u64 = 100 * MICRO_PERCENT_SCALE;

impl Level {
    pub fn from_percent(p: f64) -> Result<Level, StatsError> {
        if !p.is_finite() {
            return Err(StatsError::InvalidLevel(p));
        }
        let micro = (p * MICRO_PERCENT_SCALE as f64).round();
        if micro < 1.0 || micro > FULL_SCALE as f64 {
            return Err(StatsError::InvalidLevel(p));
        }
        Ok(Level(micro as u64))
    }

    pub fn percent(self) -> f64 {
        self.0 as f64 / MICRO_PERCENT_SCALE as f64
    }

    pub fn micro_percent(self) -> u64 {
        self.0
    }

    pub const MAX: Level = Level(FULL_SCALE);

    /// 1-based nearest rank within `n` sorted samples.
    pub fn rank(self, n: usize) -> usize {
        let num = self.0 as u128 * n as u128;
        let rank = num.div_ceil(FULL_SCALE as u128) as usize;
        rank.max(1)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / MICRO_PERCENT_SCALE;
        let frac = self.0 % MICRO_PERCENT_SCALE;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let s = format!("{frac:06}");
        write!(f, "{whole}.{}", s.trim_end_matches('0'))
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The percentile columns used by the latency tables.
pub const STANDARD_LEVELS: [f64; 5] = [50.0, 99.0, 99.9, 99.99, 99.999];

pub fn standard_levels() -> Vec<Level> {
    STANDARD_LEVELS
        .iter()
        .map(|&p| Level::from_percent(p).expect("standard level"))
        .collect()
}

/// One matched packet: when it was sent, how long it took, and its counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySample {
    pub send_time: TimePoint,
    pub latency: Duration,
    pub counter: u64,
}

/// Latency samples of one measurement or simulation run, ordered by send
/// time, together with transmit-side accounting so loss can be derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyDistribution {
    samples: Vec<LatencySample>,
    tx_count: u64,
}

impl LatencyDistribution {
    /// Builds a distribution, sorting by send time and validating that
    /// counters are unique, latencies are non-negative, and accounting is
    /// conserved (`rx <= tx`).
    pub fn new(mut samples: Vec<LatencySample>, tx_count: u64) -> Result<Self, StatsError> {
        let rx = samples.len() as u64;
        if rx > tx_count {
            return Err(StatsError::MoreReceivedThanSent { rx, tx: tx_count });
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.latency.is_negative() {
                return Err(StatsError::NegativeLatency(s.counter));
            }
            if !seen.insert(s.counter) {
                return Err(StatsError::DuplicateCounter(s.counter));
            }
        }
        samples.sort_by_key(|s| (s.send_time, s.counter));
        Ok(LatencyDistribution { samples, tx_count })
    }

    pub fn samples(&self) -> &[LatencySample] {
        &self.samples
    }

    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }

    pub fn rx_count(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn drop_count(&self) -> u64 {
        self.tx_count - self.rx_count()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Latencies in ascending order.
    pub fn sorted_latencies(&self) -> Vec<Duration> {
        let mut v: Vec<Duration> = self.samples.iter().map(|s| s.latency).collect();
        v.sort_unstable();
        v
    }

    pub fn percentile(&self, level: Level) -> Result<Duration, StatsError> {
        percentile(&self.sorted_latencies(), level)
    }

    pub fn report(&self, levels: &[Level]) -> Result<PercentileReport, StatsError> {
        percentile_report(self, levels)
    }
}

/// Nearest-rank percentile over ascending `sorted` latencies.
pub fn percentile(sorted: &[Duration], level: Level) -> Result<Duration, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::NoSamples);
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "input must be sorted");
    let rank = level.rank(sorted.len());
    Ok(sorted[rank - 1])
}

/// One table row: values at the requested levels, the maximum, and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileReport {
    levels: Vec<Level>,
    values: Vec<Duration>,
    max: Duration,
    tx_count: u64,
    rx_count: u64,
}

impl PercentileReport {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn values(&self) -> &[Duration] {
        &self.values
    }

    pub fn max(&self) -> Duration {
        self.max
    }

    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }

    pub fn rx_count(&self) -> u64 {
        self.rx_count
    }

    pub fn drop_count(&self) -> u64 {
        self.tx_count - self.rx_count
    }

    pub fn value_at(&self, level: Level) -> Option<Duration> {
        self.levels.iter().position(|&l| l == level).map(|i| self.values[i])
    }

    /// Delivered fraction, exact to f64 precision (not display-rounded).
    pub fn delivery_fraction(&self) -> f64 {
        if self.tx_count == 0 {
            return 1.0;
        }
        self.rx_count as f64 / self.tx_count as f64
    }

    /// Loss as a percentage, exact to f64 precision (display rounds to 0.1).
    pub fn loss_percent(&self) -> f64 {
        100.0 * (1.0 - self.delivery_fraction())
    }
}

/// Computes one report row from a distribution.
pub fn percentile_report(
    dist: &LatencyDistribution,
    levels: &[Level],
) -> Result<PercentileReport, StatsError> {
    if dist.is_empty() {
        return Err(StatsError::NoSamples);
    }
    let sorted = dist.sorted_latencies();
    let values = levels
        .iter()
        .map(|&l| percentile(&sorted, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PercentileReport {
        levels: levels.to_vec(),
        values,
        max: *sorted.last().expect("non-empty"),
        tx_count: dist.tx_count(),
        rx_count: dist.rx_count(),
    })
}

/// Empirical CDF as a step function: one `(latency, cumulative fraction)`
/// pair per distinct latency value, ending exactly at 1.0.
pub fn empirical_cdf(dist: &LatencyDistribution) -> Result<Vec<(Duration, f64)>, StatsError> {
    if dist.is_empty() {
        return Err(StatsError::NoSamples);
    }
    let sorted = dist.sorted_latencies();
    let n = sorted.len();
    let mut steps = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i + 1;
        while j < n && sorted[j] == v {
            j += 1;
        }
        steps.push((v, j as f64 / n as f64));
        i = j;
    }
    Ok(steps)
}

/// The `k` largest-latency samples sent at or after `skip_warmup` past the
/// first sample, returned in send-time order. Fewer than `k` may remain.
pub fn worst_k(
    dist: &LatencyDistribution,
    k: usize,
    skip_warmup: Duration,
) -> Vec<(TimePoint, Duration)> {
    let Some(first) = dist.samples().first() else {
        return Vec::new();
    };
    let cutoff = first.send_time + skip_warmup;
    let mut kept: Vec<&LatencySample> =
        dist.samples().iter().filter(|s| s.send_time >= cutoff).collect();
    // Ties broken by send time so selection is deterministic.
    kept.sort_by_key(|s| (std::cmp::Reverse(s.latency), s.send_time, s.counter));
    kept.truncate(k);
    kept.sort_by_key(|s| (s.send_time, s.counter));
    kept.into_iter().map(|s| (s.send_time, s.latency)).collect()
}

/// Delivery/latency target checked against a report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrllcRequirement {
    pub max_latency: Duration,
    pub min_delivery: f64,
    pub percentile_level: Level,
}

impl UrllcRequirement {
    pub fn new(
        max_latency: Duration,
        min_delivery: f64,
        percentile_level: Level,
    ) -> Result<Self, StatsError> {
        if max_latency <= Duration::ZERO {
            return Err(StatsError::InvalidRequirement("max_latency must be > 0"));
        }
        if !(min_delivery > 0.0 && min_delivery <= 1.0) {
            return Err(StatsError::InvalidRequirement("min_delivery must be in (0, 1]"));
        }
        Ok(UrllcRequirement { max_latency, min_delivery, percentile_level })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UrllcViolation {
    Delivery { required: f64, actual: f64 },
    Latency { level: Level, budget: Duration, actual: Duration },
}

impl fmt::Display for UrllcViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UrllcViolation::Delivery { required, actual } => {
                write!(f, "delivery {:.5}% below required {:.5}%", actual * 100.0, required * 100.0)
            }
            UrllcViolation::Latency { level, budget, actual } => write!(
                f,
                "p{level} latency {:.1} us exceeds budget {:.1} us",
                actual.as_us_f64(),
                budget.as_us_f64()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UrllcVerdict {
    Compliant,
    Violated(Vec<UrllcViolation>),
}

impl UrllcVerdict {
    pub fn is_compliant(&self) -> bool {
        matches!(self, UrllcVerdict::Compliant)
    }
}

/// Checks a report against a requirement. Delivery uses the exact delivered
/// fraction (boundary is `>=`); latency is checked at the configured level.
pub fn urllc_check(
    report: &PercentileReport,
    req: &UrllcRequirement,
) -> Result<UrllcVerdict, StatsError> {
    let value = report
        .value_at(req.percentile_level)
        .ok_or(StatsError::LevelNotInReport(req.percentile_level))?;
    let mut reasons = Vec::new();
    let delivery = report.delivery_fraction();
    if delivery < req.min_delivery {
        reasons.push(UrllcViolation::Delivery { required: req.min_delivery, actual: delivery });
    }
    if value > req.max_latency {
        reasons.push(UrllcViolation::Latency {
            level: req.percentile_level,
            budget: req.max_latency,
            actual: value,
        });
    }
    if reasons.is_empty() {
        Ok(UrllcVerdict::Compliant)
    } else {
        Ok(UrllcVerdict::Violated(reasons))
    }
}
