//! Deterministic traffic generation: constant-bit-rate streams and
//! back-to-back bursts.
//!
//! Arrival timestamps are computed per packet as `round(i * 1s / rate)` in
//! integer arithmetic, so there is no cumulative drift at rates whose period
//! is not an integer picosecond count (e.g. 120 kpps).

use thiserror::Error;

use crate::time::{Duration, TimePoint, PS_PER_SEC};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("rate must be > 0 packets/s")]
    InvalidRate,
    #[error("burst size must be >= 1")]
    InvalidBurst,
    #[error("duration must be >= 0")]
    InvalidDuration,
    #[error("frame size must be >= 64 bytes")]
    InvalidFrameSize,
    #[error("link speed must be > 0")]
    InvalidLinkSpeed,
    #[error("burst exceeds period (offered load above line rate)")]
    BurstExceedsPeriod,
    #[error("arrivals not strictly increasing at index {0}")]
    NonMonotonic(usize),
    #[error("counters must be consecutive from 0, found {found} at index {index}")]
    BadCounter { index: usize, found: u64 },
}

pub const DEFAULT_FRAME_SIZE: u32 = 64;
pub const DEFAULT_LINK_SPEED_BPS: u64 = 10_000_000_000;

/// Traffic description: average rate, burstiness, and wire parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficSpec {
    /// Average packet rate in packets per second.
    pub rate_pps: u64,
    /// Packets per burst; 1 means plain CBR.
    pub burst_size: u32,
    pub duration: Duration,
    /// Bytes on the wire per frame (excluding preamble/IFG, which are
    /// accounted for as the fixed 20-byte overhead in serialization time).
    pub frame_size: u32,
    pub link_speed_bps: u64,
}

impl TrafficSpec {
    pub fn cbr(rate_pps: u64, duration: Duration) -> Self {
        TrafficSpec {
            rate_pps,
            burst_size: 1,
            duration,
            frame_size: DEFAULT_FRAME_SIZE,
            link_speed_bps: DEFAULT_LINK_SPEED_BPS,
        }
    }

    pub fn bursty(rate_pps: u64, burst_size: u32, duration: Duration) -> Self {
        TrafficSpec { burst_size, ..TrafficSpec::cbr(rate_pps, duration) }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.rate_pps == 0 {
            return Err(TrafficError::InvalidRate);
        }
        if self.burst_size == 0 {
            return Err(TrafficError::InvalidBurst);
        }
        if self.duration.is_negative() {
            return Err(TrafficError::InvalidDuration);
        }
        if self.frame_size < 64 {
            return Err(TrafficError::InvalidFrameSize);
        }
        if self.link_speed_bps == 0 {
            return Err(TrafficError::InvalidLinkSpeed);
        }
        Ok(())
    }
}

/// Time to put one frame on the wire, including the 20 bytes of preamble,
/// start-of-frame delimiter, and inter-frame gap.
pub fn serialization_time(frame_size: u32, link_speed_bps: u64) -> Duration {
    let bits = (frame_size as u128 + 20) * 8;
    let ps = (bits * PS_PER_SEC as u128 + link_speed_bps as u128 / 2) / link_speed_bps as u128;
    Duration::from_ps(ps as i64)
}

/// Packet arrival times with implicit consecutive counters 0, 1, 2, ...
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrivalSequence {
    times: Vec<TimePoint>,
}

impl ArrivalSequence {
    /// Wraps explicit arrival times, enforcing strict monotonicity.
    pub fn from_times(times: Vec<TimePoint>) -> Result<Self, TrafficError> {
        for (i, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(TrafficError::NonMonotonic(i + 1));
            }
        }
        Ok(ArrivalSequence { times })
    }

    /// Validates `(counter, time)` pairs: counters consecutive from zero.
    pub fn from_pairs(pairs: &[(u64, TimePoint)]) -> Result<Self, TrafficError> {
        for (i, &(c, _)) in pairs.iter().enumerate() {
            if c != i as u64 {
                return Err(TrafficError::BadCounter { index: i, found: c });
            }
        }
        Self::from_times(pairs.iter().map(|&(_, t)| t).collect())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[TimePoint] {
        &self.times
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, TimePoint)> + '_ {
        self.times.iter().enumerate().map(|(i, &t)| (i as u64, t))
    }

    /// View as capture records (`counter,time_ps` CSV schema) for export
    /// or external replay.
    pub fn to_records(&self) -> Vec<crate::trace::CaptureRecord> {
        self.iter()
            .map(|(counter, timestamp)| crate::trace::CaptureRecord { timestamp, counter })
            .collect()
    }

    /// Builds a sequence from capture records, enforcing consecutive
    /// counters from zero and strictly increasing times.
    pub fn from_records(records: &[crate::trace::CaptureRecord]) -> Result<Self, TrafficError> {
        let pairs: Vec<(u64, TimePoint)> =
            records.iter().map(|r| (r.counter, r.timestamp)).collect();
        Self::from_pairs(&pairs)
    }
}

/// Packets emitted over `duration` at `rate_pps`: `floor(rate * duration)`.
pub(crate) fn packet_count_for(rate_pps: u64, duration: Duration) -> usize {
    let total = rate_pps as u128 * duration.as_ps().max(0) as u128 / PS_PER_SEC as u128;
    total as usize
}

/// Send time of packet `index` at `rate_pps`, rounded to the nearest ps.
pub(crate) fn nth_arrival_time(rate_pps: u64, index: u128) -> TimePoint {
    let num = index * PS_PER_SEC as u128;
    let t = (num + rate_pps as u128 / 2) / rate_pps as u128;
    TimePoint::from_ps(t as i64)
}

/// Constant-bit-rate arrivals: exact `1/rate` spacing starting at the epoch.
pub fn generate_cbr(spec: &TrafficSpec) -> Result<ArrivalSequence, TrafficError> {
    spec.validate()?;
    let n = packet_count_for(spec.rate_pps, spec.duration);
    let times = (0..n as u128).map(|i| nth_arrival_time(spec.rate_pps, i)).collect();
    Ok(ArrivalSequence { times })
}

/// Bursts of `burst_size` packets back-to-back at wire serialization
/// spacing; burst starts are placed on the `burst_size/rate` grid so the
/// average rate is preserved. A final partial burst keeps the total count
/// equal to `floor(rate * duration)`.
pub fn generate_bursty(spec: &TrafficSpec) -> Result<ArrivalSequence, TrafficError> {
    spec.validate()?;
    if spec.burst_size == 1 {
        return generate_cbr(spec);
    }
    let ser = serialization_time(spec.frame_size, spec.link_speed_bps);
    // Intra-burst spacing * burst_size >= inter-burst period reduces to
    // serialization time >= 1/rate: the line cannot carry the offered load.
    if ser.as_ps() as u128 * spec.rate_pps as u128 >= PS_PER_SEC as u128 {
        return Err(TrafficError::BurstExceedsPeriod);
    }
    let n = packet_count_for(spec.rate_pps, spec.duration);
    let burst = spec.burst_size as u128;
    let mut times = Vec::with_capacity(n);
    for k in 0..n as u128 {
        let burst_idx = k / burst;
        let within = (k % burst) as i64;
        let start = nth_arrival_time(spec.rate_pps, burst_idx * burst);
        times.push(start + ser * within);
    }
    let seq = ArrivalSequence { times };
    debug_assert!(seq.times.windows(2).all(|w| w[0] < w[1]));
    Ok(seq)
}

/// Dispatches on `burst_size`.
pub fn generate(spec: &TrafficSpec) -> Result<ArrivalSequence, TrafficError> {
    if spec.burst_size <= 1 {
        generate_cbr(spec)
    } else {
        generate_bursty(spec)
    }
}
