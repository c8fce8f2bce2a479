//! Capture ingest and trace matching.
//!
//! Two observation points (TX side and RX side) record every packet with a
//! counter embedded in the UDP payload. Matching counters across the two
//! sides yields per-packet latencies and exact loss accounting. Captures
//! are read from classic pcap files (microsecond or nanosecond variant,
//! either endianness) or from `counter,time_ps` CSV files.

mod pcap;

pub use pcap::{
    read_pcap, read_pcap_pair, read_pcap_with, write_pcap, Capture, CaptureOptions, IngestStats,
    PcapWriteOptions,
};

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::stats::{LatencyDistribution, LatencySample};
use crate::time::{Duration, TimePoint};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed pcap global header: {0}")]
    BadGlobalHeader(String),
    #[error("unsupported link type {0} (only Ethernet captures are supported)")]
    UnsupportedLinkType(u32),
    #[error("truncated pcap record at offset {offset}")]
    TruncatedRecord { offset: usize },
    #[error("timestamps decrease at record {index}")]
    TimestampsNotMonotonic { index: usize },
    #[error("timestamp out of the representable picosecond range")]
    TimestampOutOfRange,
    #[error("bad CSV row at line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("clock misalignment: negative latency for counter {counter}")]
    ClockMisalignment { counter: u64 },
    #[error("invalid counter layout: {0}")]
    BadLayout(&'static str),
    #[error("record timestamp before the file epoch")]
    NegativeTimestamp,
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
}

/// One captured packet: hardware timestamp plus the payload counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureRecord {
    pub timestamp: TimePoint,
    pub counter: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Big,
    Little,
}

/// Where the packet counter lives inside the UDP payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterLayout {
    pub payload_offset: usize,
    pub width: usize,
    pub byte_order: ByteOrder,
}

impl Default for CounterLayout {
    fn default() -> Self {
        CounterLayout { payload_offset: 0, width: 8, byte_order: ByteOrder::Big }
    }
}

impl CounterLayout {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.width == 0 || self.width > 8 {
            return Err(TraceError::BadLayout("counter width must be 1..=8 bytes"));
        }
        Ok(())
    }

    pub fn end(&self) -> usize {
        self.payload_offset + self.width
    }

    /// Extracts the counter; `None` if the payload is too short.
    pub fn extract(&self, payload: &[u8]) -> Option<u64> {
        let bytes = payload.get(self.payload_offset..self.end())?;
        let mut v: u64 = 0;
        match self.byte_order {
            ByteOrder::Big => {
                for &b in bytes {
                    v = (v << 8) | b as u64;
                }
            }
            ByteOrder::Little => {
                for &b in bytes.iter().rev() {
                    v = (v << 8) | b as u64;
                }
            }
        }
        Some(v)
    }

    /// Writes the counter into the payload; panics if it does not fit
    /// (callers size payloads via [`CounterLayout::end`]).
    pub fn store(&self, counter: u64, payload: &mut [u8]) {
        let dst = &mut payload[self.payload_offset..self.payload_offset + self.width];
        match self.byte_order {
            ByteOrder::Big => {
                for (i, b) in dst.iter_mut().enumerate() {
                    *b = (counter >> (8 * (self.width - 1 - i))) as u8;
                }
            }
            ByteOrder::Little => {
                for (i, b) in dst.iter_mut().enumerate() {
                    *b = (counter >> (8 * i)) as u8;
                }
            }
        }
    }
}

pub const CSV_HEADER: &str = "counter,time_ps";

/// Serializes records in `counter,time_ps` CSV form.
pub fn csv_string(records: &[CaptureRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 24 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{}", r.counter, r.timestamp.as_ps());
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, records: &[CaptureRecord]) -> Result<(), TraceError> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(records))
        .map_err(|source| TraceError::Io { path: path.display().to_string(), source })
}

/// Parses `counter,time_ps` CSV text; the header row is required.
pub fn parse_csv(text: &str) -> Result<Vec<CaptureRecord>, TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(TraceError::BadRow {
                line: 1,
                reason: format!("expected header {CSV_HEADER:?}, found {header:?}"),
            })
        }
        None => return Ok(Vec::new()),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (c, t) = line.split_once(',').ok_or_else(|| TraceError::BadRow {
            line: line_no,
            reason: "expected two comma-separated fields".into(),
        })?;
        let counter: u64 = c.trim().parse().map_err(|e| TraceError::BadRow {
            line: line_no,
            reason: format!("bad counter: {e}"),
        })?;
        let ps: i64 = t.trim().parse().map_err(|e| TraceError::BadRow {
            line: line_no,
            reason: format!("bad time_ps: {e}"),
        })?;
        records.push(CaptureRecord { timestamp: TimePoint::from_ps(ps), counter });
    }
    Ok(records)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CaptureRecord>, TraceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    parse_csv(&text)
}

/// Result of matching a TX capture against an RX capture.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedTrace {
    pub distribution: LatencyDistribution,
    /// TX counters never seen on the RX side, with their send times.
    lost: BTreeMap<u64, TimePoint>,
    /// Counters captured more than once on either side (first kept).
    pub duplicate_counters: BTreeSet<u64>,
    /// RX counters never sent (capture artifacts).
    pub spurious_counters: BTreeSet<u64>,
}

impl MatchedTrace {
    pub fn lost_counters(&self) -> impl Iterator<Item = u64> + '_ {
        self.lost.keys().copied()
    }

    pub fn lost_count(&self) -> u64 {
        self.lost.len() as u64
    }
}

/// Matches counters across the two sides. Latency per matched counter is
/// `rx - tx`; a negative difference means the captures do not share a clock
/// and is a hard error rather than something to clamp.
pub fn match_traces(tx: &[CaptureRecord], rx: &[CaptureRecord]) -> Result<MatchedTrace, TraceError> {
    fn first_by_counter(
        records: &[CaptureRecord],
        duplicates: &mut BTreeSet<u64>,
    ) -> HashMap<u64, TimePoint> {
        let mut map: HashMap<u64, TimePoint> = HashMap::with_capacity(records.len());
        for r in records {
            match map.entry(r.counter) {
                Entry::Occupied(_) => {
                    duplicates.insert(r.counter);
                }
                Entry::Vacant(v) => {
                    v.insert(r.timestamp);
                }
            }
        }
        map
    }
    let mut duplicates = BTreeSet::new();
    let tx_map = first_by_counter(tx, &mut duplicates);
    let rx_map = first_by_counter(rx, &mut duplicates);

    let mut samples = Vec::with_capacity(rx_map.len());
    let mut lost = BTreeMap::new();
    for (&counter, &tx_ts) in &tx_map {
        match rx_map.get(&counter) {
            Some(&rx_ts) => {
                let latency = rx_ts - tx_ts;
                if latency.is_negative() {
                    return Err(TraceError::ClockMisalignment { counter });
                }
                samples.push(LatencySample { send_time: tx_ts, latency, counter });
            }
            None => {
                lost.insert(counter, tx_ts);
            }
        }
    }
    let spurious: BTreeSet<u64> =
        rx_map.keys().filter(|c| !tx_map.contains_key(c)).copied().collect();

    let distribution = LatencyDistribution::new(samples, tx_map.len() as u64)?;
    Ok(MatchedTrace { distribution, lost, duplicate_counters: duplicates, spurious_counters: spurious })
}

/// Drops everything sent during the first `skip` after the first TX
/// timestamp, reducing transmit accounting to match.
pub fn warmup_filter(trace: &MatchedTrace, skip: Duration) -> MatchedTrace {
    let first_sample = trace.distribution.samples().first().map(|s| s.send_time);
    let first_lost = trace.lost.values().min().copied();
    let first = match (first_sample, first_lost) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return trace.clone(),
    };
    let cutoff = first + skip;
    let samples: Vec<LatencySample> = trace
        .distribution
        .samples()
        .iter()
        .filter(|s| s.send_time >= cutoff)
        .copied()
        .collect();
    let lost: BTreeMap<u64, TimePoint> =
        trace.lost.iter().filter(|&(_, &t)| t >= cutoff).map(|(&c, &t)| (c, t)).collect();
    let tx = samples.len() as u64 + lost.len() as u64;
    MatchedTrace {
        distribution: LatencyDistribution::new(samples, tx).expect("subset stays valid"),
        lost,
        duplicate_counters: trace.duplicate_counters.clone(),
        spurious_counters: trace.spurious_counters.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::PS_PER_SEC;

    fn rec(counter: u64, ps: i64) -> CaptureRecord {
        CaptureRecord { timestamp: TimePoint::from_ps(ps), counter }
    }

    #[test]
    fn csv_roundtrip_preserves_ticks() {
        let records = vec![rec(0, 0), rec(1, 12_500), rec(2, 99_999_999_999)];
        let text = csv_string(&records);
        assert!(text.starts_with("counter,time_ps\n"));
        assert_eq!(parse_csv(&text).unwrap(), records);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = parse_csv("counter,time_ps\n0,1\nbroken\n").unwrap_err();
        match err {
            TraceError::BadRow { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(parse_csv("wrong,header\n").is_err());
        assert!(parse_csv("counter,time_ps\n").unwrap().is_empty());
    }

    #[test]
    fn matching_basics() {
        let tx = vec![rec(1, 0), rec(2, 100), rec(3, 200)];
        let rx = vec![rec(1, 50), rec(3, 260)];
        let m = match_traces(&tx, &rx).unwrap();
        assert_eq!(m.distribution.rx_count(), 2);
        assert_eq!(m.distribution.tx_count(), 3);
        assert_eq!(m.lost_counters().collect::<Vec<_>>(), vec![2]);
        let lat: Vec<i64> =
            m.distribution.samples().iter().map(|s| s.latency.as_ps()).collect();
        assert_eq!(lat, vec![50, 60]);
        assert!((m.distribution.report(&crate::stats::standard_levels()).unwrap().loss_percent()
            - 100.0 / 3.0)
            .abs()
            < 0.05);
    }

    #[test]
    fn empty_rx_is_total_loss() {
        let tx = vec![rec(0, 0), rec(1, 10)];
        let m = match_traces(&tx, &[]).unwrap();
        assert_eq!(m.distribution.rx_count(), 0);
        assert_eq!(m.lost_count(), 2);
    }

    #[test]
    fn negative_latency_is_hard_error() {
        let tx = vec![rec(7, 1_000)];
        let rx = vec![rec(7, 999)];
        match match_traces(&tx, &rx).unwrap_err() {
            TraceError::ClockMisalignment { counter } => assert_eq!(counter, 7),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn matching_is_order_insensitive() {
        let tx = vec![rec(1, 0), rec(2, 100), rec(3, 200)];
        let rx = vec![rec(3, 250), rec(1, 40)];
        let mut tx_perm = tx.clone();
        tx_perm.reverse();
        let mut rx_perm = rx.clone();
        rx_perm.reverse();
        assert_eq!(match_traces(&tx, &rx).unwrap(), match_traces(&tx_perm, &rx_perm).unwrap());
    }

    #[test]
    fn duplicates_keep_first_and_are_flagged() {
        let tx = vec![rec(1, 0), rec(1, 5), rec(2, 10)];
        let rx = vec![rec(1, 100), rec(2, 30), rec(9, 40)];
        let m = match_traces(&tx, &rx).unwrap();
        assert!(m.duplicate_counters.contains(&1));
        assert_eq!(m.spurious_counters.iter().copied().collect::<Vec<_>>(), vec![9]);
        let s1 = m.distribution.samples().iter().find(|s| s.counter == 1).unwrap();
        assert_eq!(s1.latency.as_ps(), 100);
        assert_eq!(m.distribution.tx_count(), 2);
    }

    #[test]
    fn warmup_filtering() {
        // 30 s at one packet per 100 us, with one early loss.
        let n: i64 = 300_000;
        let tx: Vec<CaptureRecord> =
            (0..n).map(|i| rec(i as u64, i * 100_000_000)).collect();
        let rx: Vec<CaptureRecord> = tx
            .iter()
            .filter(|r| r.counter != 5)
            .map(|r| CaptureRecord {
                timestamp: r.timestamp + Duration::from_us(20),
                counter: r.counter,
            })
            .collect();
        let m = match_traces(&tx, &rx).unwrap();
        let f = warmup_filter(&m, Duration::from_secs(1));
        assert_eq!(f.distribution.rx_count(), 290_000);
        assert_eq!(f.lost_count(), 0, "loss was inside the warm-up window");
        assert_eq!(f.distribution.tx_count(), 290_000);

        let id = warmup_filter(&m, Duration::ZERO);
        assert_eq!(id.distribution.rx_count(), m.distribution.rx_count());
        assert_eq!(id.distribution.tx_count(), m.distribution.tx_count());

        let gone = warmup_filter(&m, Duration::from_ps(n * 100_000_000 + PS_PER_SEC));
        assert!(gone.distribution.is_empty());
        assert_eq!(gone.distribution.tx_count(), 0);
    }

    #[test]
    fn counter_layout_extract_store() {
        let layout = CounterLayout::default();
        let mut payload = vec![0u8; 18];
        layout.store(0xDEAD_BEEF_0102_0304, &mut payload);
        assert_eq!(layout.extract(&payload), Some(0xDEAD_BEEF_0102_0304));

        let le = CounterLayout { payload_offset: 3, width: 4, byte_order: ByteOrder::Little };
        let mut payload = vec![0u8; 8];
        le.store(0x0102_0304, &mut payload);
        assert_eq!(payload[3..7], [0x04, 0x03, 0x02, 0x01]);
        assert_eq!(le.extract(&payload), Some(0x0102_0304));
        assert_eq!(le.extract(&payload[..5]), None);

        assert!(CounterLayout { width: 9, ..Default::default() }.validate().is_err());
        assert!(CounterLayout { width: 0, ..Default::default() }.validate().is_err());
    }
}
