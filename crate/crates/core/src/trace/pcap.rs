//! Classic pcap reading and writing.
//!
//! Supported: the 24-byte global header with microsecond (0xa1b2c3d4) or
//! nanosecond (0xa1b23c4d) magic in either endianness, 16-byte record
//! headers, Ethernet link type only. pcapng is out of scope.
//!
//! Timestamps are converted to picoseconds relative to a whole-second file
//! epoch (by default the second of the first record), because absolute
//! Unix time does not fit a signed 64-bit picosecond count. Reading a
//! TX/RX pair through [`read_pcap_pair`] uses one shared epoch so matched
//! latencies come out exact.

use std::path::Path;

use super::{CaptureRecord, CounterLayout, TraceError};
use crate::time::{Duration, TimePoint, HW_TICK_PS, PS_PER_SEC};

const MAGIC_US: u32 = 0xa1b2_c3d4;
const MAGIC_NS: u32 = 0xa1b2_3c4d;
const LINKTYPE_ETHERNET: u32 = 1;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const ETH_HEADER_LEN: usize = 14;
const UDP_HEADER_LEN: usize = 8;

/// Ingest controls beyond the counter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureOptions {
    /// Keep only UDP packets with this destination port; `None` keeps every
    /// UDP packet.
    pub udp_dst_port: Option<u16>,
    /// Snap ingested timestamps to this hardware tick. Defaults to 12.5 ns,
    /// which also restores grid values the nanosecond file format truncated.
    pub hw_tick: Option<Duration>,
    /// Whole-second file epoch override (Unix seconds).
    pub epoch_s: Option<u64>,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        CaptureOptions {
            udp_dst_port: Some(53),
            hw_tick: Some(Duration::from_ps(HW_TICK_PS)),
            epoch_s: None,
        }
    }
}

/// Skip accounting for one ingested file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestStats {
    /// Frames that were not UDP or did not match the port filter.
    pub skipped_filter: u64,
    /// UDP frames whose payload was too short for the counter layout.
    pub skipped_short_payload: u64,
}

/// Ingested capture: records in file order plus skip accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capture {
    pub records: Vec<CaptureRecord>,
    pub stats: IngestStats,
    /// Epoch the timestamps are relative to, in Unix seconds.
    pub epoch_s: u64,
}

struct RawRecord {
    sec: u64,
    frac_ps: u64,
    counter: u64,
}

struct RawCapture {
    records: Vec<RawRecord>,
    stats: IngestStats,
}

fn read_u16(bytes: &[u8], le: bool) -> u16 {
    let b: [u8; 2] = bytes[..2].try_into().expect("two bytes");
    if le { u16::from_le_bytes(b) } else { u16::from_be_bytes(b) }
}

fn read_u32(bytes: &[u8], le: bool) -> u32 {
    let b: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if le { u32::from_le_bytes(b) } else { u32::from_be_bytes(b) }
}

fn parse_raw(
    data: &[u8],
    layout: &CounterLayout,
    options: &CaptureOptions,
) -> Result<RawCapture, TraceError> {
    layout.validate()?;
    if data.len() < GLOBAL_HEADER_LEN {
        return Err(TraceError::BadGlobalHeader(format!(
            "file is {} bytes, global header needs {GLOBAL_HEADER_LEN}",
            data.len()
        )));
    }
    let magic_be = u32::from_be_bytes(data[..4].try_into().expect("four bytes"));
    let magic_le = u32::from_le_bytes(data[..4].try_into().expect("four bytes"));
    let (le, nanos) = match (magic_be, magic_le) {
        (MAGIC_US, _) => (false, false),
        (MAGIC_NS, _) => (false, true),
        (_, MAGIC_US) => (true, false),
        (_, MAGIC_NS) => (true, true),
        _ => {
            return Err(TraceError::BadGlobalHeader(format!(
                "unknown magic 0x{magic_be:08x}"
            )))
        }
    };
    let version_major = read_u16(&data[4..], le);
    if version_major != 2 {
        return Err(TraceError::BadGlobalHeader(format!(
            "unsupported version {version_major}"
        )));
    }
    let network = read_u32(&data[20..], le);
    if network != LINKTYPE_ETHERNET {
        return Err(TraceError::UnsupportedLinkType(network));
    }

    let frac_unit: u64 = if nanos { 1_000 } else { 1_000_000 };
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    let mut offset = GLOBAL_HEADER_LEN;
    while offset < data.len() {
        if data.len() - offset < RECORD_HEADER_LEN {
            return Err(TraceError::TruncatedRecord { offset });
        }
        let ts_sec = read_u32(&data[offset..], le) as u64;
        let ts_frac = read_u32(&data[offset + 4..], le) as u64;
        let incl_len = read_u32(&data[offset + 8..], le) as usize;
        let frame_start = offset + RECORD_HEADER_LEN;
        if data.len() - frame_start < incl_len {
            return Err(TraceError::TruncatedRecord { offset });
        }
        let frame = &data[frame_start..frame_start + incl_len];
        offset = frame_start + incl_len;

        match extract_counter(frame, layout, options) {
            CounterOutcome::Counter(counter) => {
                records.push(RawRecord { sec: ts_sec, frac_ps: ts_frac * frac_unit, counter });
            }
            CounterOutcome::Filtered => stats.skipped_filter += 1,
            CounterOutcome::ShortPayload => stats.skipped_short_payload += 1,
        }
    }
    Ok(RawCapture { records, stats })
}

enum CounterOutcome {
    Counter(u64),
    Filtered,
    ShortPayload,
}

fn extract_counter(
    frame: &[u8],
    layout: &CounterLayout,
    options: &CaptureOptions,
) -> CounterOutcome {
    if frame.len() < ETH_HEADER_LEN + 20 + UDP_HEADER_LEN {
        return CounterOutcome::Filtered;
    }
    let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    if ethertype != 0x0800 {
        return CounterOutcome::Filtered;
    }
    let ip = &frame[ETH_HEADER_LEN..];
    if ip[0] >> 4 != 4 {
        return CounterOutcome::Filtered;
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    if ihl < 20 || ip.len() < ihl + UDP_HEADER_LEN {
        return CounterOutcome::Filtered;
    }
    if ip[9] != 17 {
        return CounterOutcome::Filtered;
    }
    let udp = &ip[ihl..];
    let dst_port = u16::from_be_bytes([udp[2], udp[3]]);
    if let Some(want) = options.udp_dst_port {
        if dst_port != want {
            return CounterOutcome::Filtered;
        }
    }
    let udp_len = u16::from_be_bytes([udp[4], udp[5]]) as usize;
    let payload_end = udp_len.clamp(UDP_HEADER_LEN, udp.len());
    let payload = &udp[UDP_HEADER_LEN..payload_end];
    match layout.extract(payload) {
        Some(counter) => CounterOutcome::Counter(counter),
        None => CounterOutcome::ShortPayload,
    }
}

fn convert(
    raw: RawCapture,
    epoch_s: u64,
    options: &CaptureOptions,
) -> Result<Capture, TraceError> {
    let epoch_ps = epoch_s as i128 * PS_PER_SEC as i128;
    let mut records = Vec::with_capacity(raw.records.len());
    let mut prev: Option<TimePoint> = None;
    for (index, r) in raw.records.iter().enumerate() {
        let abs_ps = r.sec as i128 * PS_PER_SEC as i128 + r.frac_ps as i128;
        let rel = abs_ps - epoch_ps;
        let ps = i64::try_from(rel).map_err(|_| TraceError::TimestampOutOfRange)?;
        let mut ts = TimePoint::from_ps(ps);
        if let Some(tick) = options.hw_tick {
            ts = ts.quantize(tick);
        }
        if let Some(p) = prev {
            if ts < p {
                return Err(TraceError::TimestampsNotMonotonic { index });
            }
        }
        prev = Some(ts);
        records.push(CaptureRecord { timestamp: ts, counter: r.counter });
    }
    Ok(Capture { records, stats: raw.stats, epoch_s })
}

fn read_file(path: &Path) -> Result<Vec<u8>, TraceError> {
    std::fs::read(path)
        .map_err(|source| TraceError::Io { path: path.display().to_string(), source })
}

/// Reads one capture with explicit options.
pub fn read_pcap_with(
    path: impl AsRef<Path>,
    layout: &CounterLayout,
    options: &CaptureOptions,
) -> Result<Capture, TraceError> {
    let data = read_file(path.as_ref())?;
    let raw = parse_raw(&data, layout, options)?;
    let epoch = options.epoch_s.unwrap_or_else(|| raw.records.first().map_or(0, |r| r.sec));
    convert(raw, epoch, options)
}

/// Reads one capture with default options (UDP destination port 53 filter,
/// 12.5 ns timestamp quantization, epoch from the first record).
pub fn read_pcap(path: impl AsRef<Path>, layout: &CounterLayout) -> Result<Capture, TraceError> {
    read_pcap_with(path, layout, &CaptureOptions::default())
}

/// Reads a TX/RX capture pair against one shared epoch (the earlier of the
/// two first-record seconds), so `rx - tx` differences are meaningful.
pub fn read_pcap_pair(
    tx_path: impl AsRef<Path>,
    rx_path: impl AsRef<Path>,
    layout: &CounterLayout,
    options: &CaptureOptions,
) -> Result<(Capture, Capture), TraceError> {
    let tx_raw = parse_raw(&read_file(tx_path.as_ref())?, layout, options)?;
    let rx_raw = parse_raw(&read_file(rx_path.as_ref())?, layout, options)?;
    let epoch = options.epoch_s.unwrap_or_else(|| {
        let a = tx_raw.records.first().map(|r| r.sec);
        let b = rx_raw.records.first().map(|r| r.sec);
        match (a, b) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => 0,
        }
    });
    Ok((convert(tx_raw, epoch, options)?, convert(rx_raw, epoch, options)?))
}

/// Synthetic-trace writer controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapWriteOptions {
    /// Nanosecond-resolution magic when true, microsecond otherwise.
    pub nanosecond: bool,
    pub udp_dst_port: u16,
    /// UDP payload length; at least the counter layout end is used.
    pub payload_len: usize,
    /// Unix-second base added to record timestamps.
    pub epoch_s: u64,
}

impl Default for PcapWriteOptions {
    fn default() -> Self {
        PcapWriteOptions { nanosecond: true, udp_dst_port: 53, payload_len: 18, epoch_s: 0 }
    }
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    for chunk in header.chunks(2) {
        let word = u16::from_be_bytes([chunk[0], *chunk.get(1).unwrap_or(&0)]);
        sum += word as u32;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Writes records as UDP-in-IPv4-in-Ethernet frames with the counter at the
/// configured payload position. Records are sorted by timestamp so the file
/// keeps the capture-order invariant even when latency reorders counters.
pub fn write_pcap(
    path: impl AsRef<Path>,
    records: &[CaptureRecord],
    layout: &CounterLayout,
    options: &PcapWriteOptions,
) -> Result<(), TraceError> {
    layout.validate()?;
    let mut sorted: Vec<&CaptureRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.timestamp, r.counter));

    let payload_len = options.payload_len.max(layout.end());
    let frame_len = ETH_HEADER_LEN + 20 + UDP_HEADER_LEN + payload_len;
    let mut out = Vec::with_capacity(GLOBAL_HEADER_LEN + sorted.len() * (RECORD_HEADER_LEN + frame_len));

    let magic: u32 = if options.nanosecond { MAGIC_NS } else { MAGIC_US };
    out.extend_from_slice(&magic.to_be_bytes());
    out.extend_from_slice(&2u16.to_be_bytes()); // version major
    out.extend_from_slice(&4u16.to_be_bytes()); // version minor
    out.extend_from_slice(&0i32.to_be_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_be_bytes()); // sigfigs
    out.extend_from_slice(&(frame_len as u32).to_be_bytes()); // snaplen
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_be_bytes());

    let frac_div: i64 = if options.nanosecond { 1_000 } else { 1_000_000 };
    for r in sorted {
        let ps = r.timestamp.as_ps();
        if ps < 0 {
            return Err(TraceError::NegativeTimestamp);
        }
        let sec = options.epoch_s + (ps / PS_PER_SEC) as u64;
        let frac = ((ps % PS_PER_SEC) + frac_div / 2) / frac_div;
        // Carry if rounding pushed the fraction to a full second.
        let (sec, frac) = if frac * frac_div >= PS_PER_SEC {
            (sec + 1, 0)
        } else {
            (sec, frac)
        };
        out.extend_from_slice(&(sec as u32).to_be_bytes());
        out.extend_from_slice(&(frac as u32).to_be_bytes());
        out.extend_from_slice(&(frame_len as u32).to_be_bytes());
        out.extend_from_slice(&(frame_len as u32).to_be_bytes());

        // Ethernet
        out.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]); // dst
        out.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]); // src
        out.extend_from_slice(&0x0800u16.to_be_bytes());
        // IPv4
        let total_len = (20 + UDP_HEADER_LEN + payload_len) as u16;
        let mut ip = [0u8; 20];
        ip[0] = 0x45;
        ip[2..4].copy_from_slice(&total_len.to_be_bytes());
        ip[4..6].copy_from_slice(&(r.counter as u16).to_be_bytes());
        ip[8] = 64; // ttl
        ip[9] = 17; // udp
        ip[12..16].copy_from_slice(&[10, 0, 0, 1]);
        ip[16..20].copy_from_slice(&[10, 0, 0, 2]);
        let csum = ipv4_checksum(&ip);
        ip[10..12].copy_from_slice(&csum.to_be_bytes());
        out.extend_from_slice(&ip);
        // UDP, checksum 0 (unused)
        out.extend_from_slice(&49152u16.to_be_bytes());
        out.extend_from_slice(&options.udp_dst_port.to_be_bytes());
        out.extend_from_slice(&((UDP_HEADER_LEN + payload_len) as u16).to_be_bytes());
        out.extend_from_slice(&0u16.to_be_bytes());
        // Payload with counter
        let mut payload = vec![0u8; payload_len];
        layout.store(r.counter, &mut payload);
        out.extend_from_slice(&payload);
    }

    let path = path.as_ref();
    std::fs::write(path, out)
        .map_err(|source| TraceError::Io { path: path.display().to_string(), source })
}
