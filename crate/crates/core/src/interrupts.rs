//! Periodic interrupt schedules.
//!
//! An [`InterruptSpec`] describes one uniform train of CPU-stealing windows;
//! a schedule is the merged union of several trains over a horizon. Periods
//! are stored as exact picosecond counts so schedules are reproducible
//! tick for tick.

use thiserror::Error;

use crate::time::{Duration, TimePoint, PS_PER_SEC};

#[derive(Debug, Error, PartialEq)]
pub enum InterruptError {
    #[error("interrupt rate must be > 0")]
    InvalidRate,
    #[error("busy window must satisfy 0 <= window < period")]
    InvalidWindow,
}

/// One periodic interrupt source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterruptSpec {
    pub name: String,
    /// Exact period between occurrences.
    pub period: Duration,
    /// CPU-unavailable span per occurrence.
    pub busy_window: Duration,
    /// Start of the first occurrence.
    pub phase: TimePoint,
}

impl InterruptSpec {
    pub fn new(
        name: impl Into<String>,
        period: Duration,
        busy_window: Duration,
        phase: TimePoint,
    ) -> Result<Self, InterruptError> {
        if period <= Duration::ZERO {
            return Err(InterruptError::InvalidRate);
        }
        if busy_window.is_negative() || busy_window >= period {
            return Err(InterruptError::InvalidWindow);
        }
        Ok(InterruptSpec { name: name.into(), period, busy_window, phase })
    }

    /// Builds a train from a rate in Hz; the period is rounded to the
    /// nearest picosecond.
    pub fn from_rate_hz(
        name: impl Into<String>,
        rate_hz: f64,
        busy_window: Duration,
        phase: TimePoint,
    ) -> Result<Self, InterruptError> {
        if !rate_hz.is_finite() || rate_hz <= 0.0 {
            return Err(InterruptError::InvalidRate);
        }
        let period = Duration::from_ps((PS_PER_SEC as f64 / rate_hz).round() as i64);
        Self::new(name, period, busy_window, phase)
    }

    pub fn rate_hz(&self) -> f64 {
        PS_PER_SEC as f64 / self.period.as_ps() as f64
    }
}

/// One merged CPU-unavailable interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterruptWindow {
    pub start: TimePoint,
    pub duration: Duration,
    pub name: String,
}

impl InterruptWindow {
    pub fn end(&self) -> TimePoint {
        self.start + self.duration
    }

    pub fn contains(&self, t: TimePoint) -> bool {
        self.start <= t && t < self.end()
    }
}

/// Merged, start-ordered windows of all trains over `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InterruptSchedule {
    windows: Vec<InterruptWindow>,
    horizon: TimePoint,
}

/// Expands every train over `[0, duration)` and merges overlapping windows.
/// Only occurrences starting before `duration` are included.
pub fn build_interrupt_schedule(
    specs: &[InterruptSpec],
    duration: Duration,
) -> InterruptSchedule {
    let horizon = TimePoint::EPOCH + duration;
    let mut raw: Vec<InterruptWindow> = Vec::new();
    for spec in specs {
        let mut start = spec.phase;
        while start < horizon {
            raw.push(InterruptWindow {
                start,
                duration: spec.busy_window,
                name: spec.name.clone(),
            });
            start += spec.period;
        }
    }
    raw.sort_by(|a, b| (a.start, &a.name).cmp(&(b.start, &b.name)));
    let mut windows: Vec<InterruptWindow> = Vec::with_capacity(raw.len());
    for w in raw {
        match windows.last_mut() {
            Some(last) if w.start < last.end() => {
                // Overlap: extend and record both sources in the label.
                if w.end() > last.end() {
                    last.duration = w.end() - last.start;
                }
                if !last.name.split('+').any(|n| n == w.name) {
                    last.name.push('+');
                    last.name.push_str(&w.name);
                }
            }
            _ => windows.push(w),
        }
    }
    InterruptSchedule { windows, horizon }
}

impl InterruptSchedule {
    pub fn windows(&self) -> &[InterruptWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn horizon(&self) -> TimePoint {
        self.horizon
    }

    /// Number of windows starting strictly before `t`.
    pub fn count_before(&self, t: TimePoint) -> usize {
        self.windows.partition_point(|w| w.start < t)
    }

    /// Total busy time across all windows.
    pub fn total_busy(&self) -> Duration {
        self.windows.iter().fold(Duration::ZERO, |acc, w| acc + w.duration)
    }

    /// The window covering `t`, if any.
    pub fn window_at(&self, t: TimePoint) -> Option<&InterruptWindow> {
        let idx = self.windows.partition_point(|w| w.start <= t);
        idx.checked_sub(1).map(|i| &self.windows[i]).filter(|w| w.contains(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles;

    #[test]
    fn empty_duration_empty_schedule() {
        let specs = profiles::hw_interrupts();
        let sched = build_interrupt_schedule(&specs, Duration::ZERO);
        assert!(sched.is_empty());
    }

    #[test]
    fn hw_schedule_window_count_30s() {
        // Combined 250 Hz over 30 s: 7500 windows, 5000 loc + 2500 iwi.
        let specs = profiles::hw_interrupts();
        let sched = build_interrupt_schedule(&specs, Duration::from_secs(30));
        assert_eq!(sched.len(), 7_500);
        let loc = sched.windows().iter().filter(|w| w.name.starts_with("loc")).count();
        let iwi = sched.windows().iter().filter(|w| w.name.starts_with("iwi")).count();
        assert_eq!(loc, 5_000);
        assert_eq!(iwi, 2_500);
    }

    #[test]
    fn vm_schedule_overlays_host_and_guest() {
        // Over 1 s: 250 host windows plus 250 guest windows, no overlap
        // because the guest train is offset by half a slot.
        let specs = profiles::vm_interrupts();
        let sched = build_interrupt_schedule(&specs, Duration::from_secs(1));
        assert_eq!(sched.len(), 500);
        let host = sched.windows().iter().filter(|w| w.name.ends_with("host")).count();
        let guest = sched.windows().iter().filter(|w| w.name.ends_with("vm")).count();
        assert_eq!(host, 250);
        assert_eq!(guest, 250);
    }

    #[test]
    fn windows_are_disjoint_and_sorted() {
        let specs = profiles::vm_interrupts();
        let sched = build_interrupt_schedule(&specs, Duration::from_secs(5));
        for w in sched.windows().windows(2) {
            assert!(w[0].end() <= w[1].start);
        }
    }

    #[test]
    fn overlapping_trains_merge() {
        let a = InterruptSpec::new(
            "a",
            Duration::from_ms(10),
            Duration::from_us(30),
            TimePoint::EPOCH,
        )
        .unwrap();
        let b = InterruptSpec::new(
            "b",
            Duration::from_ms(10),
            Duration::from_us(30),
            TimePoint::from_ps(Duration::from_us(10).as_ps()),
        )
        .unwrap();
        let sched = build_interrupt_schedule(&[a, b], Duration::from_ms(20));
        assert_eq!(sched.len(), 2);
        assert_eq!(sched.windows()[0].duration, Duration::from_us(40));
        assert_eq!(sched.windows()[0].name, "a+b");
    }

    #[test]
    fn busy_time_matches_rate_times_window() {
        let spec = InterruptSpec::from_rate_hz(
            "t",
            250.0,
            Duration::from_us(10),
            TimePoint::EPOCH,
        )
        .unwrap();
        let sched = build_interrupt_schedule(&[spec], Duration::from_secs(1));
        assert_eq!(sched.len(), 250);
        assert_eq!(sched.total_busy(), Duration::from_us(2_500));
    }

    #[test]
    fn window_lookup() {
        let spec = InterruptSpec::new(
            "t",
            Duration::from_ms(4),
            Duration::from_us(10),
            TimePoint::EPOCH,
        )
        .unwrap();
        let sched = build_interrupt_schedule(&[spec], Duration::from_ms(8));
        assert!(sched.window_at(TimePoint::EPOCH).is_some());
        assert!(sched.window_at(TimePoint::from_ps(9_999_999)).is_some());
        assert!(sched.window_at(TimePoint::from_ps(10_000_000)).is_none());
        assert_eq!(sched.count_before(TimePoint::from_ps(4_000_000_001)), 2);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            InterruptSpec::from_rate_hz("x", 0.0, Duration::ZERO, TimePoint::EPOCH).unwrap_err(),
            InterruptError::InvalidRate
        );
        assert_eq!(
            InterruptSpec::new("x", Duration::from_us(5), Duration::from_us(5), TimePoint::EPOCH)
                .unwrap_err(),
            InterruptError::InvalidWindow
        );
    }
}
