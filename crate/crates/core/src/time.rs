//! Integer picosecond time base.
//!
//! All timestamps and latencies in this crate are signed 64-bit picosecond
//! counts. One picosecond exactly represents both the 12.5 ns hardware
//! timestamp tick and the 0.1 us precision used in reports, so no value is
//! ever rounded before display. The representable range (about +-106 days)
//! comfortably covers multi-hour traces.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

pub const PS_PER_NS: i64 = 1_000;
pub const PS_PER_US: i64 = 1_000_000;
pub const PS_PER_MS: i64 = 1_000_000_000;
pub const PS_PER_SEC: i64 = 1_000_000_000_000;

/// One hardware timestamp tick: 12.5 ns.
pub const HW_TICK_PS: i64 = 12_500;

/// Instant in picoseconds since the trace or simulation epoch.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimePoint {
    ticks: i64,
}

/// Signed span in picoseconds. Latencies are non-negative; negative values
/// only appear as arithmetic intermediates.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Duration {
    ticks: i64,
}

impl TimePoint {
    pub const EPOCH: TimePoint = TimePoint { ticks: 0 };

    pub const fn from_ps(ticks: i64) -> Self {
        TimePoint { ticks }
    }

    pub const fn as_ps(self) -> i64 {
        self.ticks
    }

    pub fn as_secs_f64(self) -> f64 {
        self.ticks as f64 / PS_PER_SEC as f64
    }

    /// Snaps to the nearest multiple of `tick` (half away from zero).
    pub fn quantize(self, tick: Duration) -> Self {
        TimePoint::from_ps(round_to_multiple(self.ticks, tick.as_ps()))
    }
}

impl Duration {
    pub const ZERO: Duration = Duration { ticks: 0 };

    pub const fn from_ps(ticks: i64) -> Self {
        Duration { ticks }
    }

    pub const fn from_ns(ns: i64) -> Self {
        Duration { ticks: ns * PS_PER_NS }
    }

    pub const fn from_us(us: i64) -> Self {
        Duration { ticks: us * PS_PER_US }
    }

    pub const fn from_ms(ms: i64) -> Self {
        Duration { ticks: ms * PS_PER_MS }
    }

    pub const fn from_secs(s: i64) -> Self {
        Duration { ticks: s * PS_PER_SEC }
    }

    /// Rounds a fractional microsecond value to the nearest picosecond.
    pub fn from_us_f64(us: f64) -> Self {
        Duration { ticks: (us * PS_PER_US as f64).round() as i64 }
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Duration { ticks: (s * PS_PER_SEC as f64).round() as i64 }
    }

    pub const fn as_ps(self) -> i64 {
        self.ticks
    }

    pub fn as_us_f64(self) -> f64 {
        self.ticks as f64 / PS_PER_US as f64
    }

    pub fn as_secs_f64(self) -> f64 {
        self.ticks as f64 / PS_PER_SEC as f64
    }

    pub const fn is_negative(self) -> bool {
        self.ticks < 0
    }

    pub fn quantize(self, tick: Duration) -> Self {
        Duration::from_ps(round_to_multiple(self.ticks, tick.as_ps()))
    }
}

/// Rounds `value` to the nearest multiple of `step` (half away from zero).
pub fn round_to_multiple(value: i64, step: i64) -> i64 {
    assert!(step > 0, "quantization step must be positive");
    let v = value as i128;
    let s = step as i128;
    let half = if v >= 0 { s / 2 } else { -(s / 2) };
    (((v + half) / s) * s) as i64
}

/// Parses a non-negative decimal string (for example `"3.1"`) into an integer
/// count of `scale` picoseconds per unit, exactly. Used for config values
/// where binary floating point would corrupt the last digit.
pub fn parse_decimal_ps(text: &str, scale: i64) -> Result<i64, String> {
    let text = text.trim();
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("empty decimal: {text:?}"));
    }
    let whole: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|e| format!("bad decimal {text:?}: {e}"))?
    };
    let mut frac: i64 = 0;
    let mut frac_scale: i64 = scale;
    for c in frac_part.chars() {
        let d = c.to_digit(10).ok_or_else(|| format!("bad decimal {text:?}"))? as i64;
        if frac_scale % 10 != 0 {
            if d != 0 {
                return Err(format!("{text:?} is finer than 1 ps"));
            }
            continue;
        }
        frac_scale /= 10;
        frac += d * frac_scale;
    }
    whole
        .checked_mul(scale)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(|| format!("{text:?} out of range"))
}

/// Parses a decimal microsecond string into a Duration, exactly.
pub fn parse_us(text: &str) -> Result<Duration, String> {
    parse_decimal_ps(text, PS_PER_US).map(Duration::from_ps)
}

/// Parses a decimal second string into a Duration, exactly.
pub fn parse_secs(text: &str) -> Result<Duration, String> {
    parse_decimal_ps(text, PS_PER_SEC).map(Duration::from_ps)
}

impl Add<Duration> for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: Duration) -> TimePoint {
        TimePoint::from_ps(self.ticks + rhs.ticks)
    }
}

impl Sub<Duration> for TimePoint {
    type Output = TimePoint;
    fn sub(self, rhs: Duration) -> TimePoint {
        TimePoint::from_ps(self.ticks - rhs.ticks)
    }
}

impl Sub<TimePoint> for TimePoint {
    type Output = Duration;
    fn sub(self, rhs: TimePoint) -> Duration {
        Duration::from_ps(self.ticks - rhs.ticks)
    }
}

impl AddAssign<Duration> for TimePoint {
    fn add_assign(&mut self, rhs: Duration) {
        self.ticks += rhs.ticks;
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration::from_ps(self.ticks + rhs.ticks)
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration::from_ps(self.ticks - rhs.ticks)
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        self.ticks += rhs.ticks;
    }
}

impl SubAssign for Duration {
    fn sub_assign(&mut self, rhs: Duration) {
        self.ticks -= rhs.ticks;
    }
}

impl Mul<i64> for Duration {
    type Output = Duration;
    fn mul(self, rhs: i64) -> Duration {
        Duration::from_ps(self.ticks * rhs)
    }
}

impl Div<i64> for Duration {
    type Output = Duration;
    fn div(self, rhs: i64) -> Duration {
        Duration::from_ps(self.ticks / rhs)
    }
}

impl Neg for Duration {
    type Output = Duration;
    fn neg(self) -> Duration {
        Duration::from_ps(-self.ticks)
    }
}

impl fmt::Debug for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.ticks)
    }
}

impl fmt::Debug for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.ticks)
    }
}
