//! Scenario configuration: one TOML file with sections mirroring the core
//! types (`[profile]`, `[traffic]`, `[analysis]`, `[urllc]`, `[capacity]`,
//! `[output]`). Durations are written as decimal strings ("3.1") so values
//! survive the round trip exactly; plain numbers are also accepted.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use pktlat::capacity::{CapacityInputs, InterruptLoad};
use pktlat::interrupts::InterruptSpec;
use pktlat::profiles;
use pktlat::sim::NodeProfile;
use pktlat::stats::{Level, UrllcRequirement};
use pktlat::time::{parse_decimal_ps, Duration, TimePoint, PS_PER_SEC, PS_PER_US};

use crate::CliError;

/// Picosecond duration serialized as a decimal in `SCALE` ps units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decimal<const SCALE: i64>(pub i64);

pub type UsDecimal = Decimal<PS_PER_US>;
pub type SecsDecimal = Decimal<PS_PER_SEC>;

impl<const SCALE: i64> Decimal<SCALE> {
    pub fn duration(self) -> Duration {
        Duration::from_ps(self.0)
    }

    fn canonical(self) -> String {
        let whole = self.0 / SCALE;
        let frac = self.0 % SCALE;
        if frac == 0 {
            return whole.to_string();
        }
        let digits = SCALE.ilog10() as usize;
        let s = format!("{frac:0digits$}");
        format!("{whole}.{}", s.trim_end_matches('0'))
    }
}

impl<const SCALE: i64> Serialize for Decimal<SCALE> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de, const SCALE: i64> Deserialize<'de> for Decimal<SCALE> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let ps = match Raw::deserialize(deserializer)? {
            Raw::Int(v) => v.checked_mul(SCALE).ok_or_else(|| D::Error::custom("out of range"))?,
            Raw::Float(v) => (v * SCALE as f64).round() as i64,
            Raw::Text(s) => parse_decimal_ps(&s, SCALE).map_err(D::Error::custom)?,
        };
        Ok(Decimal(ps))
    }
}

fn default_frame_size() -> u32 {
    64
}

fn default_link_speed() -> u64 {
    10_000_000_000
}

fn default_burst() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// Sweep rates in kpackets/s.
    #[serde(default)]
    pub rate_kpps: Vec<f64>,
    #[serde(default = "default_burst")]
    pub burst_size: u32,
    pub duration_s: SecsDecimal,
    #[serde(default = "default_frame_size")]
    pub frame_size: u32,
    #[serde(default = "default_link_speed")]
    pub link_speed_bps: u64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            rate_kpps: Vec::new(),
            burst_size: 1,
            duration_s: Decimal(30 * PS_PER_SEC),
            frame_size: 64,
            link_speed_bps: 10_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterruptSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ps: Option<i64>,
    pub busy_us: UsDecimal,
    #[serde(default)]
    pub phase_ps: i64,
}

impl InterruptSection {
    fn build(&self) -> Result<InterruptSpec, CliError> {
        let phase = TimePoint::from_ps(self.phase_ps);
        let spec = match (self.period_ps, self.rate_hz) {
            (Some(period), None) => InterruptSpec::new(
                self.name.clone(),
                Duration::from_ps(period),
                self.busy_us.duration(),
                phase,
            ),
            (None, Some(rate)) => {
                InterruptSpec::from_rate_hz(self.name.clone(), rate, self.busy_us.duration(), phase)
            }
            _ => {
                return Err(CliError::Config(format!(
                    "interrupt {:?}: exactly one of rate_hz or period_ps is required",
                    self.name
                )))
            }
        };
        spec.map_err(|e| CliError::Config(format!("interrupt {:?}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// Built-in profile name; mutually exclusive with the inline fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_us: Option<UsDecimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_us: Option<UsDecimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interrupt: Vec<InterruptSection>,
}

impl ProfileSection {
    pub fn build(&self) -> Result<NodeProfile, CliError> {
        if let Some(name) = &self.name {
            if self.transfer_us.is_some()
                || self.cpu_us.is_some()
                || self.label.is_some()
                || !self.interrupt.is_empty()
            {
                return Err(CliError::Config(
                    "profile: name and inline fields are mutually exclusive \
                     (batch_size/queue_capacity may override)"
                        .into(),
                ));
            }
            let mut profile = profiles::builtin_profile(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown profile {name:?} (built-ins: {})",
                    profiles::BUILTIN_PROFILES.join(", ")
                ))
            })?;
            if let Some(b) = self.batch_size {
                profile.batch_size = b;
            }
            if let Some(q) = self.queue_capacity {
                profile.queue_capacity = q;
            }
            profile.validate().map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(profile);
        }
        let interrupts =
            self.interrupt.iter().map(|i| i.build()).collect::<Result<Vec<_>, _>>()?;
        NodeProfile::new(
            self.label.clone().unwrap_or_else(|| "custom".into()),
            self.transfer_us.map(Decimal::duration).unwrap_or(Duration::ZERO),
            self.cpu_us.map(Decimal::duration).unwrap_or(Duration::ZERO),
            self.batch_size.unwrap_or(32),
            self.queue_capacity.unwrap_or(4_096),
            interrupts,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

fn default_worst_k() -> usize {
    5_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub warmup_skip_s: SecsDecimal,
    #[serde(default = "default_worst_k")]
    pub worst_k: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { warmup_skip_s: Decimal(PS_PER_SEC), worst_k: 5_000 }
    }
}

fn default_min_delivery() -> f64 {
    0.99999
}

fn default_level() -> f64 {
    99.999
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrllcSection {
    pub max_latency_us: UsDecimal,
    #[serde(default = "default_min_delivery")]
    pub min_delivery: f64,
    #[serde(default = "default_level")]
    pub percentile_level: f64,
}

impl Default for UrllcSection {
    fn default() -> Self {
        UrllcSection {
            max_latency_us: Decimal(350 * PS_PER_US),
            min_delivery: 0.99999,
            percentile_level: 99.999,
        }
    }
}

impl UrllcSection {
    pub fn requirement(&self) -> Result<UrllcRequirement, CliError> {
        let level = Level::from_percent(self.percentile_level)
            .map_err(|e| CliError::Config(e.to_string()))?;
        UrllcRequirement::new(self.max_latency_us.duration(), self.min_delivery, level)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityInterrupt {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_millihertz: Option<u64>,
    pub delay_us: UsDecimal,
}

impl CapacityInterrupt {
    fn build(&self) -> Result<InterruptLoad, CliError> {
        let load = match (self.rate_millihertz, self.rate_hz) {
            (Some(mhz), None) => InterruptLoad::new(mhz, self.delay_us.duration()),
            (None, Some(hz)) => InterruptLoad::from_hz(hz, self.delay_us.duration()),
            _ => {
                return Err(CliError::Config(
                    "capacity interrupt: exactly one of rate_hz or rate_millihertz is required"
                        .into(),
                ))
            }
        };
        load.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityScenario {
    pub scenario: String,
    pub mode: String,
    pub l2fwd_median_us: UsDecimal,
    pub app_median_us: UsDecimal,
    /// Named interrupt table ("hw" or "vm"); mutually exclusive with
    /// inline `interrupt` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interrupts: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interrupt: Vec<CapacityInterrupt>,
}

impl CapacityScenario {
    pub fn inputs(&self) -> Result<CapacityInputs, CliError> {
        let interrupt_table = match (&self.interrupts, self.interrupt.is_empty()) {
            (Some(name), true) => match name.as_str() {
                "hw" => profiles::hw_interrupt_loads(),
                "vm" => profiles::vm_interrupt_loads(),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown interrupt table {other:?} (expected \"hw\" or \"vm\")"
                    )))
                }
            },
            (None, false) => {
                self.interrupt.iter().map(|i| i.build()).collect::<Result<Vec<_>, _>>()?
            }
            (None, true) => Vec::new(),
            (Some(_), false) => {
                return Err(CliError::Config(
                    "capacity scenario: named table and inline interrupts are mutually exclusive"
                        .into(),
                ))
            }
        };
        Ok(CapacityInputs {
            median_app_e2e: self.app_median_us.duration(),
            median_l2fwd_e2e: self.l2fwd_median_us.duration(),
            interrupt_table,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default, rename = "scenario", skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<CapacityScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_true")]
    pub emit_samples: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, emit_samples: true }
    }
}

fn default_true() -> bool {
    true
}

/// Root of the scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub urllc: UrllcSection,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Sweep rates in packets/s.
    pub fn sweep_pps(&self) -> Vec<u64> {
        self.traffic.rate_kpps.iter().map(|&k| (k * 1_000.0).round() as u64).collect()
    }

    pub fn validate_sweep(&self) -> Result<(), CliError> {
        if self.traffic.rate_kpps.is_empty() {
            return Err(CliError::Config("empty rate sweep (set traffic.rate_kpps or --rate)".into()));
        }
        if self.traffic.duration_s.0 <= self.analysis.warmup_skip_s.0 {
            return Err(CliError::Config("duration must exceed warmup_skip".into()));
        }
        Ok(())
    }
}
