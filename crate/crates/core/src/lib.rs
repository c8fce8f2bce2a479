//! Deterministic packet-pipeline latency simulation and trace analysis.
//!
//! The crate models a single packet-forwarding node (transfer delay, finite
//! tail-drop queue, batched CPU service preempted by periodic OS
//! interrupts), generates CBR and bursty traffic to drive it, predicts the
//! maximum sustainable rate from measured medians and interrupt costs, and
//! analyzes captured traces (pcap or CSV) into percentile, CDF, worst-case
//! scatter, loss, and delivery-target reports.

pub mod capacity;
pub mod interrupts;
pub mod profiles;
pub mod report;
pub mod sim;
pub mod stats;
pub mod time;
pub mod trace;
pub mod traffic;

pub use capacity::{CapacityInputs, CapacityResult, InterruptLoad, OverloadPrediction};
pub use interrupts::{build_interrupt_schedule, InterruptSchedule, InterruptSpec};
pub use sim::{simulate, simulate_interrupt_sampling, NodeProfile, SimResult};
pub use stats::{
    empirical_cdf, percentile, percentile_report, urllc_check, worst_k, LatencyDistribution,
    LatencySample, Level, PercentileReport, UrllcRequirement, UrllcVerdict,
};
pub use time::{Duration, TimePoint};
pub use traffic::{generate, generate_bursty, generate_cbr, ArrivalSequence, TrafficSpec};
