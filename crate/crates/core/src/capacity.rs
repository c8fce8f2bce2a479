//! Capacity prediction from measured medians and interrupt costs.
//!
//! Per-packet CPU time is the application median minus the bare-forwarder
//! median (which approximates twice the one-way transfer delay). The
//! sustainable rate is the CPU time left per second after interrupts,
//! divided by the per-packet cost. All intermediate arithmetic is exact;
//! rounding happens only at display.

use thiserror::Error;

use crate::time::{Duration, PS_PER_SEC};

#[derive(Debug, Error, PartialEq)]
pub enum CapacityError {
    #[error("transfer exceeds total: application median below forwarder median")]
    TransferExceedsTotal,
    #[error("interrupts saturate CPU: busy time >= 1 s per second")]
    InterruptsSaturated,
    #[error("cpu time must be > 0")]
    ZeroCpuTime,
    #[error("interrupt rate must be > 0")]
    InvalidRate,
    #[error("interrupt delay must be >= 0")]
    InvalidDelay,
}

/// One interrupt source as a (rate, per-occurrence delay) pair.
///
/// The rate is stored in millihertz so decimal rates like 166.7 Hz are
/// exact and the budget sum reproduces published digits without float
/// error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterruptLoad {
    pub rate_millihertz: u64,
    pub delay: Duration,
}

impl InterruptLoad {
    pub fn new(rate_millihertz: u64, delay: Duration) -> Result<Self, CapacityError> {
        if rate_millihertz == 0 {
            return Err(CapacityError::InvalidRate);
        }
        if delay.is_negative() {
            return Err(CapacityError::InvalidDelay);
        }
        Ok(InterruptLoad { rate_millihertz, delay })
    }

    /// Rounds a decimal Hz rate to millihertz.
    pub fn from_hz(rate_hz: f64, delay: Duration) -> Result<Self, CapacityError> {
        if !rate_hz.is_finite() || rate_hz <= 0.0 {
            return Err(CapacityError::InvalidRate);
        }
        Self::new((rate_hz * 1_000.0).round() as u64, delay)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_millihertz as f64 / 1_000.0
    }
}

/// Measured inputs for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityInputs {
    /// Median end-to-end latency of the application under study.
    pub median_app_e2e: Duration,
    /// Median of the bare forwarder; approximates `2 * t_transfer`.
    pub median_l2fwd_e2e: Duration,
    pub interrupt_table: Vec<InterruptLoad>,
}

/// Derived capacity figures for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityResult {
    pub t_cpu: Duration,
    /// Interrupt busy time per second.
    pub d_sigma: Duration,
    /// Maximum sustainable packet rate, packets per second.
    pub r_max_pps: f64,
}

/// `t_cpu = median_app - median_l2fwd`, exact.
pub fn estimate_tcpu(
    median_app: Duration,
    median_l2fwd: Duration,
) -> Result<Duration, CapacityError> {
    if median_app < median_l2fwd {
        return Err(CapacityError::TransferExceedsTotal);
    }
    Ok(median_app - median_l2fwd)
}

/// `t_e2e = t_cpu + 2 * t_transfer`, exact.
pub fn e2e_delay(t_cpu: Duration, t_transfer: Duration) -> Duration {
    t_cpu + t_transfer * 2
}

/// Interrupt busy time per second: sum of rate * delay, exact.
pub fn interrupt_budget(table: &[InterruptLoad]) -> Result<Duration, CapacityError> {
    let mut milli_ps: u128 = 0; // millihertz * ps = milli-ps per second
    for load in table {
        if load.delay.is_negative() {
            return Err(CapacityError::InvalidDelay);
        }
        milli_ps += load.rate_millihertz as u128 * load.delay.as_ps() as u128;
    }
    let ps = (milli_ps + 500) / 1_000;
    if ps >= PS_PER_SEC as u128 {
        return Err(CapacityError::InterruptsSaturated);
    }
    Ok(Duration::from_ps(ps as i64))
}

/// `R_max = (1 s - d_sigma) / t_cpu`, in packets per second.
pub fn max_rate(t_cpu: Duration, d_sigma: Duration) -> Result<f64, CapacityError> {
    if t_cpu <= Duration::ZERO {
        return Err(CapacityError::ZeroCpuTime);
    }
    if d_sigma.is_negative() || d_sigma.as_ps() >= PS_PER_SEC {
        return Err(CapacityError::InterruptsSaturated);
    }
    Ok((PS_PER_SEC - d_sigma.as_ps()) as f64 / t_cpu.as_ps() as f64)
}

/// Full evaluation of one scenario's inputs.
pub fn evaluate(inputs: &CapacityInputs) -> Result<CapacityResult, CapacityError> {
    let t_cpu = estimate_tcpu(inputs.median_app_e2e, inputs.median_l2fwd_e2e)?;
    let d_sigma = interrupt_budget(&inputs.interrupt_table)?;
    let r_max_pps = max_rate(t_cpu, d_sigma)?;
    Ok(CapacityResult { t_cpu, d_sigma, r_max_pps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverloadPrediction {
    Safe,
    OverloadPredicted,
}

/// Predicts overload for an offered rate. The comparison is exact:
/// `offered > R_max` iff `offered * t_cpu > 1 s - d_sigma`. The model is a
/// conservative lower bound; real systems may survive slightly above it,
/// but never below it in the model's intent.
pub fn predict_overload(offered_pps: u64, result: &CapacityResult) -> OverloadPrediction {
    let lhs = offered_pps as u128 * result.t_cpu.as_ps().max(0) as u128;
    let rhs = (PS_PER_SEC - result.d_sigma.as_ps()) as u128;
    if lhs > rhs {
        OverloadPrediction::OverloadPredicted
    } else {
        OverloadPrediction::Safe
    }
}

/// Truncated 0.1 kpkts/s display of the maximum rate: exact integer
/// arithmetic, matching the convention of the published table.
pub fn r_max_kpps_string(t_cpu: Duration, d_sigma: Duration) -> Result<String, CapacityError> {
    if t_cpu <= Duration::ZERO {
        return Err(CapacityError::ZeroCpuTime);
    }
    let num = (PS_PER_SEC - d_sigma.as_ps()) as u128 * 10;
    let den = t_cpu.as_ps() as u128 * 1_000;
    let tenths = num / den;
    Ok(format!("{}.{}", tenths / 10, tenths % 10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_us;

    fn us(s: &str) -> Duration {
        parse_us(s).unwrap()
    }

    #[test]
    fn tcpu_from_medians() {
        assert_eq!(estimate_tcpu(us("14.5"), us("3.1")).unwrap(), us("11.4"));
        assert_eq!(estimate_tcpu(us("18.4"), us("3.3")).unwrap(), us("15.1"));
        assert_eq!(estimate_tcpu(us("7"), us("7")).unwrap(), Duration::ZERO);
        assert_eq!(
            estimate_tcpu(us("3.0"), us("3.1")).unwrap_err(),
            CapacityError::TransferExceedsTotal
        );
    }

    #[test]
    fn e2e_inversion() {
        assert_eq!(e2e_delay(us("11.4"), us("1.55")), us("14.5"));
        assert_eq!(e2e_delay(us("14.3"), us("1.55")), us("17.4"));
        assert_eq!(e2e_delay(Duration::ZERO, us("5")), us("10"));
    }

    #[test]
    fn budget_reproduces_reference_digits() {
        // 166.7 Hz * 10.9 us + 83.3 Hz * 13.6 us = 2949.91 us per second.
        let hw = [
            InterruptLoad::from_hz(166.7, us("10.9")).unwrap(),
            InterruptLoad::from_hz(83.3, us("13.6")).unwrap(),
        ];
        assert_eq!(interrupt_budget(&hw).unwrap().as_ps(), 2_949_910_000);

        let vm = [
            InterruptLoad::from_hz(166.7, us("17.5")).unwrap(),
            InterruptLoad::from_hz(83.3, us("19.2")).unwrap(),
            InterruptLoad::from_hz(250.0, us("17.5")).unwrap(),
        ];
        assert_eq!(interrupt_budget(&vm).unwrap().as_ps(), 8_891_610_000);

        assert_eq!(interrupt_budget(&[]).unwrap(), Duration::ZERO);
    }

    #[test]
    fn budget_saturation_guard() {
        let heavy = [InterruptLoad::from_hz(1_000.0, us("1000")).unwrap()];
        assert_eq!(interrupt_budget(&heavy).unwrap_err(), CapacityError::InterruptsSaturated);
    }

    #[test]
    fn max_rate_values() {
        let hw_fwd = max_rate(us("11.4"), us("2949.91")).unwrap();
        assert!((hw_fwd - 87_460.5).abs() < 0.1, "{hw_fwd}");
        let vm_filter = max_rate(us("15.1"), us("8891.61")).unwrap();
        assert!((vm_filter - 65_636.3).abs() < 0.1, "{vm_filter}");
        let trivial = max_rate(us("1"), Duration::ZERO).unwrap();
        assert_eq!(trivial, 1_000_000.0);
        assert_eq!(max_rate(Duration::ZERO, Duration::ZERO).unwrap_err(), CapacityError::ZeroCpuTime);
    }

    #[test]
    fn kpps_display_truncates() {
        // 87,460.5 pps shows as 87.4, matching the published convention.
        assert_eq!(r_max_kpps_string(us("11.4"), us("2949.91")).unwrap(), "87.4");
        assert_eq!(r_max_kpps_string(us("15.1"), us("8891.61")).unwrap(), "65.6");
        assert_eq!(r_max_kpps_string(us("1"), Duration::ZERO).unwrap(), "1000.0");
    }

    #[test]
    fn overload_prediction() {
        let result = CapacityResult {
            t_cpu: us("11.4"),
            d_sigma: us("2949.91"),
            r_max_pps: 87_460.5,
        };
        assert_eq!(predict_overload(90_000, &result), OverloadPrediction::OverloadPredicted);
        assert_eq!(predict_overload(87_000, &result), OverloadPrediction::Safe);
        assert_eq!(predict_overload(0, &result), OverloadPrediction::Safe);
        // Known conservative case: prediction flags 80 kpps on the
        // virtualized forwarder even though the measured system survived it.
        let vm_fwd = CapacityResult {
            t_cpu: us("12.6"),
            d_sigma: us("8891.61"),
            r_max_pps: 78_659.4,
        };
        assert_eq!(predict_overload(80_000, &vm_fwd), OverloadPrediction::OverloadPredicted);
    }

    #[test]
    fn roundtrip_identity() {
        for c in [0i64, 1, 11_400_000, 999] {
            for t in [0i64, 1_550_000, 7] {
                let cpu = Duration::from_ps(c);
                let transfer = Duration::from_ps(t);
                let e2e = e2e_delay(cpu, transfer);
                assert_eq!(estimate_tcpu(e2e, transfer * 2).unwrap(), cpu);
            }
        }
    }
}
