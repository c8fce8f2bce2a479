//! Python bindings: the main types and operations of the latency toolkit.
//!
//! Times cross the boundary as floats in conventional units (seconds for
//! wall-clock spans, microseconds for latencies) and are converted to the
//! core's integer picoseconds on entry.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pktlat::capacity;
use pktlat::interrupts::build_interrupt_schedule;
use pktlat::profiles;
use pktlat::stats::{standard_levels, Level};
use pktlat::time::{Duration, TimePoint};
use pktlat::trace;
use pktlat::traffic;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn us(v: f64) -> Duration {
    Duration::from_us_f64(v)
}

fn secs(v: f64) -> Duration {
    Duration::from_secs_f64(v)
}

/// Packet arrival times with consecutive counters.
#[pyclass]
struct ArrivalSequence {
    inner: traffic::ArrivalSequence,
}

#[pymethods]
impl ArrivalSequence {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Arrival timestamps in picoseconds.
    fn times_ps(&self) -> Vec<i64> {
        self.inner.times().iter().map(|t| t.as_ps()).collect()
    }
}

/// Pipeline parameters of one simulated node.
#[pyclass]
struct NodeProfile {
    inner: pktlat::NodeProfile,
}

#[pymethods]
impl NodeProfile {
    /// Looks up a calibrated built-in profile (see `builtin_profiles()`).
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        profiles::builtin_profile(name)
            .map(|inner| NodeProfile { inner })
            .ok_or_else(|| err(format!("unknown profile {name:?}")))
    }

    /// Builds a custom profile; interrupts are added separately.
    #[new]
    #[pyo3(signature = (label, transfer_us, cpu_us, batch_size=32, queue_capacity=4096))]
    fn new(
        label: &str,
        transfer_us: f64,
        cpu_us: f64,
        batch_size: u32,
        queue_capacity: u32,
    ) -> PyResult<Self> {
        pktlat::NodeProfile::new(
            label,
            us(transfer_us),
            us(cpu_us),
            batch_size,
            queue_capacity,
            Vec::new(),
        )
        .map(|inner| NodeProfile { inner })
        .map_err(err)
    }

    /// Adds one periodic interrupt train.
    #[pyo3(signature = (name, period_ps, busy_us, phase_ps=0))]
    fn add_interrupt(
        &mut self,
        name: &str,
        period_ps: i64,
        busy_us: f64,
        phase_ps: i64,
    ) -> PyResult<()> {
        let spec = pktlat::InterruptSpec::new(
            name,
            Duration::from_ps(period_ps),
            us(busy_us),
            TimePoint::from_ps(phase_ps),
        )
        .map_err(err)?;
        self.inner.interrupts.push(spec);
        Ok(())
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn batch_size(&self) -> u32 {
        self.inner.batch_size
    }

    #[setter]
    fn set_batch_size(&mut self, batch: u32) -> PyResult<()> {
        self.inner.batch_size = batch;
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn queue_capacity(&self) -> u32 {
        self.inner.queue_capacity
    }

    #[setter]
    fn set_queue_capacity(&mut self, capacity: u32) -> PyResult<()> {
        self.inner.queue_capacity = capacity;
        self.inner.validate().map_err(err)
    }

    /// Interrupt-free latency floor in microseconds.
    #[getter]
    fn baseline_latency_us(&self) -> f64 {
        self.inner.baseline_latency().as_us_f64()
    }

    /// Fraction of CPU time stolen by interrupts.
    #[getter]
    fn interrupt_duty_cycle(&self) -> f64 {
        self.inner.interrupt_duty_cycle()
    }
}

/// Latency samples plus loss accounting.
#[pyclass]
struct LatencyDistribution {
    inner: pktlat::LatencyDistribution,
}

#[pymethods]
impl LatencyDistribution {
    #[getter]
    fn tx_count(&self) -> u64 {
        self.inner.tx_count()
    }

    #[getter]
    fn rx_count(&self) -> u64 {
        self.inner.rx_count()
    }

    #[getter]
    fn drop_count(&self) -> u64 {
        self.inner.drop_count()
    }

    /// Nearest-rank percentile in microseconds.
    fn percentile_us(&self, level: f64) -> PyResult<f64> {
        let level = Level::from_percent(level).map_err(err)?;
        self.inner.percentile(level).map(|d| d.as_us_f64()).map_err(err)
    }

    /// `(level, value_us)` pairs at the standard report levels plus the max.
    fn report(&self) -> PyResult<Vec<(f64, f64)>> {
        let report = self.inner.report(&standard_levels()).map_err(err)?;
        let mut rows: Vec<(f64, f64)> = report
            .levels()
            .iter()
            .zip(report.values())
            .map(|(l, v)| (l.percent(), v.as_us_f64()))
            .collect();
        rows.push((100.0, report.max().as_us_f64()));
        Ok(rows)
    }

    fn loss_percent(&self) -> PyResult<f64> {
        let report = self.inner.report(&standard_levels()).map_err(err)?;
        Ok(report.loss_percent())
    }

    /// Empirical CDF as `(latency_us, cumulative_fraction)` steps.
    fn cdf(&self) -> PyResult<Vec<(f64, f64)>> {
        let steps = pktlat::empirical_cdf(&self.inner).map_err(err)?;
        Ok(steps.into_iter().map(|(d, f)| (d.as_us_f64(), f)).collect())
    }

    /// The `k` worst samples after `skip_warmup_s`, as `(send_s, latency_us)`.
    #[pyo3(signature = (k, skip_warmup_s=0.0))]
    fn worst_k(&self, k: usize, skip_warmup_s: f64) -> Vec<(f64, f64)> {
        pktlat::worst_k(&self.inner, k, secs(skip_warmup_s))
            .into_iter()
            .map(|(t, l)| (t.as_secs_f64(), l.as_us_f64()))
            .collect()
    }

    /// `(send_time_s, latency_us, counter)` rows in send order.
    fn samples(&self) -> Vec<(f64, f64, u64)> {
        self.inner
            .samples()
            .iter()
            .map(|s| (s.send_time.as_secs_f64(), s.latency.as_us_f64(), s.counter))
            .collect()
    }
}

/// Outcome of one pipeline run.
#[pyclass]
struct SimResult {
    inner: pktlat::SimResult,
}

#[pymethods]
impl SimResult {
    #[getter]
    fn distribution(&self) -> LatencyDistribution {
        LatencyDistribution { inner: self.inner.distribution.clone() }
    }

    #[getter]
    fn dropped_counters(&self) -> Vec<u64> {
        self.inner.drops.iter().map(|d| d.counter).collect()
    }

    #[getter]
    fn interrupt_count(&self) -> u64 {
        self.inner.interrupt_count
    }

    /// Distribution without the first `skip_s` of traffic.
    fn warmup_filtered(&self, skip_s: f64) -> LatencyDistribution {
        LatencyDistribution { inner: self.inner.warmup_filtered(secs(skip_s)) }
    }
}

/// Names of the calibrated built-in profiles.
#[pyfunction]
fn builtin_profiles() -> Vec<String> {
    profiles::BUILTIN_PROFILES.iter().map(|s| s.to_string()).collect()
}

/// Constant-bit-rate arrivals: `rate_pps` packets/s for `duration_s`.
#[pyfunction]
fn generate_cbr(rate_pps: u64, duration_s: f64) -> PyResult<ArrivalSequence> {
    let spec = traffic::TrafficSpec::cbr(rate_pps, secs(duration_s));
    traffic::generate_cbr(&spec).map(|inner| ArrivalSequence { inner }).map_err(err)
}

/// Back-to-back bursts at wire speed, average rate preserved.
#[pyfunction]
#[pyo3(signature = (rate_pps, burst_size, duration_s, frame_size=64, link_speed_bps=10_000_000_000))]
fn generate_bursty(
    rate_pps: u64,
    burst_size: u32,
    duration_s: f64,
    frame_size: u32,
    link_speed_bps: u64,
) -> PyResult<ArrivalSequence> {
    let spec = traffic::TrafficSpec {
        rate_pps,
        burst_size,
        duration: secs(duration_s),
        frame_size,
        link_speed_bps,
    };
    traffic::generate(&spec).map(|inner| ArrivalSequence { inner }).map_err(err)
}

/// Runs the pipeline simulation.
#[pyfunction]
fn simulate(profile: &NodeProfile, arrivals: &ArrivalSequence) -> PyResult<SimResult> {
    pktlat::simulate(&profile.inner, &arrivals.inner)
        .map(|inner| SimResult { inner })
        .map_err(err)
}

/// Interrupt-sampling scatter for a profile's schedule:
/// `(send_s, latency_us)` per probe.
#[pyfunction]
#[pyo3(signature = (profile, rate_pps, duration_s, base_latency_us=None))]
fn alias_scatter(
    profile: &NodeProfile,
    rate_pps: u64,
    duration_s: f64,
    base_latency_us: Option<f64>,
) -> Vec<(f64, f64)> {
    let duration = secs(duration_s);
    let schedule = build_interrupt_schedule(&profile.inner.interrupts, duration);
    let base = base_latency_us.map(us).unwrap_or_else(|| profile.inner.baseline_latency());
    pktlat::simulate_interrupt_sampling(rate_pps, &schedule, base, duration)
        .into_iter()
        .map(|(t, l)| (t.as_secs_f64(), l.as_us_f64()))
        .collect()
}

/// Per-packet CPU time from medians: `median_app - median_l2fwd`, in us.
#[pyfunction]
fn estimate_tcpu_us(median_app_us: f64, median_l2fwd_us: f64) -> PyResult<f64> {
    capacity::estimate_tcpu(us(median_app_us), us(median_l2fwd_us))
        .map(|d| d.as_us_f64())
        .map_err(err)
}

/// End-to-end floor: `t_cpu + 2 * t_transfer`, in us.
#[pyfunction]
fn e2e_delay_us(t_cpu_us: f64, t_transfer_us: f64) -> f64 {
    capacity::e2e_delay(us(t_cpu_us), us(t_transfer_us)).as_us_f64()
}

/// Interrupt busy time per second from `(rate_hz, delay_us)` pairs, in us.
#[pyfunction]
fn interrupt_budget_us(table: Vec<(f64, f64)>) -> PyResult<f64> {
    let loads = table
        .into_iter()
        .map(|(hz, delay)| capacity::InterruptLoad::from_hz(hz, us(delay)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    capacity::interrupt_budget(&loads).map(|d| d.as_us_f64()).map_err(err)
}

/// Maximum sustainable rate `(1 s - d_sigma) / t_cpu`, in packets/s.
#[pyfunction]
fn max_rate_pps(t_cpu_us: f64, d_sigma_us: f64) -> PyResult<f64> {
    capacity::max_rate(us(t_cpu_us), us(d_sigma_us)).map_err(err)
}

/// True when the offered rate exceeds the predicted maximum.
#[pyfunction]
fn predict_overload(offered_pps: u64, t_cpu_us: f64, d_sigma_us: f64) -> PyResult<bool> {
    let r_max_pps = capacity::max_rate(us(t_cpu_us), us(d_sigma_us)).map_err(err)?;
    let result = capacity::CapacityResult {
        t_cpu: us(t_cpu_us),
        d_sigma: us(d_sigma_us),
        r_max_pps,
    };
    Ok(matches!(
        capacity::predict_overload(offered_pps, &result),
        capacity::OverloadPrediction::OverloadPredicted
    ))
}

/// One reference row: scenario, mode, l2fwd and application medians (us),
/// derived CPU time (us), interrupt budget (us/s), and max rate (kpkts/s).
type CapacityRow = (String, String, f64, f64, f64, f64, f64);

/// The bundled reference capacity table:
/// `(scenario, mode, l2fwd_us, app_us, tcpu_us, dsigma_us, rmax_kpps)`.
#[pyfunction]
fn reference_capacity_table() -> PyResult<Vec<CapacityRow>> {
    profiles::reference_scenarios()
        .into_iter()
        .map(|r| {
            let result = capacity::evaluate(&r.inputs).map_err(err)?;
            Ok((
                r.scenario.to_string(),
                r.mode.to_string(),
                r.inputs.median_l2fwd_e2e.as_us_f64(),
                r.inputs.median_app_e2e.as_us_f64(),
                result.t_cpu.as_us_f64(),
                result.d_sigma.as_us_f64(),
                result.r_max_pps / 1_000.0,
            ))
        })
        .collect()
}

/// Matches a TX/RX capture pair (both pcap or both CSV) into a
/// distribution, excluding the first `warmup_skip_s` of traffic.
#[pyfunction]
#[pyo3(signature = (tx_path, rx_path, warmup_skip_s=1.0, udp_dst_port=53))]
fn analyze_pair(
    tx_path: &str,
    rx_path: &str,
    warmup_skip_s: f64,
    udp_dst_port: u16,
) -> PyResult<LatencyDistribution> {
    let csv = tx_path.ends_with(".csv");
    let (tx, rx) = if csv {
        (trace::read_csv(tx_path).map_err(err)?, trace::read_csv(rx_path).map_err(err)?)
    } else {
        let layout = trace::CounterLayout::default();
        let options = trace::CaptureOptions {
            udp_dst_port: (udp_dst_port != 0).then_some(udp_dst_port),
            ..Default::default()
        };
        let (tx_cap, rx_cap) =
            trace::read_pcap_pair(tx_path, rx_path, &layout, &options).map_err(err)?;
        (tx_cap.records, rx_cap.records)
    };
    let matched = trace::match_traces(&tx, &rx).map_err(err)?;
    let filtered = trace::warmup_filter(&matched, secs(warmup_skip_s));
    Ok(LatencyDistribution { inner: filtered.distribution })
}

#[pymodule]
fn pktlat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ArrivalSequence>()?;
    m.add_class::<NodeProfile>()?;
    m.add_class::<LatencyDistribution>()?;
    m.add_class::<SimResult>()?;
    m.add_function(wrap_pyfunction!(builtin_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cbr, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bursty, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(alias_scatter, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tcpu_us, m)?)?;
    m.add_function(wrap_pyfunction!(e2e_delay_us, m)?)?;
    m.add_function(wrap_pyfunction!(interrupt_budget_us, m)?)?;
    m.add_function(wrap_pyfunction!(max_rate_pps, m)?)?;
    m.add_function(wrap_pyfunction!(predict_overload, m)?)?;
    m.add_function(wrap_pyfunction!(reference_capacity_table, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_pair, m)?)?;
    Ok(())
}
