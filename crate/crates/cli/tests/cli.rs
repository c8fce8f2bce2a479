//! End-to-end tests of the `pktlat` binary: exit codes, file outputs, and
//! byte-identical re-runs.

use std::path::Path;
use std::process::{Command, Output};

use pktlat::time::{Duration, TimePoint, PS_PER_US};
use pktlat::trace::{write_csv, write_pcap, CaptureRecord, CounterLayout, PcapWriteOptions};

fn pktlat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pktlat"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    pktlat().args(args).current_dir(dir).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn simulate_writes_reports_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--profile",
        "hw-l2fwd",
        "--rate",
        "10",
        "--duration",
        "2",
        "--skip-warmup",
        "0.5",
        "--worst-k",
        "100",
        "--out",
        "out",
    ];
    let first = run(&args, tmp.path());
    assert_exit(&first, 0);
    let report = std::fs::read(tmp.path().join("out/report.csv")).unwrap();
    let text = String::from_utf8(report.clone()).unwrap();
    assert!(text.starts_with("scenario,mode,rate_kpps,loss_pct,p50_us"));
    assert!(text.contains("hw-l2fwd,hw,10,-,3.1"));
    assert!(tmp.path().join("out/scatter_10kpps.csv").exists());
    assert!(tmp.path().join("out/samples_10kpps.csv").exists());
    assert!(tmp.path().join("out/scenario.toml").exists());
    let scatter = std::fs::read(tmp.path().join("out/scatter_10kpps.csv")).unwrap();

    // Re-running the identical command reproduces identical bytes.
    let second = run(&args, tmp.path());
    assert_exit(&second, 0);
    assert_eq!(std::fs::read(tmp.path().join("out/report.csv")).unwrap(), report);
    assert_eq!(std::fs::read(tmp.path().join("out/scatter_10kpps.csv")).unwrap(), scatter);
}

#[test]
fn simulate_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("scenario.toml"),
        r#"
        [profile]
        name = "hw-snort-fwd"
        [traffic]
        rate_kpps = [10]
        duration_s = "2"
        [analysis]
        warmup_skip_s = "0.5"
        worst_k = 50
        [output]
        dir = "results"
        "#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", "scenario.toml"], tmp.path());
    assert_exit(&out, 0);
    let report =
        std::fs::read_to_string(tmp.path().join("results/report.csv")).unwrap();
    assert!(report.contains("hw-snort-fwd,hw,10,-,14.5"), "{report}");
}

#[test]
fn simulate_replays_emitted_arrivals() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = run(
        &[
            "simulate",
            "--profile",
            "hw-l2fwd",
            "--rate",
            "10",
            "--duration",
            "1",
            "--skip-warmup",
            "0.2",
            "--emit-arrivals",
            "--out",
            "a",
        ],
        tmp.path(),
    );
    assert_exit(&gen, 0);
    let arrivals = tmp.path().join("a/arrivals_10kpps.csv");
    assert!(arrivals.exists());

    // Replaying the emitted sequence reproduces the identical report row.
    let replay = run(
        &[
            "simulate",
            "--profile",
            "hw-l2fwd",
            "--arrivals",
            "a/arrivals_10kpps.csv",
            "--skip-warmup",
            "0.2",
            "--out",
            "b",
        ],
        tmp.path(),
    );
    assert_exit(&replay, 0);
    let row = |p: &str| {
        std::fs::read_to_string(tmp.path().join(p))
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(row("a/report.csv"), row("b/report.csv"));
}

#[test]
fn empty_sweep_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--profile", "hw-l2fwd"], tmp.path());
    assert_exit(&out, 2);
}

#[test]
fn unknown_profile_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["simulate", "--profile", "warp-drive", "--rate", "10", "--duration", "1"],
        tmp.path(),
    );
    assert_exit(&out, 2);
}

#[test]
fn capacity_prints_reference_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["capacity", "--out", "cap"], tmp.path());
    assert_exit(&out, 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("snort-fwd,hw,3.1,14.5,11.4,2949.9,87.4"), "{stdout}");
    assert!(stdout.contains("snort-filter,vm,3.3,18.4,15.1,8891.6,65.6"), "{stdout}");
    assert!(tmp.path().join("cap/capacity.csv").exists());
}

#[test]
fn capacity_rejects_inconsistent_medians() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.toml"),
        r#"
        [[capacity.scenario]]
        scenario = "x"
        mode = "hw"
        l2fwd_median_us = "5.0"
        app_median_us = "3.0"
        "#,
    )
    .unwrap();
    let out = run(&["capacity", "--config", "bad.toml"], tmp.path());
    assert_exit(&out, 2);

    // Forwarder-only input (t_cpu = 0) makes the rate division undefined.
    std::fs::write(
        tmp.path().join("zero.toml"),
        r#"
        [[capacity.scenario]]
        scenario = "l2fwd-only"
        mode = "hw"
        l2fwd_median_us = "3.1"
        app_median_us = "3.1"
        interrupts = "hw"
        "#,
    )
    .unwrap();
    let out = run(&["capacity", "--config", "zero.toml"], tmp.path());
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cpu time must be > 0"));
}

fn synth_pair(dir: &Path, latency_us: i64, lose_every: Option<u64>) {
    let n: u64 = 20_000; // 2 s at 10 kpps
    let tx: Vec<CaptureRecord> = (0..n)
        .map(|i| CaptureRecord {
            timestamp: TimePoint::from_ps(i as i64 * 100 * PS_PER_US),
            counter: i,
        })
        .collect();
    let rx: Vec<CaptureRecord> = tx
        .iter()
        .filter(|r| lose_every.is_none_or(|k| r.counter % k != k - 1))
        .map(|r| CaptureRecord {
            timestamp: r.timestamp + Duration::from_us(latency_us),
            counter: r.counter,
        })
        .collect();
    let layout = CounterLayout::default();
    let opts = PcapWriteOptions::default();
    write_pcap(dir.join("tx.pcap"), &tx, &layout, &opts).unwrap();
    write_pcap(dir.join("rx.pcap"), &rx, &layout, &opts).unwrap();
    write_csv(dir.join("tx.csv"), &tx).unwrap();
    write_csv(dir.join("rx.csv"), &rx).unwrap();
}

#[test]
fn analyze_pcap_pair_compliant() {
    let tmp = tempfile::tempdir().unwrap();
    synth_pair(tmp.path(), 50, None);
    let out = run(
        &[
            "analyze",
            "--tx",
            "tx.pcap",
            "--rx",
            "rx.pcap",
            "--skip-warmup",
            "0.5",
            "--out",
            "out",
            "--fail-on-violation",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    for f in ["report.csv", "scatter.csv", "cdf.csv", "samples.csv"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(tmp.path().join("out/report.csv")).unwrap();
    assert!(report.contains("capture,capture,10,-,50.0,50.0,50.0,50.0,50.0,50.0"), "{report}");
    // CDF of constant latency: a single step to exactly 1.
    let cdf = std::fs::read_to_string(tmp.path().join("out/cdf.csv")).unwrap();
    assert_eq!(cdf, "latency_us,fraction\n50.000000,1\n");
}

#[test]
fn analyze_violation_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    // 2% loss violates the delivery floor.
    synth_pair(tmp.path(), 50, Some(50));
    let out = run(
        &[
            "analyze",
            "--tx",
            "tx.csv",
            "--rx",
            "rx.csv",
            "--skip-warmup",
            "0",
            "--out",
            "out",
            "--fail-on-violation",
        ],
        tmp.path(),
    );
    assert_exit(&out, 1);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("violated"), "{stdout}");

    // Without the flag the run reports but exits 0.
    let out = run(
        &["analyze", "--tx", "tx.csv", "--rx", "rx.csv", "--skip-warmup", "0", "--out", "out2"],
        tmp.path(),
    );
    assert_exit(&out, 0);
}

#[test]
fn analyze_missing_file_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["analyze", "--tx", "nope.pcap", "--rx", "nada.pcap"], tmp.path());
    assert_exit(&out, 3);
}

#[test]
fn analyze_mixed_formats_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    synth_pair(tmp.path(), 10, None);
    let out = run(&["analyze", "--tx", "tx.pcap", "--rx", "rx.csv"], tmp.path());
    assert_exit(&out, 2);
}

#[test]
fn burst_study_grid_and_feasibility() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "burst-study",
            "--profile",
            "vm-snort-filter",
            "--burst",
            "1,64",
            "--batch",
            "4,32",
            "--rate",
            "10",
            "--duration",
            "1",
            "--out",
            "bs",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let summary = std::fs::read_to_string(tmp.path().join("bs/summary.csv")).unwrap();
    assert!(summary.starts_with("burst,batch,median_us,max_us,loss_pct"));
    assert_eq!(summary.lines().count(), 5, "{summary}");
    assert!(tmp.path().join("bs/cdf_burst64_batch32.csv").exists());

    // An infeasible combination is skipped with a message; the run
    // continues and still succeeds for the rest.
    let out = run(
        &[
            "burst-study",
            "--profile",
            "hw-l2fwd",
            "--burst",
            "2",
            "--batch",
            "32",
            "--rate",
            "20000",
            "--duration",
            "0.001",
            "--out",
            "bs2",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
}

#[test]
fn alias_sim_scatter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "alias-sim",
            "--profile",
            "hw-l2fwd",
            "--rate",
            "10",
            "--duration",
            "3",
            "--worst-k",
            "200",
            "--out",
            "alias",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let scatter = std::fs::read_to_string(tmp.path().join("alias/alias_scatter.csv")).unwrap();
    assert!(scatter.starts_with("time_s,latency_us"));
    assert_eq!(scatter.lines().count(), 201);
    // The worst 200 of a 3 s run must include elevated stripes.
    let elevated = scatter
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() > 3.2)
        .count();
    assert!(elevated > 10, "only {elevated} elevated points\n{scatter}");
}
