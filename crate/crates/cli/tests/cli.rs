use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wlan-assoc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn wlan-assoc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data records of a CSV table, after the hash line.
fn records(text: &str) -> Vec<csv::StringRecord> {
    let (first, body) = text.split_once('\n').unwrap();
    assert!(first.starts_with("# manifest-sha256: "));
    csv::Reader::from_reader(body.as_bytes()).records().map(Result::unwrap).collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let header = text.lines().nth(1).unwrap();
    let i = header.split(',').position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    records(text).iter().map(|r| r[i].to_string()).collect()
}

#[test]
fn throughput_rows_per_state() {
    let o = run(&["throughput", "2@11,3@5.5,2@2,3@1", "5@11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap(), "assoc,k,rates_mbps,counts,phi_mbps,n_max,residual");
    let phi: Vec<f64> = column(&text, "phi_mbps").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(phi.len(), 2);
    assert!(phi.iter().all(|&p| p > 0.0 && p < 11.0));
    assert_eq!(column(&text, "k"), ["4", "1"]);
}

#[test]
fn malformed_or_empty_state_is_a_usage_error() {
    for bad in ["0@11", "3x11", "2@11,2@11", ""] {
        let o = run(&["throughput", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", stderr(&o));
    }
}

#[test]
fn unconfigured_rate_fails() {
    let o = run(&["throughput", "3@7"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("data rates"));
}

#[test]
fn single_rate_throughput_inside_oracle_interval() {
    let o = run(&["oracle", "5@11", "--epochs", "200000", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let hat: f64 = column(&text, "phi_hat_mbps")[0].parse().unwrap();
    let hw: f64 = column(&text, "ci99_halfwidth_mbps")[0].parse().unwrap();
    let phi: f64 = column(&text, "phi_analytic_mbps")[0].parse().unwrap();
    assert!((hat - phi).abs() <= hw, "{phi} outside {hat} ± {hw}");
}

#[test]
fn newcomer_flag_matches_explicit_joined_state() {
    let joined = run(&["delay", "2@11,3@5.5,2@2,3@1"]);
    let with = run(&["delay", "1@11,3@5.5,2@2,3@1", "--with-newcomer", "11"]);
    assert!(joined.status.success() && with.status.success());
    let d_joined = column(&stdout(&joined), "d_s");
    let d_with = column(&stdout(&with), "d_s");
    assert_eq!(d_joined, d_with);
    assert_eq!(column(&stdout(&with), "newcomer_rate_mbps"), ["11.0"]);
}

#[test]
fn lone_station_delay_is_transfer_time() {
    let o = run(&["delay", "1@11"]);
    let text = stdout(&o);
    let tau: f64 = column(&text, "tau_mbps")[0].parse().unwrap();
    let d: f64 = column(&text, "d_s")[0].parse().unwrap();
    // Default mix: 0.6 * 50 KB + 0.4 * 750 KB.
    let d1 = (0.6 * 50e3 + 0.4 * 750e3) * 8.0 / (tau * 1e6);
    assert!((d - d1).abs() / d1 < 1e-9, "{d} vs {d1}");
}

#[test]
fn params_and_mix_files_are_overlaid() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.toml");
    std::fs::write(&params, "tcp_data_payload_bytes = 1000.0\n").unwrap();
    let mix = dir.path().join("mix.toml");
    std::fs::write(&mix, "classes = [{ mean_size_bytes = 1e5, mean_read_s = 10.0, probability = 1.0 }]\n").unwrap();

    let base = column(&stdout(&run(&["throughput", "5@11"])), "phi_mbps");
    let smaller = column(&stdout(&run(&["throughput", "5@11", "--params", params.to_str().unwrap()])), "phi_mbps");
    assert_ne!(base, smaller);

    let o = run(&["delay", "1@11", "--mix", mix.to_str().unwrap()]);
    let text = stdout(&o);
    let tau: f64 = column(&text, "tau_mbps")[0].parse().unwrap();
    let d: f64 = column(&text, "d_s")[0].parse().unwrap();
    assert!((d - 8e5 / (tau * 1e6)).abs() < 1e-9);
}

#[test]
fn n_max_flag_reaches_output() {
    let o = run(&["throughput", "2@11,2@1", "--n-max", "16"]);
    assert_eq!(column(&stdout(&o), "n_max"), ["16"]);
}

#[test]
fn corrupted_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("syntax.toml", "[scenario\np_centre = 0.5\n"),
        ("unknown.toml", "[scenario]\nwarp_factor = 9\n"),
        ("range.toml", "[scenario]\np_centre = 1.5\n"),
        ("version.toml", "version = 99\n"),
    ] {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let o = run(&["validate", "--criteria", "4", "--config", path.to_str().unwrap()]);
        assert!(!o.status.success(), "{name} accepted");
        assert!(stderr(&o).contains("config error"), "{name}: {}", stderr(&o));
    }
    let o = run(&["throughput", "5@11", "--config", "/nonexistent/cfg.toml"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_policy_lists_valid_names() {
    let o = run(&["compare", "--policies", "eda,nearest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eda, rssi, load-balance, eva"));
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn simulate_writes_tables_with_shared_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--seeds", "2", "--duration", "200", "--policy", "rssi", "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    let hash = manifest["manifest_sha256"].as_str().unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([1, 2]));
    for stem in ["stations", "runs", "occupancy", "summary"] {
        let csv = read(dir.path(), &format!("{stem}.csv"));
        assert_eq!(csv.lines().next().unwrap(), format!("# manifest-sha256: {hash}"));
        let json: serde_json::Value = serde_json::from_str(&read(dir.path(), &format!("{stem}.json"))).unwrap();
        assert_eq!(json["manifest_sha256"], hash);
        assert_eq!(json["rows"].as_array().unwrap().len(), records(&csv).len());
    }
    assert_eq!(records(&read(dir.path(), "runs.csv")).len(), 2);
    assert!(column(&read(dir.path(), "stations.csv"), "policy").iter().all(|p| p == "rssi"));
}

#[test]
fn rerun_reproduces_outputs_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["simulate", "--duration", "200", "--seed", "9", "--out-dir", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    for name in ["stations.csv", "runs.json", "occupancy.csv", "summary.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn compare_reports_each_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare",
        "--policies",
        "eda,rssi",
        "--p-centre",
        "0.1,0.9",
        "--arrival-rates",
        "0.5",
        "--seeds",
        "3",
        "--duration",
        "200",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(records(&text).len(), 4);
    assert!(column(&text, "runs").iter().all(|r| r == "3"));
    assert!(column(&text, "th_avg_ci95_mbps").iter().all(|c| !c.is_empty()));
    assert_eq!(records(&read(dir.path(), "runs.csv")).len(), 12);
    assert_eq!(read(dir.path(), "summary.csv"), text);
}

#[test]
fn validate_selected_criteria() {
    let o = run(&["validate", "--criteria", "4,7"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("[PASS] 4."));
    assert!(text.contains("[PASS] 7."));
    assert!(!text.contains("] 1."));
}

#[test]
fn validate_reports_failures_with_nonzero_exit() {
    let o = run(&["validate", "--criteria", "1"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("[FAIL] 1."));
}

#[test]
fn fixed_attempt_probability_keeps_oracle_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("beta.toml");
    std::fs::write(&cfg, "[phy_mac.attempt]\nkind = \"fixed\"\nbeta = 0.05\n").unwrap();
    let o = run(&["validate", "--criteria", "2", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}
