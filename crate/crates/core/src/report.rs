//! CSV and JSON output with a manifest hash.
//!
//! Every CSV file starts with a `# manifest-sha256: <hex>` line followed by
//! a header row. Column orders are fixed by the `HEADER` of each row type.
//! The JSON mirror of a table holds the same hash and the same rows.
//! Files are written to a temporary name and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assoc::AssociationState;
use crate::config::ExperimentConfig;
use crate::delay::DelayEstimate;
use crate::error::{Error, Result};
use crate::oracle::OracleEstimate;
use crate::policies::PolicyKind;
use crate::scenario::{Geometry, RunMetrics, Summary};
use crate::throughput::ThroughputResult;

/// Everything that determines a command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-specific arguments after defaults are applied.
    pub args: serde_json::Value,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
}

impl Manifest {
    pub fn new(command: &str, args: serde_json::Value, config: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            config: config.clone(),
            seeds,
        }
    }

    /// SHA-256 of the compact JSON encoding, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

/// Manifest as written next to the outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(flatten)]
    pub manifest: Manifest,
    pub manifest_sha256: String,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
}

/// A CSV row type with a frozen column order.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub assoc: String,
    pub k: usize,
    /// Rates of the occupied classes, `;`-separated.
    pub rates_mbps: String,
    /// Station counts matching `rates_mbps`.
    pub counts: String,
    pub phi_mbps: f64,
    pub n_max: usize,
    pub residual: f64,
}

impl Row for ThroughputRow {
    const HEADER: &'static [&'static str] = &["assoc", "k", "rates_mbps", "counts", "phi_mbps", "n_max", "residual"];
}

fn join<T: ToString>(xs: impl Iterator<Item = T>) -> String {
    xs.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl ThroughputRow {
    pub fn new(assoc: &AssociationState, r: &ThroughputResult) -> Self {
        ThroughputRow {
            assoc: assoc.to_string(),
            k: assoc.occupied().count(),
            rates_mbps: join(assoc.occupied().map(|c| c.rate_mbps)),
            counts: join(assoc.occupied().map(|c| c.count)),
            phi_mbps: r.phi_mbps,
            n_max: r.n_max_used,
            residual: r.residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub assoc: String,
    /// Set when the estimate includes a newcomer at this rate.
    pub newcomer_rate_mbps: Option<f64>,
    pub population: u32,
    pub tau_mbps: f64,
    pub n_avg_ds: f64,
    pub n_avg_rs: f64,
    pub t_h: f64,
    pub d_s: f64,
}

impl Row for DelayRow {
    const HEADER: &'static [&'static str] =
        &["assoc", "newcomer_rate_mbps", "population", "tau_mbps", "n_avg_ds", "n_avg_rs", "t_h", "d_s"];
}

impl DelayRow {
    pub fn new(assoc: &AssociationState, newcomer_rate_mbps: Option<f64>, d: &DelayEstimate) -> Self {
        DelayRow {
            assoc: assoc.to_string(),
            newcomer_rate_mbps,
            population: d.population,
            tau_mbps: d.tau_mbps,
            n_avg_ds: d.n_avg_ds,
            n_avg_rs: d.n_avg_rs,
            t_h: d.t_h,
            d_s: d.d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub assoc: String,
    pub phi_hat_mbps: f64,
    pub ci99_halfwidth_mbps: f64,
    pub epochs: u64,
    pub successes: u64,
    pub simulated_time_s: f64,
    pub seed: u64,
    pub phi_analytic_mbps: Option<f64>,
}

impl Row for OracleRow {
    const HEADER: &'static [&'static str] = &[
        "assoc",
        "phi_hat_mbps",
        "ci99_halfwidth_mbps",
        "epochs",
        "successes",
        "simulated_time_s",
        "seed",
        "phi_analytic_mbps",
    ];
}

impl OracleRow {
    pub fn new(assoc: &AssociationState, epochs: u64, e: &OracleEstimate, analytic: Option<f64>) -> Self {
        OracleRow {
            assoc: assoc.to_string(),
            phi_hat_mbps: e.phi_hat_mbps,
            ci99_halfwidth_mbps: e.ci99_halfwidth_mbps,
            epochs,
            successes: e.successes,
            simulated_time_s: e.simulated_time_s,
            seed: e.seed,
            phi_analytic_mbps: analytic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationRow {
    pub policy: PolicyKind,
    pub geometry: Geometry,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub seed: u64,
    pub sta_id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub in_shaded: bool,
    pub ap_id: u32,
    pub rate_mbps: f64,
    pub arrival_s: f64,
    pub departure_s: Option<f64>,
    pub files_completed: u32,
    pub files_counted: u32,
    pub throughput_mbps: Option<f64>,
    pub mean_download_s: Option<f64>,
}

impl Row for StationRow {
    const HEADER: &'static [&'static str] = &[
        "policy",
        "geometry",
        "arrival_rate_per_s",
        "p_centre",
        "seed",
        "sta_id",
        "x_m",
        "y_m",
        "in_shaded",
        "ap_id",
        "rate_mbps",
        "arrival_s",
        "departure_s",
        "files_completed",
        "files_counted",
        "throughput_mbps",
        "mean_download_s",
    ];
}

impl StationRow {
    pub fn from_run(m: &RunMetrics) -> Vec<Self> {
        m.stations
            .iter()
            .map(|s| StationRow {
                policy: m.policy,
                geometry: m.geometry,
                arrival_rate_per_s: m.arrival_rate_per_s,
                p_centre: m.p_centre,
                seed: m.seed,
                sta_id: s.sta_id,
                x_m: s.x_m,
                y_m: s.y_m,
                in_shaded: s.in_shaded,
                ap_id: s.ap_id,
                rate_mbps: s.rate_mbps,
                arrival_s: s.arrival_s,
                departure_s: s.departure_s,
                files_completed: s.files_completed,
                files_counted: s.files_counted,
                throughput_mbps: s.throughput_mbps,
                mean_download_s: s.mean_download_s,
            })
            .collect()
    }
}

/// One row per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub policy: PolicyKind,
    pub geometry: Geometry,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub seed: u64,
    pub th_avg_mbps: f64,
    pub jain: Option<f64>,
    pub stations_without_files: u32,
    pub arrivals: u32,
    pub departures: u32,
    pub resampled_positions: u32,
    pub files_counted: u64,
    pub mean_download_s: Option<f64>,
    /// Per-AP `sum_i Th_ij`, `;`-separated.
    pub ap_throughput_mbps: String,
}

impl Row for RunRow {
    const HEADER: &'static [&'static str] = &[
        "policy",
        "geometry",
        "arrival_rate_per_s",
        "p_centre",
        "seed",
        "th_avg_mbps",
        "jain",
        "stations_without_files",
        "arrivals",
        "departures",
        "resampled_positions",
        "files_counted",
        "mean_download_s",
        "ap_throughput_mbps",
    ];
}

impl RunRow {
    pub fn new(m: &RunMetrics) -> Self {
        RunRow {
            policy: m.policy,
            geometry: m.geometry,
            arrival_rate_per_s: m.arrival_rate_per_s,
            p_centre: m.p_centre,
            seed: m.seed,
            th_avg_mbps: m.th_avg_mbps,
            jain: m.jain,
            stations_without_files: m.stations_without_files,
            arrivals: m.arrivals,
            departures: m.departures,
            resampled_positions: m.resampled_positions,
            files_counted: m.files_counted,
            mean_download_s: m.mean_download_s,
            ap_throughput_mbps: join(m.ap_throughput_mbps.iter()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub policy: PolicyKind,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub seed: u64,
    pub time_s: f64,
    pub ap_id: u32,
    pub associated: u32,
    pub downloading: u32,
}

impl Row for OccupancyRow {
    const HEADER: &'static [&'static str] =
        &["policy", "arrival_rate_per_s", "p_centre", "seed", "time_s", "ap_id", "associated", "downloading"];
}

impl OccupancyRow {
    pub fn from_run(m: &RunMetrics) -> Vec<Self> {
        let mut rows = Vec::new();
        for s in &m.occupancy {
            for (j, (&a, &d)) in s.associated.iter().zip(&s.downloading).enumerate() {
                rows.push(OccupancyRow {
                    policy: m.policy,
                    arrival_rate_per_s: m.arrival_rate_per_s,
                    p_centre: m.p_centre,
                    seed: m.seed,
                    time_s: s.time_s,
                    ap_id: j as u32,
                    associated: a,
                    downloading: d,
                });
            }
        }
        rows
    }
}

/// One row per (policy, arrival rate, p_centre).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub geometry: Geometry,
    pub policy: PolicyKind,
    pub label: String,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub runs: usize,
    pub th_avg_mbps: f64,
    pub th_avg_ci95_mbps: Option<f64>,
    pub jain: f64,
    pub jain_ci95: Option<f64>,
    pub mean_download_s: f64,
    pub mean_download_ci95_s: Option<f64>,
}

impl Row for SummaryRow {
    const HEADER: &'static [&'static str] = &[
        "geometry",
        "policy",
        "label",
        "arrival_rate_per_s",
        "p_centre",
        "runs",
        "th_avg_mbps",
        "th_avg_ci95_mbps",
        "jain",
        "jain_ci95",
        "mean_download_s",
        "mean_download_ci95_s",
    ];
}

impl SummaryRow {
    pub fn new(geometry: Geometry, policy: PolicyKind, arrival_rate_per_s: f64, p_centre: f64, s: &Summary) -> Self {
        SummaryRow {
            geometry,
            policy,
            label: policy.label().to_string(),
            arrival_rate_per_s,
            p_centre,
            runs: s.runs,
            th_avg_mbps: s.th_avg_mbps.mean,
            th_avg_ci95_mbps: s.th_avg_mbps.half_width,
            jain: s.jain.mean,
            jain_ci95: s.jain.half_width,
            mean_download_s: s.mean_download_s.mean,
            mean_download_ci95_s: s.mean_download_s.half_width,
        }
    }
}

/// Renders a table as CSV text with the hash line first.
pub fn render_csv<T: Row>(manifest_hash: &str, rows: &[T]) -> Result<String> {
    let mut buf = format!("# manifest-sha256: {manifest_hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(T::HEADER)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

#[derive(Serialize)]
struct JsonTable<'a, T> {
    manifest_sha256: &'a str,
    columns: &'static [&'static str],
    rows: &'a [T],
}

/// Renders the JSON mirror of a table.
pub fn render_json<T: Row>(manifest_hash: &str, rows: &[T]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&JsonTable { manifest_sha256: manifest_hash, columns: T::HEADER, rows })?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Internal(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
pub fn write_table<T: Row>(dir: &Path, stem: &str, manifest_hash: &str, rows: &[T]) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, render_csv(manifest_hash, rows)?.as_bytes())?;
    write_atomic(&json_path, render_json(manifest_hash, rows)?.as_bytes())?;
    Ok(vec![csv_path, json_path])
}

/// Writes `manifest.json` into `dir`.
pub fn write_manifest(dir: &Path, record: &ManifestRecord) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(record)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run, ScenarioConfig};

    fn header_of<T: Serialize>(row: &T) -> Vec<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    fn check<T: Row>(row: &T) {
        assert_eq!(header_of(row), T::HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }

    fn sample_run() -> RunMetrics {
        let mut c = ScenarioConfig::from_experiment(&ExperimentConfig::default());
        c.sim_duration_s = 100.0;
        run(&c).unwrap()
    }

    #[test]
    fn headers_match_fields() {
        let assoc: AssociationState = "2@11,0@5.5,1@1".parse().unwrap();
        let tr = ThroughputResult { phi_mbps: 3.0, n_max_used: 12, residual: 1e-5 };
        let row = ThroughputRow::new(&assoc, &tr);
        assert_eq!((row.k, row.rates_mbps.as_str(), row.counts.as_str()), (2, "11;1", "2;1"));
        check(&row);
        let d = DelayEstimate { population: 3, tau_mbps: 2.0, n_avg_ds: 0.1, n_avg_rs: 2.9, t_h: 0.1, d: 1.0 };
        check(&DelayRow::new(&assoc, Some(11.0), &d));
        let e = OracleEstimate {
            phi_hat_mbps: 2.0,
            ci99_halfwidth_mbps: 0.1,
            successes: 10,
            simulated_time_s: 1.0,
            seed: 1,
        };
        check(&OracleRow::new(&assoc, 10, &e, None));
        let m = sample_run();
        check(&StationRow::from_run(&m)[0]);
        check(&RunRow::new(&m));
        check(&OccupancyRow::from_run(&m)[0]);
        let s = crate::scenario::aggregate_metrics(&[m.clone(), m]).unwrap();
        check(&SummaryRow::new(Geometry::NineAp, PolicyKind::Eda, 0.5, 0.9, &s));
    }

    #[test]
    fn csv_starts_with_hash_and_header() {
        let text = render_csv::<DelayRow>("abc", &[]).unwrap();
        assert_eq!(text, "# manifest-sha256: abc\nassoc,newcomer_rate_mbps,population,tau_mbps,n_avg_ds,n_avg_rs,t_h,d_s\n");
        let json: serde_json::Value = serde_json::from_str(&render_json::<DelayRow>("abc", &[]).unwrap()).unwrap();
        assert_eq!(json["manifest_sha256"], "abc");
    }

    #[test]
    fn manifest_hash_tracks_content() {
        let cfg = ExperimentConfig::default();
        let a = Manifest::new("throughput", serde_json::json!({"assoc": ["1@11"]}), &cfg, vec![]);
        let b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
        let c = Manifest::new("throughput", serde_json::json!({"assoc": ["2@11"]}), &cfg, vec![]);
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("wlan-assoc-report-{}", std::process::id()));
        let path = dir.join("t.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        let leftovers = std::fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
