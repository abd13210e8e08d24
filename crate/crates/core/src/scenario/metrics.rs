//! Summaries over replicated runs.

use serde::{Deserialize, Serialize};

use super::RunMetrics;
use crate::error::{domain, Result};
use crate::stats::Interval;

/// Mean and 95% Student-t interval of each run-level metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub th_avg_mbps: Interval,
    /// Over runs that produced an index.
    pub jain: Interval,
    pub mean_download_s: Interval,
    pub arrivals: Interval,
    pub files_counted: Interval,
}

/// Summarizes replicated runs. With a single run the intervals carry no
/// width and a warning is logged.
pub fn aggregate_metrics(runs: &[RunMetrics]) -> Result<Summary> {
    if runs.is_empty() {
        return Err(domain("no runs to summarize"));
    }
    if runs.len() < 2 {
        log::warn!("a single run gives no confidence interval");
    }
    let ci = |xs: Vec<f64>| Interval::student(&xs, 0.95);
    Ok(Summary {
        runs: runs.len(),
        th_avg_mbps: ci(runs.iter().map(|r| r.th_avg_mbps).collect()),
        jain: ci(runs.iter().filter_map(|r| r.jain).collect()),
        mean_download_s: ci(runs.iter().filter_map(|r| r.mean_download_s).collect()),
        arrivals: ci(runs.iter().map(|r| r.arrivals as f64).collect()),
        files_counted: ci(runs.iter().map(|r| r.files_counted as f64).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::policies::PolicyKind;
    use crate::scenario::{run, ScenarioConfig};

    fn runs(seeds: std::ops::Range<u64>) -> Vec<RunMetrics> {
        seeds
            .map(|seed| {
                let mut c = ScenarioConfig::from_experiment(&ExperimentConfig::default());
                c.sim_duration_s = 150.0;
                c.policy = PolicyKind::Rssi;
                c.seed = seed;
                run(&c).unwrap()
            })
            .collect()
    }

    #[test]
    fn identical_runs_zero_width() {
        let one = runs(1..2).pop().unwrap();
        let s = aggregate_metrics(&vec![one.clone(); 5]).unwrap();
        assert_eq!(s.th_avg_mbps.half_width, Some(0.0));
        assert_eq!(s.th_avg_mbps.mean, one.th_avg_mbps);
    }

    #[test]
    fn mean_is_arithmetic_mean() {
        let rs = runs(1..11);
        let s = aggregate_metrics(&rs).unwrap();
        let mean = rs.iter().map(|r| r.th_avg_mbps).sum::<f64>() / rs.len() as f64;
        assert!((s.th_avg_mbps.mean - mean).abs() < 1e-12);
        assert_eq!(s.runs, 10);
    }

    #[test]
    fn interval_narrows_with_more_runs() {
        let rs = runs(1..41);
        let w10 = aggregate_metrics(&rs[..10]).unwrap().th_avg_mbps.half_width.unwrap();
        let w40 = aggregate_metrics(&rs).unwrap().th_avg_mbps.half_width.unwrap();
        assert!(w40 <= w10, "{w40} > {w10}");
    }

    #[test]
    fn single_run_has_no_width() {
        let s = aggregate_metrics(&runs(3..4)).unwrap();
        assert_eq!(s.th_avg_mbps.half_width, None);
        assert!(aggregate_metrics(&[]).is_err());
    }
}
