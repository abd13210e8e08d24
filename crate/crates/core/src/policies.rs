//! AP selection policies and Jain's fairness index.
//!
//! A newcomer collects one [`ApReport`] per audible AP and scores each:
//!
//! * `eda`: expected download delay after joining (lower is better);
//! * `rssi`: received signal strength (higher is better);
//! * `load-balance`: `(1 - P_error) / n` with a signal-dependent error model
//!   (higher is better);
//! * `eva`: predicted per-station share of the aggregate throughput after
//!   joining, an approximation of the available-bandwidth policy (higher is
//!   better).
//!
//! Ties go to the lowest `ap_id`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assoc::AssociationState;
use crate::delay::{eda_figure_of_merit, FileClassMix};
use crate::error::{domain, Error, Result};
use crate::throughput::ThroughputEngine;

/// What a newcomer learns about one candidate AP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap_id: u32,
    pub assoc: AssociationState,
    pub rssi_dbm: f64,
    /// Rate the newcomer would be associated at.
    pub achievable_rate_mbps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Eda,
    Rssi,
    LoadBalance,
    Eva,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Eda, PolicyKind::Rssi, PolicyKind::LoadBalance, PolicyKind::Eva];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Eda => "eda",
            PolicyKind::Rssi => "rssi",
            PolicyKind::LoadBalance => "load-balance",
            PolicyKind::Eva => "eva",
        }
    }

    /// Name used in reports. The `eva` policy is an approximation.
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Eva => "EVA-approx",
            PolicyKind::Eda => "EDA",
            PolicyKind::Rssi => "RSSI",
            PolicyKind::LoadBalance => "Load-Balance",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = PolicyKind::ALL.iter().map(|p| p.name()).collect();
            Error::Parse(format!("unknown policy {s:?}; valid policies are {}", names.join(", ")))
        })
    }
}

/// Constants of `P_error = c1 * (c2 * rssi + c3)^c4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadBalanceParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for LoadBalanceParams {
    fn default() -> Self {
        crate::config::defaults().load_balance.clone()
    }
}

impl LoadBalanceParams {
    /// Packet error probability at the given RSSI, clamped to `[0, 1]`.
    pub fn p_error(&self, rssi_dbm: f64) -> f64 {
        let base = self.c2 * rssi_dbm + self.c3;
        let p = self.c1 * base.powf(self.c4);
        if p.is_nan() {
            // Outside the fitted range.
            1.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }
}

/// Everything the scoring functions need besides the reports.
#[derive(Clone, Copy)]
pub struct PolicyContext<'a> {
    pub mix: &'a FileClassMix,
    pub engine: &'a dyn ThroughputEngine,
    pub load_balance: &'a LoadBalanceParams,
}

/// Expected download delay after joining, seconds. Lower is better.
pub fn eda_score(report: &ApReport, mix: &FileClassMix, engine: &dyn ThroughputEngine) -> Result<f64> {
    Ok(eda_figure_of_merit(&report.assoc, report.achievable_rate_mbps, mix, engine)?.d)
}

/// Higher is better.
pub fn rssi_score(report: &ApReport) -> f64 {
    report.rssi_dbm
}

/// `(1 - P_error) / max(n, 1)`. An empty AP scores like an AP with one
/// station; [`select_ap`] breaks that tie in favour of the empty AP.
pub fn load_balance_score(report: &ApReport, params: &LoadBalanceParams) -> f64 {
    let n = report.assoc.total().max(1);
    (1.0 - params.p_error(report.rssi_dbm)) / n as f64
}

/// Predicted share `phi(assoc + newcomer) / (M + 1)`, Mb/s. Higher is better.
pub fn eva_score(report: &ApReport, engine: &dyn ThroughputEngine) -> Result<f64> {
    let joined = report.assoc.with_added(report.achievable_rate_mbps)?;
    Ok(engine.phi_mbps(&joined)? / joined.total() as f64)
}

/// Score of one report under `policy`, oriented so that higher is better.
fn oriented_score(policy: PolicyKind, report: &ApReport, ctx: &PolicyContext<'_>) -> Result<f64> {
    Ok(match policy {
        PolicyKind::Eda => -eda_score(report, ctx.mix, ctx.engine)?,
        PolicyKind::Rssi => rssi_score(report),
        PolicyKind::LoadBalance => load_balance_score(report, ctx.load_balance),
        PolicyKind::Eva => eva_score(report, ctx.engine)?,
    })
}

/// Picks an AP: lowest delay for `eda`, highest score otherwise. Ties fall to
/// the less loaded AP for `load-balance` and then to the lowest `ap_id`, so
/// the choice does not depend on report order. Reports whose model
/// evaluation fails are skipped with a warning.
pub fn select_ap(policy: PolicyKind, reports: &[ApReport], ctx: &PolicyContext<'_>) -> Result<u32> {
    if reports.is_empty() {
        return Err(domain("no AP reports to choose from"));
    }
    let mut best: Option<(f64, u32, u32)> = None;
    for r in reports {
        let score = match oriented_score(policy, r, ctx) {
            Ok(s) if s.is_finite() => s,
            Ok(s) => {
                log::warn!("excluding AP {} under {policy}: non-finite score {s}", r.ap_id);
                continue;
            }
            Err(e) => {
                log::warn!("excluding AP {} under {policy}: {e}", r.ap_id);
                continue;
            }
        };
        let load = if policy == PolicyKind::LoadBalance { r.assoc.total() } else { 0 };
        let candidate = (score, load, r.ap_id);
        best = match best {
            None => Some(candidate),
            Some(b) => Some(if better(&candidate, &b) { candidate } else { b }),
        };
    }
    best.map(|(_, _, id)| id).ok_or_else(|| domain("every AP report failed to score"))
}

fn better(a: &(f64, u32, u32), b: &(f64, u32, u32)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

/// Jain's fairness index `(sum T)^2 / (M sum T^2)`, in `[1/M, 1]`.
pub fn jain_index(throughputs: &[f64]) -> Result<f64> {
    if throughputs.is_empty() {
        return Err(domain("Jain index of an empty vector"));
    }
    if throughputs.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(domain("Jain index needs nonnegative finite throughputs"));
    }
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|t| t * t).sum();
    if sum_sq == 0.0 {
        return Err(domain("Jain index of an all-zero vector"));
    }
    Ok(sum * sum / (throughputs.len() as f64 * sum_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airtime::PhyMacParams;
    use crate::delay::{delay_estimate, FileClass};
    use crate::throughput::{ChainEngine, ProductFormEngine};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn report(ap_id: u32, assoc: &str, rssi_dbm: f64, rate: f64) -> ApReport {
        ApReport { ap_id, assoc: assoc.parse().unwrap(), rssi_dbm, achievable_rate_mbps: rate }
    }

    fn engine() -> ProductFormEngine {
        ProductFormEngine::new(PhyMacParams::default()).unwrap()
    }

    fn with_ctx<T>(f: impl FnOnce(&PolicyContext<'_>) -> T) -> T {
        let mix = FileClassMix::default();
        let e = engine();
        let lb = LoadBalanceParams::default();
        f(&PolicyContext { mix: &mix, engine: &e, load_balance: &lb })
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        let err = "snr".parse::<PolicyKind>().unwrap_err().to_string();
        assert!(err.contains("eda, rssi, load-balance, eva"), "{err}");
        assert_eq!(PolicyKind::Eva.label(), "EVA-approx");
    }

    #[test]
    fn identical_aps_tie_to_lowest_id() {
        with_ctx(|ctx| {
            let reports = [report(7, "2@11,1@2", -100.0, 5.5), report(3, "2@11,1@2", -100.0, 5.5)];
            let e = engine();
            assert_eq!(eda_score(&reports[0], ctx.mix, &e).unwrap(), eda_score(&reports[1], ctx.mix, &e).unwrap());
            for p in PolicyKind::ALL {
                assert_eq!(select_ap(p, &reports, ctx).unwrap(), 3, "{p}");
            }
        });
    }

    #[test]
    fn empty_ap_has_lower_delay() {
        let mix = FileClassMix::default();
        let e = engine();
        let empty = report(1, "0@11", -120.0, 5.5);
        let loaded = report(2, "4@11,3@5.5,2@2,1@1", -120.0, 5.5);
        assert!(eda_score(&empty, &mix, &e).unwrap() < eda_score(&loaded, &mix, &e).unwrap());
    }

    #[test]
    fn eda_score_is_delay_model() {
        let mix = FileClassMix {
            classes: vec![
                FileClass { mean_size_bytes: 50e3, mean_read_s: 25.0, probability: 0.6 },
                FileClass { mean_size_bytes: 250e3, mean_read_s: 100.0, probability: 0.4 },
            ],
        };
        let p = PhyMacParams::default();
        let e = ChainEngine { params: p.clone(), n_max: 8 };
        let r = report(0, "1@11,2@5.5,3@2,4@1", -110.0, 2.0);
        let tau = e.phi_mbps(&"1@11,2@5.5,4@2,4@1".parse().unwrap()).unwrap();
        assert_eq!(eda_score(&r, &mix, &e).unwrap(), delay_estimate(11, tau, &mix).unwrap().d);
    }

    #[test]
    fn rssi_prefers_nearer_ap_regardless_of_load() {
        with_ctx(|ctx| {
            let reports = [report(0, "30@11", -90.0, 11.0), report(1, "0@1", -130.0, 1.0)];
            assert_eq!(select_ap(PolicyKind::Rssi, &reports, ctx).unwrap(), 0);
        });
    }

    #[test]
    fn load_balance_arithmetic() {
        let lb = LoadBalanceParams { c1: 0.0, c2: 1.0, c3: 1.0, c4: 1.0 };
        assert_eq!(load_balance_score(&report(0, "2@11", -90.0, 11.0), &lb), 0.5);
        assert_eq!(load_balance_score(&report(1, "1@11", -90.0, 11.0), &lb), 1.0);
        // Empty AP ties with a one-station AP and wins the tie.
        with_ctx(|ctx| {
            let lb = LoadBalanceParams { c1: 0.0, ..LoadBalanceParams::default() };
            let ctx = PolicyContext { load_balance: &lb, ..*ctx };
            let reports = [report(0, "1@11", -90.0, 11.0), report(5, "0@11", -90.0, 11.0)];
            assert_eq!(select_ap(PolicyKind::LoadBalance, &reports, &ctx).unwrap(), 5);
        });
    }

    #[test]
    fn load_balance_prefers_better_signal_at_equal_load() {
        let lb = LoadBalanceParams::default();
        let near = load_balance_score(&report(0, "3@11", -100.0, 11.0), &lb);
        let far = load_balance_score(&report(1, "3@11", -130.0, 1.0), &lb);
        assert!(near > far);
        let mut last = f64::INFINITY;
        for n in 1..20 {
            let s = load_balance_score(&report(0, &format!("{n}@11"), -100.0, 11.0), &lb);
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn default_error_model_matches_rate_rings() {
        // Ring-edge RSSI for 120/240/360/480 m with 40 dB at 1 m and exponent 3.5.
        let lb = LoadBalanceParams::default();
        for (d, want) in [(120.0f64, 0.05), (240.0, 0.1), (360.0, 0.2), (480.0, 0.4)] {
            let rssi = -(40.0 + 35.0 * d.log10());
            let got = lb.p_error(rssi);
            assert!(((got - want) / want).abs() < 0.03, "{d} m: {got} vs {want}");
        }
        assert_eq!(lb.p_error(-500.0), 1.0);
    }

    #[test]
    fn eva_prefers_fast_empty_ap() {
        let e = engine();
        let fast = eva_score(&report(0, "0@11", -100.0, 11.0), &e).unwrap();
        let slow = eva_score(&report(1, "0@1", -100.0, 1.0), &e).unwrap();
        assert!(fast > slow);
        let crowded = eva_score(&report(2, "8@1", -100.0, 11.0), &e).unwrap();
        let light = eva_score(&report(3, "2@11", -100.0, 11.0), &e).unwrap();
        assert!(light > crowded);
    }

    #[test]
    fn eva_share_times_population_is_throughput() {
        let e = engine();
        let r = report(0, "2@11,1@1", -100.0, 5.5);
        let joined: AssociationState = "2@11,1@1,1@5.5".parse().unwrap();
        assert_eq!(eva_score(&r, &e).unwrap() * 4.0, e.phi_mbps(&joined).unwrap());
    }

    #[test]
    fn eda_and_rssi_disagree() {
        // A near AP crowded with slow stations against an empty far AP.
        with_ctx(|ctx| {
            let reports = [report(0, "12@1,6@2", -95.0, 11.0), report(1, "0@1", -133.0, 1.0)];
            assert_eq!(select_ap(PolicyKind::Rssi, &reports, ctx).unwrap(), 0);
            assert_eq!(select_ap(PolicyKind::Eda, &reports, ctx).unwrap(), 1);
        });
    }

    #[test]
    fn single_report_always_chosen() {
        with_ctx(|ctx| {
            let reports = [report(4, "3@2", -120.0, 2.0)];
            for p in PolicyKind::ALL {
                assert_eq!(select_ap(p, &reports, ctx).unwrap(), 4);
            }
        });
    }

    #[test]
    fn empty_reports_rejected() {
        with_ctx(|ctx| assert!(select_ap(PolicyKind::Eda, &[], ctx).is_err()));
    }

    #[test]
    fn failing_reports_skipped() {
        with_ctx(|ctx| {
            // 54 Mb/s is not a configured rate, so the model rejects it.
            let reports = [report(0, "1@54", -90.0, 54.0), report(1, "2@11", -100.0, 11.0)];
            assert_eq!(select_ap(PolicyKind::Eda, &reports, ctx).unwrap(), 1);
            assert!(select_ap(PolicyKind::Eda, &reports[..1], ctx).is_err());
        });
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[2.0; 5]).unwrap(), 1.0);
        assert_eq!(jain_index(&[3.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert_relative_eq!(jain_index(&[1.0, 2.0, 3.0]).unwrap(), 6.0 / 7.0, epsilon = 1e-15);
        assert!(jain_index(&[0.0, 0.0]).is_err());
        assert!(jain_index(&[]).is_err());
        assert!(jain_index(&[1.0, -1.0]).is_err());
    }

    proptest! {
        #[test]
        fn jain_bounds_and_scale(t in prop::collection::vec(0.0f64..100.0, 1..40), c in 0.01f64..100.0) {
            prop_assume!(t.iter().any(|&x| x > 0.0));
            let j = jain_index(&t).unwrap();
            let m = t.len() as f64;
            prop_assert!(j >= 1.0 / m - 1e-12 && j <= 1.0 + 1e-12);
            let scaled: Vec<f64> = t.iter().map(|x| x * c).collect();
            prop_assert!((jain_index(&scaled).unwrap() - j).abs() < 1e-12);
        }

        #[test]
        fn selection_ignores_report_order(
            loads in prop::collection::vec((0u32..6, 0u32..6, 0usize..4), 1..6),
            rotate in 0usize..6,
        ) {
            let rates = [11.0, 5.5, 2.0, 1.0];
            let reports: Vec<ApReport> = loads
                .iter()
                .enumerate()
                .map(|(i, &(fast, slow, r))| ApReport {
                    ap_id: i as u32,
                    assoc: AssociationState::from_pairs(&[(fast, 11.0), (slow, 1.0)]).unwrap(),
                    rssi_dbm: -100.0 - 8.0 * r as f64,
                    achievable_rate_mbps: rates[r],
                })
                .collect();
            let mut shuffled = reports.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rotate % n);
            shuffled.reverse();
            with_ctx(|ctx| {
                for p in PolicyKind::ALL {
                    assert_eq!(select_ap(p, &reports, ctx).unwrap(), select_ap(p, &shuffled, ctx).unwrap());
                }
            });
        }
    }
}
