//! Acceptance checks: reference values and model identities.
//!
//! Each `criterion_*` function runs one check end to end and reports
//! whether it passed, with a one-line explanation. The same functions back
//! the `validate` command and the acceptance test suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assoc::AssociationState;
use crate::config::ExperimentConfig;
use crate::delay::{delay_estimate, equilibrium, equilibrium_by_enumeration, FileClass, FileClassMix};
use crate::error::Result;
use crate::oracle::simulate_embedded;
use crate::policies::PolicyKind;
use crate::report::{render_csv, Row, DelayRow, OracleRow, RunRow, StationRow, ThroughputRow};
use crate::scenario::{aggregate_metrics, run, run_fixed_population, Geometry, ScenarioConfig, Summary};
use crate::throughput::{aggregate_throughput, ChainEngine, ThroughputEngine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl Row for CriterionOutcome {
    const HEADER: &'static [&'static str] = &["id", "title", "passed", "detail", "elapsed_s"];
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}. {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed_s
        )
    }
}

fn outcome(id: u32, title: &str, start: Instant, result: Result<(bool, String)>) -> CriterionOutcome {
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome { id, title: title.to_string(), passed, detail, elapsed_s: start.elapsed().as_secs_f64() }
}

fn state(s: &str) -> AssociationState {
    s.parse().expect("built-in association state")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Reference aggregate throughputs, Mb/s. The last two are reported only.
pub const THROUGHPUT_TABLE: [(&str, f64, bool); 4] = [
    ("2@11,3@5.5,2@2,3@1", 2.54, true),
    ("1@11,2@5.5,3@2,4@1", 2.57, true),
    ("2@11,2@5.5,4@2,4@1", 3.49, false),
    ("4@11,4@5.5,2@2,2@1", 2.06, false),
];

/// Reference mean download delays, seconds.
pub const DELAY_TABLE: [(&str, f64); 5] = [
    ("1@11,2@5.5,3@2,4@1", 1.954),
    ("1@11,3@5.5,2@2,4@1", 1.977),
    ("3@11,2@5.5,3@2,4@1", 2.237),
    ("2@11,4@5.5,4@2,3@1", 2.352),
    ("3@11,2@5.5,4@2,4@1", 2.423),
];

/// File mix of the delay table: 50 KB and 250 KB files read for 25 s and
/// 100 s, the small class chosen with probability 0.6.
pub fn delay_table_mix() -> FileClassMix {
    FileClassMix {
        classes: vec![
            FileClass { mean_size_bytes: 50e3, mean_read_s: 25.0, probability: 0.6 },
            FileClass { mean_size_bytes: 250e3, mean_read_s: 100.0, probability: 0.4 },
        ],
    }
}

/// Association states used for the oracle comparison.
pub const ORACLE_STATES: [&str; 6] = ["5@11", "3@1", "2@11,1@1", "3@5.5,2@2", "2@11,3@5.5,2@2,3@1", "1@11,2@5.5,3@2,4@1"];

pub const ORACLE_EPOCHS: u64 = 1_000_000;

fn engine(cfg: &ExperimentConfig) -> ChainEngine {
    ChainEngine { params: cfg.phy_mac.clone(), n_max: cfg.throughput.n_max }
}

/// Throughput table within 10%, under 5 s per state.
pub fn criterion_1(cfg: &ExperimentConfig) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let mut passed = true;
        let mut parts = Vec::new();
        for (spec, want, gated) in THROUGHPUT_TABLE {
            let t0 = Instant::now();
            let r = aggregate_throughput(&state(spec), &cfg.phy_mac, cfg.throughput.n_max)?;
            let secs = t0.elapsed().as_secs_f64();
            let err = rel(r.phi_mbps, want);
            if gated {
                passed &= err <= 0.10 && secs < 5.0;
            }
            parts.push(format!(
                "{spec}: {:.3} vs {want} ({:+.1}%{})",
                r.phi_mbps,
                100.0 * (r.phi_mbps - want) / want,
                if gated { "" } else { ", not gated" }
            ));
        }
        Ok((passed, parts.join("; ")))
    })();
    outcome(1, "throughput table", start, result)
}

/// Analytic throughput inside the oracle's 99% interval and within 3%.
pub fn criterion_2(cfg: &ExperimentConfig, epochs: u64) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let mut passed = true;
        let mut parts = Vec::new();
        for (i, spec) in ORACLE_STATES.iter().enumerate() {
            let assoc = state(spec);
            let phi = aggregate_throughput(&assoc, &cfg.phy_mac, cfg.throughput.n_max)?.phi_mbps;
            let est = simulate_embedded(&assoc, &cfg.phy_mac, epochs, cfg.experiment.base_seed + i as u64)?;
            let ok = est.contains(phi) && rel(est.phi_hat_mbps, phi) < 0.03;
            passed &= ok;
            parts.push(format!(
                "{spec}: {phi:.4} vs {:.4}±{:.4}{}",
                est.phi_hat_mbps,
                est.ci99_halfwidth_mbps,
                if ok { "" } else { " MISS" }
            ));
        }
        let secs = start.elapsed().as_secs_f64();
        passed &= secs < 300.0;
        Ok((passed, parts.join("; ")))
    })();
    outcome(2, "oracle agreement", start, result)
}

/// Delay table within 10%, under 10 s in total.
pub fn criterion_3(cfg: &ExperimentConfig) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let e = engine(cfg);
        let mix = delay_table_mix();
        let mut passed = true;
        let mut parts = Vec::new();
        for (spec, want) in DELAY_TABLE {
            let assoc = state(spec);
            let tau = e.phi_mbps(&assoc)?;
            let d = delay_estimate(assoc.total(), tau, &mix)?.d;
            passed &= rel(d, want) <= 0.10;
            parts.push(format!("{spec}: {d:.3} s vs {want} ({:+.1}%)", 100.0 * (d - want) / want));
        }
        passed &= start.elapsed().as_secs_f64() < 10.0;
        Ok((passed, parts.join("; ")))
    })();
    outcome(3, "delay table", start, result)
}

/// Random instance for the closed-network identities.
pub fn random_network(rng: &mut ChaCha8Rng) -> (u32, f64, FileClassMix) {
    let population = rng.gen_range(1..=30);
    let classes = rng.gen_range(1..=3);
    let weights: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mix = FileClassMix {
        classes: weights
            .iter()
            .map(|w| FileClass {
                mean_size_bytes: rng.gen_range(1e3..1e6),
                mean_read_s: rng.gen_range(0.5..200.0),
                probability: w / total,
            })
            .collect(),
    };
    let tau = rng.gen_range(0.1..10.0);
    (population, tau, mix)
}

/// Closed-network identities on 200 random instances.
pub fn criterion_4(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = [0.0f64; 4];
        let mut scale_exact = true;
        for _ in 0..200 {
            let (m, tau, mix) = random_network(&mut rng);
            let eq = equilibrium(m, tau, &mix)?;
            let d = eq.delay(tau);
            let by_enum = equilibrium_by_enumeration(m, tau, &mix)?;
            worst[0] = worst[0].max((eq.downloaders.iter().sum::<f64>() - 1.0).abs());
            worst[1] = worst[1].max((d.n_avg_ds + d.n_avg_rs - m as f64).abs());
            worst[2] = worst[2].max((d.d * d.t_h - d.n_avg_ds).abs());
            let gap = eq.downloaders.iter().zip(&by_enum.downloaders).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst[3] = worst[3].max(gap);
            let factor = 4.0;
            let scaled = FileClassMix {
                classes: mix
                    .classes
                    .iter()
                    .map(|c| FileClass { mean_size_bytes: c.mean_size_bytes * factor, ..c.clone() })
                    .collect(),
            };
            let eq2 = equilibrium(m, tau * factor, &scaled)?;
            let d2 = eq2.delay(tau * factor);
            scale_exact &= eq2.downloaders == eq.downloaders
                && d2.n_avg_ds == d.n_avg_ds
                && d2.t_h == d.t_h
                && d2.d == d.d;
        }
        let passed = worst.iter().all(|&w| w <= 1e-10) && scale_exact;
        Ok((
            passed,
            format!(
                "max |sum P - 1| {:.1e}, closure {:.1e}, Little {:.1e}, enumeration gap {:.1e}, scale invariance {}",
                worst[0],
                worst[1],
                worst[2],
                worst[3],
                if scale_exact { "exact" } else { "broken" }
            ),
        ))
    })();
    outcome(4, "closed-network identities", start, result)
}

/// Fixed-population simulation against the delay model, 10% per state.
pub fn criterion_5(cfg: &ExperimentConfig, files: u64) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let e = engine(cfg);
        let mix = delay_table_mix();
        let mut passed = files >= 1000;
        let mut parts = Vec::new();
        for (i, (spec, _)) in DELAY_TABLE.iter().enumerate() {
            let t0 = Instant::now();
            let assoc = state(spec);
            let sim = run_fixed_population(&assoc, &mix, &e, files, cfg.experiment.base_seed + i as u64)?;
            let d = delay_estimate(assoc.total(), sim.tau_mbps, &mix)?.d;
            let err = rel(sim.mean_download_s, d);
            passed &= err <= 0.10 && t0.elapsed().as_secs_f64() < 120.0;
            parts.push(format!("{spec}: sim {:.3} s vs model {d:.3} s ({:+.1}%)", sim.mean_download_s, 100.0 * (sim.mean_download_s - d) / d));
        }
        Ok((passed, parts.join("; ")))
    })();
    outcome(5, "fixed-population simulation", start, result)
}

/// Replicated runs of one scenario, seeds `base_seed..base_seed + seeds`.
pub fn replicate(base: &ScenarioConfig, base_seed: u64, seeds: u32) -> Result<Vec<crate::scenario::RunMetrics>> {
    (0..seeds as u64)
        .map(|i| {
            let mut c = base.clone();
            c.seed = base_seed + i;
            run(&c)
        })
        .collect()
}

/// Policy ordering and trend on the nine-AP layout.
pub fn criterion_6(cfg: &ExperimentConfig) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let mut base = ScenarioConfig::from_experiment(cfg);
        base.geometry = Geometry::NineAp;
        let seeds = cfg.experiment.seeds;
        let summary = |policy: PolicyKind, nu: f64, p: f64| -> Result<Summary> {
            let mut c = base.clone();
            c.policy = policy;
            c.arrival_rate_per_s = nu;
            c.p_centre = p;
            aggregate_metrics(&replicate(&c, cfg.experiment.base_seed, seeds)?)
        };
        let eda = summary(PolicyKind::Eda, 0.5, 0.9)?;
        let eva = summary(PolicyKind::Eva, 0.5, 0.9)?;
        let rssi = summary(PolicyKind::Rssi, 0.5, 0.9)?;
        let order = eda.th_avg_mbps.mean > eva.th_avg_mbps.mean && eva.th_avg_mbps.mean > rssi.th_avg_mbps.mean;
        let disjoint = eda.th_avg_mbps.disjoint(&rssi.th_avg_mbps) && eda.th_avg_mbps.mean > rssi.th_avg_mbps.mean;
        let fair = eda.jain.mean >= rssi.jain.mean;

        let mut sweep = cfg.experiment.p_centre_sweep.clone();
        sweep.sort_by(f64::total_cmp);
        let gain = |nu: f64| -> Result<Vec<f64>> {
            sweep
                .iter()
                .map(|&p| {
                    let e = summary(PolicyKind::Eda, nu, p)?.th_avg_mbps.mean;
                    let r = summary(PolicyKind::Rssi, nu, p)?.th_avg_mbps.mean;
                    Ok(e / r - 1.0)
                })
                .collect()
        };
        let slow = gain(0.5)?;
        let fast = gain(1.0)?;
        let grows = slow.windows(2).all(|w| w[1] >= w[0]);
        let smaller_when_busy = slow.iter().zip(&fast).all(|(s, f)| f < s);
        let passed = order && disjoint && fair && grows && smaller_when_busy && start.elapsed().as_secs_f64() < 1800.0;
        let pct = |v: &[f64]| v.iter().map(|g| format!("{:+.0}%", 100.0 * g)).collect::<Vec<_>>().join(" ");
        Ok((
            passed,
            format!(
                "Th_avg EDA {:.2}±{:.2}, EVA-approx {:.2}±{:.2}, RSSI {:.2}±{:.2}; Jain EDA {:.3} RSSI {:.3}; \
                 EDA gain over RSSI vs p_centre {:?}: nu=0.5 [{}], nu=1 [{}]",
                eda.th_avg_mbps.mean,
                eda.th_avg_mbps.half_width.unwrap_or(0.0),
                eva.th_avg_mbps.mean,
                eva.th_avg_mbps.half_width.unwrap_or(0.0),
                rssi.th_avg_mbps.mean,
                rssi.th_avg_mbps.half_width.unwrap_or(0.0),
                eda.jain.mean,
                rssi.jain.mean,
                sweep,
                pct(&slow),
                pct(&fast),
            ),
        ))
    })();
    outcome(6, "policy ordering", start, result)
}

/// CSV text of every command type for one config and seed.
pub fn render_all(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<String>> {
    let hash = "determinism";
    let e = engine(cfg);
    let assoc = state("2@11,3@5.5,2@2,3@1");
    let tr = aggregate_throughput(&assoc, &cfg.phy_mac, cfg.throughput.n_max)?;
    let tau = e.phi_mbps(&assoc)?;
    let d = delay_estimate(assoc.total(), tau, &cfg.mix)?;
    let est = simulate_embedded(&assoc, &cfg.phy_mac, 20_000, seed)?;
    let mut sc = ScenarioConfig::from_experiment(cfg);
    sc.seed = seed;
    let m = run(&sc)?;
    Ok(vec![
        render_csv(hash, &[ThroughputRow::new(&assoc, &tr)])?,
        render_csv(hash, &[DelayRow::new(&assoc, None, &d)])?,
        render_csv(hash, &[OracleRow::new(&assoc, 20_000, &est, Some(tr.phi_mbps))])?,
        render_csv(hash, &StationRow::from_run(&m))?,
        render_csv(hash, &[RunRow::new(&m)])?,
    ])
}

/// Two renders of the same config and seed are byte-identical.
pub fn criterion_7(cfg: &ExperimentConfig) -> CriterionOutcome {
    let start = Instant::now();
    let result = (|| {
        let seed = cfg.scenario.seed;
        let a = render_all(cfg, seed)?;
        let b = render_all(cfg, seed)?;
        let bytes: usize = a.iter().map(String::len).sum();
        Ok((a == b, format!("{} tables, {bytes} bytes, seed {seed}", a.len())))
    })();
    outcome(7, "determinism", start, result)
}

/// Every criterion at full size.
pub fn run_all(cfg: &ExperimentConfig) -> Vec<CriterionOutcome> {
    vec![
        criterion_1(cfg),
        criterion_2(cfg, ORACLE_EPOCHS),
        criterion_3(cfg),
        criterion_4(cfg.experiment.base_seed),
        criterion_5(cfg, 5_000),
        criterion_6(cfg),
        criterion_7(cfg),
    ]
}
