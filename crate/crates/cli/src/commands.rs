use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use wlan_assoc::config::ExperimentConfig;
use wlan_assoc::report::{
    DelayRow, Manifest, OccupancyRow, OracleRow, RunRow, StationRow, SummaryRow, ThroughputRow,
};
use wlan_assoc::scenario::{aggregate_metrics, ScenarioConfig};
use wlan_assoc::throughput::ChainEngine;
use wlan_assoc::validation::{self, CriterionOutcome};
use wlan_assoc::{aggregate_throughput, delay_estimate, eda_figure_of_merit, simulate_embedded, RunMetrics, ThroughputEngine};

use crate::args::{
    CompareArgs, Common, DelayArgs, OracleArgs, ScenarioOverrides, SimulateArgs, ThroughputArgs, ValidateArgs,
};
use crate::output::Output;

/// Defaults, then `--config`, then the `--params` and `--mix` overlays,
/// then `--n-max`.
pub fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => wlan_assoc::config::defaults().clone(),
    };
    for (section, path) in [("phy_mac", &common.params), ("mix", &common.mix)] {
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            cfg.overlay_section(section, &text, &path.display().to_string())?;
        }
    }
    if let Some(n) = common.n_max {
        cfg.throughput.n_max = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn state_names(states: &[wlan_assoc::AssociationState]) -> Vec<String> {
    states.iter().map(ToString::to_string).collect()
}

pub fn throughput(args: &ThroughputArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let manifest = Manifest::new("throughput", json!({ "states": state_names(&args.states) }), &cfg, vec![]);
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;
    let rows = args
        .states
        .iter()
        .map(|s| Ok(ThroughputRow::new(s, &aggregate_throughput(s, &cfg.phy_mac, cfg.throughput.n_max)?)))
        .collect::<Result<Vec<_>>>()?;
    out.print("throughput", &rows)?;
    out.finish()
}

pub fn delay(args: &DelayArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let manifest = Manifest::new(
        "delay",
        json!({ "states": state_names(&args.states), "with_newcomer": args.with_newcomer }),
        &cfg,
        vec![],
    );
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;
    let engine = ChainEngine { params: cfg.phy_mac.clone(), n_max: cfg.throughput.n_max };
    let rows = args
        .states
        .iter()
        .map(|s| {
            let d = match args.with_newcomer {
                Some(rate) => eda_figure_of_merit(s, rate, &cfg.mix, &engine)?,
                None => delay_estimate(s.total(), engine.phi_mbps(s)?, &cfg.mix)?,
            };
            Ok(DelayRow::new(s, args.with_newcomer, &d))
        })
        .collect::<Result<Vec<_>>>()?;
    out.print("delay", &rows)?;
    out.finish()
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let first = args.seed.unwrap_or(cfg.scenario.seed);
    let seeds: Vec<u64> = (0..args.states.len() as u64).map(|i| first + i).collect();
    let manifest = Manifest::new(
        "oracle",
        json!({ "states": state_names(&args.states), "epochs": args.epochs }),
        &cfg,
        seeds.clone(),
    );
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;
    let rows = args
        .states
        .iter()
        .zip(&seeds)
        .map(|(s, &seed)| {
            let est = simulate_embedded(s, &cfg.phy_mac, args.epochs, seed)?;
            let phi = aggregate_throughput(s, &cfg.phy_mac, cfg.throughput.n_max)?.phi_mbps;
            Ok(OracleRow::new(s, args.epochs, &est, Some(phi)))
        })
        .collect::<Result<Vec<_>>>()?;
    out.print("oracle", &rows)?;
    out.finish()
}

fn scenario_base(cfg: &ExperimentConfig, o: &ScenarioOverrides) -> ScenarioConfig {
    let mut sc = ScenarioConfig::from_experiment(cfg);
    if let Some(g) = o.geometry {
        sc.geometry = g;
    }
    if let Some(nu) = o.arrival_rate {
        sc.arrival_rate_per_s = nu;
    }
    if let Some(d) = o.duration {
        sc.sim_duration_s = d;
    }
    sc.audit = o.audit;
    sc
}

fn overrides_json(o: &ScenarioOverrides) -> serde_json::Value {
    json!({
        "geometry": o.geometry,
        "arrival_rate_per_s": o.arrival_rate,
        "sim_duration_s": o.duration,
        "audit": o.audit,
    })
}

fn run_tables(out: &mut Output, runs: &[RunMetrics]) -> Result<()> {
    let stations: Vec<_> = runs.iter().flat_map(StationRow::from_run).collect();
    let occupancy: Vec<_> = runs.iter().flat_map(OccupancyRow::from_run).collect();
    let per_run: Vec<_> = runs.iter().map(RunRow::new).collect();
    out.table("stations", &stations)?;
    out.table("occupancy", &occupancy)?;
    out.table("runs", &per_run)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = resolve_config(&args.common)?;
    let mut base = scenario_base(&cfg, &args.scenario);
    if let Some(p) = args.policy {
        base.policy = p;
    }
    if let Some(p) = args.p_centre {
        base.p_centre = p;
    }
    let first = args.seed.unwrap_or(cfg.scenario.seed);
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| first + i).collect();
    let manifest = Manifest::new(
        "simulate",
        json!({
            "policy": base.policy,
            "p_centre": base.p_centre,
            "scenario": overrides_json(&args.scenario),
        }),
        &cfg,
        seeds.clone(),
    );
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;
    let runs = validation::replicate(&base, first, args.seeds)?;
    for m in &runs {
        log::info!("seed {}: Th_avg {:.3} Mb/s, {} arrivals", m.seed, m.th_avg_mbps, m.arrivals);
    }
    run_tables(&mut out, &runs)?;
    let summary = aggregate_metrics(&runs)?;
    let row = SummaryRow::new(base.geometry, base.policy, base.arrival_rate_per_s, base.p_centre, &summary);
    out.print("summary", &[row])?;
    out.finish()
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let base = scenario_base(&cfg, &args.scenario);
    let policies = args.policies.clone().unwrap_or_else(|| cfg.experiment.policies.clone());
    let sweep = args.p_centre.clone().unwrap_or_else(|| cfg.experiment.p_centre_sweep.clone());
    let rates = match (&args.arrival_rates, args.scenario.arrival_rate) {
        (Some(r), _) => r.clone(),
        (None, Some(nu)) => vec![nu],
        (None, None) => cfg.experiment.arrival_rates_per_s.clone(),
    };
    let n_seeds = args.seeds.unwrap_or(cfg.experiment.seeds);
    let first = args.seed.unwrap_or(cfg.experiment.base_seed);
    if policies.is_empty() || sweep.is_empty() || rates.is_empty() || n_seeds == 0 {
        bail!("compare needs at least one policy, p_centre, arrival rate and seed");
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| first + i).collect();
    let manifest = Manifest::new(
        "compare",
        json!({
            "policies": policies,
            "p_centre": sweep,
            "arrival_rates_per_s": rates,
            "scenario": overrides_json(&args.scenario),
        }),
        &cfg,
        seeds.clone(),
    );
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;

    let mut grid = Vec::new();
    for &nu in &rates {
        for &p in &sweep {
            for &policy in &policies {
                let mut c = base.clone();
                c.arrival_rate_per_s = nu;
                c.p_centre = p;
                c.policy = policy;
                c.validate()?;
                grid.push(c);
            }
        }
    }
    let jobs: Vec<ScenarioConfig> = grid
        .iter()
        .flat_map(|c| {
            seeds.iter().map(move |&s| {
                let mut c = c.clone();
                c.seed = s;
                c
            })
        })
        .collect();
    log::info!("{} runs on {} grid points", jobs.len(), grid.len());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.unwrap_or(0)).build()?;
    let runs = pool.install(|| jobs.par_iter().map(wlan_assoc::run).collect::<wlan_assoc::Result<Vec<_>>>())?;

    let per_run: Vec<_> = runs.iter().map(RunRow::new).collect();
    out.table("runs", &per_run)?;
    let summary = grid
        .iter()
        .zip(runs.chunks(seeds.len()))
        .map(|(c, chunk)| {
            Ok(SummaryRow::new(c.geometry, c.policy, c.arrival_rate_per_s, c.p_centre, &aggregate_metrics(chunk)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.print("summary", &summary)?;
    out.finish()
}

/// Returns whether every selected criterion passed.
pub fn validate(args: &ValidateArgs) -> Result<bool> {
    let cfg = resolve_config(&args.common)?;
    let wanted = |id: u32| args.criteria.as_ref().map_or(true, |c| c.contains(&id));
    if let Some(c) = &args.criteria {
        if let Some(bad) = c.iter().find(|&&id| !(1..=7).contains(&id)) {
            bail!("unknown criterion {bad}; criteria are numbered 1 to 7");
        }
    }
    let manifest = Manifest::new(
        "validate",
        json!({ "criteria": args.criteria, "epochs": args.epochs, "files": args.files }),
        &cfg,
        vec![cfg.experiment.base_seed],
    );
    let mut out = Output::new(manifest, args.common.out_dir.clone())?;
    let checks: [(u32, &dyn Fn() -> CriterionOutcome); 7] = [
        (1, &|| validation::criterion_1(&cfg)),
        (2, &|| validation::criterion_2(&cfg, args.epochs)),
        (3, &|| validation::criterion_3(&cfg)),
        (4, &|| validation::criterion_4(cfg.experiment.base_seed)),
        (5, &|| validation::criterion_5(&cfg, args.files)),
        (6, &|| validation::criterion_6(&cfg)),
        (7, &|| validation::criterion_7(&cfg)),
    ];
    let mut outcomes = Vec::new();
    for (id, check) in checks {
        if wanted(id) {
            let o = check();
            println!("{o}");
            outcomes.push(o);
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    out.table("validation", &outcomes)?;
    out.finish()?;
    Ok(failed == 0)
}
