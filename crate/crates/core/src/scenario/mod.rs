//! Flow-level simulation of several APs with arriving and departing
//! stations.
//!
//! Stations arrive as a Poisson process, pick an AP with a policy, and then
//! alternate between downloading a file and reading it. After each download
//! a station leaves with probability `1 / mean_files_per_sta`. Each AP
//! shares its aggregate throughput equally among its active downloads.

mod geometry;
mod metrics;
mod sim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

pub use geometry::{
    Geometry, Layout, Point, FOUR_AP_SPACING_M, NINE_AP_SPACING_M, SHADED_RADIUS_M, TWO_AP_SEPARATION_M,
};
pub use metrics::{aggregate_metrics, Summary};
pub use sim::AUDIT_TOLERANCE;

use crate::airtime::PhyMacParams;
use crate::assoc::AssociationState;
use crate::config::ExperimentConfig;
use crate::delay::FileClassMix;
use crate::error::{config, domain, Result};
use crate::policies::{jain_index, select_ap, ApReport, LoadBalanceParams, PolicyContext, PolicyKind};
use crate::radio::RadioParams;
use crate::stats::Interval;
use crate::throughput::{CachedEngine, ProductFormEngine, ThroughputEngine};
use crate::units::Mbps;
use sim::{FileSampler, PsServer, TimerKind, Timers};

/// Everything one simulation run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub radio: RadioParams,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub mix: FileClassMix,
    pub mean_files_per_sta: f64,
    pub sim_duration_s: f64,
    pub warmup_fraction: f64,
    pub trace_interval_s: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub phy_mac: PhyMacParams,
    pub load_balance: LoadBalanceParams,
    /// Integrate every download's service explicitly and check it.
    #[serde(default)]
    pub audit: bool,
}

impl ScenarioConfig {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        let s = &cfg.scenario;
        ScenarioConfig {
            geometry: s.geometry,
            radio: cfg.radio.clone(),
            arrival_rate_per_s: s.arrival_rate_per_s,
            p_centre: s.p_centre,
            mix: cfg.mix.clone(),
            mean_files_per_sta: s.mean_files_per_sta,
            sim_duration_s: s.sim_duration_s,
            warmup_fraction: s.warmup_fraction,
            trace_interval_s: s.trace_interval_s,
            policy: s.policy,
            seed: s.seed,
            phy_mac: cfg.phy_mac.clone(),
            load_balance: cfg.load_balance.clone(),
            audit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.mix.validate()?;
        self.phy_mac.validate()?;
        if !(self.arrival_rate_per_s > 0.0 && self.arrival_rate_per_s.is_finite()) {
            return Err(config("arrival rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_centre) {
            return Err(config("p_centre must lie in [0, 1]"));
        }
        if !(self.mean_files_per_sta >= 1.0) {
            return Err(config("mean files per station must be at least 1"));
        }
        if !(self.sim_duration_s > 0.0 && self.sim_duration_s.is_finite()) {
            return Err(config("simulation duration must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(config("warm-up fraction must lie in [0, 1)"));
        }
        if !(self.trace_interval_s > 0.0) {
            return Err(config("trace interval must be positive"));
        }
        Ok(())
    }

    pub fn warmup_s(&self) -> f64 {
        self.warmup_fraction * self.sim_duration_s
    }
}

/// Link from an arriving station to one audible AP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub ap_id: u32,
    pub distance_m: f64,
    pub rate_mbps: f64,
    pub rssi_dbm: f64,
}

/// Position of an arriving station and what it hears.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub position: Point,
    pub in_shaded: bool,
    pub links: Vec<Link>,
    /// Positions drawn and discarded because no AP was audible.
    pub resampled: u32,
}

/// Draws a position: in the shaded region with probability `p_centre`,
/// otherwise in the rest of the area.
pub fn sample_arrival<R: Rng>(config: &ScenarioConfig, layout: &Layout, rng: &mut R) -> Arrival {
    let mut resampled = 0;
    loop {
        let shaded = rng.gen_bool(config.p_centre);
        let position = if shaded { layout.sample_shaded(rng) } else { layout.sample_remainder(rng) };
        let links: Vec<Link> = layout
            .aps
            .iter()
            .enumerate()
            .filter_map(|(j, &ap)| {
                let d = ap.distance(position);
                config.radio.rate_at(d).map(|rate_mbps| Link {
                    ap_id: j as u32,
                    distance_m: d,
                    rate_mbps,
                    rssi_dbm: config.radio.rssi_dbm(d),
                })
            })
            .collect();
        if links.is_empty() {
            resampled += 1;
            continue;
        }
        return Arrival { position, in_shaded: shaded, links, resampled };
    }
}

/// Per-station outcome of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub sta_id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub in_shaded: bool,
    pub ap_id: u32,
    pub rate_mbps: f64,
    pub arrival_s: f64,
    pub departure_s: Option<f64>,
    /// Downloads finished during the whole run.
    pub files_completed: u32,
    /// Downloads started after warm-up and finished before the end.
    pub files_counted: u32,
    /// Mean of `size / download time` over counted files, Mb/s.
    pub throughput_mbps: Option<f64>,
    pub mean_download_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancySample {
    pub time_s: f64,
    pub associated: Vec<u32>,
    pub downloading: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: PolicyKind,
    pub geometry: Geometry,
    pub seed: u64,
    pub p_centre: f64,
    pub arrival_rate_per_s: f64,
    pub stations: Vec<StationRecord>,
    /// `sum_i Th_ij` for each AP `j`, Mb/s.
    pub ap_throughput_mbps: Vec<f64>,
    /// `(1/a) sum_j sum_i Th_ij`, Mb/s.
    pub th_avg_mbps: f64,
    /// Jain index over stations with counted files.
    pub jain: Option<f64>,
    /// Stations left out of the Jain index for lack of counted files.
    pub stations_without_files: u32,
    pub arrivals: u32,
    pub departures: u32,
    pub resampled_positions: u32,
    pub files_counted: u64,
    pub mean_download_s: Option<f64>,
    pub occupancy: Vec<OccupancySample>,
    /// Largest relative flow-accounting error, when auditing.
    pub audit_max_rel_error: Option<f64>,
}

#[derive(Debug)]
struct Station {
    ap: usize,
    rate_mbps: f64,
    position: Point,
    in_shaded: bool,
    arrival_s: f64,
    departure_s: Option<f64>,
    /// Start time, class and size in bits of the current download.
    download: Option<(f64, usize, f64)>,
    files_completed: u32,
    files_counted: u32,
    ratio_sum_mbps: f64,
    download_s_sum: f64,
}

struct Ap {
    assoc: AssociationState,
    server: PsServer,
}

fn update_capacity(ap: &mut Ap, t: f64, engine: &dyn ThroughputEngine) -> Result<()> {
    let capacity = if ap.assoc.total() == 0 { 0.0 } else { Mbps(engine.phi_mbps(&ap.assoc)?).to_bits_per_second().0 };
    ap.server.set_capacity(t, capacity);
    Ok(())
}

/// Runs one simulation. Identical configs give identical metrics.
pub fn run(config: &ScenarioConfig) -> Result<RunMetrics> {
    config.validate()?;
    let layout = Layout::new(config.geometry);
    let engine = CachedEngine::new(ProductFormEngine::new(config.phy_mac.clone())?);
    for r in config.radio.rates() {
        if !config.phy_mac.is_data_rate(r) {
            return Err(crate::error::config(format!("ring rate {r} Mb/s is not a configured data rate")));
        }
    }
    let ctx = PolicyContext { mix: &config.mix, engine: &engine, load_balance: &config.load_balance };
    let files = FileSampler::new(&config.mix)?;
    let inter_arrival = Exp::new(config.arrival_rate_per_s).map_err(|e| crate::error::config(e.to_string()))?;
    let p_leave = 1.0 / config.mean_files_per_sta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let rates = config.radio.rates();
    let mut aps = layout
        .aps
        .iter()
        .map(|_| Ok(Ap { assoc: AssociationState::empty(&rates)?, server: PsServer::new(config.audit) }))
        .collect::<Result<Vec<_>>>()?;
    let mut stations: Vec<Station> = Vec::new();
    let mut timers = Timers::default();
    timers.push(inter_arrival.sample(&mut rng), TimerKind::Arrival);

    let end = config.sim_duration_s;
    let warmup = config.warmup_s();
    let mut next_trace = 0.0;
    let mut occupancy = Vec::new();
    let (mut arrivals, mut departures, mut resampled) = (0u32, 0u32, 0u32);

    loop {
        let timer_t = timers.peek_time().unwrap_or(f64::INFINITY);
        let mut done: Option<(usize, f64)> = None;
        for (j, ap) in aps.iter().enumerate() {
            if let Some(t) = ap.server.next_completion() {
                if done.map_or(true, |(_, best)| t < best) {
                    done = Some((j, t));
                }
            }
        }
        let t = done.map_or(timer_t, |(_, t)| t.min(timer_t));
        while next_trace <= t.min(end) {
            occupancy.push(OccupancySample {
                time_s: next_trace,
                associated: aps.iter().map(|a| a.assoc.total()).collect(),
                downloading: aps.iter().map(|a| a.server.active() as u32).collect(),
            });
            next_trace += config.trace_interval_s;
        }
        if t > end {
            break;
        }

        match done {
            Some((j, tc)) if tc <= timer_t => {
                let sta = aps[j].server.complete(tc);
                let s = &mut stations[sta];
                let (start, class, size_bits) = s.download.take().expect("completed station was downloading");
                s.files_completed += 1;
                if start >= warmup {
                    let dt = tc - start;
                    s.files_counted += 1;
                    s.ratio_sum_mbps += size_bits / dt / 1e6;
                    s.download_s_sum += dt;
                }
                if rng.gen_bool(p_leave) {
                    s.departure_s = Some(tc);
                    departures += 1;
                    let rate = s.rate_mbps;
                    aps[j].assoc.remove(rate)?;
                    update_capacity(&mut aps[j], tc, &engine)?;
                } else {
                    let read = files.read_time(class, &mut rng);
                    timers.push(tc + read, TimerKind::ReadEnd(sta));
                }
            }
            _ => {
                let timer = timers.pop().expect("a timer is pending");
                let t = timer.t;
                match timer.kind {
                    TimerKind::Arrival => {
                        timers.push(t + inter_arrival.sample(&mut rng), TimerKind::Arrival);
                        let arrival = sample_arrival(config, &layout, &mut rng);
                        resampled += arrival.resampled;
                        arrivals += 1;
                        let reports: Vec<ApReport> = arrival
                            .links
                            .iter()
                            .map(|l| ApReport {
                                ap_id: l.ap_id,
                                assoc: aps[l.ap_id as usize].assoc.clone(),
                                rssi_dbm: l.rssi_dbm,
                                achievable_rate_mbps: l.rate_mbps,
                            })
                            .collect();
                        let chosen = select_ap(config.policy, &reports, &ctx)?;
                        let link = arrival.links.iter().find(|l| l.ap_id == chosen).expect("chosen AP was reported");
                        let j = chosen as usize;
                        let id = stations.len();
                        aps[j].assoc.add(link.rate_mbps)?;
                        update_capacity(&mut aps[j], t, &engine)?;
                        let (class, size) = files.file(&mut rng);
                        stations.push(Station {
                            ap: j,
                            rate_mbps: link.rate_mbps,
                            position: arrival.position,
                            in_shaded: arrival.in_shaded,
                            arrival_s: t,
                            departure_s: None,
                            download: Some((t, class, size)),
                            files_completed: 0,
                            files_counted: 0,
                            ratio_sum_mbps: 0.0,
                            download_s_sum: 0.0,
                        });
                        aps[j].server.start(t, id, size);
                    }
                    TimerKind::ReadEnd(sta) => {
                        let (class, size) = files.file(&mut rng);
                        let s = &mut stations[sta];
                        s.download = Some((t, class, size));
                        aps[s.ap].server.start(t, sta, size);
                    }
                }
            }
        }
    }

    let audit_max_rel_error = config
        .audit
        .then(|| aps.iter().map(|a| a.server.audit_max_rel_error()).fold(0.0, f64::max));
    Ok(summarize(config, aps.len(), stations, occupancy, arrivals, departures, resampled, audit_max_rel_error))
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    config: &ScenarioConfig,
    n_aps: usize,
    stations: Vec<Station>,
    occupancy: Vec<OccupancySample>,
    arrivals: u32,
    departures: u32,
    resampled_positions: u32,
    audit_max_rel_error: Option<f64>,
) -> RunMetrics {
    let mut ap_throughput_mbps = vec![0.0; n_aps];
    let mut per_sta = Vec::new();
    let (mut files_counted, mut download_sum) = (0u64, 0.0);
    let records: Vec<StationRecord> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let throughput_mbps = (s.files_counted > 0).then(|| s.ratio_sum_mbps / s.files_counted as f64);
            if let Some(th) = throughput_mbps {
                ap_throughput_mbps[s.ap] += th;
                per_sta.push(th);
            }
            files_counted += s.files_counted as u64;
            download_sum += s.download_s_sum;
            StationRecord {
                sta_id: i as u32,
                x_m: s.position.x,
                y_m: s.position.y,
                in_shaded: s.in_shaded,
                ap_id: s.ap as u32,
                rate_mbps: s.rate_mbps,
                arrival_s: s.arrival_s,
                departure_s: s.departure_s,
                files_completed: s.files_completed,
                files_counted: s.files_counted,
                throughput_mbps,
                mean_download_s: (s.files_counted > 0).then(|| s.download_s_sum / s.files_counted as f64),
            }
        })
        .collect();
    let stations_without_files = (records.len() - per_sta.len()) as u32;
    if stations_without_files > 0 {
        log::info!("{stations_without_files} stations had no counted downloads and are left out of the Jain index");
    }
    let th_avg_mbps = ap_throughput_mbps.iter().sum::<f64>() / n_aps as f64;
    RunMetrics {
        policy: config.policy,
        geometry: config.geometry,
        seed: config.seed,
        p_centre: config.p_centre,
        arrival_rate_per_s: config.arrival_rate_per_s,
        stations: records,
        ap_throughput_mbps,
        th_avg_mbps,
        jain: jain_index(&per_sta).ok(),
        stations_without_files,
        arrivals,
        departures,
        resampled_positions,
        files_counted,
        mean_download_s: (files_counted > 0).then(|| download_sum / files_counted as f64),
        occupancy,
        audit_max_rel_error,
    }
}

/// Outcome of a fixed-population run at one AP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPopulationResult {
    pub assoc: AssociationState,
    pub tau_mbps: f64,
    /// Downloads counted after warm-up.
    pub files: u64,
    pub mean_download_s: f64,
    /// 95% batch-means interval for the mean download time.
    pub ci95_halfwidth_s: f64,
    pub simulated_s: f64,
    pub seed: u64,
}

const FIXED_BATCHES: usize = 20;

/// Simulates the stations of `assoc` at a single AP with no arrivals or
/// departures until `files` downloads have been counted. Every station
/// starts with a download; the first `files / 10` completions are
/// discarded.
pub fn run_fixed_population(
    assoc: &AssociationState,
    mix: &FileClassMix,
    engine: &dyn ThroughputEngine,
    files: u64,
    seed: u64,
) -> Result<FixedPopulationResult> {
    let population = assoc.total();
    if population == 0 {
        return Err(domain("fixed population has no stations"));
    }
    if files < FIXED_BATCHES as u64 {
        return Err(domain(format!("need at least {FIXED_BATCHES} files")));
    }
    let sampler = FileSampler::new(mix)?;
    let tau_mbps = engine.phi_mbps(assoc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut server = PsServer::new(false);
    server.set_capacity(0.0, Mbps(tau_mbps).to_bits_per_second().0);
    let mut timers = Timers::default();
    let mut current: Vec<(f64, usize)> = Vec::with_capacity(population as usize);
    for sta in 0..population as usize {
        let (class, size) = sampler.file(&mut rng);
        current.push((0.0, class));
        server.start(0.0, sta, size);
    }

    let warmup = files / 10;
    let mut seen = 0u64;
    let mut delays = Vec::with_capacity(files as usize);
    let mut now = 0.0;
    while (delays.len() as u64) < files {
        let tc = server.next_completion().unwrap_or(f64::INFINITY);
        let tt = timers.peek_time().unwrap_or(f64::INFINITY);
        if tc <= tt {
            now = tc;
            let sta = server.complete(tc);
            let (start, class) = current[sta];
            seen += 1;
            if seen > warmup {
                delays.push(tc - start);
            }
            timers.push(tc + sampler.read_time(class, &mut rng), TimerKind::ReadEnd(sta));
        } else {
            let timer = timers.pop().expect("a timer is pending");
            now = timer.t;
            let TimerKind::ReadEnd(sta) = timer.kind else { unreachable!("no arrivals in fixed mode") };
            let (class, size) = sampler.file(&mut rng);
            current[sta] = (now, class);
            server.start(now, sta, size);
        }
    }

    let per_batch = delays.len() / FIXED_BATCHES;
    let batch_means: Vec<f64> = delays
        .chunks(per_batch)
        .take(FIXED_BATCHES)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let interval = Interval::student(&batch_means, 0.95);
    Ok(FixedPopulationResult {
        assoc: assoc.clone(),
        tau_mbps,
        files: delays.len() as u64,
        mean_download_s: delays.iter().sum::<f64>() / delays.len() as f64,
        ci95_halfwidth_s: interval.half_width.unwrap_or(0.0),
        simulated_s: now,
        seed,
    })
}
