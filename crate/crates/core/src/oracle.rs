//! Slot-level Monte Carlo of the contention process behind the throughput
//! model, used as an independent check of the analytic value.
//!
//! Every slot, the AP and each station holding a TCP ACK attempt
//! independently with the same attempt probability the analysis uses. The
//! slot is idle, a collision, or a success of the single attempter; real
//! time advances by the slot time, the collision duration, or the winner's
//! exchange time. The backlog is not truncated.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airtime::{collision_duration, success_exchange_time, PhyMacParams, Winner};
use crate::assoc::AssociationState;
use crate::error::{config, domain, Result};
use crate::stats::student_t_quantile;
use crate::units::Bits;

pub const MIN_EPOCHS: u64 = 10_000;
pub const BATCHES: usize = 30;
pub const WARMUP_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub phi_hat_mbps: f64,
    /// Half-width of the batch-means 99% confidence interval.
    pub ci99_halfwidth_mbps: f64,
    /// Successes counted after warm-up.
    pub successes: u64,
    pub simulated_time_s: f64,
    pub seed: u64,
}

impl OracleEstimate {
    pub fn contains(&self, phi_mbps: f64) -> bool {
        (phi_mbps - self.phi_hat_mbps).abs() <= self.ci99_halfwidth_mbps
    }
}

/// Empirical occupancy of embedded-chain states, keyed by backlog vector over
/// the occupied classes.
pub type Occupancy = std::collections::BTreeMap<Vec<usize>, u64>;

struct Embedded<'a> {
    params: &'a PhyMacParams,
    beta: Vec<f64>,
    ap_time: Vec<f64>,
    sta_time: Vec<f64>,
    collision_us: f64,
    destination: WeightedIndex<f64>,
    backlog: Vec<usize>,
}

enum Epoch {
    Ap,
    Sta,
}

impl<'a> Embedded<'a> {
    fn new(assoc: &AssociationState, params: &'a PhyMacParams) -> Result<Self> {
        params.validate()?;
        let occupied: Vec<_> = assoc.occupied().copied().collect();
        if occupied.is_empty() {
            return Err(domain("association state has no stations"));
        }
        let ap_time = occupied
            .iter()
            .map(|c| success_exchange_time(params, Winner::Ap { rate_mbps: c.rate_mbps }))
            .collect::<Result<_>>()?;
        let sta_time = occupied
            .iter()
            .map(|c| success_exchange_time(params, Winner::Sta { rate_mbps: c.rate_mbps }))
            .collect::<Result<_>>()?;
        let destination = WeightedIndex::new(occupied.iter().map(|c| c.count as f64))
            .map_err(|e| config(format!("destination law: {e}")))?;
        Ok(Embedded {
            params,
            beta: Vec::new(),
            ap_time,
            sta_time,
            collision_us: collision_duration(params),
            destination,
            backlog: vec![0; occupied.len()],
        })
    }

    fn beta(&mut self, m: usize) -> Result<f64> {
        while self.beta.len() < m {
            let next = self.params.attempt.attempt_probability(self.beta.len() + 1)?;
            self.beta.push(next);
        }
        Ok(self.beta[m - 1])
    }

    /// Runs slots until the next success; returns elapsed microseconds.
    fn next_success(&mut self, rng: &mut ChaCha8Rng) -> Result<(f64, Epoch)> {
        let s: usize = self.backlog.iter().sum();
        let beta = self.beta(s + 1)?;
        let mut elapsed = 0.0;
        loop {
            let mut attempts = 0usize;
            // None: AP; Some(i): a station of class i.
            let mut last: Option<usize> = None;
            if rng.gen_bool(beta) {
                attempts += 1;
            }
            for (i, &n) in self.backlog.iter().enumerate() {
                for _ in 0..n {
                    if rng.gen_bool(beta) {
                        attempts += 1;
                        last = Some(i);
                    }
                }
            }
            match attempts {
                0 => elapsed += self.params.slot_time_us,
                1 => {
                    return Ok(match last {
                        None => {
                            let i = self.destination.sample(rng);
                            self.backlog[i] += 1;
                            (elapsed + self.ap_time[i], Epoch::Ap)
                        }
                        Some(i) => {
                            self.backlog[i] -= 1;
                            (elapsed + self.sta_time[i], Epoch::Sta)
                        }
                    });
                }
                _ => elapsed += self.collision_us,
            }
        }
    }
}

/// Simulates `epochs` successful transmissions and estimates the AP
/// throughput with a batch-means 99% confidence interval. The first 5% of
/// epochs are discarded. Identical inputs give identical output.
pub fn simulate_embedded(
    assoc: &AssociationState,
    params: &PhyMacParams,
    epochs: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    run(assoc, params, epochs, seed, None)
}

/// As [`simulate_embedded`], also counting how often each backlog state is
/// observed at a success epoch after warm-up.
pub fn simulate_with_occupancy(
    assoc: &AssociationState,
    params: &PhyMacParams,
    epochs: u64,
    seed: u64,
) -> Result<(OracleEstimate, Occupancy)> {
    let mut occupancy = Occupancy::new();
    let est = run(assoc, params, epochs, seed, Some(&mut occupancy))?;
    Ok((est, occupancy))
}

fn run(
    assoc: &AssociationState,
    params: &PhyMacParams,
    epochs: u64,
    seed: u64,
    mut occupancy: Option<&mut Occupancy>,
) -> Result<OracleEstimate> {
    if epochs < MIN_EPOCHS {
        return Err(domain(format!("need at least {MIN_EPOCHS} success epochs, got {epochs}")));
    }
    let mut sim = Embedded::new(assoc, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits_per_packet = Bits::from_bytes(params.tcp_data_payload_bytes).0;

    let warmup = (epochs as f64 * WARMUP_FRACTION).ceil() as u64;
    for _ in 0..warmup {
        sim.next_success(&mut rng)?;
    }
    let measured = epochs - warmup;
    let per_batch = measured / BATCHES as u64;
    let mut batch_phi = Vec::with_capacity(BATCHES);
    let (mut total_bits, mut total_us) = (0.0, 0.0);
    for b in 0..BATCHES {
        let count = if b + 1 == BATCHES { measured - per_batch * (BATCHES as u64 - 1) } else { per_batch };
        let (mut bits, mut us) = (0.0, 0.0);
        for _ in 0..count {
            if let Some(occ) = occupancy.as_deref_mut() {
                *occ.entry(sim.backlog.clone()).or_insert(0) += 1;
            }
            let (dt, who) = sim.next_success(&mut rng)?;
            us += dt;
            if let Epoch::Ap = who {
                bits += bits_per_packet;
            }
        }
        batch_phi.push(bits / us);
        total_bits += bits;
        total_us += us;
    }

    let n = batch_phi.len() as f64;
    let mean = batch_phi.iter().sum::<f64>() / n;
    let var = batch_phi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = student_t_quantile(0.995, n - 1.0) * (var / n).sqrt();
    Ok(OracleEstimate {
        phi_hat_mbps: total_bits / total_us,
        ci99_halfwidth_mbps: half,
        successes: measured,
        simulated_time_s: total_us / 1e6,
        seed,
    })
}
