//! Expected file-download delay at an AP.
//!
//! Stations alternate between downloading a file and reading it. The AP is a
//! processor-sharing node serving at the aggregate throughput `tau`; reading
//! is an infinite-server node. A station picks file class `l` with
//! probability `q_l` (mean size `1/mu_l`), keeps the class while reading
//! (mean `1/lambda_l`), then picks afresh. This is a closed two-node BCMP
//! network whose equilibrium law is
//!
//! ```text
//! P(x1, x2) = C * m1! prod_l a_l^{m1l} / m1l!  *  prod_l b_l^{m2l} / m2l!
//! ```
//!
//! with per-visit demands `a_l = q_l / (mu_l tau)` and `b_l = q_l / lambda_l`.
//! Summing over the class split gives the marginal
//! `P(m1) ∝ D1^m1 * D2^(M - m1) / (M - m1)!` with `D1 = sum a_l` and
//! `D2 = sum b_l`. The mean delay follows from Little's law at both nodes:
//! `t_H = n_RS / D2` and `d = n_DS / t_H`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::assoc::AssociationState;
use crate::error::{config, domain, Result};
use crate::throughput::ThroughputEngine;
use crate::units::{Bits, Mbps};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileClass {
    pub mean_size_bytes: f64,
    pub mean_read_s: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileClassMix {
    pub classes: Vec<FileClass>,
}

impl Default for FileClassMix {
    fn default() -> Self {
        crate::config::defaults().mix.clone()
    }
}

impl FileClassMix {
    pub fn single(mean_size_bytes: f64, mean_read_s: f64) -> Self {
        FileClassMix { classes: vec![FileClass { mean_size_bytes, mean_read_s, probability: 1.0 }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(config("file mix has no classes"));
        }
        for (l, c) in self.classes.iter().enumerate() {
            if !(c.mean_size_bytes > 0.0 && c.mean_read_s > 0.0 && c.probability > 0.0)
                || !(c.mean_size_bytes.is_finite() && c.mean_read_s.is_finite())
            {
                return Err(config(format!("file class {l} needs positive size, read time and probability")));
            }
        }
        let total: f64 = self.classes.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(config(format!("file class probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Mean file size in bits, averaged over the class probabilities.
    pub fn mean_size_bits(&self) -> f64 {
        self.classes.iter().map(|c| c.probability * Bits::from_bytes(c.mean_size_bytes).0).sum()
    }

    /// Per-visit demand at the AP for each class, in seconds.
    pub fn ps_demands_s(&self, tau_mbps: f64) -> Vec<f64> {
        let rate = Mbps(tau_mbps).to_bits_per_second();
        self.classes
            .iter()
            .map(|c| c.probability * (Bits::from_bytes(c.mean_size_bytes) / rate).0)
            .collect()
    }

    /// Per-visit demand at the reading node for each class, in seconds.
    pub fn is_demands_s(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.probability * c.mean_read_s).collect()
    }
}

/// Relative visit rates `e_{i,l}` for the AP (node 1) and reading (node 2).
#[derive(Clone, Debug, PartialEq)]
pub struct VisitRatios {
    pub ap: Vec<f64>,
    pub reading: Vec<f64>,
}

/// Solves the traffic equations with the normalization `e_{1,1} = q_1`,
/// which gives `e_{1,l} = e_{2,l} = q_l`.
pub fn visit_ratios(mix: &FileClassMix) -> VisitRatios {
    let q: Vec<f64> = mix.classes.iter().map(|c| c.probability).collect();
    VisitRatios { ap: q.clone(), reading: q }
}

/// Routing probability from (node, class) to (node, class). Downloads go
/// to reading in the same class; reading goes to a download of class `l`
/// with probability `q_l`. Nodes are 0 (AP) and 1 (reading).
pub fn routing(mix: &FileClassMix, from: (usize, usize), to: (usize, usize)) -> f64 {
    match (from.0, to.0) {
        (0, 1) if from.1 == to.1 => 1.0,
        (1, 0) => mix.classes[to.1].probability,
        _ => 0.0,
    }
}

/// Equilibrium of the closed network with `M` stations.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub population: u32,
    /// `P(m1 = j)` for `j = 0..=M`.
    pub downloaders: Vec<f64>,
    /// Total demand per cycle at the AP, seconds.
    pub ap_demand_s: f64,
    /// Total demand per cycle at the reading node, seconds.
    pub read_demand_s: f64,
    /// Mean number of class-`l` stations downloading.
    pub class_downloading: Vec<f64>,
    /// Mean number of class-`l` stations reading.
    pub class_reading: Vec<f64>,
}

fn check_inputs(population: u32, tau_mbps: f64, mix: &FileClassMix) -> Result<()> {
    if population == 0 {
        return Err(domain("closed network needs at least one station"));
    }
    if !(tau_mbps > 0.0 && tau_mbps.is_finite()) {
        return Err(domain(format!("AP service rate must be positive, got {tau_mbps} Mb/s")));
    }
    mix.validate()
}

const LN_FACTORIAL_TABLE: usize = 1 << 16;

fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..LN_FACTORIAL_TABLE).map(|k| statrs::function::gamma::ln_gamma(k as f64 + 1.0)).collect()
    });
    match table.get(n as usize) {
        Some(&v) => v,
        None => statrs::function::gamma::ln_gamma(n as f64 + 1.0),
    }
}

fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&x| (x - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Marginal law of the number downloading, from the aggregated demands.
/// Weights are accumulated in the log domain.
pub fn equilibrium(population: u32, tau_mbps: f64, mix: &FileClassMix) -> Result<Equilibrium> {
    check_inputs(population, tau_mbps, mix)?;
    let a = mix.ps_demands_s(tau_mbps);
    let b = mix.is_demands_s();
    let d1: f64 = a.iter().sum();
    let d2: f64 = b.iter().sum();
    let m = population;
    let log_w: Vec<f64> = (0..=m)
        .map(|j| j as f64 * d1.ln() + (m - j) as f64 * d2.ln() - ln_factorial(m - j))
        .collect();
    let downloaders = normalize_log_weights(&log_w);
    let mean_ds: f64 = downloaders.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let mean_rs: f64 = downloaders.iter().enumerate().map(|(j, p)| (m as usize - j) as f64 * p).sum();
    // Given the node totals, the class split is multinomial in the demands.
    let class_downloading = a.iter().map(|x| mean_ds * x / d1).collect();
    let class_reading = b.iter().map(|x| mean_rs * x / d2).collect();
    Ok(Equilibrium { population, downloaders, ap_demand_s: d1, read_demand_s: d2, class_downloading, class_reading })
}

/// The same equilibrium by summing the full product form over every class
/// split `(m_{1,l}, m_{2,l})`. Exponential in the number of classes; for
/// cross-checking.
pub fn equilibrium_by_enumeration(population: u32, tau_mbps: f64, mix: &FileClassMix) -> Result<Equilibrium> {
    check_inputs(population, tau_mbps, mix)?;
    let a = mix.ps_demands_s(tau_mbps);
    let b = mix.is_demands_s();
    let classes = a.len();
    let m = population;

    let mut log_weights = Vec::new();
    let mut splits: Vec<Vec<u32>> = Vec::new();
    let mut split = vec![0u32; 2 * classes];
    // Compositions of M into 2L parts: the first L at the AP, the rest reading.
    fn visit(
        pos: usize,
        left: u32,
        split: &mut Vec<u32>,
        on_leaf: &mut dyn FnMut(&[u32]),
    ) {
        if pos + 1 == split.len() {
            split[pos] = left;
            on_leaf(split);
            return;
        }
        for take in 0..=left {
            split[pos] = take;
            visit(pos + 1, left - take, split, on_leaf);
        }
    }
    let ln_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let ln_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    visit(0, m, &mut split, &mut |s| {
        let (at_ap, reading) = s.split_at(classes);
        let m1: u32 = at_ap.iter().sum();
        let mut lw = ln_factorial(m1);
        for l in 0..classes {
            lw += at_ap[l] as f64 * ln_a[l] - ln_factorial(at_ap[l]);
            lw += reading[l] as f64 * ln_b[l] - ln_factorial(reading[l]);
        }
        log_weights.push(lw);
        splits.push(s.to_vec());
    });

    let p = normalize_log_weights(&log_weights);
    let mut downloaders = vec![0.0; m as usize + 1];
    let mut class_downloading = vec![0.0; classes];
    let mut class_reading = vec![0.0; classes];
    for (s, &prob) in splits.iter().zip(&p) {
        let m1: u32 = s[..classes].iter().sum();
        downloaders[m1 as usize] += prob;
        for l in 0..classes {
            class_downloading[l] += prob * s[l] as f64;
            class_reading[l] += prob * s[classes + l] as f64;
        }
    }
    Ok(Equilibrium {
        population,
        downloaders,
        ap_demand_s: a.iter().sum(),
        read_demand_s: b.iter().sum(),
        class_downloading,
        class_reading,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub population: u32,
    pub tau_mbps: f64,
    /// Mean number of stations downloading.
    pub n_avg_ds: f64,
    /// Mean number of stations reading.
    pub n_avg_rs: f64,
    /// Network throughput, files per second.
    pub t_h: f64,
    /// Mean download delay, seconds.
    pub d: f64,
}

impl Equilibrium {
    pub fn delay(&self, tau_mbps: f64) -> DelayEstimate {
        let n_avg_ds: f64 = self.downloaders.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        let n_avg_rs: f64 = self
            .downloaders
            .iter()
            .enumerate()
            .map(|(j, p)| (self.population as usize - j) as f64 * p)
            .sum();
        let t_h = n_avg_rs / self.read_demand_s;
        DelayEstimate { population: self.population, tau_mbps, n_avg_ds, n_avg_rs, t_h, d: n_avg_ds / t_h }
    }
}

/// Mean download delay for `population` stations sharing an AP that serves
/// at `tau_mbps`.
pub fn delay_estimate(population: u32, tau_mbps: f64, mix: &FileClassMix) -> Result<DelayEstimate> {
    Ok(equilibrium(population, tau_mbps, mix)?.delay(tau_mbps))
}

/// Delay a newcomer at `newcomer_rate_mbps` should expect at an AP in state
/// `assoc`: the newcomer is added, the throughput is recomputed for the
/// enlarged state and the network is solved with the enlarged population.
pub fn eda_figure_of_merit(
    assoc: &AssociationState,
    newcomer_rate_mbps: f64,
    mix: &FileClassMix,
    engine: &dyn ThroughputEngine,
) -> Result<DelayEstimate> {
    let joined = assoc.with_added(newcomer_rate_mbps)?;
    let tau = engine.phi_mbps(&joined)?;
    delay_estimate(joined.total(), tau, mix)
}
