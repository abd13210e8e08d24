//! Aggregate TCP throughput of an AP serving stations at several PHY rates.
//!
//! The embedded backlog chain of [`chain`] is a Markov renewal sequence; by
//! the renewal-reward theorem the long-run throughput is
//!
//! ```text
//! phi = payload_bits * sum_n pi(n) / (s(n) + 1)  /  sum_n pi(n) E_n[X]
//! ```
//!
//! where `1/(s+1)` is the probability that the success ending state `n` is
//! the AP's and `E_n[X]` is the expected sojourn time of the state.
//!
//! Two evaluation routes are provided. [`aggregate_throughput`] enumerates
//! the truncated chain and solves it numerically. [`ProductFormEngine`] uses
//! the closed form of the untruncated stationary law,
//! `pi(n) ∝ (s + 1) prod_i p_i^{n_i} / n_i!` with `p_i = M_i / M`: the total
//! backlog `s` is a birth-death walk with `pi_s ∝ (s + 1)/s!`, and because
//! ACKs are labelled independently on arrival and leave uniformly at random,
//! the labels given `s` are multinomial. That route costs `O(s_max)` and is
//! what the flow-level simulator uses.

pub mod chain;
pub mod stationary;

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::airtime::{expected_contention_overhead, success_exchange_time, PhyMacParams, Winner};
use crate::assoc::AssociationState;
use crate::error::{domain, Error, Result};
use crate::units::{Bits, Micros};

pub use chain::{build_chain, Chain};
pub use stationary::{stationary_distribution, Method, TransitionMatrix};

/// Truncation bounds are compared against a bound this much larger.
pub const N_MAX_STEP: usize = 4;

/// Largest accepted relative change between the two truncation bounds.
pub const TRUNCATION_TOLERANCE: f64 = 1e-3;

/// Solved chain: states, stationary probabilities and sojourn times.
#[derive(Clone, Debug)]
pub struct DtmcSolution {
    pub chain: Chain,
    pub pi: Vec<f64>,
}

impl DtmcSolution {
    /// Renewal-reward throughput in Mb/s.
    pub fn phi_mbps(&self, params: &PhyMacParams) -> f64 {
        let (mut reward, mut time) = (0.0, 0.0);
        for ((&p, &ap), &t) in self.pi.iter().zip(self.chain.ap_success()).zip(self.chain.sojourn_us()) {
            reward += p * ap;
            time += p * t;
        }
        let bits = Bits::from_bytes(params.tcp_data_payload_bytes).0 * reward;
        (Bits(bits) / Micros(time)).0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputResult {
    /// Aggregate TCP payload throughput over all connections.
    pub phi_mbps: f64,
    pub n_max_used: usize,
    /// Relative change of `phi` when `n_max` grows by [`N_MAX_STEP`].
    pub residual: f64,
}

/// Picks the dense solver when the chain is small enough.
pub fn default_method(states: usize) -> Method {
    if states <= stationary::DENSE_LIMIT {
        Method::Dense
    } else {
        Method::Power
    }
}

pub fn solve(assoc: &AssociationState, params: &PhyMacParams, n_max: usize, method: Method) -> Result<DtmcSolution> {
    let chain = build_chain(assoc, params, n_max)?;
    let pi = stationary_distribution(chain.matrix(), method)?;
    Ok(DtmcSolution { chain, pi })
}

fn phi_at(assoc: &AssociationState, params: &PhyMacParams, n_max: usize) -> Result<f64> {
    let chain = build_chain(assoc, params, n_max)?;
    let method = default_method(chain.len());
    let pi = stationary_distribution(chain.matrix(), method)?;
    Ok(DtmcSolution { chain, pi }.phi_mbps(params))
}

/// Aggregate AP throughput from the truncated chain, with a truncation check
/// against `n_max + 4`.
pub fn aggregate_throughput(assoc: &AssociationState, params: &PhyMacParams, n_max: usize) -> Result<ThroughputResult> {
    params.validate()?;
    let phi = phi_at(assoc, params, n_max)?;
    let n_max_next = n_max + N_MAX_STEP;
    let phi_next = phi_at(assoc, params, n_max_next)?;
    let residual = (phi - phi_next).abs() / phi_next;
    if !(residual < TRUNCATION_TOLERANCE) {
        return Err(Error::Truncation { n_max, n_max_next, phi_at_n_max: phi, phi_at_next: phi_next, residual });
    }
    let fastest = assoc.occupied().map(|c| c.rate_mbps).fold(0.0, f64::max);
    if !(phi > 0.0 && phi < fastest) {
        return Err(Error::Internal(format!("throughput {phi} Mb/s outside (0, {fastest})")));
    }
    Ok(ThroughputResult { phi_mbps: phi, n_max_used: n_max, residual })
}

/// Anything that maps an association state to the AP's aggregate throughput.
pub trait ThroughputEngine {
    fn phi_mbps(&self, assoc: &AssociationState) -> Result<f64>;
}

/// Numerical chain solution with the truncation check.
#[derive(Clone, Debug)]
pub struct ChainEngine {
    pub params: PhyMacParams,
    pub n_max: usize,
}

impl ThroughputEngine for ChainEngine {
    fn phi_mbps(&self, assoc: &AssociationState) -> Result<f64> {
        aggregate_throughput(assoc, &self.params, self.n_max).map(|r| r.phi_mbps)
    }
}

/// Closed-form evaluation through the product-form stationary law.
#[derive(Clone, Debug)]
pub struct ProductFormEngine {
    params: PhyMacParams,
    /// Normalized `pi_s ∝ (s + 1)/s!`.
    backlog_law: Vec<f64>,
    /// Expected contention overhead with `s + 1` contenders.
    overhead_us: Vec<f64>,
}

/// Backlog totals beyond this carry less than 1e-40 of the probability mass.
pub const PRODUCT_FORM_S_MAX: usize = 40;

impl ProductFormEngine {
    pub fn new(params: PhyMacParams) -> Result<Self> {
        params.validate()?;
        let mut backlog_law = Vec::with_capacity(PRODUCT_FORM_S_MAX + 1);
        let mut inv_factorial = 1.0;
        for s in 0..=PRODUCT_FORM_S_MAX {
            if s > 0 {
                inv_factorial /= s as f64;
            }
            backlog_law.push((s + 1) as f64 * inv_factorial);
        }
        let total: f64 = backlog_law.iter().sum();
        backlog_law.iter_mut().for_each(|w| *w /= total);
        let overhead_us = (1..=PRODUCT_FORM_S_MAX + 1)
            .map(|m| expected_contention_overhead(&params, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductFormEngine { params, backlog_law, overhead_us })
    }

    pub fn params(&self) -> &PhyMacParams {
        &self.params
    }
}

impl ThroughputEngine for ProductFormEngine {
    fn phi_mbps(&self, assoc: &AssociationState) -> Result<f64> {
        let total = assoc.total();
        if total == 0 {
            return Err(domain("association state has no stations"));
        }
        let (mut mean_ap, mut mean_sta) = (0.0, 0.0);
        for c in assoc.occupied() {
            let p = c.count as f64 / total as f64;
            mean_ap += p * success_exchange_time(&self.params, Winner::Ap { rate_mbps: c.rate_mbps })?;
            mean_sta += p * success_exchange_time(&self.params, Winner::Sta { rate_mbps: c.rate_mbps })?;
        }
        // Given s, E[sum_i n_i T_sta(r_i)] = s * mean_sta.
        let (mut reward, mut time) = (0.0, 0.0);
        for (s, (&w, &overhead)) in self.backlog_law.iter().zip(&self.overhead_us).enumerate() {
            let contenders = (s + 1) as f64;
            reward += w / contenders;
            time += w * (overhead + (mean_ap + s as f64 * mean_sta) / contenders);
        }
        let bits = Bits::from_bytes(self.params.tcp_data_payload_bytes).0 * reward;
        Ok((Bits(bits) / Micros(time)).0)
    }
}

/// Memoizes an engine by canonical association state. Not `Sync`; each
/// simulation run owns one.
#[derive(Debug)]
pub struct CachedEngine<E> {
    inner: E,
    cache: RefCell<HashMap<Vec<(u64, u32)>, f64>>,
}

impl<E: ThroughputEngine> CachedEngine<E> {
    pub fn new(inner: E) -> Self {
        CachedEngine { inner, cache: RefCell::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn cached_states(&self) -> usize {
        self.cache.borrow().len()
    }
}

impl<E: ThroughputEngine> ThroughputEngine for CachedEngine<E> {
    fn phi_mbps(&self, assoc: &AssociationState) -> Result<f64> {
        let key = assoc.canonical_key();
        if let Some(&phi) = self.cache.borrow().get(&key) {
            return Ok(phi);
        }
        let phi = self.inner.phi_mbps(assoc)?;
        self.cache.borrow_mut().insert(key, phi);
        Ok(phi)
    }
}

impl<T: ThroughputEngine + ?Sized> ThroughputEngine for &T {
    fn phi_mbps(&self, assoc: &AssociationState) -> Result<f64> {
        (**self).phi_mbps(assoc)
    }
}
