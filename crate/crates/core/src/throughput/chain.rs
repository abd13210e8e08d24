//! Embedded chain of TCP-ACK backlogs observed at successful transmissions.
//!
//! The state is the vector `(n_1..n_k)` of stations at each rate holding a
//! TCP ACK. The AP is always backlogged, so `s + 1` entities contend when
//! `s = sum n_i`, and each is equally likely to win:
//!
//! * the AP wins with probability `1/(s+1)` and its packet goes to a rate-`i`
//!   station with probability `M_i / M`, so `n_i` grows by one (held at
//!   `n_max`);
//! * a rate-`i` station wins with probability `n_i/(s+1)` and `n_i` drops by
//!   one.

use crate::airtime::{expected_contention_overhead, success_exchange_time, PhyMacParams, Winner};
use crate::assoc::AssociationState;
use crate::error::{domain, Result};
use crate::throughput::stationary::TransitionMatrix;

/// Largest state space `build_chain` will enumerate.
pub const MAX_STATES: usize = 2_000_000;

/// Truncated embedded chain together with the per-state expected sojourn
/// time and AP success probability.
#[derive(Clone, Debug)]
pub struct Chain {
    rates_mbps: Vec<f64>,
    fractions: Vec<f64>,
    n_max: usize,
    matrix: TransitionMatrix,
    sojourn_us: Vec<f64>,
    ap_success: Vec<f64>,
}

impl Chain {
    /// Rates of the occupied classes, in association-state order.
    pub fn rates_mbps(&self) -> &[f64] {
        &self.rates_mbps
    }

    /// `M_i / M` for the occupied classes.
    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    /// Expected sojourn time of each state in microseconds.
    pub fn sojourn_us(&self) -> &[f64] {
        &self.sojourn_us
    }

    /// Probability that the success ending each state is the AP's.
    pub fn ap_success(&self) -> &[f64] {
        &self.ap_success
    }

    pub fn state(&self, index: usize) -> Vec<usize> {
        decode(index, self.n_max + 1, self.rates_mbps.len())
    }

    pub fn index(&self, state: &[usize]) -> Option<usize> {
        if state.len() != self.rates_mbps.len() || state.iter().any(|&n| n > self.n_max) {
            return None;
        }
        Some(encode(state, self.n_max + 1))
    }
}

fn encode(state: &[usize], radix: usize) -> usize {
    state.iter().rev().fold(0, |acc, &n| acc * radix + n)
}

fn decode(mut index: usize, radix: usize, k: usize) -> Vec<usize> {
    let mut state = Vec::with_capacity(k);
    for _ in 0..k {
        state.push(index % radix);
        index /= radix;
    }
    state
}

/// Enumerates the chain truncated at `n_max` stations per class. Classes
/// with no associated stations are dropped.
pub fn build_chain(assoc: &AssociationState, params: &PhyMacParams, n_max: usize) -> Result<Chain> {
    if n_max < 1 {
        return Err(domain("n_max must be at least 1"));
    }
    let total = assoc.total();
    if total == 0 {
        return Err(domain("association state has no stations"));
    }
    let occupied: Vec<_> = assoc.occupied().copied().collect();
    let k = occupied.len();
    let radix = n_max + 1;
    let len = radix
        .checked_pow(k as u32)
        .filter(|&len| len <= MAX_STATES)
        .ok_or_else(|| domain(format!("{radix}^{k} states exceed the limit of {MAX_STATES}; lower n_max")))?;

    let rates_mbps: Vec<f64> = occupied.iter().map(|c| c.rate_mbps).collect();
    let fractions: Vec<f64> = occupied.iter().map(|c| c.count as f64 / total as f64).collect();
    let ap_time = rates_mbps
        .iter()
        .map(|&r| success_exchange_time(params, Winner::Ap { rate_mbps: r }))
        .collect::<Result<Vec<_>>>()?;
    let sta_time = rates_mbps
        .iter()
        .map(|&r| success_exchange_time(params, Winner::Sta { rate_mbps: r }))
        .collect::<Result<Vec<_>>>()?;
    // The AP frame length depends on the destination, which is drawn by the
    // M_i / M law independently of the state.
    let mean_ap_time: f64 = fractions.iter().zip(&ap_time).map(|(p, t)| p * t).sum();
    let overhead = (1..=k * n_max + 1)
        .map(|m| expected_contention_overhead(params, m))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(len);
    let mut sojourn_us = Vec::with_capacity(len);
    let mut ap_success = Vec::with_capacity(len);
    for index in 0..len {
        let state = decode(index, radix, k);
        let s: usize = state.iter().sum();
        let contenders = (s + 1) as f64;
        let p_ap = 1.0 / contenders;

        let mut row = Vec::with_capacity(2 * k);
        for i in 0..k {
            let target = if state[i] < n_max { index + radix.pow(i as u32) } else { index };
            row.push((target, p_ap * fractions[i]));
            if state[i] > 0 {
                row.push((index - radix.pow(i as u32), state[i] as f64 / contenders));
            }
        }
        rows.push(row);

        let sta_part: f64 = state.iter().zip(&sta_time).map(|(&n, t)| n as f64 * t).sum();
        sojourn_us.push(overhead[s] + (mean_ap_time + sta_part) / contenders);
        ap_success.push(p_ap);
    }

    Ok(Chain {
        rates_mbps,
        fractions,
        n_max,
        matrix: TransitionMatrix::from_rows(rows)?,
        sojourn_us,
        ap_success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> PhyMacParams {
        PhyMacParams::default()
    }

    fn prob(chain: &Chain, from: &[usize], to: &[usize]) -> f64 {
        let j = chain.index(to).unwrap();
        chain
            .matrix()
            .row(chain.index(from).unwrap())
            .iter()
            .find(|&&(t, _)| t == j)
            .map_or(0.0, |&(_, p)| p)
    }

    #[test]
    fn single_rate_is_birth_death() {
        let a: AssociationState = "7@11".parse().unwrap();
        let c = build_chain(&a, &params(), 6).unwrap();
        assert_eq!(c.len(), 7);
        for n in 0..6 {
            assert_relative_eq!(prob(&c, &[n], &[n + 1]), 1.0 / (n as f64 + 1.0));
            if n > 0 {
                assert_relative_eq!(prob(&c, &[n], &[n - 1]), n as f64 / (n as f64 + 1.0));
            }
        }
        // Clamped at the truncation bound.
        assert_relative_eq!(prob(&c, &[6], &[6]), 1.0 / 7.0);
    }

    #[test]
    fn empty_state_forces_ap_success() {
        let a: AssociationState = "2@11,3@1".parse().unwrap();
        let c = build_chain(&a, &params(), 4).unwrap();
        assert_relative_eq!(prob(&c, &[0, 0], &[1, 0]), 0.4);
        assert_relative_eq!(prob(&c, &[0, 0], &[0, 1]), 0.6);
        assert_eq!(c.matrix().row(c.index(&[0, 0]).unwrap()).len(), 2);
        assert_eq!(c.ap_success()[0], 1.0);
    }

    #[test]
    fn winners_equally_likely_in_state_one_one() {
        let a: AssociationState = "3@11,3@2".parse().unwrap();
        let c = build_chain(&a, &params(), 4).unwrap();
        let from = [1, 1];
        // AP wins w.p. 1/3, split evenly between the two classes.
        assert_relative_eq!(prob(&c, &from, &[2, 1]) + prob(&c, &from, &[1, 2]), 1.0 / 3.0);
        assert_relative_eq!(prob(&c, &from, &[0, 1]), 1.0 / 3.0);
        assert_relative_eq!(prob(&c, &from, &[1, 0]), 1.0 / 3.0);
    }

    #[test]
    fn sojourn_matches_hand_composition() {
        let p = params();
        let a: AssociationState = "1@11,1@1".parse().unwrap();
        let c = build_chain(&a, &p, 3).unwrap();
        let idx = c.index(&[1, 0]).unwrap();
        let ap = |r| success_exchange_time(&p, Winner::Ap { rate_mbps: r }).unwrap();
        let sta = |r| success_exchange_time(&p, Winner::Sta { rate_mbps: r }).unwrap();
        let expected =
            expected_contention_overhead(&p, 2).unwrap() + 0.5 * (0.5 * ap(11.0) + 0.5 * ap(1.0)) + 0.5 * sta(11.0);
        assert_relative_eq!(c.sojourn_us()[idx], expected, epsilon = 1e-9);
        assert!(c.sojourn_us().iter().all(|&t| t > 0.0));
    }

    #[test]
    fn zero_count_classes_dropped() {
        let a: AssociationState = "0@11,2@5.5".parse().unwrap();
        let c = build_chain(&a, &params(), 5).unwrap();
        assert_eq!(c.rates_mbps(), &[5.5]);
        assert!(c.matrix().is_irreducible());
    }

    #[test]
    fn errors() {
        let empty: AssociationState = "0@11".parse().unwrap();
        assert!(build_chain(&empty, &params(), 4).is_err());
        let a: AssociationState = "1@11".parse().unwrap();
        assert!(build_chain(&a, &params(), 0).is_err());
        let unknown: AssociationState = "1@54".parse().unwrap();
        assert!(build_chain(&unknown, &params(), 4).is_err());
        let wide: AssociationState = "1@11,1@5.5,1@2,1@1".parse().unwrap();
        assert!(build_chain(&wide, &params(), 60).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        for index in 0..125 {
            assert_eq!(encode(&decode(index, 5, 3), 5), index);
        }
    }
}
