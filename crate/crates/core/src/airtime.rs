//! Channel occupancy of single frames, complete frame exchanges, and the
//! contention that precedes every successful exchange.
//!
//! The access point sends TCP data with RTS/CTS protection; stations answer
//! with TCP ACKs using basic access. All durations are in microseconds.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::units::{Bits, Mbps};

/// How the per-slot attempt probability of a backlogged entity depends on
/// the number `m` of contending entities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttemptModel {
    /// The same attempt probability regardless of `m`.
    Fixed { beta: f64 },
    /// Fixed point of the saturated binary-exponential-backoff relation with
    /// minimum window `cw_min` and `stages` doublings.
    Backoff { cw_min: u32, stages: u32 },
}

impl AttemptModel {
    /// Per-slot attempt probability with `m` contenders.
    pub fn attempt_probability(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(domain("attempt probability needs at least one contender"));
        }
        let beta = match *self {
            AttemptModel::Fixed { beta } => beta,
            AttemptModel::Backoff { cw_min, stages } => backoff_fixed_point(cw_min as f64, stages, m),
        };
        if !(beta > 0.0 && beta < 1.0) {
            return Err(config(format!("attempt probability {beta} is outside (0, 1)")));
        }
        Ok(beta)
    }
}

/// Solves `beta = 2 / (W + 1 + p W sum_{i<stages} (2p)^i)` with
/// `p = 1 - (1 - beta)^(m-1)` by bisection. The right-hand side falls as
/// `beta` grows, so the root is unique.
fn backoff_fixed_point(w: f64, stages: u32, m: usize) -> f64 {
    let rhs = |beta: f64| {
        let p = 1.0 - (1.0 - beta).powi(m as i32 - 1);
        let series: f64 = (0..stages).map(|i| (2.0 * p).powi(i as i32)).sum();
        2.0 / (w + 1.0 + p * w * series)
    };
    if m == 1 {
        return rhs(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - rhs(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// PHY and MAC constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyMacParams {
    pub slot_time_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub phy_preamble_header_us: f64,
    pub mac_header_bytes: f64,
    pub rts_bytes: f64,
    pub cts_bytes: f64,
    pub mac_ack_bytes: f64,
    pub tcp_data_payload_bytes: f64,
    pub tcp_ack_payload_bytes: f64,
    /// Rate of RTS, CTS and MAC ACK frames.
    pub control_rate_mbps: f64,
    pub basic_rates_mbps: Vec<f64>,
    /// PHY rates a station may be associated at.
    pub data_rates_mbps: Vec<f64>,
    pub attempt: AttemptModel,
}

impl Default for PhyMacParams {
    fn default() -> Self {
        crate::config::defaults().phy_mac.clone()
    }
}

impl PhyMacParams {
    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("slot_time_us", self.slot_time_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("phy_preamble_header_us", self.phy_preamble_header_us),
        ];
        for (name, v) in durations {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        let sizes = [
            ("mac_header_bytes", self.mac_header_bytes),
            ("rts_bytes", self.rts_bytes),
            ("cts_bytes", self.cts_bytes),
            ("mac_ack_bytes", self.mac_ack_bytes),
        ];
        for (name, v) in sizes {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.tcp_ack_payload_bytes > 0.0
            && self.tcp_data_payload_bytes > self.tcp_ack_payload_bytes
            && self.tcp_data_payload_bytes.is_finite())
        {
            return Err(config(format!(
                "need tcp_data_payload_bytes > tcp_ack_payload_bytes > 0, got {} and {}",
                self.tcp_data_payload_bytes, self.tcp_ack_payload_bytes
            )));
        }
        if self.basic_rates_mbps.is_empty() || self.basic_rates_mbps.iter().any(|&r| !(r > 0.0)) {
            return Err(config("basic_rates_mbps must be a nonempty list of positive rates"));
        }
        if !self.basic_rates_mbps.contains(&self.control_rate_mbps) {
            return Err(config(format!(
                "control_rate_mbps {} is not one of the basic rates {:?}",
                self.control_rate_mbps, self.basic_rates_mbps
            )));
        }
        if self.data_rates_mbps.is_empty() || self.data_rates_mbps.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(config("data_rates_mbps must be a nonempty list of positive rates"));
        }
        if let AttemptModel::Fixed { beta } = self.attempt {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(config(format!("fixed attempt probability {beta} is outside (0, 1)")));
            }
        }
        if let AttemptModel::Backoff { cw_min, .. } = self.attempt {
            if cw_min < 1 {
                return Err(config("cw_min must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn is_data_rate(&self, rate_mbps: f64) -> bool {
        self.data_rates_mbps.contains(&rate_mbps)
    }

    pub fn fastest_data_rate(&self) -> f64 {
        self.data_rates_mbps.iter().copied().fold(f64::MIN, f64::max)
    }

    fn slowest_basic_rate(&self) -> f64 {
        self.basic_rates_mbps.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Duration of a control frame (RTS, CTS, MAC ACK) of the given size.
    pub fn control_frame_us(&self, frame_bytes: f64) -> f64 {
        self.phy_preamble_header_us + (Bits::from_bytes(frame_bytes) / Mbps(self.control_rate_mbps)).0
    }
}

/// Airtime of one MAC data frame: PHY preamble and header, then MAC header and
/// payload at `rate_mbps`.
pub fn tx_duration(params: &PhyMacParams, rate_mbps: f64, payload_bytes: f64) -> Result<f64> {
    if !(rate_mbps > 0.0 && rate_mbps.is_finite()) {
        return Err(domain(format!("rate must be positive, got {rate_mbps}")));
    }
    if !(payload_bytes >= 0.0) {
        return Err(domain(format!("payload must be nonnegative, got {payload_bytes}")));
    }
    let body = Bits::from_bytes(params.mac_header_bytes + payload_bytes) / Mbps(rate_mbps);
    Ok(params.phy_preamble_header_us + body.0)
}

/// The entity that wins a contention round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Winner {
    /// The AP, sending TCP data to a station associated at `rate_mbps`.
    Ap { rate_mbps: f64 },
    /// A station associated at `rate_mbps`, sending a TCP ACK.
    Sta { rate_mbps: f64 },
}

/// Time the channel is held by one successful exchange, including the DIFS
/// that follows it.
///
/// AP: `RTS + SIFS + CTS + SIFS + DATA + SIFS + ACK + DIFS`.
/// Station: `DATA + SIFS + ACK + DIFS`.
pub fn success_exchange_time(params: &PhyMacParams, winner: Winner) -> Result<f64> {
    let rate = match winner {
        Winner::Ap { rate_mbps } | Winner::Sta { rate_mbps } => rate_mbps,
    };
    if !params.is_data_rate(rate) {
        return Err(domain(format!(
            "rate {rate} Mb/s is not one of the configured data rates {:?}",
            params.data_rates_mbps
        )));
    }
    let ack = params.control_frame_us(params.mac_ack_bytes);
    Ok(match winner {
        Winner::Ap { rate_mbps } => {
            params.control_frame_us(params.rts_bytes)
                + params.sifs_us
                + params.control_frame_us(params.cts_bytes)
                + params.sifs_us
                + tx_duration(params, rate_mbps, params.tcp_data_payload_bytes)?
                + params.sifs_us
                + ack
                + params.difs_us
        }
        Winner::Sta { rate_mbps } => {
            tx_duration(params, rate_mbps, params.tcp_ack_payload_bytes)? + params.sifs_us + ack + params.difs_us
        }
    })
}

/// Duration charged to a collision: the longer of an RTS collision and a
/// basic-access TCP-ACK collision at the slowest basic rate, each followed
/// by DIFS.
pub fn collision_duration(params: &PhyMacParams) -> f64 {
    let rts = params.control_frame_us(params.rts_bytes);
    let ack_frame = params.phy_preamble_header_us
        + (Bits::from_bytes(params.mac_header_bytes + params.tcp_ack_payload_bytes) / Mbps(params.slowest_basic_rate())).0;
    rts.max(ack_frame) + params.difs_us
}

/// Outcome probabilities of one slot with `m` contenders each attempting
/// with probability `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotOutcome {
    pub idle: f64,
    pub success: f64,
    pub collision: f64,
}

pub fn slot_outcome(beta: f64, m: usize) -> Result<SlotOutcome> {
    if m == 0 {
        return Err(domain("slot outcome needs at least one contender"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(config(format!("attempt probability {beta} is outside (0, 1)")));
    }
    let idle = (1.0 - beta).powi(m as i32);
    let success = m as f64 * beta * (1.0 - beta).powi(m as i32 - 1);
    Ok(SlotOutcome { idle, success, collision: 1.0 - idle - success })
}

/// Expected idle and collision time spent before the next success when `m`
/// backlogged entities contend: `(P_idle * slot + P_coll * T_coll) / P_succ`.
///
/// Conditional on a success, each contender is the winner with probability
/// `1/m`.
pub fn expected_contention_overhead(params: &PhyMacParams, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(domain("contention overhead needs at least one contender"));
    }
    let beta = params.attempt.attempt_probability(m)?;
    let slot = slot_outcome(beta, m)?;
    Ok((slot.idle * params.slot_time_us + slot.collision * collision_duration(params)) / slot.success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixed(beta: f64) -> PhyMacParams {
        PhyMacParams { attempt: AttemptModel::Fixed { beta }, ..PhyMacParams::default() }
    }

    #[test]
    fn defaults_validate() {
        PhyMacParams::default().validate().unwrap();
    }

    #[test]
    fn tx_duration_hand_values() {
        let p = PhyMacParams::default();
        assert_eq!(tx_duration(&p, 1.0, 0.0).unwrap(), 464.0);
        assert_relative_eq!(tx_duration(&p, 11.0, 1500.0).unwrap(), 192.0 + 8.0 * 1534.0 / 11.0);
        assert_relative_eq!(tx_duration(&p, 11.0, 1500.0).unwrap(), 1_307.636_363_636_363_6, epsilon = 1e-9);
    }

    #[test]
    fn tx_duration_linear_in_rate_without_preamble() {
        let p = PhyMacParams { phy_preamble_header_us: 0.0, ..PhyMacParams::default() };
        let slow = tx_duration(&p, 2.0, 1000.0).unwrap();
        let fast = tx_duration(&p, 4.0, 1000.0).unwrap();
        assert_relative_eq!(slow, 2.0 * fast);
    }

    #[test]
    fn tx_duration_rejects_bad_rate() {
        let p = PhyMacParams::default();
        assert!(tx_duration(&p, 0.0, 10.0).is_err());
        assert!(tx_duration(&p, -1.0, 10.0).is_err());
        assert!(tx_duration(&p, f64::NAN, 10.0).is_err());
    }

    #[test]
    fn sta_exchange_hand_value() {
        let p = PhyMacParams::default();
        // DATA(40 B at 11) + SIFS + ACK(14 B at 1) + DIFS
        let expected = (192.0 + 8.0 * 74.0 / 11.0) + 10.0 + (192.0 + 112.0) + 50.0;
        let got = success_exchange_time(&p, Winner::Sta { rate_mbps: 11.0 }).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-9);
    }

    #[test]
    fn ap_exchange_hand_value() {
        let p = PhyMacParams::default();
        let rts = 192.0 + 160.0;
        let cts = 192.0 + 112.0;
        let expected = rts + 10.0 + cts + 10.0 + (192.0 + 8.0 * 1534.0 / 2.0) + 10.0 + cts + 50.0;
        let got = success_exchange_time(&p, Winner::Ap { rate_mbps: 2.0 }).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-9);
        let again = success_exchange_time(&p.clone(), Winner::Ap { rate_mbps: 2.0 }).unwrap();
        assert_eq!(got, again);
    }

    #[test]
    fn exchange_times_ordered() {
        let p = PhyMacParams::default();
        let mut rates = p.data_rates_mbps.clone();
        rates.sort_by(f64::total_cmp);
        for w in rates.windows(2) {
            let (slow, fast) = (w[0], w[1]);
            let ap = |r| success_exchange_time(&p, Winner::Ap { rate_mbps: r }).unwrap();
            let sta = |r| success_exchange_time(&p, Winner::Sta { rate_mbps: r }).unwrap();
            assert!(ap(slow) > ap(fast));
            assert!(sta(slow) > sta(fast));
        }
        for &r in &rates {
            let ap = success_exchange_time(&p, Winner::Ap { rate_mbps: r }).unwrap();
            let sta = success_exchange_time(&p, Winner::Sta { rate_mbps: r }).unwrap();
            assert!(ap > sta && sta > 0.0);
        }
    }

    #[test]
    fn exchange_rejects_unknown_rate() {
        let p = PhyMacParams::default();
        assert!(success_exchange_time(&p, Winner::Ap { rate_mbps: 54.0 }).is_err());
    }

    #[test]
    fn overhead_two_contenders_half_beta() {
        let p = fixed(0.5);
        let s = slot_outcome(0.5, 2).unwrap();
        assert_eq!((s.idle, s.success, s.collision), (0.25, 0.5, 0.25));
        let expected = (0.25 * 20.0 + 0.25 * collision_duration(&p)) / 0.5;
        assert_relative_eq!(expected_contention_overhead(&p, 2).unwrap(), expected);
    }

    #[test]
    fn overhead_vanishes_for_lone_saturated_sender() {
        let p = fixed(1.0 - 1e-9);
        assert!(expected_contention_overhead(&p, 1).unwrap() < 1e-6);
    }

    #[test]
    fn overhead_grows_with_contenders() {
        let p = fixed(0.05);
        assert!(expected_contention_overhead(&p, 10).unwrap() > expected_contention_overhead(&p, 2).unwrap());
    }

    #[test]
    fn overhead_errors() {
        assert!(expected_contention_overhead(&PhyMacParams::default(), 0).is_err());
        assert!(expected_contention_overhead(&fixed(1.0), 1).is_err());
        assert!(expected_contention_overhead(&fixed(0.0), 1).is_err());
    }

    #[test]
    fn backoff_fixed_point_lone_sender() {
        // No collisions: beta = 2 / (W + 1).
        let beta = AttemptModel::Backoff { cw_min: 32, stages: 5 }.attempt_probability(1).unwrap();
        assert_relative_eq!(beta, 2.0 / 33.0);
    }

    #[test]
    fn backoff_fixed_point_solves_relation() {
        let model = AttemptModel::Backoff { cw_min: 32, stages: 5 };
        for m in [2, 3, 5, 10, 30] {
            let beta = model.attempt_probability(m).unwrap();
            let p = 1.0 - (1.0 - beta).powi(m as i32 - 1);
            // Closed form with the (1 - 2p) factor kept explicit.
            let rhs = 2.0 * (1.0 - 2.0 * p) / ((1.0 - 2.0 * p) * 33.0 + p * 32.0 * (1.0 - (2.0 * p).powi(5)));
            assert_relative_eq!(beta, rhs, epsilon = 1e-12);
        }
        let b2 = model.attempt_probability(2).unwrap();
        let b10 = model.attempt_probability(10).unwrap();
        assert!(b10 < b2);
    }

    #[test]
    fn collision_duration_default() {
        // Basic-access TCP ACK at 1 Mb/s outlasts the RTS.
        let p = PhyMacParams::default();
        assert_relative_eq!(collision_duration(&p), 192.0 + 8.0 * 74.0 + 50.0);
    }

    #[test]
    fn validate_rejects() {
        let base = PhyMacParams::default();
        let bad = [
            PhyMacParams { slot_time_us: 0.0, ..base.clone() },
            PhyMacParams { control_rate_mbps: 5.5, ..base.clone() },
            PhyMacParams { tcp_ack_payload_bytes: 1500.0, ..base.clone() },
            PhyMacParams { tcp_ack_payload_bytes: 0.0, ..base.clone() },
            PhyMacParams { data_rates_mbps: vec![], ..base.clone() },
            PhyMacParams { attempt: AttemptModel::Fixed { beta: 1.2 }, ..base.clone() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slot_probabilities_sum_to_one(beta in 1e-6f64..0.999_999, m in 1usize..64) {
                let s = slot_outcome(beta, m).unwrap();
                prop_assert!((s.idle + s.success + s.collision - 1.0).abs() < 1e-15);
                prop_assert!(s.collision > -1e-15);
            }

            #[test]
            fn tx_duration_slope(rate in 0.5f64..54.0, a in 0.0f64..3000.0, b in 0.0f64..3000.0) {
                let p = PhyMacParams::default();
                let da = tx_duration(&p, rate, a).unwrap();
                let db = tx_duration(&p, rate, b).unwrap();
                prop_assert!(((da - db) - 8.0 * (a - b) / rate).abs() < 1e-9);
            }
        }
    }
}
