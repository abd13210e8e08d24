//! Deterministic distance to rate and RSSI mapping.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRing {
    /// Outer radius of the ring, inclusive.
    pub radius_m: f64,
    pub rate_mbps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioParams {
    pub path_loss_at_1m_db: f64,
    pub path_loss_exponent: f64,
    /// Innermost ring first.
    pub rings: Vec<RateRing>,
}

impl Default for RadioParams {
    fn default() -> Self {
        crate::config::defaults().radio.clone()
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if self.rings.is_empty() {
            return Err(config("at least one rate ring is required"));
        }
        if !(self.path_loss_exponent > 0.0) || !self.path_loss_at_1m_db.is_finite() {
            return Err(config("path loss parameters must be finite with a positive exponent"));
        }
        for r in &self.rings {
            if !(r.radius_m > 0.0) || !(r.rate_mbps > 0.0) {
                return Err(config("ring radii and rates must be positive"));
            }
        }
        for w in self.rings.windows(2) {
            if !(w[1].radius_m > w[0].radius_m) || !(w[1].rate_mbps < w[0].rate_mbps) {
                return Err(config("rings must grow in radius and fall in rate"));
            }
        }
        Ok(())
    }

    /// Largest distance at which an AP is audible.
    pub fn range_m(&self) -> f64 {
        self.rings.last().map_or(0.0, |r| r.radius_m)
    }

    /// Rate of the innermost ring containing `distance_m`, or `None` when
    /// out of range.
    pub fn rate_at(&self, distance_m: f64) -> Option<f64> {
        self.rings.iter().find(|r| distance_m <= r.radius_m).map(|r| r.rate_mbps)
    }

    /// Received signal strength proxy in dBm: `-(PL0 + 10 n log10 d)`,
    /// with distances under 1 m treated as 1 m.
    pub fn rssi_dbm(&self, distance_m: f64) -> f64 {
        -(self.path_loss_at_1m_db + 10.0 * self.path_loss_exponent * distance_m.max(1.0).log10())
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rings.iter().map(|r| r.rate_mbps).collect()
    }
}
