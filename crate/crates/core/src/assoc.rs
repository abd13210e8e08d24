//! Association state of one AP: how many stations are associated at each
//! PHY rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Stations associated at one PHY rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateClass {
    pub rate_mbps: f64,
    pub count: u32,
}

/// Per-rate station counts `(M_1..M_k)` at rates `(r_1..r_k)`.
///
/// Rates are distinct and positive. Classes keep the order they were given
/// in; zero counts are allowed and ignored by the models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RateClass>", into = "Vec<RateClass>")]
pub struct AssociationState {
    classes: Vec<RateClass>,
}

impl AssociationState {
    pub fn new(classes: Vec<RateClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(domain("association state needs at least one rate class"));
        }
        for (i, c) in classes.iter().enumerate() {
            if !(c.rate_mbps > 0.0 && c.rate_mbps.is_finite()) {
                return Err(domain(format!("rate {} is not positive", c.rate_mbps)));
            }
            if classes[..i].iter().any(|o| o.rate_mbps == c.rate_mbps) {
                return Err(domain(format!("rate {} appears twice", c.rate_mbps)));
            }
        }
        Ok(AssociationState { classes })
    }

    /// All counts zero at the given rates.
    pub fn empty(rates: &[f64]) -> Result<Self> {
        Self::new(rates.iter().map(|&rate_mbps| RateClass { rate_mbps, count: 0 }).collect())
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(count, rate_mbps)| RateClass { rate_mbps, count }).collect())
    }

    pub fn classes(&self) -> &[RateClass] {
        &self.classes
    }

    /// Classes with at least one station.
    pub fn occupied(&self) -> impl Iterator<Item = &RateClass> {
        self.classes.iter().filter(|c| c.count > 0)
    }

    pub fn total(&self) -> u32 {
        self.classes.iter().map(|c| c.count).sum()
    }

    pub fn count_at(&self, rate_mbps: f64) -> u32 {
        self.classes.iter().find(|c| c.rate_mbps == rate_mbps).map_or(0, |c| c.count)
    }

    /// Adds one station at `rate_mbps`, appending a class if the rate is new.
    pub fn with_added(&self, rate_mbps: f64) -> Result<Self> {
        let mut next = self.clone();
        next.add(rate_mbps)?;
        Ok(next)
    }

    pub fn add(&mut self, rate_mbps: f64) -> Result<()> {
        if !(rate_mbps > 0.0 && rate_mbps.is_finite()) {
            return Err(domain(format!("rate {rate_mbps} is not positive")));
        }
        match self.classes.iter_mut().find(|c| c.rate_mbps == rate_mbps) {
            Some(c) => c.count += 1,
            None => self.classes.push(RateClass { rate_mbps, count: 1 }),
        }
        Ok(())
    }

    pub fn remove(&mut self, rate_mbps: f64) -> Result<()> {
        match self.classes.iter_mut().find(|c| c.rate_mbps == rate_mbps && c.count > 0) {
            Some(c) => {
                c.count -= 1;
                Ok(())
            }
            None => Err(domain(format!("no station associated at {rate_mbps} Mb/s"))),
        }
    }

    /// Order-independent key of the occupied classes, fastest rate first.
    pub fn canonical_key(&self) -> Vec<(u64, u32)> {
        let mut key: Vec<(u64, u32)> = self.occupied().map(|c| (c.rate_mbps.to_bits(), c.count)).collect();
        key.sort_by(|a, b| f64::from_bits(b.0).total_cmp(&f64::from_bits(a.0)));
        key
    }
}

impl fmt::Display for AssociationState {
    /// `count@rate` pairs joined by commas, e.g. `2@11,3@5.5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.classes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}@{}", c.count, c.rate_mbps)?;
        }
        Ok(())
    }
}

impl FromStr for AssociationState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for item in s.split(',').map(str::trim) {
            let (count, rate) = item
                .split_once('@')
                .ok_or_else(|| Error::Parse(format!("expected count@rate, got {item:?}")))?;
            let count: u32 = count
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad station count {count:?} in {item:?}")))?;
            let rate_mbps: f64 = rate
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad rate {rate:?} in {item:?}")))?;
            classes.push(RateClass { rate_mbps, count });
        }
        Self::new(classes)
    }
}

impl TryFrom<Vec<RateClass>> for AssociationState {
    type Error = Error;
    fn try_from(classes: Vec<RateClass>) -> Result<Self> {
        Self::new(classes)
    }
}

impl From<AssociationState> for Vec<RateClass> {
    fn from(a: AssociationState) -> Self {
        a.classes
    }
}
