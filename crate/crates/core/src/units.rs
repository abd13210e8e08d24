//! Unit conversions.
//!
//! Every conversion between bytes, bits, Mb/s, microseconds and seconds goes
//! through this module. The newtypes only exist at the conversion points; the
//! rest of the crate carries plain `f64` fields whose names end in the unit.
//!
//! One Mb/s is one bit per microsecond, which is why airtime arithmetic can
//! stay in microseconds without scaling.

use std::ops::Div;

pub const BITS_PER_BYTE: f64 = 8.0;
pub const MICROS_PER_SECOND: f64 = 1e6;
pub const BITS_PER_MEGABIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Bits(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Mbps(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BitsPerSecond(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Micros(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Seconds(pub f64);

impl Bits {
    pub fn from_bytes(bytes: f64) -> Self {
        debug_assert!(bytes >= 0.0, "negative byte count {bytes}");
        Bits(bytes * BITS_PER_BYTE)
    }
}

impl Mbps {
    pub fn to_bits_per_second(self) -> BitsPerSecond {
        BitsPerSecond(self.0 * BITS_PER_MEGABIT)
    }
}

impl BitsPerSecond {
    pub fn to_mbps(self) -> Mbps {
        Mbps(self.0 / BITS_PER_MEGABIT)
    }
}

impl Micros {
    pub fn to_seconds(self) -> Seconds {
        Seconds(self.0 / MICROS_PER_SECOND)
    }
}

impl Seconds {
    pub fn to_micros(self) -> Micros {
        Micros(self.0 * MICROS_PER_SECOND)
    }
}

/// Airtime of `bits` sent at a PHY rate.
impl Div<Mbps> for Bits {
    type Output = Micros;
    fn div(self, rate: Mbps) -> Micros {
        debug_assert!(rate.0 > 0.0, "non-positive rate {}", rate.0);
        Micros(self.0 / rate.0)
    }
}

/// Rate of `bits` delivered over an interval.
impl Div<Micros> for Bits {
    type Output = Mbps;
    fn div(self, t: Micros) -> Mbps {
        debug_assert!(t.0 > 0.0, "non-positive interval {}", t.0);
        Mbps(self.0 / t.0)
    }
}

/// Service demand of `bits` at a server of the given speed.
impl Div<BitsPerSecond> for Bits {
    type Output = Seconds;
    fn div(self, rate: BitsPerSecond) -> Seconds {
        debug_assert!(rate.0 > 0.0, "non-positive rate {}", rate.0);
        Seconds(self.0 / rate.0)
    }
}
