//! AP layouts and arrival regions.
//!
//! * `two-ap`: APs 480 m apart. The arrival region is the union of the two
//!   coverage disks; the shaded region is their overlap.
//! * `four-ap`: a 2x2 grid with 400 m spacing inside an 800 m square; the
//!   shaded region is a 150 m disk at the centre, which hears all four APs.
//! * `nine-ap`: a 3x3 grid with 300 m spacing inside a 900 m square; the
//!   shaded region is a 150 m disk around the centre AP, which also hears
//!   the four edge neighbours.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_AP_SEPARATION_M: f64 = 480.0;
pub const FOUR_AP_SPACING_M: f64 = 400.0;
pub const NINE_AP_SPACING_M: f64 = 300.0;
pub const SHADED_RADIUS_M: f64 = 150.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    TwoAp,
    FourAp,
    NineAp,
}

impl Geometry {
    pub const ALL: [Geometry; 3] = [Geometry::TwoAp, Geometry::FourAp, Geometry::NineAp];

    pub fn name(self) -> &'static str {
        match self {
            Geometry::TwoAp => "two-ap",
            Geometry::FourAp => "four-ap",
            Geometry::NineAp => "nine-ap",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Geometry::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown geometry {s:?}; valid: two-ap, four-ap, nine-ap")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Region {
    Disk { centre: Point, radius: f64 },
    /// Points within `radius` of both centres.
    Lens { a: Point, b: Point, radius: f64 },
    /// Points within `radius` of either centre.
    Union { a: Point, b: Point, radius: f64 },
    Square { half: f64 },
}

impl Region {
    fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Disk { centre, radius } => p.distance(centre) <= radius,
            Region::Lens { a, b, radius } => p.distance(a) <= radius && p.distance(b) <= radius,
            Region::Union { a, b, radius } => p.distance(a) <= radius || p.distance(b) <= radius,
            Region::Square { half } => p.x.abs() <= half && p.y.abs() <= half,
        }
    }

    /// Axis-aligned box `(x0, x1, y0, y1)` containing the region.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Region::Disk { centre, radius } => {
                (centre.x - radius, centre.x + radius, centre.y - radius, centre.y + radius)
            }
            Region::Lens { a, b, radius } | Region::Union { a, b, radius } => (
                a.x.min(b.x) - radius,
                a.x.max(b.x) + radius,
                a.y.min(b.y) - radius,
                a.y.max(b.y) + radius,
            ),
            Region::Square { half } => (-half, half, -half, half),
        }
    }

    fn sample_in_box<R: Rng>(&self, rng: &mut R) -> Point {
        let (x0, x1, y0, y1) = self.bounds();
        Point { x: rng.gen_range(x0..=x1), y: rng.gen_range(y0..=y1) }
    }
}

/// AP coordinates plus the arrival and shaded regions.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub geometry: Geometry,
    pub aps: Vec<Point>,
    area: Region,
    shaded: Region,
}

impl Layout {
    pub fn new(geometry: Geometry) -> Self {
        let p = |x, y| Point { x, y };
        match geometry {
            Geometry::TwoAp => {
                let (a, b) = (p(0.0, 0.0), p(TWO_AP_SEPARATION_M, 0.0));
                Layout {
                    geometry,
                    aps: vec![a, b],
                    area: Region::Union { a, b, radius: TWO_AP_SEPARATION_M },
                    shaded: Region::Lens { a, b, radius: TWO_AP_SEPARATION_M },
                }
            }
            Geometry::FourAp => {
                let h = FOUR_AP_SPACING_M / 2.0;
                Layout {
                    geometry,
                    aps: vec![p(-h, -h), p(h, -h), p(-h, h), p(h, h)],
                    area: Region::Square { half: FOUR_AP_SPACING_M },
                    shaded: Region::Disk { centre: p(0.0, 0.0), radius: SHADED_RADIUS_M },
                }
            }
            Geometry::NineAp => {
                let s = NINE_AP_SPACING_M;
                let mut aps = Vec::with_capacity(9);
                for y in [-s, 0.0, s] {
                    for x in [-s, 0.0, s] {
                        aps.push(p(x, y));
                    }
                }
                Layout {
                    geometry,
                    aps,
                    area: Region::Square { half: 1.5 * s },
                    shaded: Region::Disk { centre: p(0.0, 0.0), radius: SHADED_RADIUS_M },
                }
            }
        }
    }

    pub fn in_shaded(&self, p: Point) -> bool {
        self.shaded.contains(p)
    }

    pub fn in_area(&self, p: Point) -> bool {
        self.area.contains(p)
    }

    /// Uniform point in the shaded region.
    pub fn sample_shaded<R: Rng>(&self, rng: &mut R) -> Point {
        loop {
            let q = self.shaded.sample_in_box(rng);
            if self.shaded.contains(q) {
                return q;
            }
        }
    }

    /// Uniform point in the arrival area outside the shaded region.
    pub fn sample_remainder<R: Rng>(&self, rng: &mut R) -> Point {
        loop {
            let q = self.area.sample_in_box(rng);
            if self.area.contains(q) && !self.shaded.contains(q) {
                return q;
            }
        }
    }
}
