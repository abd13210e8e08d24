//! Small statistical helpers shared by the simulators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Quantile of Student's t distribution with `dof` degrees of freedom.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom").inverse_cdf(p)
}

/// Sample mean with an optional two-sided confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub half_width: Option<f64>,
}

impl Interval {
    /// Student-t interval at the given confidence level, e.g. `0.95`.
    pub fn student(samples: &[f64], level: f64) -> Self {
        let n = samples.len();
        let mean = if n == 0 { f64::NAN } else { samples.iter().sum::<f64>() / n as f64 };
        if n < 2 {
            return Interval { mean, half_width: None };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let t = student_t_quantile(0.5 + level / 2.0, n as f64 - 1.0);
        Interval { mean, half_width: Some(t * (var / n as f64).sqrt()) }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width.unwrap_or(0.0)
    }

    /// True when the two intervals share no point.
    pub fn disjoint(&self, other: &Interval) -> bool {
        self.upper() < other.lower() || other.upper() < self.lower()
    }
}
