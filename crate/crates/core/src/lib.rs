//! Association of wireless stations to access points for TCP file
//! downloads.
//!
//! The crate evaluates the aggregate TCP throughput of a multirate 802.11
//! AP ([`throughput`]), the mean download delay of a population sharing
//! that AP ([`delay`]), and the association policies built on them
//! ([`policies`]). A flow-level simulator ([`scenario`]) compares policies
//! across several APs, and a slot-level simulator ([`oracle`]) checks the
//! throughput model.
//!
//! ```
//! use wlan_assoc::{aggregate_throughput, AssociationState, PhyMacParams};
//!
//! let assoc: AssociationState = "2@11,3@5.5,2@2,3@1".parse()?;
//! let r = aggregate_throughput(&assoc, &PhyMacParams::default(), 12)?;
//! assert!(r.phi_mbps > 1.0 && r.phi_mbps < 11.0);
//! # Ok::<(), wlan_assoc::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airtime;
pub mod assoc;
pub mod config;
pub mod delay;
pub mod error;
pub mod oracle;
pub mod policies;
pub mod radio;
pub mod report;
pub mod scenario;
pub mod stats;
pub mod throughput;
pub mod units;
pub mod validation;

pub use airtime::{AttemptModel, PhyMacParams};
pub use assoc::{AssociationState, RateClass};
pub use config::ExperimentConfig;
pub use delay::{delay_estimate, eda_figure_of_merit, DelayEstimate, FileClass, FileClassMix};
pub use error::{Error, Result};
pub use oracle::{simulate_embedded, OracleEstimate};
pub use policies::{jain_index, select_ap, ApReport, LoadBalanceParams, PolicyKind};
pub use scenario::{run, RunMetrics, ScenarioConfig};
pub use throughput::{aggregate_throughput, ProductFormEngine, ThroughputEngine, ThroughputResult};
