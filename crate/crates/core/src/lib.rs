//! Simulation and statistical verification of the non-cascading 2-GREM and
//! its hierarchical random hopping dynamics (HRHD).
//!
//! * [`env`]: deterministic lazy energy landscape, extremes and bins.
//! * [`pointproc`]: Poisson point processes and goodness-of-fit tests.
//! * [`dynamics`]: event-driven HRHD simulation and an exact generator oracle.
//! * [`kprocess`]: truncated K-processes.
//! * [`hitting`]: hypercube hitting-time generating functions.
//! * [`experiment`]: configuration, seeding and batch runs.

pub mod error;
pub mod experiment;

pub mod dynamics;
pub mod env;
pub mod hitting;
pub mod kprocess;
pub mod pointproc;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};
