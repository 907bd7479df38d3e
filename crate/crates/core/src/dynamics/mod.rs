//! Hierarchical random hopping dynamics: rates, time scales, event-driven
//! simulation with occupation, visit and renewal accounting, and an exact
//! generator for small systems.

mod engine;
mod generator;
mod rates;
mod renewal;
mod scales;
mod tracked;
mod visits;

pub use engine::{
    simulate, write_visits_csv, Engine, RankOccupation, RenewalTrace, SimConfig, TrajectoryReport,
    Visit, DEFAULT_BUDGET,
};
pub use generator::{exact_generator, ExactGenerator, MAX_GENERATOR_STATES};
pub use rates::{
    level1_prob, log_mean_holding, log_mu, log_mu_excess, rates, step, DynState, Rates,
};
pub use renewal::{renewal_experiment, RenewalReport, RenewalTerm};
pub use scales::{theta_of, timescales, ScaleSelector, TimeScales};
pub use tracked::{TrackedClass, TrackedSet};
pub use visits::{log_mean_visit, visit_experiment, VisitReport, MIN_VISITS};
