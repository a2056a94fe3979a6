//! Cooperation versus storage in energy-harvesting microgrids.
//!
//! * [`grid`]: physical quantities, feasibility rules, battery dynamics, cost.
//! * [`analytics`]: battery Markov chains and closed-form steady-state costs.
//! * [`slot`]: the per-slot dispatch LP and its exact solver.
//! * [`control`]: drift-plus-penalty controller, two-MG sharing, baselines.
//! * [`scenario`]: geometry, prices, arrivals, experiment configuration.
//! * [`sim`]: the slot loop, replications, storage-requirement search.
//! * [`report`]: CSV output.
//! * [`experiments`]: the cost-vs-capacity and cooperation studies.

pub mod analytics;
pub mod control;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod report;
pub mod scenario;
pub mod selftest;
pub mod sim;
pub mod slot;

pub use error::{Error, Result};
