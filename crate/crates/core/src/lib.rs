//! Multi-agent sparse linear bandits with cooperative thresholded Lasso.
//!
//! Agents play greedily on a ridge estimate restricted to an estimated support
//! set. On a geometric schedule of rounds each agent fits a Lasso on its full
//! history, thresholds the coefficients, and the resulting support sets are
//! merged either by a central server (`Mode::Centralized`) or by pulling one
//! random neighbour's set on a peer graph (`Mode::Decentralized`). Only support
//! sets ever cross agent boundaries.
//!
//! Module map:
//! - [`solver`]: Lasso coordinate descent and ridge sufficient statistics.
//! - [`env`]: synthetic sparse environment and precomputed feature files.
//! - [`agent`]: the per-agent state machine.
//! - [`comm`]: sync schedule, topologies, aggregation, and cost accounting.
//! - [`experiment`]: replica runner, baselines, summaries, CSV output, config.

pub mod agent;
pub mod comm;
pub mod env;
pub mod error;
pub mod experiment;
pub mod solver;
pub mod support;

pub use error::{Error, Result};
pub use support::SupportSet;
