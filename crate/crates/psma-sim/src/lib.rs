//! System-level simulator and resource-allocation solver for PSMA downlink
//! heterogeneous networks, with SCMA and PD-NOMA baselines.
//!
//! The crate is organized along the pipeline:
//!
//! * [`scenario`] — declarative configuration, topologies, channel draws and
//!   codebook structures (all randomness lives here);
//! * [`phy`] — closed-form SINRs, rates, SIC feasibility and receiver
//!   complexity for the three schemes;
//! * [`power`] — the continuous power subproblem: surrogate lower bound,
//!   linearized decode-order constraints, dual closed form and subgradient
//!   ascent, plus a grid oracle;
//! * [`assign`] — the binary codebook-assignment subproblem: feasibility
//!   checks, a deterministic poll search and an exhaustive oracle;
//! * [`experiment`] — the alternation loop tying both solvers together,
//!   Monte Carlo sweeps, scheme comparisons and CSV emission.

pub mod assign;
pub mod error;
pub mod experiment;
pub mod phy;
pub mod power;
pub mod scenario;

pub use error::{Error, Result};
