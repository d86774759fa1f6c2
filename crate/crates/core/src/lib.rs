//! Simulation and analysis toolkit for an atomic-ensemble quantum repeater
//! that connects links by fluorescent detection of stored spin waves.
//!
//! The crate is split along the lines of the computation:
//!
//! - [`model`]: parameter records, validation and the key-value config format.
//! - [`physics`]: closed-form expressions (scattering rates, dark counts,
//!   interrupted-retrieval window, link efficiency, mismatch, swap success).
//! - [`statesim`]: exact truncated-occupation state vectors for a few nodes,
//!   used to check link generation, the swap rotation and the fluorescent
//!   projection, plus an exact rational brute-force oracle.
//! - [`rates`]: analytic distribution-rate recursion and fidelity budget.
//! - [`montecarlo`]: waiting-time simulation of the doubling chain and an
//!   exact Markov-chain oracle for the two-link case.
//! - [`optimizer`]: exhaustive nesting-level search with bisection on the
//!   excitation probability, and distance sweeps.

// `!(x > 0.0)` rejects NaN as well; that is the intent everywhere.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod physics;
pub mod rates;
pub mod statesim;

pub use model::{
    load_config, validate, ChainConfig, Config, ConfigError, ErrorBudget, LinkParams, LossModel, PhysicalParams,
    RateResult, RateSettings, Scheme, ValidationReport,
};
