//! Numerical laboratory for two robust investment problems under drift
//! ambiguity: a consumption–investment problem with constant volatility and
//! an investment problem under square-root stochastic volatility.
//!
//! The crate provides, for both models,
//!
//! - validated parameter sets and the derived Riccati-type constants
//!   ([`params`]),
//! - the closed-form value functions, optimal strategies and worst-case
//!   drift distortions, together with machine-precision residual checks of
//!   the Hamilton–Jacobi–Bellman–Isaacs (HJBI) system they satisfy
//!   ([`closedform`]),
//! - deterministic-seed path simulation of the controlled state processes
//!   ([`sde`]),
//! - Monte Carlo estimation of the recursive payoffs whose running reward
//!   couples back to the value function, plus saddle-point perturbation
//!   probes ([`payoff`]),
//! - a slab-wise contraction fixed-point solver for the reduced HJBI
//!   equations with empirical contraction-factor measurement ([`hjbi`]),
//! - simulation-based verification of the moment estimates for the
//!   stochastic-volatility state processes ([`moments`]),
//! - and the aggregated verification suite the `robctl` binary exposes as
//!   `robctl report` ([`report`]).
//!
//! Everything stochastic is driven by per-path counter-based RNG substreams
//! keyed by `(seed, path_index)`, so results are bit-reproducible regardless
//! of thread count.

pub mod closedform;
pub mod hjbi;
pub mod moments;
pub mod oracle;
pub mod params;
pub mod payoff;
pub mod report;
pub mod rng;
pub mod sde;
pub mod surface;

pub mod guide;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a structural requirement (positivity, γ ≠ 1, …).
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: String,
    },
    /// An evaluation point lies outside the admissible domain.
    #[error("point out of domain: {0}")]
    OutOfDomain(String),
    /// A numeric procedure failed (non-convergence, singular solve, overflow).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A non-finite value surfaced where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Configuration parsing / IO problems.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
