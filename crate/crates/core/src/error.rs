//! Error types shared by the channel, placement and power modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A user coincides with an antenna (or the geometry otherwise collapses).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// SIC decoding is only defined for decoder ranks at or above the
    /// message rank.
    #[error("SIC rank order violated: decoder rank {decoder} < message rank {message}")]
    RankOrder { decoder: usize, message: usize },

    /// A finite-difference step vanished in floating point.
    #[error("numerical step underflow: step {step:e} is lost at coordinate {at:e}")]
    NumericalStep { step: f64, at: f64 },

    /// The feasible interval cannot host the requested antennas at the
    /// required guard spacing.
    #[error("infeasible placement: {0}")]
    Infeasible(String),

    #[error("brute-force budget exceeded: {combinations:.3e} candidate tuples > budget {budget:.3e}")]
    BudgetExceeded { combinations: f64, budget: f64 },

    /// Relative optimality gaps are undefined for a non-positive reference.
    #[error("degenerate objective: reference sum rate {0} is not positive")]
    DegenerateObjective(f64),

    /// A user with exactly zero effective gain cannot be served.
    #[error("degenerate channel: user rank {0} has zero effective gain")]
    DegenerateChannel(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
