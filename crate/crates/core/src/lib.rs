//! Physical-layer model and optimizers for a NOMA downlink served by
//! pinching antennas on a single dielectric waveguide.
//!
//! The crate covers three layers:
//!
//! * [`channel`] — the deterministic LoS channel (guided phase shift along
//!   the waveguide times free-space propagation), SIC-ordered SINRs,
//!   per-user rates and the sum rate;
//! * [`placement`] — two-stage antenna positioning (user-centric
//!   initialization plus projected finite-difference gradient ascent), a
//!   brute-force grid benchmark and relative-gap metrics;
//! * [`power`] — max-min fair power allocation by bisection over the
//!   minimum SINR, Euclidean projection onto the power simplex, and fixed
//!   geometric power coefficients for the NOMA baseline.
//!
//! All operations are pure functions of their inputs; every value is
//! immutable after construction and can be shared freely across threads.

pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod placement;
pub mod power;

pub use channel::{
    channel_power_curvature, channel_state, decode_sinr, effective_channel,
    freespace_coefficient, sum_rate, sum_rate_from_state, user_rate, waveguide_phase,
    ChannelState,
};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use geometry::{AntennaPlacement, Point3, UserLayout};
pub use placement::{
    brute_force_placement, fd_gradient, fd_gradient_with, init_placement, mrg_xrg,
    project_feasible, refine_placement, relative_gap, BruteForceResult, MaxMinSolver,
    PlacementParams, PlacementSolution, PowerSolver,
};
pub use power::{
    feasibility_min_power, fixed_power_coeffs, fixed_power_from_weights, maxmin_power,
    simplex_project, Feasibility, MaxMinResult, PowerAllocation, ProjectionResult,
};
