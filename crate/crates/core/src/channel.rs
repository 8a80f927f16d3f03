//! Pinching-antenna channel model, SIC ordering, SINRs and rates.
//!
//! Each antenna radiates a copy of the feed signal delayed by the guided
//! path from the feed point; the copy then propagates to the user in free
//! space. The effective channel of user k is
//!
//! ```text
//! g_k = (1/sqrt(M)) * sum_m sqrt(eta) * exp(-j*2*pi*(r_m/lambda - l_m/lambda_g)) / r_m
//! ```
//!
//! with `r_m` the user-antenna distance and `l_m` the guided path length
//! from the feed to antenna m. Channels here are dimensionless amplitudes:
//! the transmit power lives entirely in the allocation vector `q` and the
//! noise enters the SINRs as sigma^2 directly.

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{AntennaPlacement, Point3, UserLayout};
use crate::power::PowerAllocation;

/// Distances below this are treated as a user/antenna collision.
const MIN_DISTANCE_M: f64 = 1e-12;

/// Free-space propagation coefficient from an antenna to a user:
/// `sqrt(eta) * exp(-j*2*pi*r/lambda) / r` with `r` the Euclidean distance.
pub fn freespace_coefficient(
    user: Point3,
    antenna: Point3,
    config: &SystemConfig,
) -> Result<Complex64> {
    let r = user.distance(&antenna);
    if !(r > MIN_DISTANCE_M) {
        return Err(Error::DegenerateGeometry(format!(
            "user ({}, {}, {}) coincides with antenna ({}, {}, {})",
            user.x, user.y, user.z, antenna.x, antenna.y, antenna.z
        )));
    }
    let phase = -2.0 * std::f64::consts::PI * r / config.lambda();
    Ok(Complex64::from_polar(config.eta().sqrt() / r, phase))
}

/// Guided-path phase factor for an antenna at `antenna_x` fed from
/// `feed_x`: `exp(+j*2*pi*|feed_x - antenna_x|/lambda_g)`.
///
/// The positive sign is the conjugate-phase convention that makes the
/// combined exponent of [`effective_channel`] equal
/// `-j*2*pi*(r/lambda - l/lambda_g)`.
pub fn waveguide_phase(feed_x: f64, antenna_x: f64, config: &SystemConfig) -> Complex64 {
    let guided_len = (feed_x - antenna_x).abs();
    let phase = 2.0 * std::f64::consts::PI * guided_len / config.lambda_guide();
    Complex64::from_polar(1.0, phase)
}

/// Effective channel of one user over all antennas of a placement, with the
/// `1/sqrt(M)` per-antenna power-splitting factor.
pub fn effective_channel(
    user: Point3,
    placement: &AntennaPlacement,
    config: &SystemConfig,
) -> Result<Complex64> {
    let m = placement.antennas();
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..m {
        let fs = freespace_coefficient(user, placement.position(i), config)?;
        let wg = waveguide_phase(config.feed_x_m, placement.xs()[i], config);
        sum += fs * wg;
    }
    Ok(sum / (m as f64).sqrt())
}

/// Per-user effective channels plus the SIC decoding order.
///
/// `sic_order[r]` is the index of the user whose gain is the r-th weakest;
/// rank 0 is the weakest (far) user. Exact gain ties keep the lower user
/// index first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    gains: Vec<Complex64>,
    sic_order: Vec<usize>,
}

impl ChannelState {
    /// Assemble a state from raw per-user gains (indexed by user), sorting
    /// the SIC order by ascending |g|^2.
    pub fn from_gains(gains: Vec<Complex64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidConfig("channel state needs at least one user".into()));
        }
        if gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::InvalidConfig("channel gains must be finite".into()));
        }
        let mut order: Vec<usize> = (0..gains.len()).collect();
        // Stable sort: ties break toward the lower original user index.
        order.sort_by(|&a, &b| {
            gains[a]
                .norm_sqr()
                .partial_cmp(&gains[b].norm_sqr())
                .expect("finite gains compare")
        });
        Ok(ChannelState { gains, sic_order: order })
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    /// Gains indexed by original user index.
    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    /// SIC permutation: `sic_order()[rank]` = user index.
    pub fn sic_order(&self) -> &[usize] {
        &self.sic_order
    }

    /// Effective channel of the user at SIC rank `rank` (0 = weakest).
    pub fn gain_by_rank(&self, rank: usize) -> Complex64 {
        self.gains[self.sic_order[rank]]
    }

    /// |g|^2 of the user at SIC rank `rank`.
    pub fn gain_sq_by_rank(&self, rank: usize) -> f64 {
        self.gain_by_rank(rank).norm_sqr()
    }

    /// Gains listed in SIC-rank order (weakest first).
    pub fn gains_by_rank(&self) -> Vec<Complex64> {
        self.sic_order.iter().map(|&u| self.gains[u]).collect()
    }
}

/// Compute every user's effective channel and the SIC ordering.
pub fn channel_state(
    layout: &UserLayout,
    placement: &AntennaPlacement,
    config: &SystemConfig,
) -> Result<ChannelState> {
    let gains = layout
        .positions()
        .iter()
        .map(|&u| effective_channel(u, placement, config))
        .collect::<Result<Vec<_>>>()?;
    ChannelState::from_gains(gains)
}

/// SINR at the decoder of SIC rank `l` for the message of SIC rank `k`
/// (`l >= k`): `|g_l|^2 q_k / (|g_l|^2 * sum_{j>k} q_j + sigma^2)`.
///
/// `q` is indexed by SIC rank (entry 0 = weakest user).
pub fn decode_sinr(
    state: &ChannelState,
    q: &PowerAllocation,
    k: usize,
    l: usize,
    config: &SystemConfig,
) -> Result<f64> {
    if l < k {
        return Err(Error::RankOrder { decoder: l, message: k });
    }
    let kk = state.users();
    if k >= kk || l >= kk || q.len() != kk {
        return Err(Error::InvalidConfig(format!(
            "rank out of range: k={k}, l={l}, users={kk}, q-len={}",
            q.len()
        )));
    }
    let g_l = state.gain_sq_by_rank(l);
    let interference: f64 = (k + 1..kk).map(|j| q.q()[j]).sum::<f64>() * g_l;
    Ok(g_l * q.q()[k] / (interference + config.noise_power_w))
}

/// Achievable rate of the user at SIC rank `k`:
/// `min_{l in k..K} log2(1 + SINR_{l,k})` (bps/Hz).
pub fn user_rate(
    state: &ChannelState,
    q: &PowerAllocation,
    k: usize,
    config: &SystemConfig,
) -> Result<f64> {
    let mut min_sinr = f64::INFINITY;
    for l in k..state.users() {
        min_sinr = min_sinr.min(decode_sinr(state, q, k, l, config)?);
    }
    Ok((1.0 + min_sinr).log2())
}

/// NOMA sum rate over all users for a precomputed channel state.
pub fn sum_rate_from_state(
    state: &ChannelState,
    q: &PowerAllocation,
    config: &SystemConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..state.users() {
        total += user_rate(state, q, k, config)?;
    }
    Ok(total)
}

/// NOMA sum rate for a layout and placement.
pub fn sum_rate(
    layout: &UserLayout,
    placement: &AntennaPlacement,
    q: &PowerAllocation,
    config: &SystemConfig,
) -> Result<f64> {
    let state = channel_state(layout, placement, config)?;
    sum_rate_from_state(&state, q, config)
}

/// Central finite-difference estimate of `d^2 |g|^2 / d a_1^2` for a
/// two-antenna placement, with step `1e-4 * lambda`.
pub fn channel_power_curvature(
    user: Point3,
    placement: &AntennaPlacement,
    config: &SystemConfig,
) -> Result<f64> {
    if placement.antennas() != 2 {
        return Err(Error::InvalidConfig(format!(
            "curvature probe requires exactly 2 antennas, got {}",
            placement.antennas()
        )));
    }
    let a1 = placement.xs()[0];
    let step = 1e-4 * config.lambda();
    if a1 + step == a1 || a1 - step == a1 {
        return Err(Error::NumericalStep { step, at: a1 });
    }
    let gain_sq_at = |x: f64| -> Result<f64> {
        let p = AntennaPlacement::new(vec![x, placement.xs()[1]], placement.height_m())?;
        Ok(effective_channel(user, &p, config)?.norm_sqr())
    };
    let hi = gain_sq_at(a1 + step)?;
    let mid = gain_sq_at(a1)?;
    let lo = gain_sq_at(a1 - step)?;
    Ok((hi - 2.0 * mid + lo) / (step * step))
}
