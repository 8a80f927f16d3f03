//! Max-min fair power allocation and simplex projection.
//!
//! The max-min problem (maximize the minimum decode-chain SINR subject to
//! `sum q <= P`, `q >= 0`) is quasi-linear: for a fixed SINR target `t` the
//! constraint set is a linear feasibility problem, so the optimum is found
//! by bisection over `t`. Under the ascending-gain SIC ordering the
//! feasibility subproblem collapses to a closed-form backward recursion;
//! its minimal-power solution is computed exactly here and cross-checked in
//! the test suite against a generic fixed-point solver over the full
//! constraint set.

use crate::channel::ChannelState;
use crate::error::{Error, Result};

/// Relative slack admitted on the power budget, `sum q <= P * (1 + SLACK)`.
const BUDGET_SLACK_REL: f64 = 1e-9;

/// Per-user transmit powers in watts, indexed by SIC rank (entry 0 is the
/// weakest user's power).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    q: Vec<f64>,
    budget_w: f64,
}

impl PowerAllocation {
    /// Validate non-negativity and the budget (with `1e-9 * P` slack).
    pub fn new(q: Vec<f64>, budget_w: f64) -> Result<Self> {
        if !(budget_w > 0.0) || !budget_w.is_finite() {
            return Err(Error::InvalidConfig(format!("power budget must be positive, got {budget_w}")));
        }
        if q.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("powers must be finite and non-negative".into()));
        }
        let total: f64 = q.iter().sum();
        if total > budget_w * (1.0 + BUDGET_SLACK_REL) {
            return Err(Error::InvalidConfig(format!(
                "total power {total} exceeds budget {budget_w}"
            )));
        }
        Ok(PowerAllocation { q, budget_w })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn budget_w(&self) -> f64 {
        self.budget_w
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn total_w(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Outcome of the fixed-target feasibility subproblem.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(PowerAllocation),
    /// The minimal total power needed to hit the target exceeds the budget.
    Infeasible { required_w: f64 },
}

fn rank_gains_sq(state: &ChannelState) -> Result<Vec<f64>> {
    let gains: Vec<f64> = (0..state.users()).map(|r| state.gain_sq_by_rank(r)).collect();
    if let Some(rank) = gains.iter().position(|&g| g == 0.0) {
        return Err(Error::DegenerateChannel(rank));
    }
    Ok(gains)
}

/// Minimal-total-power allocation meeting `SINR_{l,k} >= t` for all decode
/// pairs `l >= k`, or `Infeasible` when that minimum exceeds `total_power_w`.
///
/// With gains sorted ascending the binding decoder for message k is l = k,
/// so the minimum is the backward recursion
/// `q_K = t*sigma^2/|g_K|^2`, `q_k = t*(sum_{j>k} q_j + sigma^2/|g_k|^2)`.
pub fn feasibility_min_power(
    state: &ChannelState,
    t: f64,
    total_power_w: f64,
    noise_power_w: f64,
) -> Result<Feasibility> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig(format!("SINR target must be non-negative, got {t}")));
    }
    let gains = rank_gains_sq(state)?;
    let k_users = gains.len();
    let mut q = vec![0.0; k_users];
    let mut suffix = 0.0;
    for k in (0..k_users).rev() {
        q[k] = t * (suffix + noise_power_w / gains[k]);
        suffix += q[k];
    }
    if suffix > total_power_w {
        Ok(Feasibility::Infeasible { required_w: suffix })
    } else {
        Ok(Feasibility::Feasible(PowerAllocation::new(q, total_power_w)?))
    }
}

/// Result of the bisection max-min solve.
#[derive(Debug, Clone)]
pub struct MaxMinResult {
    /// Optimal powers by SIC rank; the budget binds to within `1e-9 * P`.
    pub q_opt: PowerAllocation,
    /// Optimal common SINR level.
    pub t_opt: f64,
    /// Number of feasibility subproblems solved.
    pub iterations: usize,
    /// Achieved decode-chain SINR `min_l SINR_{l,k}` per SIC rank.
    pub achieved_sinrs: Vec<f64>,
}

/// Max-min power allocation by bisection over the common SINR target.
///
/// The bracket is `[0, t_max]` with `t_max = min_k |g_k|^2 * P / sigma^2`,
/// the weakest user's interference-free full-power SINR. Bisection runs to
/// the relative tolerance `zeta` on `t` and then keeps narrowing the
/// bracket until the residual power `P - sum q` drops below `1e-10 * P`,
/// so the returned allocation exhausts the budget.
pub fn maxmin_power(
    state: &ChannelState,
    total_power_w: f64,
    noise_power_w: f64,
    zeta: f64,
) -> Result<MaxMinResult> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidConfig(format!("zeta must be positive, got {zeta}")));
    }
    if !(total_power_w > 0.0) || !(noise_power_w > 0.0) {
        return Err(Error::InvalidConfig("P and sigma^2 must be positive".into()));
    }
    let gains = rank_gains_sq(state)?;
    let t_max = gains
        .iter()
        .map(|&g| g * total_power_w / noise_power_w)
        .fold(f64::INFINITY, f64::min);

    let mut iterations = 0usize;
    let solve = |t: f64, iterations: &mut usize| -> Result<Feasibility> {
        *iterations += 1;
        feasibility_min_power(state, t, total_power_w, noise_power_w)
    };

    // The upper bracket is feasible only in the single-user case, where it
    // is exactly optimal (q = P).
    if let Feasibility::Feasible(q) = solve(t_max, &mut iterations)? {
        let achieved = achieved_min_sinrs(state, &q, noise_power_w);
        return Ok(MaxMinResult { q_opt: q, t_opt: t_max, iterations, achieved_sinrs: achieved });
    }

    let mut lo = 0.0;
    let mut hi = t_max;
    let mut best: Option<PowerAllocation> = None;
    for _ in 0..300 {
        let within_tol = (hi - lo) <= zeta * (1.0 + lo);
        let budget_bound = match &best {
            Some(q) => total_power_w - q.total_w() <= 1e-10 * total_power_w,
            None => false,
        };
        if within_tol && budget_bound {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted in f64
        }
        match solve(mid, &mut iterations)? {
            Feasibility::Feasible(q) => {
                lo = mid;
                best = Some(q);
            }
            Feasibility::Infeasible { .. } => hi = mid,
        }
    }

    let q_opt = match best {
        Some(q) => q,
        // t = 0 is always feasible (q = 0); reachable only if zeta is so
        // coarse that no midpoint was feasible.
        None => match solve(lo, &mut iterations)? {
            Feasibility::Feasible(q) => q,
            Feasibility::Infeasible { .. } => unreachable!("t = 0 is feasible"),
        },
    };
    let achieved = achieved_min_sinrs(state, &q_opt, noise_power_w);
    Ok(MaxMinResult { q_opt, t_opt: lo, iterations, achieved_sinrs: achieved })
}

/// Decode-chain minimum SINR per rank, `min_{l >= k} SINR_{l,k}`.
fn achieved_min_sinrs(state: &ChannelState, q: &PowerAllocation, noise_power_w: f64) -> Vec<f64> {
    let k_users = state.users();
    (0..k_users)
        .map(|k| {
            let interference: f64 = (k + 1..k_users).map(|j| q.q()[j]).sum();
            (k..k_users)
                .map(|l| {
                    let g = state.gain_sq_by_rank(l);
                    g * q.q()[k] / (g * interference + noise_power_w)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Result of the Euclidean projection onto the power simplex.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub q_proj: PowerAllocation,
    /// Scalar threshold subtracted from every active component.
    pub theta: f64,
    /// Size of the active set (number of strictly positive components).
    pub rho: usize,
    /// Whether the input was already feasible and passed through unchanged.
    pub passthrough: bool,
}

impl ProjectionResult {
    /// L1 distance between the projected vector and the raw input.
    pub fn deviation_l1(&self, q_hat: &[f64]) -> f64 {
        self.q_proj
            .q()
            .iter()
            .zip(q_hat)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Euclidean projection onto `{q >= 0, sum q = P}` by sort-and-threshold.
///
/// Inputs that already satisfy `q >= 0` and `sum q <= P` pass through
/// unchanged (`theta = 0`, `rho = K`); anything else is projected onto the
/// equality simplex: sort descending into u, take the largest prefix with
/// `u_j + (P - sum_{i<=j} u_i)/j > 0` as the active set, shift by
/// `theta = (sum_{i<=rho} u_i - P)/rho` and clip at zero.
pub fn simplex_project(q_hat: &[f64], total_power_w: f64) -> Result<ProjectionResult> {
    if q_hat.is_empty() {
        return Err(Error::InvalidConfig("projection input must be non-empty".into()));
    }
    if !(total_power_w > 0.0) {
        return Err(Error::InvalidConfig("projection budget must be positive".into()));
    }
    if q_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("projection input must be finite".into()));
    }
    let total: f64 = q_hat.iter().sum();
    let feasible = q_hat.iter().all(|&v| v >= 0.0)
        && total <= total_power_w * (1.0 + BUDGET_SLACK_REL);
    if feasible {
        return Ok(ProjectionResult {
            q_proj: PowerAllocation::new(q_hat.to_vec(), total_power_w)?,
            theta: 0.0,
            rho: q_hat.len(),
            passthrough: true,
        });
    }

    let mut u = q_hat.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite values compare"));
    let mut rho = 1;
    let mut prefix = u[0];
    let mut active_prefix = u[0];
    for (j, &uj) in u.iter().enumerate().skip(1) {
        prefix += uj;
        if uj + (total_power_w - prefix) / (j + 1) as f64 > 0.0 {
            rho = j + 1;
            active_prefix = prefix;
        }
    }
    let theta = (active_prefix - total_power_w) / rho as f64;
    let q: Vec<f64> = q_hat.iter().map(|&v| (v - theta).max(0.0)).collect();
    Ok(ProjectionResult {
        q_proj: PowerAllocation::new(q, total_power_w)?,
        theta,
        rho,
        passthrough: false,
    })
}

/// Fixed geometric power coefficients for the FPA-NOMA baseline:
/// the user at SIC rank k (0 = weakest) receives
/// `P * 2^(K-1-k) / (2^K - 1)`, so weaker users get larger shares.
pub fn fixed_power_coeffs(k_users: usize, total_power_w: f64) -> Result<PowerAllocation> {
    if k_users == 0 {
        return Err(Error::InvalidConfig("need at least one user".into()));
    }
    let denom = 2f64.powi(k_users as i32) - 1.0;
    let q: Vec<f64> = (0..k_users)
        .map(|r| total_power_w * 2f64.powi((k_users - 1 - r) as i32) / denom)
        .collect();
    PowerAllocation::new(q, total_power_w)
}

/// Fixed-power allocation from arbitrary per-rank weights, normalized to
/// exhaust the budget.
pub fn fixed_power_from_weights(weights: &[f64], total_power_w: f64) -> Result<PowerAllocation> {
    if weights.is_empty() {
        return Err(Error::InvalidConfig("need at least one weight".into()));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidConfig("weights must not all be zero".into()));
    }
    let q = weights.iter().map(|w| total_power_w * w / total).collect();
    PowerAllocation::new(q, total_power_w)
}
