//! Two-stage pinching-antenna placement and the brute-force benchmark.
//!
//! Stage I spreads the antennas evenly over the user x-span and nudges each
//! toward its nearest user with weight `alpha`. Stage II refines the
//! positions on the sum rate evaluated under max-min optimal power. The
//! objective oscillates at the wavelength scale (phase ripples of period
//! ~lambda/2 riding on a meter-scale path-loss envelope), so a single
//! fixed-step gradient loop stalls on the nearest ripple peak. Stage II
//! therefore interleaves two monotone moves:
//!
//! * a cyclic per-antenna line scan over a coarse grid of the feasible
//!   interval, which relocates antennas across envelope basins, and
//! * projected finite-difference gradient ascent swept over a geometric
//!   schedule of movement scales, from a quarter of the interval down to
//!   half the guard spacing, with the step normalized to the scale and a
//!   backtracking line search (halve up to 20 times, accept only strict
//!   improvements, double the persistent step after a first-try success).
//!
//! Every accepted move strictly improves the sum rate, so the trace is
//! non-decreasing by construction and the whole refinement is
//! deterministic.

use crate::channel::{channel_state, sum_rate_from_state, ChannelState};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{AntennaPlacement, UserLayout};
use crate::power::{maxmin_power, PowerAllocation};

/// Tuning parameters for the two-stage placement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementParams {
    /// Initialization weight toward the nearest user. The robustness study
    /// sweeps (0, 1); 0 and 1 are accepted as degenerate endpoints.
    pub alpha: f64,
    /// Guard spacing between adjacent antennas (m).
    pub guard_m: f64,
    /// Initial ascent step (m per unit gradient).
    pub step_m: f64,
    /// Forward finite-difference perturbation (m).
    pub fd_delta_m: f64,
    /// Convergence tolerance on the accepted sum-rate improvement (bps/Hz).
    pub tol_bpshz: f64,
    /// Iteration cap for the refinement loop.
    pub max_iters: usize,
    /// Feasible interval `[a_min, a_max]` for antenna coordinates (m).
    pub bounds_m: (f64, f64),
}

impl PlacementParams {
    /// Defaults for a given scenario: `alpha = 0.5`, guard `lambda/2`, step
    /// 0.1 m, delta 1e-3 m, tolerance 1e-4 bps/Hz, 200 iterations, bounds
    /// `[-D1/2, D1/2]`.
    pub fn for_config(config: &SystemConfig) -> Self {
        PlacementParams {
            alpha: 0.5,
            guard_m: config.lambda() / 2.0,
            step_m: 0.1,
            fd_delta_m: 1e-3,
            tol_bpshz: 1e-4,
            max_iters: 200,
            bounds_m: (-config.region_d1_m / 2.0, config.region_d1_m / 2.0),
        }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.guard_m >= 0.0) {
            return Err(Error::InvalidConfig("guard_m must be non-negative".into()));
        }
        if !(self.fd_delta_m > 0.0) {
            return Err(Error::InvalidConfig("fd_delta_m must be positive".into()));
        }
        if !(self.tol_bpshz >= 0.0) {
            return Err(Error::InvalidConfig("tol_bpshz must be non-negative".into()));
        }
        if !(self.step_m > 0.0) {
            return Err(Error::InvalidConfig("step_m must be positive".into()));
        }
        if !(self.bounds_m.0.is_finite() && self.bounds_m.1.is_finite())
            || self.bounds_m.0 > self.bounds_m.1
        {
            return Err(Error::InvalidConfig("bounds_m must be a finite interval".into()));
        }
        Ok(self)
    }

    fn require_feasible(&self, m: usize) -> Result<()> {
        let caps = guard_caps(self.bounds_m.1, self.guard_m, m);
        if self.bounds_m.0 > caps[0] {
            return Err(Error::Infeasible(format!(
                "interval [{}, {}] cannot host {m} antennas at guard {}",
                self.bounds_m.0, self.bounds_m.1, self.guard_m
            )));
        }
        Ok(())
    }
}

/// Smallest f64 `x` with `x - prev >= guard` exactly. The rounded sum
/// `prev + guard` can fall an ulp short; nudge up until the subtraction
/// recovers the guard.
fn guarded_lower(prev: f64, guard: f64) -> f64 {
    let mut lower = prev + guard;
    while lower - prev < guard {
        lower = lower.next_up();
    }
    lower
}

/// Per-antenna upper caps, right to left: `caps[M-1] = a_max` and
/// `caps[i]` is the largest coordinate from which the remaining chain of
/// guard steps still fits under `a_max` in f64 arithmetic.
fn guard_caps(a_max: f64, guard: f64, m: usize) -> Vec<f64> {
    let mut caps = vec![a_max; m];
    for i in (0..m.saturating_sub(1)).rev() {
        let mut cap = caps[i + 1] - guard;
        while guarded_lower(cap, guard) > caps[i + 1] {
            cap = cap.next_down();
        }
        caps[i] = cap;
    }
    caps
}

/// Inner power solver used by every sum-rate evaluation during placement.
pub trait PowerSolver {
    fn solve(&self, state: &ChannelState, config: &SystemConfig) -> Result<PowerAllocation>;
}

/// Max-min fair allocation as the inner solver (the placement objective is
/// the sum rate under optimized power).
#[derive(Debug, Clone, Copy)]
pub struct MaxMinSolver {
    pub zeta: f64,
}

impl Default for MaxMinSolver {
    fn default() -> Self {
        MaxMinSolver { zeta: 1e-6 }
    }
}

impl PowerSolver for MaxMinSolver {
    fn solve(&self, state: &ChannelState, config: &SystemConfig) -> Result<PowerAllocation> {
        Ok(maxmin_power(state, config.total_power_w, config.noise_power_w, self.zeta)?.q_opt)
    }
}

/// Sum rate of a coordinate vector under the inner power solver.
fn objective(
    xs: &[f64],
    layout: &UserLayout,
    config: &SystemConfig,
    solver: &dyn PowerSolver,
) -> Result<f64> {
    let placement = AntennaPlacement::new(xs.to_vec(), config.waveguide_height_m)?;
    let state = channel_state(layout, &placement, config)?;
    let q = solver.solve(&state, config)?;
    sum_rate_from_state(&state, &q, config)
}

/// Forward clamping onto the feasible set: sort ascending, then
/// `a_1 <- clip(a_1, a_min, a_max - (M-1)*guard)` and
/// `a_m <- clip(a_m, a_{m-1} + guard, a_max - (M-m)*guard)`.
pub fn project_feasible(xs: &[f64], params: &PlacementParams) -> Result<Vec<f64>> {
    let m = xs.len();
    if m == 0 {
        return Err(Error::InvalidConfig("cannot project an empty placement".into()));
    }
    params.require_feasible(m)?;
    let (a_min, a_max) = params.bounds_m;
    let guard = params.guard_m;
    let caps = guard_caps(a_max, guard, m);
    let mut out = xs.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    out[0] = out[0].clamp(a_min, caps[0]);
    for i in 1..m {
        let lower = guarded_lower(out[i - 1], guard);
        out[i] = out[i].max(lower).min(caps[i]);
    }
    Ok(out)
}

/// Stage I: evenly spaced antennas over the user x-span, each nudged toward
/// its nearest user with weight `alpha`, then sorted and guard-projected.
///
/// Degenerate cases: a single antenna starts at the midpoint of the span; a
/// zero-width span (e.g. K = 1) fans the antennas out at guard spacing
/// centered on the common x-coordinate.
pub fn init_placement(
    layout: &UserLayout,
    m: usize,
    params: &PlacementParams,
    height_m: f64,
) -> Result<AntennaPlacement> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one antenna".into()));
    }
    let (x_min, x_max) = layout.x_span();
    let mut xs: Vec<f64> = if m == 1 {
        vec![(x_min + x_max) / 2.0]
    } else if x_min == x_max {
        (0..m)
            .map(|i| x_min + (i as f64 - (m as f64 - 1.0) / 2.0) * params.guard_m)
            .collect()
    } else {
        let mut xs: Vec<f64> = (0..m)
            .map(|i| x_min + i as f64 / (m as f64 - 1.0) * (x_max - x_min))
            .collect();
        for x in xs.iter_mut() {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (k, p) in layout.positions().iter().enumerate() {
                let d = (p.x - *x).abs();
                if d < best_dist {
                    best_dist = d;
                    best = k;
                }
            }
            *x = (1.0 - params.alpha) * *x + params.alpha * layout.positions()[best].x;
        }
        xs
    };
    xs = project_feasible(&xs, params)?;
    AntennaPlacement::new(xs, height_m)
}

/// Forward finite-difference gradient of an arbitrary objective over
/// antenna coordinates; each perturbed vector is guard-projected before
/// evaluation.
pub fn fd_gradient_with<F>(
    xs: &[f64],
    delta: f64,
    params: &PlacementParams,
    mut objective: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let base = objective(xs)?;
    let mut grad = Vec::with_capacity(xs.len());
    for m in 0..xs.len() {
        let mut perturbed = xs.to_vec();
        perturbed[m] += delta;
        let projected = project_feasible(&perturbed, params)?;
        grad.push((objective(&projected)? - base) / delta);
    }
    Ok(grad)
}

/// Finite-difference gradient of the sum rate (with solver-optimized power)
/// with respect to the antenna coordinates.
pub fn fd_gradient(
    layout: &UserLayout,
    placement: &AntennaPlacement,
    config: &SystemConfig,
    solver: &dyn PowerSolver,
    delta: f64,
    params: &PlacementParams,
) -> Result<Vec<f64>> {
    fd_gradient_with(placement.xs(), delta, params, |xs| {
        objective(xs, layout, config, solver)
    })
}

/// Converged output of the two-stage placement.
#[derive(Debug, Clone)]
pub struct PlacementSolution {
    pub placement: AntennaPlacement,
    /// Sum rate of the (projected) Stage-I initialization.
    pub sr_init: f64,
    /// Sum rate after refinement; never below `sr_init`.
    pub sr_final: f64,
    /// Gradient iterations executed across all scales.
    pub iterations: usize,
    /// Accepted sum-rate values, starting at `sr_init`.
    pub trace: Vec<f64>,
}

/// Line-scan grid resolution per antenna coordinate.
const SCAN_GRID_POINTS: usize = 49;
/// Cyclic scan sweeps per refinement round.
const SCAN_CYCLES: usize = 4;
/// Gradient-schedule passes per refinement round.
const GRADIENT_PASSES: usize = 3;
/// Scan-then-gradient rounds.
const REFINE_ROUNDS: usize = 3;

struct RefineState {
    xs: Vec<f64>,
    sr: f64,
    trace: Vec<f64>,
    iterations: usize,
    /// Set when an accepted improvement dropped below the tolerance.
    converged: bool,
}

impl RefineState {
    fn accept(&mut self, xs: Vec<f64>, sr: f64, tol: f64) {
        let improvement = sr - self.sr;
        self.xs = xs;
        self.sr = sr;
        self.trace.push(sr);
        if improvement < tol {
            self.converged = true;
        }
    }
}

/// One cyclic pass block: scan each antenna coordinate over a uniform grid
/// of the feasible interval, keeping strict improvements. Relocates
/// antennas across path-loss basins that gradient steps cannot reach.
fn coordinate_scan(
    state: &mut RefineState,
    params: &PlacementParams,
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<bool> {
    let (a_min, a_max) = params.bounds_m;
    let span = a_max - a_min;
    let mut any = false;
    for _ in 0..SCAN_CYCLES {
        let mut improved = false;
        for m in 0..state.xs.len() {
            for i in 0..SCAN_GRID_POINTS {
                let x = if SCAN_GRID_POINTS == 1 {
                    (a_min + a_max) / 2.0
                } else {
                    a_min + i as f64 * span / (SCAN_GRID_POINTS as f64 - 1.0)
                };
                let mut cand = state.xs.clone();
                cand[m] = x;
                let cand = project_feasible(&cand, params)?;
                let sr = objective(&cand)?;
                if sr > state.sr {
                    state.accept(cand, sr, params.tol_bpshz);
                    improved = true;
                    any = true;
                    if state.converged {
                        return Ok(any);
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(any)
}

/// Gradient ascent over a geometric schedule of movement scales. At each
/// scale the forward-difference gradient (delta tied to the scale, floored
/// at `fd_delta_m`) is normalized so the first trial moves `scale` meters
/// in the infinity norm, then backtracked until a strict improvement is
/// found. Single-coordinate probes of `scale` serve as a fallback when the
/// joint direction fails near ripple peaks.
fn gradient_stage(
    state: &mut RefineState,
    params: &PlacementParams,
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<bool> {
    let span = params.bounds_m.1 - params.bounds_m.0;
    let fine = (params.guard_m / 2.0).max(1e-6);
    let coarse = (span / 8.0).max(params.step_m);
    let mut scales = Vec::new();
    let mut s = coarse;
    while s > fine {
        scales.push(s);
        s /= 3.0;
    }
    scales.push(fine);

    let mut any = false;
    for _ in 0..GRADIENT_PASSES {
        let mut pass_improved = false;
        for &scale in &scales {
            let mut step_scale = scale;
            loop {
                if state.iterations >= params.max_iters || state.converged {
                    return Ok(any);
                }
                state.iterations += 1;
                let delta = (scale / 5.0).max(params.fd_delta_m.min(scale));
                let xs_now = state.xs.clone();
                let grad = fd_gradient_with(&xs_now, delta, params, &mut *objective)?;
                let ginf = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                let mut accepted = false;
                if ginf > 0.0 {
                    let mut trial = step_scale / ginf;
                    for halving in 0..=20 {
                        let cand: Vec<f64> =
                            xs_now.iter().zip(&grad).map(|(x, g)| x + trial * g).collect();
                        let cand = project_feasible(&cand, params)?;
                        let sr = objective(&cand)?;
                        if sr > state.sr {
                            state.accept(cand, sr, params.tol_bpshz);
                            if halving == 0 {
                                step_scale = (step_scale * 2.0).min(span.max(fine));
                            } else {
                                step_scale = (trial * ginf).max(fine);
                            }
                            accepted = true;
                            break;
                        }
                        trial /= 2.0;
                    }
                }
                if !accepted {
                    'probe: for m in 0..state.xs.len() {
                        for dir in [1.0, -1.0] {
                            let mut cand = state.xs.clone();
                            cand[m] += dir * scale;
                            let cand = project_feasible(&cand, params)?;
                            let sr = objective(&cand)?;
                            if sr > state.sr {
                                state.accept(cand, sr, params.tol_bpshz);
                                accepted = true;
                                break 'probe;
                            }
                        }
                    }
                }
                if !accepted {
                    break;
                }
                pass_improved = true;
                any = true;
                if state.converged {
                    return Ok(any);
                }
            }
        }
        if !pass_improved {
            break;
        }
    }
    Ok(any)
}

/// Two-stage placement: Stage-I initialization followed by monotone
/// refinement rounds of coordinate scans and multi-scale projected
/// gradient ascent.
///
/// Terminates when an accepted improvement drops below `tol_bpshz`, when a
/// full round yields no improvement, or when `max_iters` gradient
/// iterations have run. Every intermediate placement is guard-projected,
/// so the result satisfies the spacing and bound constraints exactly and
/// `sr_final >= sr_init` always holds.
pub fn refine_placement(
    layout: &UserLayout,
    config: &SystemConfig,
    params: &PlacementParams,
    solver: &dyn PowerSolver,
) -> Result<PlacementSolution> {
    let m = config.antennas;
    let xs = init_placement(layout, m, params, config.waveguide_height_m)?
        .xs()
        .to_vec();
    let sr = objective(&xs, layout, config, solver)?;
    let sr_init = sr;
    let mut state = RefineState {
        xs,
        sr,
        trace: vec![sr],
        iterations: 0,
        converged: false,
    };

    let mut eval = |xs: &[f64]| objective(xs, layout, config, solver);
    for _ in 0..REFINE_ROUNDS {
        let scanned = coordinate_scan(&mut state, params, &mut eval)?;
        if state.converged {
            break;
        }
        let ascended = gradient_stage(&mut state, params, &mut eval)?;
        if state.converged || (!scanned && !ascended) {
            break;
        }
    }

    Ok(PlacementSolution {
        placement: AntennaPlacement::new(state.xs, config.waveguide_height_m)?,
        sr_init,
        sr_final: state.sr,
        iterations: state.iterations,
        trace: state.trace,
    })
}

/// Best placement and sum rate found by exhaustive grid search.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub placement: AntennaPlacement,
    pub sum_rate_bpshz: f64,
    /// Number of guard-feasible tuples evaluated.
    pub evaluated: usize,
}

/// Exhaustive search over ordered M-subsets of a uniform G-point grid on
/// the feasible interval, keeping only guard-feasible tuples. Ties resolve
/// to the lexicographically smallest index tuple.
pub fn brute_force_placement(
    layout: &UserLayout,
    config: &SystemConfig,
    m: usize,
    grid_points: usize,
    params: &PlacementParams,
    solver: &dyn PowerSolver,
    budget: f64,
) -> Result<BruteForceResult> {
    if m == 0 || grid_points == 0 {
        return Err(Error::InvalidConfig("need antennas and grid points".into()));
    }
    let combinations = (grid_points as f64).powi(m as i32);
    if combinations > budget {
        return Err(Error::BudgetExceeded { combinations, budget });
    }
    params.require_feasible(m)?;
    let (a_min, a_max) = params.bounds_m;
    let grid: Vec<f64> = if grid_points == 1 {
        vec![(a_min + a_max) / 2.0]
    } else {
        (0..grid_points)
            .map(|i| a_min + i as f64 * (a_max - a_min) / (grid_points as f64 - 1.0))
            .collect()
    };

    let mut best_sr = f64::NEG_INFINITY;
    let mut best: Option<Vec<f64>> = None;
    let mut evaluated = 0usize;

    // Ascending index combinations in lexicographic order.
    let mut idx: Vec<usize> = (0..m).collect();
    if m > grid.len() {
        return Err(Error::Infeasible(format!("grid of {} points cannot host {m} antennas", grid.len())));
    }
    loop {
        let xs: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        let spaced = xs.windows(2).all(|w| w[1] - w[0] >= params.guard_m);
        if spaced {
            evaluated += 1;
            let sr = objective(&xs, layout, config, solver)?;
            if sr > best_sr {
                best_sr = sr;
                best = Some(xs);
            }
        }
        // Advance to the next combination.
        let mut i = m;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if idx[i] != i + grid.len() - m {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                let placement = best
                    .map(|xs| AntennaPlacement::new(xs, config.waveguide_height_m))
                    .transpose()?
                    .ok_or_else(|| {
                        Error::Infeasible("no guard-feasible grid tuple exists".into())
                    })?;
                return Ok(BruteForceResult { placement, sum_rate_bpshz: best_sr, evaluated });
            }
        }
    }
}

/// Relative optimality gap `1 - sr_it / sr_bf`; negative when the iterative
/// solution beats the grid benchmark.
pub fn relative_gap(sr_bf: f64, sr_it: f64) -> Result<f64> {
    if !(sr_bf > 0.0) {
        return Err(Error::DegenerateObjective(sr_bf));
    }
    Ok(1.0 - sr_it / sr_bf)
}

/// Mean and maximum relative gap over a set of trials.
pub fn mrg_xrg(gaps: &[f64]) -> (f64, f64) {
    assert!(!gaps.is_empty(), "gap aggregation needs at least one trial");
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, max)
}
