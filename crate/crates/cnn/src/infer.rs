//! Deterministic inference with feasibility projection.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use panoma_core::{simplex_project, ChannelState, PowerAllocation, ProjectionResult};

use crate::data::FeatureMatrix;
use crate::error::Result;
use crate::model::{CnnModel, Mode};

/// Raw prediction next to its feasibility-projected allocation.
#[derive(Debug, Clone)]
pub struct Inference {
    /// Unconstrained network output scaled to watts.
    pub q_hat_w: Vec<f64>,
    pub projection: ProjectionResult,
}

impl Inference {
    /// L1 distance between the projected allocation and the raw prediction.
    pub fn deviation_l1_w(&self) -> f64 {
        self.projection.deviation_l1(&self.q_hat_w)
    }
}

/// Predict power fractions for a channel state, scale by the budget and
/// project onto the power simplex.
pub fn infer_detailed(model: &CnnModel, state: &ChannelState, p_w: f64) -> Result<Inference> {
    let features = FeatureMatrix::from_state(state)?;
    let x = model.standardize(&features)?;
    let mut rng = ChaCha12Rng::seed_from_u64(0); // dropout is inactive at inference
    let (fractions, _) = model.forward(&x, Mode::Infer, &mut rng)?;
    let q_hat_w: Vec<f64> = fractions.iter().map(|f| f * p_w).collect();
    let projection = simplex_project(&q_hat_w, p_w)?;
    Ok(Inference { q_hat_w, projection })
}

/// Feasible power allocation for a channel state: forward pass plus
/// simplex projection. Outputs always satisfy `q >= 0` and `sum q <= P`.
pub fn infer_allocation(model: &CnnModel, state: &ChannelState, p_w: f64) -> Result<PowerAllocation> {
    Ok(infer_detailed(model, state, p_w)?.projection.q_proj.clone())
}
