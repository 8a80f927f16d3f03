//! The network: three 2x2 convolutions (8, 16, 32 filters), a 64-unit
//! dense layer, dropout 0.25 and a linear head of K outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::{FeatureMatrix, NormStats};
use crate::error::{CnnError, Result};
use crate::layers::{
    conv2d_same, conv2d_same_backward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, relu, relu_backward,
};
use crate::loss::{mae_loss, mae_loss_grad};
use crate::tensor::{ConvFilters, DenseWeights, Tensor3};

pub const CONV1_FILTERS: usize = 8;
pub const CONV2_FILTERS: usize = 16;
pub const CONV3_FILTERS: usize = 32;
pub const DENSE_UNITS: usize = 64;
pub const DROPOUT_RATE: f64 = 0.25;
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub filters: ConvFilters,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DenseWeights,
    pub bias: Vec<f64>,
}

/// Weights, normalization statistics and the user count the model was
/// trained for. Dropout is inactive at inference, so inference is a pure
/// function of the weights and input.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub conv3: ConvLayer,
    pub dense1: DenseLayer,
    pub out: DenseLayer,
    pub dropout_rate: f64,
    pub norm_stats: NormStats,
    pub trained_k: usize,
    pub version: u16,
}

impl CnnModel {
    /// Glorot-uniform initialization (bounds +-sqrt(6/(fan_in+fan_out))),
    /// seeded for bit-reproducible training runs.
    pub fn init(k_users: usize, norm_stats: NormStats, seed: u64) -> Result<Self> {
        if k_users == 0 {
            return Err(CnnError::Shape("model needs at least one user".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut conv = |in_c: usize, out_c: usize| -> ConvLayer {
            let mut filters = ConvFilters::zeros(in_c, out_c);
            let fan_in = 4 * in_c;
            let fan_out = 4 * out_c;
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in filters.data.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            ConvLayer { filters, bias: vec![0.0; out_c] }
        };
        let conv1 = conv(1, CONV1_FILTERS);
        let conv2 = conv(CONV1_FILTERS, CONV2_FILTERS);
        let conv3 = conv(CONV2_FILTERS, CONV3_FILTERS);
        let mut dense = |in_dim: usize, out_dim: usize| -> DenseLayer {
            let mut weights = DenseWeights::zeros(in_dim, out_dim);
            let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
            for v in weights.data.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            DenseLayer { weights, bias: vec![0.0; out_dim] }
        };
        let flat = k_users * 2 * CONV3_FILTERS;
        let dense1 = dense(flat, DENSE_UNITS);
        let out = dense(DENSE_UNITS, k_users);
        Ok(CnnModel {
            conv1,
            conv2,
            conv3,
            dense1,
            out,
            dropout_rate: DROPOUT_RATE,
            norm_stats,
            trained_k: k_users,
            version: FORMAT_VERSION,
        })
    }

    /// Standardize a raw feature matrix with the stored per-column
    /// statistics and shape it as the K x 2 x 1 input tensor.
    pub fn standardize(&self, features: &FeatureMatrix) -> Result<Tensor3> {
        if features.users() != self.trained_k {
            return Err(CnnError::Shape(format!(
                "feature matrix has {} users, model was trained for {}",
                features.users(),
                self.trained_k
            )));
        }
        let mut t = Tensor3::zeros(self.trained_k, 2, 1);
        for (r, row) in features.rows().iter().enumerate() {
            for col in 0..2 {
                let z = (row[col] - self.norm_stats.mean[col]) / self.norm_stats.std[col];
                t.set(r, col, 0, z);
            }
        }
        Ok(t)
    }

    /// Forward pass. `Train` mode applies inverted dropout driven by `rng`
    /// and returns a cache for [`CnnModel::backward`]; `Infer` mode is
    /// deterministic.
    pub fn forward<R: Rng>(
        &self,
        x: &Tensor3,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        if x.h != self.trained_k || x.w != 2 || x.c != 1 {
            return Err(CnnError::Shape(format!(
                "input {}x{}x{} does not match the {}x2x1 model input",
                x.h, x.w, x.c, self.trained_k
            )));
        }
        let z1 = conv2d_same(x, &self.conv1.filters, &self.conv1.bias)?;
        let a1 = Tensor3 { data: relu(&z1.data), ..z1.clone() };
        let z2 = conv2d_same(&a1, &self.conv2.filters, &self.conv2.bias)?;
        let a2 = Tensor3 { data: relu(&z2.data), ..z2.clone() };
        let z3 = conv2d_same(&a2, &self.conv3.filters, &self.conv3.bias)?;
        let a3 = Tensor3 { data: relu(&z3.data), ..z3.clone() };
        let flat = a3.data.clone();
        let zd = dense_forward(&self.dense1.weights, &self.dense1.bias, &flat)?;
        let ad = relu(&zd);
        let (dropped, mask) = match mode {
            Mode::Train => dropout_forward(&ad, self.dropout_rate, rng),
            Mode::Infer => (ad.clone(), vec![1.0; ad.len()]),
        };
        let out = dense_forward(&self.out.weights, &self.out.bias, &dropped)?;
        let cache = ForwardCache { x: x.clone(), z1, a1, z2, a2, z3, flat, zd, mask, dropped };
        Ok((out, cache))
    }

    /// Reverse-mode gradients of the MAE loss through the whole network.
    /// `prediction` must come from a `Train`-mode forward pass whose cache
    /// is supplied here.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        prediction: &[f64],
        target: &[f64],
    ) -> Result<(ModelGrads, f64)> {
        let loss = mae_loss(prediction, target)?;
        let g_out = mae_loss_grad(prediction, target)?;

        let (gw_out, gb_out, g_dropped) = dense_backward(&self.out.weights, &cache.dropped, &g_out);
        let g_ad = dropout_backward(&cache.mask, &g_dropped);
        let g_zd = relu_backward(&cache.zd, &g_ad);
        let (gw_d1, gb_d1, g_flat) = dense_backward(&self.dense1.weights, &cache.flat, &g_zd);

        let g_a3 = Tensor3 {
            h: cache.a1.h,
            w: 2,
            c: CONV3_FILTERS,
            data: g_flat,
        };
        let g_z3 = Tensor3 { data: relu_backward(&cache.z3.data, &g_a3.data), ..g_a3 };
        let (g_a2, gw3, gb3) = conv2d_same_backward(&cache.a2, &self.conv3.filters, &g_z3);
        let g_z2 = Tensor3 { data: relu_backward(&cache.z2.data, &g_a2.data), ..g_a2 };
        let (g_a1, gw2, gb2) = conv2d_same_backward(&cache.a1, &self.conv2.filters, &g_z2);
        let g_z1 = Tensor3 { data: relu_backward(&cache.z1.data, &g_a1.data), ..g_a1 };
        let (_, gw1, gb1) = conv2d_same_backward(&cache.x, &self.conv1.filters, &g_z1);

        Ok((
            ModelGrads {
                conv1_w: gw1,
                conv1_b: gb1,
                conv2_w: gw2,
                conv2_b: gb2,
                conv3_w: gw3,
                conv3_b: gb3,
                dense1_w: gw_d1,
                dense1_b: gb_d1,
                out_w: gw_out,
                out_b: gb_out,
            },
            loss,
        ))
    }

    /// Mutable views of every parameter tensor, in the fixed serialization
    /// order.
    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.conv1.filters.data,
            &mut self.conv1.bias,
            &mut self.conv2.filters.data,
            &mut self.conv2.bias,
            &mut self.conv3.filters.data,
            &mut self.conv3.bias,
            &mut self.dense1.weights.data,
            &mut self.dense1.bias,
            &mut self.out.weights.data,
            &mut self.out.bias,
        ]
    }

    /// Immutable views of every parameter tensor, same order as
    /// [`CnnModel::param_slices_mut`].
    pub fn param_slices(&self) -> [&[f64]; 10] {
        [
            &self.conv1.filters.data,
            &self.conv1.bias,
            &self.conv2.filters.data,
            &self.conv2.bias,
            &self.conv3.filters.data,
            &self.conv3.bias,
            &self.dense1.weights.data,
            &self.dense1.bias,
            &self.out.weights.data,
            &self.out.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

/// Activations cached by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x: Tensor3,
    pub z1: Tensor3,
    pub a1: Tensor3,
    pub z2: Tensor3,
    pub a2: Tensor3,
    pub z3: Tensor3,
    pub flat: Vec<f64>,
    pub zd: Vec<f64>,
    pub mask: Vec<f64>,
    pub dropped: Vec<f64>,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub conv1_w: ConvFilters,
    pub conv1_b: Vec<f64>,
    pub conv2_w: ConvFilters,
    pub conv2_b: Vec<f64>,
    pub conv3_w: ConvFilters,
    pub conv3_b: Vec<f64>,
    pub dense1_w: DenseWeights,
    pub dense1_b: Vec<f64>,
    pub out_w: DenseWeights,
    pub out_b: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &CnnModel) -> Self {
        ModelGrads {
            conv1_w: ConvFilters::zeros(1, CONV1_FILTERS),
            conv1_b: vec![0.0; CONV1_FILTERS],
            conv2_w: ConvFilters::zeros(CONV1_FILTERS, CONV2_FILTERS),
            conv2_b: vec![0.0; CONV2_FILTERS],
            conv3_w: ConvFilters::zeros(CONV2_FILTERS, CONV3_FILTERS),
            conv3_b: vec![0.0; CONV3_FILTERS],
            dense1_w: DenseWeights::zeros(model.dense1.weights.in_dim, DENSE_UNITS),
            dense1_b: vec![0.0; DENSE_UNITS],
            out_w: DenseWeights::zeros(DENSE_UNITS, model.trained_k),
            out_b: vec![0.0; model.trained_k],
        }
    }

    pub fn slices(&self) -> [&[f64]; 10] {
        [
            &self.conv1_w.data,
            &self.conv1_b,
            &self.conv2_w.data,
            &self.conv2_b,
            &self.conv3_w.data,
            &self.conv3_b,
            &self.dense1_w.data,
            &self.dense1_b,
            &self.out_w.data,
            &self.out_b,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.conv1_w.data,
            &mut self.conv1_b,
            &mut self.conv2_w.data,
            &mut self.conv2_b,
            &mut self.conv3_w.data,
            &mut self.conv3_b,
            &mut self.dense1_w.data,
            &mut self.dense1_b,
            &mut self.out_w.data,
            &mut self.out_b,
        ]
    }

    /// Accumulate another gradient set (used for batch averaging).
    pub fn add(&mut self, other: &ModelGrads) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for dst in self.slices_mut() {
            for d in dst.iter_mut() {
                *d *= factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NormStats;

    fn zero_model(k: usize) -> CnnModel {
        let mut m = CnnModel::init(k, NormStats::identity(), 0).unwrap();
        for s in m.param_slices_mut() {
            for v in s.iter_mut() {
                *v = 0.0;
            }
        }
        m
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let model = zero_model(4);
        let x = Tensor3::zeros(4, 2, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (out, _) = model.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn shape_chain_for_k4() {
        // 4x2x1 -> 4x2x8 -> 4x2x16 -> 4x2x32 -> 256 -> 64 -> 4
        let model = CnnModel::init(4, NormStats::identity(), 3).unwrap();
        let x = Tensor3::zeros(4, 2, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (out, cache) = model.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!((cache.z1.h, cache.z1.w, cache.z1.c), (4, 2, 8));
        assert_eq!((cache.z2.h, cache.z2.w, cache.z2.c), (4, 2, 16));
        assert_eq!((cache.z3.h, cache.z3.w, cache.z3.c), (4, 2, 32));
        assert_eq!(cache.flat.len(), 256);
        assert_eq!(cache.zd.len(), 64);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn wrong_k_is_shape_error() {
        let model = CnnModel::init(4, NormStats::identity(), 3).unwrap();
        let x = Tensor3::zeros(5, 2, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(matches!(
            model.forward(&x, Mode::Infer, &mut rng),
            Err(CnnError::Shape(_))
        ));
    }

    #[test]
    fn infer_is_deterministic_and_matches_dropout_expectation() {
        let model = CnnModel::init(2, NormStats::identity(), 17).unwrap();
        let x = Tensor3::from_vec(2, 2, 1, vec![0.3, -0.8, 1.1, 0.4]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let (infer_out, _) = model.forward(&x, Mode::Infer, &mut rng).unwrap();
        let (again, _) = model.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(infer_out, again);

        // Averaging many train-mode passes approaches the infer output.
        let mut acc = vec![0.0; 2];
        let n = 100_000;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..n {
            let (out, _) = model.forward(&x, Mode::Train, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(&out) {
                *a += v;
            }
        }
        for (a, want) in acc.iter().zip(&infer_out) {
            let mean = a / n as f64;
            assert!(
                (mean - want).abs() <= 0.01 * want.abs().max(0.05),
                "MC mean {mean} vs infer {want}"
            );
        }
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let model = CnnModel::init(3, NormStats::identity(), 5).unwrap();
        let x = Tensor3::from_vec(3, 2, 1, vec![0.5, -0.2, 0.9, 0.1, -0.7, 0.3]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let (pred, cache) = model.forward(&x, Mode::Train, &mut rng).unwrap();
        let (grads, loss) = model.backward(&cache, &pred, &pred).unwrap();
        assert_eq!(loss, 0.0);
        for s in grads.slices() {
            assert!(s.iter().all(|&g| g == 0.0));
        }
    }
}
