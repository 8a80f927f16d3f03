//! Convolution, dense, ReLU and dropout primitives with exact backward
//! passes.

use rand::Rng;

use crate::error::{CnnError, Result};
use crate::tensor::{ConvFilters, DenseWeights, Tensor3, KERNEL};

/// 2x2 cross-correlation with "same" zero padding. Even kernels make the
/// padding asymmetric: one row at the bottom and one column at the right,
/// so output (y, x) reads input rows y..y+1 and columns x..x+1.
pub fn conv2d_same(input: &Tensor3, filters: &ConvFilters, biases: &[f64]) -> Result<Tensor3> {
    if input.c != filters.in_c {
        return Err(CnnError::Shape(format!(
            "input has {} channels, filters expect {}",
            input.c, filters.in_c
        )));
    }
    if biases.len() != filters.out_c {
        return Err(CnnError::Shape(format!(
            "{} biases for {} filters",
            biases.len(),
            filters.out_c
        )));
    }
    let mut out = Tensor3::zeros(input.h, input.w, filters.out_c);
    for y in 0..input.h {
        for x in 0..input.w {
            for oc in 0..filters.out_c {
                let mut acc = biases[oc];
                for ky in 0..KERNEL {
                    let yy = y + ky;
                    if yy >= input.h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let xx = x + kx;
                        if xx >= input.w {
                            continue;
                        }
                        for ic in 0..input.c {
                            acc += input.get(yy, xx, ic) * filters.get(ky, kx, ic, oc);
                        }
                    }
                }
                out.set(y, x, oc, acc);
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_same`] with respect to input, filters and biases.
pub fn conv2d_same_backward(
    input: &Tensor3,
    filters: &ConvFilters,
    grad_out: &Tensor3,
) -> (Tensor3, ConvFilters, Vec<f64>) {
    let mut grad_in = Tensor3::zeros(input.h, input.w, input.c);
    let mut grad_w = ConvFilters::zeros(filters.in_c, filters.out_c);
    let mut grad_b = vec![0.0; filters.out_c];
    for y in 0..input.h {
        for x in 0..input.w {
            for oc in 0..filters.out_c {
                let g = grad_out.get(y, x, oc);
                if g == 0.0 {
                    continue;
                }
                grad_b[oc] += g;
                for ky in 0..KERNEL {
                    let yy = y + ky;
                    if yy >= input.h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let xx = x + kx;
                        if xx >= input.w {
                            continue;
                        }
                        for ic in 0..input.c {
                            let wi = grad_w.idx(ky, kx, ic, oc);
                            grad_w.data[wi] += input.get(yy, xx, ic) * g;
                            let ii = grad_in.idx(yy, xx, ic);
                            grad_in.data[ii] += filters.get(ky, kx, ic, oc) * g;
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w, grad_b)
}

/// Elementwise rectifier max(0, x).
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// ReLU gradient masked by the pre-activation sign.
pub fn relu_backward(pre: &[f64], grad: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad)
        .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
        .collect()
}

/// Dense forward: `out = W x + b`.
pub fn dense_forward(w: &DenseWeights, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.in_dim || b.len() != w.out_dim {
        return Err(CnnError::Shape(format!(
            "dense expects {} inputs / {} biases, got {} / {}",
            w.in_dim,
            w.out_dim,
            x.len(),
            b.len()
        )));
    }
    let mut out = b.to_vec();
    for o in 0..w.out_dim {
        let row = &w.data[o * w.in_dim..(o + 1) * w.in_dim];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out[o] += acc;
    }
    Ok(out)
}

/// Dense backward: gradients for W, b and the input.
pub fn dense_backward(
    w: &DenseWeights,
    x: &[f64],
    grad_out: &[f64],
) -> (DenseWeights, Vec<f64>, Vec<f64>) {
    let mut grad_w = DenseWeights::zeros(w.in_dim, w.out_dim);
    let mut grad_x = vec![0.0; w.in_dim];
    for o in 0..w.out_dim {
        let g = grad_out[o];
        let row = &w.data[o * w.in_dim..(o + 1) * w.in_dim];
        let grow = &mut grad_w.data[o * w.in_dim..(o + 1) * w.in_dim];
        for i in 0..w.in_dim {
            grow[i] = x[i] * g;
            grad_x[i] += row[i] * g;
        }
    }
    (grad_w, grad_out.to_vec(), grad_x)
}

/// Inverted dropout: units survive with probability `1 - rate` and are
/// scaled by `1/(1 - rate)`, so the expectation matches the identity used
/// at inference.
pub fn dropout_forward<R: Rng>(x: &[f64], rate: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let keep = 1.0 - rate;
    let mut mask = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        if rng.gen::<f64>() < keep {
            mask[i] = 1.0 / keep;
            out[i] = x[i] * mask[i];
        }
    }
    (out, mask)
}

pub fn dropout_backward(mask: &[f64], grad: &[f64]) -> Vec<f64> {
    mask.iter().zip(grad).map(|(m, g)| m * g).collect()
}
