//! Minimal dense tensors for the fixed network shape.

use crate::error::{CnnError, Result};

/// H x W x C tensor, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor3 { h, w, c, data: vec![0.0; h * w * c] }
    }

    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(CnnError::Shape(format!(
                "tensor data length {} does not match {h}x{w}x{c}",
                data.len()
            )));
        }
        Ok(Tensor3 { h, w, c, data })
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[self.idx(y, x, ch)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: f64) {
        let i = self.idx(y, x, ch);
        self.data[i] = v;
    }
}

/// Bank of 2x2 convolution kernels, laid out (ky, kx, in_c, out_c).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilters {
    pub in_c: usize,
    pub out_c: usize,
    pub data: Vec<f64>,
}

pub const KERNEL: usize = 2;

impl ConvFilters {
    pub fn zeros(in_c: usize, out_c: usize) -> Self {
        ConvFilters { in_c, out_c, data: vec![0.0; KERNEL * KERNEL * in_c * out_c] }
    }

    #[inline]
    pub fn idx(&self, ky: usize, kx: usize, ic: usize, oc: usize) -> usize {
        ((ky * KERNEL + kx) * self.in_c + ic) * self.out_c + oc
    }

    #[inline]
    pub fn get(&self, ky: usize, kx: usize, ic: usize, oc: usize) -> f64 {
        self.data[self.idx(ky, kx, ic, oc)]
    }

    #[inline]
    pub fn set(&mut self, ky: usize, kx: usize, ic: usize, oc: usize, v: f64) {
        let i = self.idx(ky, kx, ic, oc);
        self.data[i] = v;
    }
}

/// Fully connected layer weights, row-major (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    pub in_dim: usize,
    pub out_dim: usize,
    pub data: Vec<f64>,
}

impl DenseWeights {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseWeights { in_dim, out_dim, data: vec![0.0; in_dim * out_dim] }
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize) -> f64 {
        self.data[o * self.in_dim + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_indexing_is_channel_innermost() {
        let mut t = Tensor3::zeros(2, 3, 4);
        t.set(1, 2, 3, 7.0);
        assert_eq!(t.data[(1 * 3 + 2) * 4 + 3], 7.0);
        assert_eq!(t.get(1, 2, 3), 7.0);
    }

    #[test]
    fn from_vec_validates_length() {
        assert!(Tensor3::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(Tensor3::from_vec(2, 2, 2, vec![0.0; 8]).is_ok());
    }
}
