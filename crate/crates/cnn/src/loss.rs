//! Mean absolute error and its subgradient.

use crate::error::{CnnError, Result};

/// `(1/K) * sum |pred_k - target_k|`.
pub fn mae_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(CnnError::Shape(format!(
            "MAE needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Subgradient `sign(pred - target) / K`, with `sign(0) = 0`.
pub fn mae_loss_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(CnnError::Shape("MAE gradient needs equal non-empty lengths".into()));
    }
    let k = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                1.0 / k
            } else if d < 0.0 {
                -1.0 / k
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_zero() {
        assert_eq!(mae_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_errors_average() {
        // |1| and |-1| over K = 2 gives 1.
        assert_eq!(mae_loss(&[2.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let pred: [f64; 5] = [0.3, -0.7, 1.2, 0.0, 5.5];
        let target: [f64; 5] = [0.1, 0.7, 1.2, -0.4, 5.0];
        let mut acc = 0.0;
        for i in 0..5 {
            acc += (pred[i] - target[i]).abs();
        }
        assert!((mae_loss(&pred, &target).unwrap() - acc / 5.0).abs() < 1e-15);
        let g = mae_loss_grad(&pred, &target).unwrap();
        assert_eq!(g, vec![0.2, -0.2, 0.0, 0.2, 0.2]);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(mae_loss(&[1.0], &[1.0, 2.0]).is_err());
    }
}
