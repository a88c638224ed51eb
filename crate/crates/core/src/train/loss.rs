//! Training objectives over softmax outputs.
//!
//! Predictions are clamped to `[1e-7, 1]` before taking logs; the returned
//! gradient is the exact derivative of the clamped expression, so clamped
//! entries receive zero gradient.

use crate::error::{Error, Result};
use crate::nn::{Param, Scalar, Tensor};

pub const PROB_FLOOR: f64 = 1e-7;

/// Scalar loss value and its gradient with respect to the predictions.
#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub value: f64,
    pub grad: Tensor<T>,
}

fn check_pair<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<usize> {
    target.expect_shape("loss targets", pred.shape())?;
    match pred.shape() {
        &[n, c] if n > 0 && c > 0 => Ok(c),
        s => Err(Error::shape("loss predictions [N×C]", s, &[0, 0])),
    }
}

fn clamp(p: f64) -> (f64, bool) {
    if p < PROB_FLOOR {
        (PROB_FLOOR, true)
    } else {
        (p.min(1.0), p > 1.0)
    }
}

/// Mean categorical cross-entropy, `−(1/N) Σ_n y_n · log ŷ_n`.
pub fn cross_entropy_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossOutput<T>> {
    check_pair(pred, target)?;
    let n = pred.batch() as f64;
    let mut value = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &y)| {
            let (q, clamped) = clamp(p.f64());
            let y = y.f64();
            value -= y * q.ln();
            T::lit(if clamped { 0.0 } else { -y / (q * n) })
        })
        .collect();
    Ok(LossOutput {
        value: value / n,
        grad: Tensor::from_vec(pred.shape(), grad)?,
    })
}

/// Summed KL divergence `Σ_n y_n · log(y_n / ŷ_n)` plus `(λ/2)·‖Θ‖²`.
///
/// Terms with `y = 0` contribute zero. The returned gradient covers the
/// predictions only; see [`add_l2_gradient`] for the penalty's share.
pub fn kl_mixup_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    params: &[&Param<T>],
    lambda: f64,
) -> Result<LossOutput<T>> {
    check_pair(pred, target)?;
    if lambda < 0.0 {
        return Err(Error::Validation(format!("λ must be >= 0, got {lambda}")));
    }
    let mut value = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &y)| {
            let y = y.f64();
            if y <= 0.0 {
                return T::zero();
            }
            let (q, clamped) = clamp(p.f64());
            value += y * (y / q).ln();
            T::lit(if clamped { 0.0 } else { -y / q })
        })
        .collect();
    Ok(LossOutput {
        value: value + l2_penalty(params, lambda),
        grad: Tensor::from_vec(pred.shape(), grad)?,
    })
}

/// `(λ/2)·Σθ²` over every trainable tensor.
pub fn l2_penalty<T: Scalar>(params: &[&Param<T>], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    0.5 * lambda * params.iter().map(|p| p.value.sum_squares()).sum::<f64>()
}

/// Adds `λ·θ` to each parameter gradient.
pub fn add_l2_gradient<T: Scalar>(params: &mut [&mut Param<T>], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let l = T::lit(lambda);
    for p in params.iter_mut() {
        let values = p.value.data().to_vec();
        for (g, v) in p.grad.data_mut().iter_mut().zip(values) {
            *g += l * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn exact_onehot_prediction_is_zero_loss() {
        let y = t(&[2, 3], vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let out = cross_entropy_loss(&y, &y).unwrap();
        assert!(out.value <= 1e-6);
    }

    #[test]
    fn uniform_prediction_costs_ln_c() {
        let pred = Tensor::full(&[4, 10], 0.1);
        let mut y = Tensor::zeros(&[4, 10]);
        for i in 0..4 {
            y.data_mut()[i * 10 + (3 * i) % 10] = 1.0;
        }
        let out = cross_entropy_loss(&pred, &y).unwrap();
        assert!((out.value - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_identity_and_penalty() {
        let y = t(&[1, 3], vec![0.2, 0.5, 0.3]);
        assert!(kl_mixup_loss(&y, &y, &[], 0.0).unwrap().value.abs() < 1e-15);
        let p = Param::new("w", t(&[3], vec![1.0, -2.0, 0.5]));
        let out = kl_mixup_loss(&y, &y, &[&p], 0.1).unwrap();
        assert_eq!(out.value, 0.05 * (1.0 + 4.0 + 0.25));
    }

    #[test]
    fn zero_labels_contribute_nothing() {
        let pred = t(&[1, 2], vec![1e-12, 1.0]);
        let y = t(&[1, 2], vec![0.0, 1.0]);
        let out = kl_mixup_loss(&pred, &y, &[], 0.0).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.value.is_finite());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[3, 2]);
        assert!(cross_entropy_loss(&a, &b).is_err());
        assert!(kl_mixup_loss(&a, &b, &[], 0.0).is_err());
    }
}
