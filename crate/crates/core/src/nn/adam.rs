use serde::{Deserialize, Serialize};

use super::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&Param<T>]) -> Self {
        AdamState {
            config,
            step: 0,
            first: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    /// Applies one update from each parameter's accumulated `grad`.
    ///
    /// Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::shape(
                "adam parameter list",
                &[params.len()],
                &[self.first.len()],
            ));
        }
        for (p, m) in params.iter().zip(&self.first) {
            p.grad.expect_shape(&format!("adam moments for {}", p.name), m.shape())?;
            if !p.grad.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in {} at optimizer step {}",
                    p.name,
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (ob1, ob2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grads = p.grad.data().to_vec();
            for (((w, &g), mi), vi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(&grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + ob1 * g;
                *vi = b2 * *vi + ob2 * g * g;
                let m_hat = mi.f64() / bc1;
                let v_hat = vi.f64() / bc2;
                *w = T::lit(w.f64() - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon));
            }
        }
        Ok(())
    }
}
