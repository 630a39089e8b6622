//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};

use super::mat::Mat;
use super::{Layer, ModelParams, ParamGrads};

/// Optimizer hyperparameters. The default learning rate mirrors the
/// fine-tuning setting this lab studies; desk-scale runs usually override it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 8e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamHyper {
            learning_rate,
            ..Default::default()
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub hyper: AdamHyper,
    pub step: u64,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        let zeros = || -> Vec<Layer> {
            params
                .layers
                .iter()
                .map(|l| Layer {
                    w: Mat::zeros(l.w.rows, l.w.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect()
        };
        OptimizerState {
            hyper,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One Adam update in place. Rejects non-finite gradients, naming the
    /// offending parameter block.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads) -> Result<()> {
        for (i, l) in grads.layers.iter().enumerate() {
            if l.w.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block: format!("layer {i} weights"),
                });
            }
            if l.b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block: format!("layer {i} bias"),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);
        for (i, layer) in params.layers.iter_mut().enumerate() {
            let g = &grads.layers[i];
            update_slice(
                &mut layer.w.data,
                &g.w.data,
                &mut self.m[i].w.data,
                &mut self.v[i].w.data,
                h,
                bc1,
                bc2,
            );
            update_slice(
                &mut layer.b,
                &g.b,
                &mut self.m[i].b,
                &mut self.v[i].b,
                h,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    h: AdamHyper,
    bc1: f64,
    bc2: f64,
) {
    for idx in 0..theta.len() {
        let g = grad[idx];
        m[idx] = h.beta1 * m[idx] + (1.0 - h.beta1) * g;
        v[idx] = h.beta2 * v[idx] + (1.0 - h.beta2) * g * g;
        let m_hat = m[idx] / bc1;
        let v_hat = v[idx] / bc2;
        theta[idx] -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::ModelConfig;

    fn tiny_params() -> ModelParams {
        // 1x1 model: a single scalar weight path plus bias
        let cfg = ModelConfig {
            input_dim: 1,
            context: 0,
            hidden_dims: vec![],
            vocab_size: 1,
            seed: 0,
        };
        ModelParams::zeros(&cfg).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_untouched() {
        let mut params = tiny_params();
        let grads = ParamGrads::zeros_like(&params);
        let mut state = OptimizerState::new(&params, AdamHyper::default());
        let before = params.clone();
        state.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = tiny_params();
        let mut grads = ParamGrads::zeros_like(&params);
        grads.layers[0].w.data[0] = 1.0;
        let hyper = AdamHyper::with_learning_rate(0.01);
        let mut state = OptimizerState::new(&params, hyper);
        state.step(&mut params, &grads).unwrap();
        // bias-corrected first step: -lr * 1 / (1 + eps)
        let moved = params.layers[0].w.data[0];
        assert!((moved + 0.01).abs() < 1e-9, "moved {moved}");
    }

    #[test]
    fn identical_calls_identical_outputs() {
        let run = || {
            let mut params = tiny_params();
            let mut grads = ParamGrads::zeros_like(&params);
            grads.layers[0].w.data[0] = 0.3;
            grads.layers[0].b[0] = -0.7;
            let mut state = OptimizerState::new(&params, AdamHyper::with_learning_rate(0.05));
            for _ in 0..5 {
                state.step(&mut params, &grads).unwrap();
            }
            (params, state)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let mut params = tiny_params();
        let mut grads = ParamGrads::zeros_like(&params);
        grads.layers[0].b[0] = f64::NAN;
        let mut state = OptimizerState::new(&params, AdamHyper::default());
        match state.step(&mut params, &grads) {
            Err(Error::NonFiniteGradient { block }) => assert_eq!(block, "layer 0 bias"),
            other => panic!("expected non-finite gradient error, got {other:?}"),
        }
    }
}
