//! Minimal differentiable function-approximator kernel.
//!
//! Dense stacks ([`MlpSpec`]) and a single gated recurrent cell
//! ([`GruSpec`]) over flat f64 parameter vectors, with exact reverse-mode
//! gradients, SGD/Adam, soft target updates, and the two losses used by
//! the learning stack. Everything is 64-bit and deterministic given
//! (params, input).

mod gru;
mod loss;
mod mlp;
mod optim;

pub use gru::{GruCache, GruSpec};
pub use loss::{bce, mse, BCE_EPS};
pub use mlp::{MlpCache, MlpSpec};
pub use optim::{Optimizer, OptimizerKind};

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::DetRng;

/// Activation applied element-wise after a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => crate::math::tanh(x),
            Activation::Sigmoid => crate::math::sigmoid(x),
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Flat parameter storage. The owning spec defines the layout; the length
/// is fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl core::ops::Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

/// Glorot-uniform initialization for one weight matrix region; biases are
/// zeroed by the caller's layout.
pub fn init_weight_region(params: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut DetRng) {
    let bound = crate::math::sqrt(6.0 / (fan_in + fan_out) as f64);
    for p in params.iter_mut() {
        *p = rng.uniform_in(-bound, bound);
    }
}

/// Polyak update: target <- tau * online + (1 - tau) * target.
pub fn soft_update(target: &mut ParamVector, online: &ParamVector, tau: f64) {
    debug_assert_eq!(target.len(), online.len());
    for (t, &o) in target.data.iter_mut().zip(online.data.iter()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}
