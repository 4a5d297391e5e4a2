//! Gradient-descent optimizers over flat parameter vectors.

use alloc::vec;
use alloc::vec::Vec;

use super::ParamVector;
use crate::math::sqrt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, param_len: usize) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam { .. } => param_len,
        };
        Self {
            kind,
            lr,
            step: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment buffers, exposed for checkpointing.
    pub fn state(&self) -> (u64, &[f64], &[f64]) {
        (self.step, &self.m, &self.v)
    }

    pub fn restore_state(&mut self, step: u64, m: Vec<f64>, v: Vec<f64>) {
        self.step = step;
        self.m = m;
        self.v = v;
    }

    /// One descent step in place. Rejects non-finite gradients.
    pub fn apply(&mut self, params: &mut ParamVector, grads: &[f64]) {
        assert_eq!(params.len(), grads.len(), "gradient shape mismatch");
        assert!(
            grads.iter().all(|g| g.is_finite()),
            "non-finite gradient"
        );
        self.step += 1;
        let data = params.as_mut_slice();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in data.iter_mut().zip(grads.iter()) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let bc1 = 1.0 - crate::math::powf(beta1, self.step as f64);
                let bc2 = 1.0 - crate::math::powf(beta2, self.step as f64);
                for i in 0..data.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    data[i] -= self.lr * mhat / (sqrt(vhat) + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_basic_step() {
        let mut p = ParamVector::from_vec(alloc::vec![1.0]);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 1);
        opt.apply(&mut p, &[1.0]);
        assert!((p.as_slice()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ParamVector::from_vec(alloc::vec![1.0, -2.0]);
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), 0.1, 2);
        opt.apply(&mut p, &[0.0, 0.0]);
        assert_eq!(p.as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn adam_matches_two_step_hand_derivation() {
        // Scalar p=1, gradient always 1, lr=0.1, defaults b1=0.9 b2=0.999.
        // Step 1: m=0.1, v=0.001; mhat=1, vhat=1 -> p = 1 - 0.1*1/(1+1e-8)
        // Step 2: m=0.19, v=0.001999; mhat=0.19/0.19=1,
        //         vhat=0.001999/0.001999=1 -> another ~0.1 down.
        let mut p = ParamVector::from_vec(alloc::vec![1.0]);
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), 0.1, 1);
        opt.apply(&mut p, &[1.0]);
        let after1 = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p.as_slice()[0] - after1).abs() < 1e-12);
        opt.apply(&mut p, &[1.0]);
        let m2: f64 = 0.9 * 0.1 + 0.1 * 1.0;
        let v2: f64 = 0.999 * 0.001 + 0.001 * 1.0;
        let mhat = m2 / (1.0 - 0.9f64.powi(2));
        let vhat = v2 / (1.0 - 0.999f64.powi(2));
        let after2 = after1 - 0.1 * mhat / (vhat.sqrt() + 1e-8);
        assert!((p.as_slice()[0] - after2).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "non-finite gradient")]
    fn rejects_nan_gradient() {
        let mut p = ParamVector::from_vec(alloc::vec![1.0]);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 1);
        opt.apply(&mut p, &[f64::NAN]);
    }
}
