//! Random network distillation: intrinsic novelty reward from a trainable
//! predictor's squared error against a frozen random target network.

use alloc::vec::Vec;

use crate::nn::{Activation, MlpSpec, Optimizer, OptimizerKind, ParamVector};
use crate::rng::DetRng;

pub struct RndPair {
    pub spec: MlpSpec,
    /// Frozen after random init.
    pub target: ParamVector,
    pub predictor: ParamVector,
    pub opt: Optimizer,
}

impl RndPair {
    pub fn new(input_dim: usize, hidden: usize, k: usize, lr: f64, rng: &mut DetRng) -> Self {
        let spec = MlpSpec::new(&[input_dim, hidden, k], Activation::Tanh, Activation::Identity);
        let target = spec.init(rng);
        let predictor = spec.init(rng);
        let opt = Optimizer::new(OptimizerKind::adam_default(), lr, spec.param_count());
        Self {
            spec,
            target,
            predictor,
            opt,
        }
    }

    /// i_t = || f_pred(x) - f_target(x) ||^2, never negative.
    pub fn intrinsic(&self, obs: &[f64]) -> f64 {
        let t = self.spec.eval(&self.target, obs);
        let p = self.spec.eval(&self.predictor, obs);
        t.iter()
            .zip(p.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// One gradient step pulling the predictor toward the target on the
    /// given observations. Returns the mean squared error.
    pub fn update(&mut self, obs_batch: &[&[f64]]) -> f64 {
        if obs_batch.is_empty() {
            return 0.0;
        }
        let mut grad = alloc::vec![0.0; self.spec.param_count()];
        let mut total = 0.0;
        let scale = 1.0 / obs_batch.len() as f64;
        for &obs in obs_batch {
            let want = self.spec.eval(&self.target, obs);
            let (got, cache) = self.spec.forward(&self.predictor, obs);
            let mut upstream = Vec::with_capacity(got.len());
            for (g, w) in got.iter().zip(want.iter()) {
                let d = g - w;
                total += d * d;
                upstream.push(2.0 * d * scale);
            }
            let (g, _) = self.spec.backward(&self.predictor, &cache, &upstream);
            for (acc, v) in grad.iter_mut().zip(g.iter()) {
                *acc += v;
            }
        }
        self.opt.apply(&mut self.predictor, &grad);
        total * scale
    }
}
